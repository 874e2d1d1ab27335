"""Unit conventions.

All stored quantities are linear (non-angular) frequencies: GHz for mode
frequencies, MHz for couplings and exchange rates, kHz for pump detunings.
Times are ns in schedules and us in the solver. The 2*pi factors live
exclusively inside the solver and the few closed-form expressions below.
"""

import math

TWO_PI = 2.0 * math.pi

# Angular rate (rad/us) of a linear-MHz frequency.
RAD_PER_US_PER_MHZ = TWO_PI

NS_PER_US = 1000.0

# Physical constants (SI), used only by the SNAIL circuit quantization.
HBAR = 1.054571817e-34  # J s
E_CHARGE = 1.602176634e-19  # C
PHI0_REDUCED = HBAR / (2.0 * E_CHARGE)  # reduced flux quantum, Wb


def ns_to_us(t_ns: float) -> float:
    return t_ns / NS_PER_US


def us_to_ns(t_us: float) -> float:
    return t_us * NS_PER_US


def mhz_to_rad_per_us(f_mhz: float) -> float:
    return TWO_PI * f_mhz


def khz_to_mhz(f_khz: float) -> float:
    return f_khz * 1e-3


def ghz_to_mhz(f_ghz: float) -> float:
    return f_ghz * 1e3
