"""Drive envelopes, pump tones, and the displacement/RWA reduction.

The engine works in terms of the product G = eta * g_eff (linear MHz), since
the absolute pump amplitude is calibrated to measured gate times; eta itself
is available through eta_from_drive for diagnostics and leakage studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DomainError, InvariantViolation, NoRootError, ResonanceError

ENVELOPE_SHAPES = ("gaussian", "flat-top", "constant")

# rad/ns per linear MHz
_W = 2.0 * math.pi * 1e-3


@dataclass(frozen=True)
class Envelope:
    """In-phase/quadrature drive amplitudes on [0, duration].

    eps_x has the named analytic shape with peak ``amplitude`` (MHz);
    eps_y is zero unless a DRAG denominator is set, in which case
    eps_y = -eps_x' / (2*pi*1e-3 * drag_denominator).
    """

    shape: str
    amplitude: float  # MHz
    duration: float  # ns
    ramp_sigma: float = 0.0  # ns
    drag_denominator: float | None = None  # MHz, (Delta - delta)

    def __post_init__(self):
        if self.shape not in ENVELOPE_SHAPES:
            raise InvariantViolation(f"unknown envelope shape {self.shape!r}")
        if self.duration <= 0:
            raise InvariantViolation("envelope duration must be > 0")
        if self.shape in ("gaussian", "flat-top") and self.ramp_sigma <= 0:
            raise InvariantViolation(f"{self.shape} envelope needs ramp_sigma > 0")
        if self.shape == "flat-top" and not 3 * self.ramp_sigma < self.duration / 2:
            raise InvariantViolation("flat-top ramps must occupy < duration/2 each")

    # -- shape and derivative (vectorized over t in ns) ------------------------

    def eps_x(self, t):
        scalar = np.ndim(t) == 0
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(ta)
        inside = (ta >= 0) & (ta <= self.duration)
        out[inside] = self._shape_unit(ta[inside]) * self.amplitude
        return float(out[0]) if scalar else out

    def deps_x(self, t):
        scalar = np.ndim(t) == 0
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(ta)
        inside = (ta >= 0) & (ta <= self.duration)
        out[inside] = self._shape_deriv(ta[inside]) * self.amplitude
        return float(out[0]) if scalar else out

    def eps_y(self, t):
        if self.drag_denominator is None:
            return 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
        return -self.deps_x(t) / (_W * self.drag_denominator)

    def _shape_unit(self, t):
        T, s = self.duration, self.ramp_sigma
        if self.shape == "constant":
            return np.ones_like(t)
        if self.shape == "gaussian":
            edge = math.exp(-((T / 2) ** 2) / (2 * s**2))
            return (np.exp(-((t - T / 2) ** 2) / (2 * s**2)) - edge) / (1 - edge)
        # flat-top: half-gaussian edges of length 3 sigma, edge-subtracted
        L = 3 * s
        e0 = math.exp(-(L**2) / (2 * s**2))
        out = np.ones_like(t)
        rise = t < L
        fall = t > T - L
        out[rise] = (np.exp(-((t[rise] - L) ** 2) / (2 * s**2)) - e0) / (1 - e0)
        out[fall] = (np.exp(-((t[fall] - (T - L)) ** 2) / (2 * s**2)) - e0) / (1 - e0)
        return out

    def _shape_deriv(self, t):
        T, s = self.duration, self.ramp_sigma
        if self.shape == "constant":
            return np.zeros_like(t)
        if self.shape == "gaussian":
            edge = math.exp(-((T / 2) ** 2) / (2 * s**2))
            core = np.exp(-((t - T / 2) ** 2) / (2 * s**2))
            return core * (-(t - T / 2) / s**2) / (1 - edge)
        L = 3 * s
        e0 = math.exp(-(L**2) / (2 * s**2))
        out = np.zeros_like(t)
        rise = t < L
        fall = t > T - L
        out[rise] = np.exp(-((t[rise] - L) ** 2) / (2 * s**2)) * (
            -(t[rise] - L) / s**2) / (1 - e0)
        out[fall] = np.exp(-((t[fall] - (T - L)) ** 2) / (2 * s**2)) * (
            -(t[fall] - (T - L)) / s**2) / (1 - e0)
        return out

    def area_x(self, n: int = 4001) -> float:
        """integral of eps_x dt (MHz ns), composite Simpson on a uniform grid."""
        from scipy.integrate import simpson

        t = np.linspace(0.0, self.duration, n)
        return float(simpson(self.eps_x(t), x=t))

    def area_y(self, n: int = 4001) -> float:
        from scipy.integrate import simpson

        t = np.linspace(0.0, self.duration, n)
        return float(simpson(self.eps_y(t), x=t))


@dataclass(frozen=True)
class PumpTone:
    """Single parametric pump addressed to a mode pair."""

    pair: tuple[str, str]
    pump_frequency: float  # GHz, nominally |omega_a - omega_b|
    detuning: float  # kHz, signed
    envelope: Envelope

    def __post_init__(self):
        if self.pump_frequency <= 0:
            raise InvariantViolation("pump frequency must be > 0")


@dataclass(frozen=True)
class EffectiveDriveTerm:
    """Rotating-frame exchange term: strength(t) = G(t) exp(-i 2 pi delta t).

    ``pair`` is ordered (higher-frequency mode, lower-frequency mode); the
    creation operator acts on the first. ``peak`` is eta*g_eff in linear MHz.
    """

    pair: tuple[str, str]
    peak: float  # MHz
    start: float  # ns
    duration: float  # ns
    detuning: float = 0.0  # kHz
    envelope: Envelope | None = None  # None -> constant
    frame_phase: float = 0.0  # rad accumulated at completion

    def strength_at(self, t_ns: float) -> complex:
        if not (self.start <= t_ns <= self.start + self.duration):
            return 0.0
        local = t_ns - self.start
        if self.envelope is None:
            g = complex(self.peak)
        else:
            # DRAG quadrature rides along as the imaginary part of eta(t)
            ex = self.envelope.eps_x(local) / self.envelope.amplitude
            ey = self.envelope.eps_y(local) / self.envelope.amplitude
            g = self.peak * (ex + 1j * ey)
        phase = -_W * (self.detuning * 1e-3) * local  # kHz -> MHz, t in ns
        return g * complex(math.cos(phase), math.sin(phase))


# --- displacement / RWA reduction -------------------------------------------------


@dataclass(frozen=True)
class PumpReduction:
    eta: complex  # sqrt of effective pump photon number
    z_minus: complex  # displacement coefficient of e^{-i w_p t}, MHz-amplitude/GHz
    z_plus: complex  # coefficient of e^{+i w_p t}


def eta_from_drive(eps_x: float, eps_y: float, pump_frequency: float,
                   omega_s: float) -> complex:
    """eta = (eps_x + i eps_y) * omega_s / (omega_d^2 - omega_s^2).

    eps in linear MHz, frequencies in GHz; returns the dimensionless complex
    pump parameter (eta = sqrt(n_s)).
    """
    return pump_reduction(eps_x, eps_y, pump_frequency, omega_s).eta


def pump_reduction(eps_x: float, eps_y: float, pump_frequency: float,
                   omega_s: float) -> PumpReduction:
    """eta plus the internal displacement amplitudes, for diagnostics."""
    if abs(pump_frequency - omega_s) < 0.010:
        raise ResonanceError(
            f"pump {pump_frequency} GHz within 10 MHz of the SNAIL mode {omega_s} GHz"
        )
    eps = (eps_x + 1j * eps_y) * 1e-3  # GHz
    eta = eps * omega_s / (pump_frequency**2 - omega_s**2)
    z_minus = -(eps / 2) / (pump_frequency - omega_s)
    z_plus = (np.conj(eps) / 2) / (pump_frequency + omega_s)
    return PumpReduction(eta=complex(eta), z_minus=complex(z_minus), z_plus=complex(z_plus))


# --- gate timing -------------------------------------------------------------------


def gate_time(exponent: float, g_peak: float) -> float:
    """Duration (ns) of iSWAP^p at constant exchange rate g_peak (MHz).

    theta = p*pi/2 = 2*pi*G*t  =>  t = p / (4 G).
    """
    if g_peak <= 0:
        raise DomainError("exchange rate must be > 0")
    return 1e3 * exponent / (4.0 * g_peak)


def angle_time(theta: float, g_peak: float) -> float:
    """Duration (ns) to accumulate exchange angle theta at rate g_peak (MHz)."""
    if g_peak <= 0:
        raise DomainError("exchange rate must be > 0")
    return 1e3 * theta / (2.0 * math.pi * g_peak)


def rate_for_full_swap(duration_ns: float) -> float:
    """Peak exchange rate (MHz) implied by a full-iSWAP time (ns)."""
    if duration_ns <= 0:
        raise DomainError("duration must be > 0")
    return 250.0 / duration_ns


W_STATE_EXPONENT = math.atan(math.sqrt(2.0)) / (math.pi / 2.0)  # ~0.6081


def shaped_duration(exponent: float, envelope: Envelope, g_eff: float) -> float:
    """Duration so that integral 2*pi*G(t) dt = p*pi/2 with G(t) = g_eff*shape(t).

    For shaped envelopes the duration is scaled so the fixed shape's area
    meets the target angle: the envelope is stretched uniformly.
    """
    target = exponent * math.pi / 2.0
    area = envelope.area_x() / envelope.amplitude  # unit-shape area, ns
    angle = 2.0 * math.pi * 1e-3 * g_eff * envelope.amplitude * area
    if angle <= 0:
        raise DomainError("envelope has nonpositive pulse area")
    return envelope.duration * target / angle


# --- corrections -------------------------------------------------------------------


def drag_correct(envelope: Envelope, delta_wg: float, delta_pump_khz: float) -> Envelope:
    """Attach the derivative quadrature: eps_y = -eps_x' / (2 pi (Delta - delta)).

    ``delta_wg`` is the cavity-waveguide frame offset (MHz); ``delta_pump_khz``
    the pump detuning. eps_x is unchanged; for symmetric envelopes the added
    quadrature integrates to zero.
    """
    denom = delta_wg - delta_pump_khz * 1e-3
    if abs(denom) < 1.0:
        raise DomainError(
            f"|Delta - delta| = {abs(denom):.3f} MHz < 1 MHz: DRAG denominator too small"
        )
    return replace(envelope, drag_denominator=denom)


@dataclass(frozen=True)
class StarkResult:
    delta_khz: float
    partner_residual: float  # MHz, the other branch's condition evaluated at delta


def stark_detuning(eta_peak: complex, g_cw: tuple[float, float],
                   deltas: tuple[float, float],
                   bracket_mhz: float = 5.0) -> StarkResult:
    """Pump detuning cancelling the drive-induced phase (ac-Stark) error.

    Solves  delta/2 + Re(eta)^2 g2^2/(Delta2-delta)^2 (-Delta2 + 3 delta/2) = 0
    for the (c1, w2) branch by bracketed root finding on [-bracket, bracket] MHz,
    returning the smallest-|delta| root; the partner condition
    delta/2 + Re(eta)^2 g1^2/(Delta1+delta)^2 (Delta1 + 3 delta/2) is reported
    as a residual.
    """
    from scipy.optimize import brentq

    g1, g2 = g_cw
    d1, d2 = deltas
    r = float(np.real(eta_peak)) ** 2
    if r == 0.0:
        return StarkResult(0.0, 0.0)

    def f(delta):
        return delta / 2.0 + r * g2**2 / (d2 - delta) ** 2 * (-d2 + 1.5 * delta)

    def partner(delta):
        return delta / 2.0 + r * g1**2 / (d1 + delta) ** 2 * (d1 + 1.5 * delta)

    grid = np.linspace(-bracket_mhz, bracket_mhz, 2001)
    vals = np.array([f(x) if abs(d2 - x) > 1e-9 else np.nan for x in grid])
    roots = []
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if np.isnan(a) or np.isnan(b):
            continue
        if a == 0.0:
            roots.append(grid[i])
        elif a * b < 0:
            roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-12))
    if not roots:
        raise NoRootError(f"no Stark root on [-{bracket_mhz}, {bracket_mhz}] MHz")
    delta = min(roots, key=abs)
    return StarkResult(delta_khz=delta * 1e3, partner_residual=partner(delta))
