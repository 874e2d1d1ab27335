"""SNAIL potential expansion, third-order strength, and flux tuning curves.

Reduced potential, normalized by the large-junction Josephson energy E_L:

    u(phi) = -alpha * cos(phi) - n * cos((2*pi*flux - phi) / n)

with Taylor coefficients c_k = u^(k)(phi_min) / k! about the minimum. The
junction-labeling convention only fixes what E_L is in terms of the given
small-junction inductance l_j:

    as-captioned : large junctions have inductance alpha*l_j, E_L = phi0^2/(alpha*l_j)
    standard     : large junctions have inductance l_j,       E_L = phi0^2/l_j

From the harmonic part, L_eff = L_large/(2 c2) and omega_s = 1/sqrt(L_eff C).
The third-order strength is the single documented formula

    g_sss = c3 * E_L * phi_zpf^3 / (2*pi*hbar)    [linear Hz]

with phi_zpf = sqrt(hbar * Z / 2) / phi0 and Z = sqrt(L_eff / C).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import InvariantViolation, NoCrossingError, NoMinimumError
from .units import HBAR, PHI0_REDUCED

CONVENTIONS = ("as-captioned", "standard")


@dataclass(frozen=True)
class SnailCircuit:
    """SNAIL loop parameters: l_j in nH, c in pF, flux in flux quanta."""

    l_j: float
    c: float
    alpha: float
    n_large: int = 3
    flux: float = 0.0
    convention: str = "as-captioned"

    def __post_init__(self):
        if self.l_j <= 0:
            raise InvariantViolation("snail: l_j must be > 0")
        if self.c <= 0:
            raise InvariantViolation("snail: c must be > 0")
        if not 0 < self.alpha < 1:
            raise InvariantViolation("snail: alpha must be in (0, 1)")
        if self.n_large < 2:
            raise InvariantViolation("snail: n_large must be >= 2")
        if not 0 <= self.flux < 1:
            raise InvariantViolation("snail: flux must be in [0, 1)")
        if self.convention not in CONVENTIONS:
            raise InvariantViolation(f"snail: convention must be one of {CONVENTIONS}")

    # reduced potential and phi-derivatives
    def u(self, phi, flux=None):
        f = self.flux if flux is None else flux
        n = self.n_large
        return -self.alpha * np.cos(phi) - n * np.cos((2 * np.pi * f - phi) / n)

    def du(self, phi, flux=None):
        f = self.flux if flux is None else flux
        n = self.n_large
        return self.alpha * np.sin(phi) - np.sin((2 * np.pi * f - phi) / n)

    def d2u(self, phi, flux=None):
        f = self.flux if flux is None else flux
        n = self.n_large
        return self.alpha * np.cos(phi) + np.cos((2 * np.pi * f - phi) / n) / n

    def d3u(self, phi, flux=None):
        f = self.flux if flux is None else flux
        n = self.n_large
        return -self.alpha * np.sin(phi) + np.sin((2 * np.pi * f - phi) / n) / n**2

    def d4u(self, phi, flux=None):
        f = self.flux if flux is None else flux
        n = self.n_large
        return -self.alpha * np.cos(phi) - np.cos((2 * np.pi * f - phi) / n) / n**3

    def large_junction_inductance(self) -> float:
        """L of one large junction in nH, per the labeling convention."""
        return self.alpha * self.l_j if self.convention == "as-captioned" else self.l_j


@dataclass(frozen=True)
class ExpansionCoefficients:
    phi_min: float
    c2: float
    c3: float
    c4: float
    omega_s: float  # GHz
    g_sss: float  # MHz


def potential_minimum(circuit: SnailCircuit, flux: float | None = None,
                      seed: float | None = None) -> float:
    """Locate a local minimum of the reduced potential.

    Bracketed scalar minimization seeded from phi = 2*pi*flux*n/(n+alpha)
    (или an explicit seed for well tracking), polished on the derivative to
    |u'(phi_min)| < 1e-10.
    """
    f = circuit.flux if flux is None else flux
    n = circuit.n_large
    if seed is None:
        seed = 2 * np.pi * f * n / (n + circuit.alpha)
    res = minimize_scalar(
        lambda p: float(circuit.u(p, f)),
        bracket=(seed - 1.2, seed, seed + 1.2),
        method="brent",
        options={"xtol": 1e-12},
    )
    phi = float(res.x)
    # polish: brentq on u' over a shrinking window around phi
    for width in (0.5, 0.1, 0.02):
        lo, hi = phi - width, phi + width
        if circuit.du(lo, f) * circuit.du(hi, f) < 0:
            phi = brentq(lambda p: float(circuit.du(p, f)), lo, hi, xtol=1e-14)
            break
    if abs(circuit.du(phi, f)) > 1e-10 or circuit.d2u(phi, f) <= 0:
        raise NoMinimumError(
            f"no stable minimum at flux={f} (u'={circuit.du(phi, f):.2e}, "
            f"u''={circuit.d2u(phi, f):.2e})"
        )
    return phi


def expand(circuit: SnailCircuit, flux: float | None = None,
           seed: float | None = None) -> ExpansionCoefficients:
    """Taylor coefficients about phi_min plus derived omega_s and g_sss."""
    f = circuit.flux if flux is None else flux
    phi = potential_minimum(circuit, f, seed=seed)
    c2 = float(circuit.d2u(phi, f)) / 2.0
    c3 = float(circuit.d3u(phi, f)) / 6.0
    c4 = float(circuit.d4u(phi, f)) / 24.0
    if c2 <= 0:
        raise NoMinimumError(f"curvature c2={c2} not positive at flux={f}")

    l_large = circuit.large_junction_inductance() * 1e-9  # H
    cap = circuit.c * 1e-12  # F
    e_large = PHI0_REDUCED**2 / l_large  # J
    l_eff = l_large / (2.0 * c2)
    omega = 1.0 / math.sqrt(l_eff * cap)  # rad/s
    z = math.sqrt(l_eff / cap)
    phi_zpf = math.sqrt(HBAR * z / 2.0) / PHI0_REDUCED
    g_sss_hz = c3 * e_large * phi_zpf**3 / (HBAR * 2.0 * math.pi)
    return ExpansionCoefficients(
        phi_min=phi,
        c2=c2,
        c3=c3,
        c4=c4,
        omega_s=omega / (2.0 * math.pi) / 1e9,
        g_sss=g_sss_hz / 1e6,
    )


def kerr_free_flux(circuit: SnailCircuit, lo: float = 1e-3, hi: float = 0.5 - 1e-3,
                   n_scan: int = 400) -> tuple[float, ExpansionCoefficients]:
    """Flux in (0, 0.5) where c4 crosses zero; also the expansion there.

    Bisection to 1e-6 flux quanta after a sign scan; raises NoCrossingError
    when c4 keeps one sign on the interval.
    """
    fluxes = np.linspace(lo, hi, n_scan)
    c4s = np.array([expand(circuit, f).c4 for f in fluxes])
    signs = np.sign(c4s)
    crossings = np.where(np.diff(signs) != 0)[0]
    if len(crossings) == 0:
        raise NoCrossingError("c4 has constant sign on (0, 0.5); no kerr-free flux")
    k = crossings[0]
    f0 = brentq(lambda f: expand(circuit, f).c4, fluxes[k], fluxes[k + 1], xtol=1e-7)
    coeffs = expand(circuit, f0)
    if abs(coeffs.c3) < 1e-12:
        raise NoCrossingError("c3 vanishes at the c4 zero; no usable three-wave point")
    return f0, coeffs


def frequency_vs_flux(circuit: SnailCircuit, flux_grid) -> list[tuple[float, float | None]]:
    """omega_s(flux) in GHz per grid point; None marks a failed minimum.

    The minimum is tracked continuously from the previous grid point to avoid
    branch jumps near half flux.
    """
    grid = list(flux_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvariantViolation("flux grid must be strictly increasing")
    out = []
    seed = None
    for f in grid:
        try:
            coeffs = expand(circuit, f, seed=seed)
            seed = coeffs.phi_min
            out.append((f, coeffs.omega_s))
        except NoMinimumError:
            out.append((f, None))
            seed = None
    return out


def write_frequency_csv(path, curve):
    """Two-column CSV (flux, GHz); failed points are skipped."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["flux", "omega_s_ghz"])
        for f, v in curve:
            if v is not None:
                w.writerow([f"{f:.9f}", f"{v:.9f}"])
