"""Lindblad master-equation integration over truncated Fock spaces.

Conventions (pinned by property tests):
  * solver time unit is us; strengths are linear MHz, so a drive term of
    strength g contributes 2*pi*g rad/us;
  * relaxation operator sqrt(1/T1) a, dephasing operator sqrt(2/T_phi) a^+a,
    which together make a two-level Ramsey coherence decay as exp(-t/T2)
    with 1/T2 = 1/(2 T1) + 1/T_phi;
  * the right-hand side is evaluated matrix-free: mode-local batched matmuls
    for ladder operators and fused elementwise passes for the diagonal parts
    (frame detunings, Kerr terms, dephasing, and the no-jump anticommutator).
    A dense superoperator is never formed;
  * trace renormalization is NOT applied; drift is a measured diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .device import (
    POLICY_PHOTON_SWAP,
    DeviceConfig,
    pure_dephasing_time,
)
from .errors import DomainError, InvariantViolation, StepFailureError
from .hilbert import (
    HilbertSpace,
    ModeOp,
    apply_two_mode,
    create,
    destroy,
    exchange_op,
    mode_op,
    number,
)
from .units import TWO_PI

TRACE_DRIFT_LIMIT = 1e-4


@dataclass
class DensityMatrix:
    """State over the tensor-product space with its time stamp in ns."""

    matrix: np.ndarray
    time_ns: float = 0.0

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_residue(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])


@dataclass
class CollapseOperator:
    """Jump operator with the rate already folded in (op = sqrt(rate) * base)."""

    op: ModeOp
    label: str = ""


@dataclass
class DriveTerm:
    """One bilinear (or linear) drive term: H += 2*pi*(g(t) op + g*(t) op^+).

    ``strength`` is a complex linear-MHz amplitude, either constant or a
    callable of time in us.
    """

    op: ModeOp
    strength: complex | Callable[[float], complex]
    label: str = ""

    def value(self, t_us: float) -> complex:
        if callable(self.strength):
            return complex(self.strength(t_us))
        return complex(self.strength)


@dataclass
class HamiltonianModel:
    """Drive terms plus optional static diagonal corrections (all linear MHz).

    Static terms default to zero: the bundled protocols treat gates as ideal
    parametric interactions. ``frame_detunings`` shift individual mode
    frequencies in the rotating frame; ``self_kerr``/``cross_kerr`` add
    K/2 n(n-1) and chi n_i n_j corrections. All static terms are diagonal.
    """

    space: HilbertSpace
    drive_terms: list[DriveTerm] = field(default_factory=list)
    frame_detunings: dict[str, float] = field(default_factory=dict)
    self_kerr: dict[str, float] = field(default_factory=dict)
    cross_kerr: dict[tuple[str, str], float] = field(default_factory=dict)

    def static_diagonal(self) -> np.ndarray:
        """Diagonal of the static Hamiltonian in rad/us."""
        dims = self.space.dims
        diag = np.zeros(self.space.total_dim)
        for mode_id, det in self.frame_detunings.items():
            diag += TWO_PI * det * _number_diag(self.space, mode_id)
        for mode_id, kerr in self.self_kerr.items():
            n = _number_diag(self.space, mode_id)
            diag += TWO_PI * 0.5 * kerr * n * (n - 1)
        for (a, b), chi in self.cross_kerr.items():
            diag += TWO_PI * chi * _number_diag(self.space, a) * _number_diag(self.space, b)
        return diag

    def hamiltonian_matrix(self, t_us: float) -> np.ndarray:
        """Dense H(t) in rad/us (small spaces / tests only)."""
        h = np.diag(self.static_diagonal().astype(complex))
        for term in self.drive_terms:
            g = term.value(t_us)
            a = term.op.to_matrix()
            h += TWO_PI * (g * a + np.conj(g) * a.conj().T)
        return h


def _number_diag(space: HilbertSpace, mode_id: str) -> np.ndarray:
    dims = space.dims
    k = space.index(mode_id)
    diag = np.ones(1)
    for i, d in enumerate(dims):
        v = np.arange(d, dtype=float) if i == k else np.ones(d)
        diag = np.kron(diag, v)
    return diag


def build_space(device: DeviceConfig, mode_ids: list[str],
                dim_overrides: dict[str, int] | None = None) -> HilbertSpace:
    """Space over the given modes, ordered as declared in the device."""
    order = [m.id for m in device.modes if m.id in set(mode_ids)]
    missing = set(mode_ids) - set(order)
    if missing:
        raise DomainError(f"unknown modes requested: {sorted(missing)}")
    dim_overrides = dim_overrides or {}
    return HilbertSpace(tuple(
        (m, dim_overrides.get(m, device.mode(m).dim)) for m in order
    ))


def collapse_operators(device: DeviceConfig, space: HilbertSpace,
                       policy: str = POLICY_PHOTON_SWAP) -> list[CollapseOperator]:
    """Relaxation plus (finite-T_phi) dephasing for every mode in the space."""
    ops = []
    for mode_id, dim in space.modes:
        spec = device.mode(mode_id)
        t1, t2 = spec.coherences(policy)
        ops.append(CollapseOperator(
            mode_op(space, mode_id, math.sqrt(1.0 / t1) * destroy(dim)),
            label=f"relax({mode_id})",
        ))
        t_phi = pure_dephasing_time(t1, t2)
        if math.isfinite(t_phi):
            ops.append(CollapseOperator(
                mode_op(space, mode_id, math.sqrt(2.0 / t_phi) * number(dim)),
                label=f"dephase({mode_id})",
            ))
    return ops


# --- integration ----------------------------------------------------------------


@dataclass
class Trajectory:
    times_ns: np.ndarray
    states: list[DensityMatrix]
    trace_drift: float
    hermiticity_residue: float
    min_eigenvalue: float

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]


def integrate(
    rho0: DensityMatrix,
    model: HamiltonianModel,
    collapse_ops: list[CollapseOperator],
    t_span_ns: tuple[float, float],
    tol: float = 1e-8,
    sample_times_ns=None,
    check_eigenvalues: bool = True,
) -> Trajectory:
    """Integrate rho' = -i[H(t), rho] + sum_n D[C_n] rho with adaptive RK45.

    Dense output is evaluated at the requested sample times (endpoint always
    included). Raises StepFailureError when the tolerance is unreachable and
    InvariantViolation when the trace drifts by more than 1e-4.
    """
    space = model.space
    D = space.total_dim
    rho = np.asarray(rho0.matrix, dtype=complex)
    if rho.shape != (D, D):
        raise DomainError(f"state shape {rho.shape} != space dim {D}")
    t0_ns, t1_ns = t_span_ns
    if t1_ns < t0_ns:
        raise DomainError("t_span must be increasing")
    if sample_times_ns is None:
        sample_times_ns = np.linspace(t0_ns, t1_ns, 21)
    sample_times_ns = np.unique(np.concatenate([
        np.atleast_1d(np.asarray(sample_times_ns, float)), [t0_ns, t1_ns]
    ]))
    if t1_ns == t0_ns:
        state = DensityMatrix(rho.copy(), t0_ns)
        return Trajectory(
            np.array([t0_ns]), [state], 0.0,
            state.hermiticity_residue(),
            state.min_eigenvalue() if check_eigenvalues else 0.0,
        )

    # -- precompute the fused elementwise generator ---------------------------
    s_diag = model.static_diagonal()
    elem = (-1j) * (s_diag[:, None] - s_diag[None, :]) + 0j

    ladder_jumps = []
    for c in collapse_ops:
        if c.op.is_diagonal():
            v = c.op.full_diagonal()
            elem += np.outer(v, v.conj())  # C rho C^+ for diagonal C
            w = np.abs(v) ** 2  # C^+C diagonal
            elem -= 0.5 * (w[:, None] + w[None, :])
        else:
            ladder_jumps.append(c.op)
            cc = c.op.dagger()
            prod = _compose_diag_or_none(cc, c.op)
            if prod is not None:
                elem -= 0.5 * (prod[:, None] + prod[None, :])
            else:  # pragma: no cover - no such operators are produced today
                raise DomainError("non-diagonal C^+C not supported")

    terms = list(model.drive_terms)
    jump_pairs = [(op, op.dagger()) for op in ladder_jumps]

    def rhs(t_us, y):
        r = y.reshape(D, D)
        out = elem * r
        for op, op_dag in jump_pairs:
            out += op_dag.apply_right(op.apply_left(r))
        for term in terms:
            g = term.value(t_us)
            if g == 0:
                continue
            x = term.op.apply_left(r)
            x -= term.op.apply_right(r)
            out += (-1j * TWO_PI) * (g * x) + (1j * TWO_PI) * (np.conj(g) * x.conj().T)
        return out.ravel()

    t_eval_us = (sample_times_ns - t0_ns) / 1e3
    sol = solve_ivp(
        rhs,
        (0.0, (t1_ns - t0_ns) / 1e3),
        rho.ravel(),
        method="RK45",
        rtol=tol,
        atol=tol * 1e-2,
        t_eval=t_eval_us,
    )
    if not sol.success:
        raise StepFailureError(f"integrator failed: {sol.message}")

    states = []
    drift = 0.0
    herm = 0.0
    mineig = math.inf
    for i, t_us in enumerate(sol.t):
        m = sol.y[:, i].reshape(D, D)
        st = DensityMatrix(m, t0_ns + t_us * 1e3)
        states.append(st)
        drift = max(drift, abs(st.trace().real - 1.0) + abs(st.trace().imag))
        herm = max(herm, st.hermiticity_residue())
        if check_eigenvalues:
            mineig = min(mineig, st.min_eigenvalue())
    if drift > TRACE_DRIFT_LIMIT:
        raise InvariantViolation(f"trace drift {drift:.2e} exceeds {TRACE_DRIFT_LIMIT}")
    return Trajectory(
        times_ns=sample_times_ns,
        states=states,
        trace_drift=drift,
        hermiticity_residue=herm,
        min_eigenvalue=(mineig if check_eigenvalues else 0.0),
    )


def _compose_diag_or_none(a: ModeOp, b: ModeOp):
    """Diagonal of a.b when that product is diagonal (e.g. a^+ a), else None."""
    try:
        keys = set(a.factors) | set(b.factors)
        prod_factors = {}
        for k in keys:
            da = a.factors.get(k)
            db = b.factors.get(k)
            if da is None:
                m = db
            elif db is None:
                m = da
            else:
                m = da @ db
            prod_factors[k] = m
        op = ModeOp(a.space, prod_factors)
        if not op.is_diagonal():
            return None
        return np.real(op.full_diagonal())
    except Exception:
        return None


# --- closed-form exchange propagator ---------------------------------------------


def exchange_unitary(dim_a: int, dim_b: int, exponent: float) -> np.ndarray:
    """Beam-splitter propagator exp(-i theta (a^+b + ab^+)), theta = p*pi/2.

    Built exactly, block by block in total excitation number.
    """
    theta = exponent * math.pi / 2.0
    da, db = dim_a, dim_b
    u = np.zeros((da * db, da * db), dtype=complex)
    for n_total in range(da + db - 1):
        m_lo = max(0, n_total - db + 1)
        m_hi = min(da - 1, n_total)
        ms = list(range(m_lo, m_hi + 1))
        size = len(ms)
        block = np.zeros((size, size))
        for i, m in enumerate(ms[:-1]):
            n = n_total - m
            # <m+1, n-1 | a^+ b | m, n> = sqrt((m+1) n)
            block[i + 1, i] = block[i, i + 1] = math.sqrt((m + 1) * n)
        evals, evecs = np.linalg.eigh(block)
        ub = (evecs * np.exp(-1j * theta * evals)) @ evecs.conj().T
        idx = [m * db + (n_total - m) for m in ms]
        u[np.ix_(idx, idx)] = ub
    return u


def apply_exchange_unitary(space: HilbertSpace, state: np.ndarray,
                           pair: tuple[str, str], exponent: float) -> np.ndarray:
    """Apply the closed-form iSWAP^p propagator to a pure state or density."""
    a, b = pair
    u = exchange_unitary(space.dim_of(a), space.dim_of(b), exponent)
    return apply_two_mode(space, state, a, b, u)


def expectation(rho: np.ndarray, observable: np.ndarray) -> float:
    """Tr(rho O) for Hermitian O; the imaginary residue must be < 1e-9."""
    if rho.shape != observable.shape:
        raise DomainError(
            f"dimension mismatch: state {rho.shape} vs observable {observable.shape}"
        )
    val = complex(np.sum(rho * observable.T))
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise DomainError(f"expectation has imaginary residue {val.imag:.2e}")
    return float(val.real)


def expectation_op(rho: np.ndarray, op: ModeOp) -> complex:
    """Tr(rho A) for a factored (possibly non-Hermitian) operator."""
    return complex(np.trace(op.apply_left(rho)))
