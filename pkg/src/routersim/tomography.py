"""Projective readout simulation, state reconstruction, fidelity, bootstrap.

Sampling uses numpy's PCG64 generator; per-setting streams are derived from
the run seed with SeedSequence spawn keys, so settings can be sampled in any
order (or concurrently) with identical results.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvariantViolation

_SQ2 = 1.0 / math.sqrt(2.0)
_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# rotation taking the Pauli eigenbasis to the Z basis
_BASIS_ROT = {
    "I": np.eye(2, dtype=complex),
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),  # H
    "Y": np.array([[_SQ2, -1j * _SQ2], [_SQ2, 1j * _SQ2]], dtype=complex),  # H S^+
}


@dataclass(frozen=True)
class MeasurementSetting:
    pauli_string: str
    shots: int

    def __post_init__(self):
        if not self.pauli_string or set(self.pauli_string) - set("IXYZ"):
            raise InvariantViolation(f"bad pauli string {self.pauli_string!r}")
        if all(c == "I" for c in self.pauli_string):
            raise InvariantViolation("setting needs at least one non-I label")
        if self.shots < 1:
            raise InvariantViolation("shots must be >= 1")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Per-qubit row-stochastic m[true, reported] = P(reported | true)."""

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        for m in self.matrices:
            m = np.asarray(m)
            if m.shape != (2, 2) or not np.allclose(m.sum(axis=1), 1.0):
                raise InvariantViolation(
                    "confusion rows P(.|true) must each sum to 1")
            if m[0, 0] < 0.5 or m[1, 1] < 0.5:
                raise InvariantViolation("confusion diagonal must be >= 0.5")

    @staticmethod
    def perfect(n_qubits: int) -> "ConfusionMatrix":
        return ConfusionMatrix(tuple(np.eye(2) for _ in range(n_qubits)))

    @staticmethod
    def symmetric(fidelities) -> "ConfusionMatrix":
        """Symmetric error model: diagonal = per-qubit measurement fidelity."""
        mats = []
        for f in fidelities:
            mats.append(np.array([[f, 1 - f], [1 - f, f]], dtype=float))
        return ConfusionMatrix(tuple(mats))


@dataclass(frozen=True)
class TomographyRecord:
    setting: MeasurementSetting
    expectation: float
    counts: tuple[int, ...]  # per joint outcome, lexicographic over measured qubits

    def __post_init__(self):
        if abs(self.expectation) > 1 + 1e-12:
            raise InvariantViolation("expectation outside [-1, 1]")
        if sum(self.counts) != self.setting.shots:
            raise InvariantViolation("counts inconsistent with shots")


@dataclass(frozen=True)
class BootstrapResult:
    estimate: float
    sigma: float
    n: int
    n_boot: int

    def __post_init__(self):
        if self.sigma < 0:
            raise InvariantViolation("sigma must be >= 0")
        if self.n_boot < 100:
            raise InvariantViolation("n_boot must be >= 100")


def _require_qubit_register(rho: np.ndarray) -> int:
    d = rho.shape[0]
    n = int(round(math.log2(d)))
    if rho.shape != (d, d) or 2**n != d:
        raise DomainError(
            f"state of dim {rho.shape} is not a qubit register; trace out "
            f"cavity modes first")
    return n


def _joint_probabilities(rho: np.ndarray, pauli: str) -> np.ndarray:
    """Outcome probabilities, lexicographic over ALL qubits (I -> unmeasured)."""
    n = _require_qubit_register(rho)
    if len(pauli) != n:
        raise DomainError(f"setting length {len(pauli)} != {n} qubits")
    rot = np.ones((1, 1), dtype=complex)
    for c in pauli:
        rot = np.kron(rot, _BASIS_ROT[c])
    rotated = rot @ rho @ rot.conj().T
    return np.clip(np.real(np.diagonal(rotated)), 0.0, None)


def _apply_confusion(probs: np.ndarray, pauli: str, confusion: ConfusionMatrix
                     ) -> np.ndarray:
    n = len(pauli)
    p = probs.reshape((2,) * n)
    for k, c in enumerate(pauli):
        if c == "I":
            continue
        m = np.asarray(confusion.matrices[k])  # m[true, reported]
        p = np.tensordot(m, np.moveaxis(p, k, 0), axes=(0, 0))
        p = np.moveaxis(p, 0, k)
    return p.reshape(-1)


def _parity_signs(pauli: str) -> np.ndarray:
    n = len(pauli)
    signs = np.ones(2**n)
    for idx in range(2**n):
        bits = [(idx >> (n - 1 - k)) & 1 for k in range(n)]
        s = 1.0
        for k, c in enumerate(pauli):
            if c != "I" and bits[k]:
                s = -s
        signs[idx] = s
    return signs


def sample_measurements(rho: np.ndarray, settings, confusion: ConfusionMatrix,
                        seed: int) -> list[TomographyRecord]:
    """Simulate per-setting projective readout with confusion and finite shots.

    Deterministic for a fixed seed; setting index i uses the stream spawned
    with key (i,).
    """
    root = np.random.SeedSequence(seed)
    records = []
    for i, setting in enumerate(settings):
        probs = _joint_probabilities(rho, setting.pauli_string)
        total = probs.sum()
        if total <= 0:
            raise DomainError("state has no probability mass")
        probs = probs / total
        probs = _apply_confusion(probs, setting.pauli_string, confusion)
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=root.entropy, spawn_key=(i,)))
        counts = rng.multinomial(setting.shots, probs)
        signs = _parity_signs(setting.pauli_string)
        expectation = float(np.dot(signs, counts) / setting.shots)
        records.append(TomographyRecord(
            setting=setting, expectation=expectation, counts=tuple(int(c) for c in counts)))
    return records


def exact_expectations(rho: np.ndarray, n_qubits: int) -> dict[str, float]:
    """All 4^n - 1 non-identity Pauli expectations (no sampling)."""
    out = {}
    for labels in itertools.product("IXYZ", repeat=n_qubits):
        s = "".join(labels)
        if set(s) == {"I"}:
            continue
        op = np.ones((1, 1), dtype=complex)
        for c in s:
            op = np.kron(op, _PAULI_1Q[c])
        out[s] = float(np.real(np.trace(rho @ op)))
    return out


def all_settings(n_qubits: int, shots: int) -> list[MeasurementSetting]:
    """The 4^n - 1 non-identity settings in lexicographic order."""
    settings = []
    for labels in itertools.product("IXYZ", repeat=n_qubits):
        s = "".join(labels)
        if set(s) == {"I"}:
            continue
        settings.append(MeasurementSetting(s, shots))
    return sorted(settings, key=lambda m: m.pauli_string)


def reconstruct(records, n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Linear inversion + projection to the PSD unit-trace cone.

    Returns (raw, projected). Requires all 4^n - 1 non-identity settings; with
    a subset, falls back to least squares over the available basis directions
    (flagged by a DomainError only when the identity component alone is left).
    """
    expectations = {r.setting.pauli_string: r.expectation for r in records}
    labels = ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)]
    labels = [s for s in labels if set(s) != {"I"}]
    missing = [s for s in labels if s not in expectations]

    d = 2**n_qubits
    rho = np.eye(d, dtype=complex) / d
    if not missing:
        for s in labels:
            op = np.ones((1, 1), dtype=complex)
            for c in s:
                op = np.kron(op, _PAULI_1Q[c])
            rho = rho + expectations[s] * op / d
    else:
        present = [s for s in labels if s in expectations]
        if not present:
            raise DomainError("no tomography settings supplied")
        # least-squares over the orthogonal Pauli basis == direct sum, with
        # absent directions left at zero (the maximally mixed prior)
        for s in present:
            op = np.ones((1, 1), dtype=complex)
            for c in s:
                op = np.kron(op, _PAULI_1Q[c])
            rho = rho + expectations[s] * op / d

    projected = project_psd(rho)
    return rho, projected


def project_psd(rho: np.ndarray) -> np.ndarray:
    """Nearest PSD unit-trace matrix: eigenvalue clipping with water-filling.

    Negative eigenvalues are zeroed and their deficit is redistributed over
    the remaining ones, smallest first, preserving the trace.
    """
    h = 0.5 * (rho + rho.conj().T)
    evals, evecs = np.linalg.eigh(h)
    lam = evals.copy()
    d = len(lam)
    # renormalize trace to 1 first, then waterfill negatives
    lam = lam + (1.0 - lam.sum()) / d
    idx = np.argsort(lam)  # ascending
    acc = 0.0
    out = np.zeros_like(lam)
    for pos, i in enumerate(idx):
        remaining = d - pos
        candidate = lam[i] + acc / remaining
        if candidate < 0:
            acc += lam[i]
            out[i] = 0.0
        else:
            for j in idx[pos:]:
                out[j] = lam[j] + acc / remaining
            break
    return (evecs * out) @ evecs.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 via eigenbases."""
    for name, m in (("rho", rho), ("sigma", sigma)):
        h = 0.5 * (m + m.conj().T)
        ev = np.linalg.eigvalsh(h)
        if ev[0] < -1e-8:
            raise DomainError(f"{name} has negative eigenvalue {ev[0]:.2e}")
    rh = 0.5 * (rho + rho.conj().T)
    sh = 0.5 * (sigma + sigma.conj().T)
    ev, vv = np.linalg.eigh(rh)
    ev = np.clip(ev, 0.0, None)
    sqrt_rho = (vv * np.sqrt(ev)) @ vv.conj().T
    mid = sqrt_rho @ sh @ sqrt_rho
    ev2 = np.linalg.eigvalsh(0.5 * (mid + mid.conj().T))
    ev2 = np.clip(ev2, 0.0, None)
    return float(min(1.0, np.sum(np.sqrt(ev2)) ** 2))


def bootstrap(samples, n_boot: int = 1000, seed: int = 0) -> BootstrapResult:
    """Resample-with-replacement uncertainty of the sample mean.

    sigma_x = sqrt(N/(N-1)) * std(resample means); for N = 1e4 the prefactor
    is negligible and sigma_x ~= s.
    """
    data = np.asarray(list(samples), dtype=float)
    n = len(data)
    if n < 2:
        raise DomainError("bootstrap needs N >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    idx = rng.integers(0, n, size=(n_boot, n))
    means = data[idx].mean(axis=1)
    s = float(means.std(ddof=0))
    return BootstrapResult(
        estimate=float(data.mean()),
        sigma=math.sqrt(n / (n - 1)) * s,
        n=n,
        n_boot=n_boot,
    )


def bootstrap_fidelity(records, target: np.ndarray, n_qubits: int,
                       n_boot: int = 200, seed: int = 1) -> BootstrapResult:
    """Bootstrap the tomography dataset itself: resample counts per setting,
    re-estimate expectations, reconstruct, and take the fidelity spread."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    target_dm = np.outer(target, target.conj()) if target.ndim == 1 else target
    fids = np.empty(n_boot)
    signs = {r.setting.pauli_string: _parity_signs(r.setting.pauli_string)
             for r in records}
    for b in range(n_boot):
        resampled = []
        for r in records:
            p = np.asarray(r.counts, dtype=float) / r.setting.shots
            counts = rng.multinomial(r.setting.shots, p / p.sum())
            expectation = float(np.dot(signs[r.setting.pauli_string], counts)
                                / r.setting.shots)
            resampled.append(TomographyRecord(r.setting, expectation,
                                              tuple(int(c) for c in counts)))
        _, proj = reconstruct(resampled, n_qubits)
        fids[b] = fidelity(proj, target_dm)
    _, proj = reconstruct(list(records), n_qubits)
    base_fid = fidelity(proj, target_dm)
    n = records[0].setting.shots
    return BootstrapResult(
        estimate=base_fid,
        sigma=math.sqrt(n / (n - 1)) * float(fids.std(ddof=0)),
        n=n,
        n_boot=n_boot,
    )


def pauli_bars(rho: np.ndarray) -> list[tuple[str, float]]:
    """All non-identity Pauli expectations, lexicographic, for bar charts."""
    n = _require_qubit_register(rho)
    exps = exact_expectations(rho, n)
    return sorted(exps.items())
