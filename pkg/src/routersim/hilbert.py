"""Truncated tensor-product Fock spaces and mode-local operator products.

Operators are kept in factored form (one small matrix per touched mode) and
applied to states/density matrices with batched matmuls, so a dense operator
on the full product space is never materialized for the solver's hot path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionCapError, DomainError

DEFAULT_DIM_CAP = 4096


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered list of (mode id, Fock dim); order is fixed at build time."""

    modes: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if len({m for m, _ in self.modes}) != len(self.modes):
            raise DomainError("duplicate mode ids in Hilbert space")
        if self.total_dim > DEFAULT_DIM_CAP:
            raise DimensionCapError(
                f"tensor-product dimension {self.total_dim} exceeds cap {DEFAULT_DIM_CAP}"
            )

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.modes)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.modes)

    @property
    def total_dim(self) -> int:
        return int(np.prod([d for _, d in self.modes])) if self.modes else 1

    def index(self, mode_id: str) -> int:
        for k, (m, _) in enumerate(self.modes):
            if m == mode_id:
                return k
        raise DomainError(f"mode {mode_id!r} not in space {self.ids}")

    def dim_of(self, mode_id: str) -> int:
        return self.modes[self.index(mode_id)][1]

    # --- states ------------------------------------------------------------

    def vacuum(self) -> np.ndarray:
        psi = np.zeros(self.total_dim, dtype=complex)
        psi[0] = 1.0
        return psi

    def basis_state(self, occupations: dict[str, int]) -> np.ndarray:
        """Product Fock state |n_1, n_2, ...>; unlisted modes start in |0>."""
        idx = 0
        for (m, d) in self.modes:
            n = occupations.get(m, 0)
            if not 0 <= n < d:
                raise DomainError(f"occupation {n} out of range for mode {m} (dim {d})")
            idx = idx * d + n
        psi = np.zeros(self.total_dim, dtype=complex)
        psi[idx] = 1.0
        return psi

    def coherent_state(self, amplitudes: dict[str, complex]) -> np.ndarray:
        """Product of truncated coherent states, renormalized after truncation.

        Guards |alpha|^2 <= dim/4 so the truncation error stays small.
        """
        factors = []
        for (m, d) in self.modes:
            alpha = complex(amplitudes.get(m, 0.0))
            if abs(alpha) ** 2 > d / 4.0:
                raise DomainError(
                    f"coherent amplitude |{alpha}|^2 > dim/4 for mode {m} (dim {d})"
                )
            if alpha == 0:
                coeff = np.zeros(d, dtype=complex)
                coeff[0] = 1.0
            else:
                ns = np.arange(d)
                logfact = np.cumsum(np.log(np.maximum(ns, 1)))
                coeff = np.exp(ns * np.log(complex(alpha)) - 0.5 * logfact)
                coeff /= np.linalg.norm(coeff)
            factors.append(np.asarray(coeff, dtype=complex))
        out = factors[0]
        for f in factors[1:]:
            out = np.kron(out, f)
        return out

    def density(self, psi: np.ndarray) -> np.ndarray:
        return np.outer(psi, psi.conj())

    # --- reductions ---------------------------------------------------------

    def partial_trace(self, rho: np.ndarray, keep_ids: list[str]) -> np.ndarray:
        """Reduced density matrix over keep_ids, in their order within the space."""
        keep = sorted(self.index(m) for m in keep_ids)
        dims = self.dims
        n = len(dims)
        r = rho.reshape(dims + dims)
        row = list(range(n))
        col = [n + k if k in keep else k for k in range(n)]  # shared index = trace
        out = [k for k in keep] + [n + k for k in keep]
        reduced = np.einsum(r, row + col, out)
        dk = int(np.prod([dims[k] for k in keep])) if keep else 1
        return reduced.reshape(dk, dk)


# --- single-mode matrices ----------------------------------------------------


def destroy(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def create(dim: int) -> np.ndarray:
    return destroy(dim).conj().T


def number(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


# --- factored operators -------------------------------------------------------


@dataclass
class ModeOp:
    """Product of single-mode matrices acting on a subset of modes.

    ``factors`` maps mode index -> (dim, dim) matrix. Application to a
    density matrix costs O(total_dim^2 * dim_k) per factor.
    """

    space: HilbertSpace
    factors: dict[int, np.ndarray]
    label: str = ""

    def dagger(self) -> "ModeOp":
        return ModeOp(
            self.space,
            {k: m.conj().T for k, m in self.factors.items()},
            label=self.label + "^+",
        )

    def is_diagonal(self) -> bool:
        return all(
            np.allclose(m, np.diag(np.diagonal(m))) for m in self.factors.values()
        )

    def full_diagonal(self) -> np.ndarray:
        """Diagonal of the embedded operator (requires is_diagonal)."""
        dims = self.space.dims
        diag = np.ones(1, dtype=complex)
        for k, d in enumerate(dims):
            v = np.diagonal(self.factors[k]) if k in self.factors else np.ones(d)
            diag = np.kron(diag, v)
        return diag

    def to_matrix(self) -> np.ndarray:
        dims = self.space.dims
        out = np.ones((1, 1), dtype=complex)
        for k, d in enumerate(dims):
            f = self.factors.get(k, np.eye(d, dtype=complex))
            out = np.kron(out, f)
        return out

    # -- applications --------------------------------------------------------

    def apply_vec(self, psi: np.ndarray) -> np.ndarray:
        dims = self.space.dims
        out = psi
        for k, m in self.factors.items():
            out = _apply_axis(out, dims, k, m, n_state_axes=1, side="left")
        return out

    def apply_left(self, rho: np.ndarray) -> np.ndarray:
        """A @ rho."""
        dims = self.space.dims
        out = rho
        for k, m in self.factors.items():
            out = _apply_axis(out, dims, k, m, n_state_axes=2, side="left")
        return out

    def apply_right(self, rho: np.ndarray) -> np.ndarray:
        """rho @ A."""
        dims = self.space.dims
        out = rho
        for k, m in self.factors.items():
            out = _apply_axis(out, dims, k, m, n_state_axes=2, side="right")
        return out


def _apply_axis(arr, dims, k, mat, n_state_axes, side):
    """Apply ``mat`` to tensor factor k of a vector (n_state_axes=1) or of the
    row (side='left') / column (side='right') index of a matrix."""
    D = int(np.prod(dims))
    pre = int(np.prod(dims[:k]))
    d = dims[k]
    post = D // (pre * d)
    if n_state_axes == 1:
        r = arr.reshape(pre, d, post)
        out = np.matmul(mat, r)  # broadcast over leading axis
        return out.reshape(-1)
    if side == "left":
        r = arr.reshape(pre, d, post * D)
        out = np.matmul(mat, r)
        return out.reshape(D, D)
    # right: rho @ (I x mat x I): contract column factor k with mat from the left index
    r = arr.reshape(D * pre, d, post)
    r = np.swapaxes(r, 1, 2)  # (D*pre, post, d)
    out = np.matmul(r, mat)  # sum_j rho[..., j] mat[j, i]
    out = np.swapaxes(out, 1, 2)
    return out.reshape(D, D)


def mode_op(space: HilbertSpace, mode_id: str, mat: np.ndarray, label: str = "") -> ModeOp:
    k = space.index(mode_id)
    d = space.dims[k]
    if mat.shape != (d, d):
        raise DomainError(f"operator shape {mat.shape} != dim {d} of mode {mode_id}")
    return ModeOp(space, {k: np.asarray(mat, dtype=complex)}, label=label or mode_id)


def exchange_op(space: HilbertSpace, mode_a: str, mode_b: str) -> ModeOp:
    """a^+ b between two modes (the h.c. partner is .dagger())."""
    ka, kb = space.index(mode_a), space.index(mode_b)
    return ModeOp(
        space,
        {ka: create(space.dims[ka]), kb: destroy(space.dims[kb])},
        label=f"{mode_a}^+ {mode_b}",
    )


def apply_two_mode(space: HilbertSpace, state: np.ndarray, mode_a: str, mode_b: str,
                   u: np.ndarray) -> np.ndarray:
    """Apply a joint two-mode unitary to a state vector or density matrix."""
    ka, kb = space.index(mode_a), space.index(mode_b)
    da, db = space.dims[ka], space.dims[kb]
    if u.shape != (da * db, da * db):
        raise DomainError("two-mode unitary has wrong shape")
    dims = space.dims
    D = space.total_dim
    n = len(dims)

    def apply_rows(vecs):
        t = vecs.reshape(dims + vecs.shape[1:])
        t = np.moveaxis(t, (ka, kb), (0, 1))
        rest = t.shape[2:]
        t = t.reshape(da * db, -1)
        t = u @ t
        t = t.reshape((da, db) + rest)
        t = np.moveaxis(t, (0, 1), (ka, kb))
        return t.reshape((D,) + vecs.shape[1:])

    if state.ndim == 1:
        return apply_rows(state.reshape(D, 1)).reshape(D)
    rho = apply_rows(state)          # U rho
    rho = apply_rows(rho.conj().T).conj().T  # (U (U rho)^+)^+ = U rho U^+
    return rho


def expectation_vec(psi: np.ndarray, op: ModeOp) -> complex:
    return complex(np.vdot(psi, op.apply_vec(psi)))
