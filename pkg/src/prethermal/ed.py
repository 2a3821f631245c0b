"""Sparse operator assembly, Floquet propagators, quasienergies and entanglement."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.special import xlogy

from .basis import ConstraintKind, FockBasis
from .errors import ConsistencyError
from .io import write_csv
from .krylov import expm_lanczos

__all__ = [
    "DENSE_LIMIT",
    "DiagonalPhase",
    "EigenReport",
    "ExpFactor",
    "FloquetOperator",
    "MatrixFactor",
    "SiteFlip",
    "assemble",
    "commutator_norm",
    "entanglement_entropy",
    "expm_hermitian",
    "floquet_squarepulse",
    "hermiticity_defect",
    "kick_unitary",
    "lookup_targets",
    "page_value",
    "quasienergies",
    "require_hermitian",
]

DENSE_LIMIT = 4096


# ---------------------------------------------------------------- assembly


def lookup_targets(basis: FockBasis, targets) -> np.ndarray:
    """Indices of ``targets``; a target outside the sector means a term left it."""
    pos = basis.find(targets)
    if np.any(pos < 0):
        bad = int(np.asarray(targets)[pos < 0][0])
        raise ConsistencyError(f"term maps into configuration {bad:#b} outside {basis!r}")
    return pos


def assemble(dim: int, rows, cols, vals) -> sp.csr_matrix:
    """Sum triplets into a CSR matrix (duplicates add)."""
    rows = np.concatenate([np.asarray(r, dtype=np.int64).ravel() for r in rows]) if rows else np.zeros(0, int)
    cols = np.concatenate([np.asarray(c, dtype=np.int64).ravel() for c in cols]) if cols else np.zeros(0, int)
    vals = np.concatenate([np.asarray(v, dtype=complex).ravel() for v in vals]) if vals else np.zeros(0, complex)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def hermiticity_defect(A) -> float:
    D = A - A.conj().T
    if sp.issparse(D):
        return float(abs(D).max()) if D.nnz else 0.0
    return float(np.max(np.abs(D), initial=0.0))


def require_hermitian(A, tol: float = 1e-12, what: str = "operator"):
    d = hermiticity_defect(A)
    if d > tol:
        raise ConsistencyError(f"{what} is not Hermitian (max |A - A^dag| = {d:.3g})")
    return A


def commutator_norm(A, B) -> float:
    """Largest entry of ``|AB - BA|``."""
    C = A @ B - B @ A
    if sp.issparse(C):
        return float(abs(C).max()) if C.nnz else 0.0
    return float(np.max(np.abs(C), initial=0.0))


def expm_hermitian(H, t: float) -> np.ndarray:
    """Dense ``exp(-i t H)`` through a full Hermitian eigendecomposition."""
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
    w, v = np.linalg.eigh(Hd)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


# ---------------------------------------------------------------- propagators


class ExpFactor:
    """``exp(-i dt H)`` for Hermitian sparse ``H``."""

    def __init__(self, H, dt: float, tol: float = 1e-10):
        require_hermitian(H, 1e-10, "generator")
        self.H = sp.csr_matrix(H)
        self.dt = dt
        self.tol = tol

    @property
    def dim(self):
        return self.H.shape[0]

    def apply(self, psi):
        if psi.ndim == 2:
            return np.stack([self.apply(p) for p in psi.T], axis=1)
        return expm_lanczos(self.H, psi, self.dt, tol=self.tol)

    def dense(self):
        return expm_hermitian(self.H, self.dt)


class DiagonalPhase:
    """``exp(-i dt diag(d))``."""

    def __init__(self, diag, dt: float):
        self.phase = np.exp(-1j * dt * np.asarray(diag, dtype=float))

    @property
    def dim(self):
        return len(self.phase)

    def apply(self, psi):
        return self.phase[:, None] * psi if psi.ndim == 2 else self.phase * psi

    def dense(self):
        return np.diag(self.phase)


class SiteFlip:
    """``prod_j exp(-i theta sigma^x_j)`` on a full spin-half basis, applied site by site."""

    def __init__(self, basis: FockBasis, theta: float, sites=None):
        if basis.constraint.kind is not ConstraintKind.SPIN_HALF:
            raise ValueError("site-wise flips need the full spin-half basis")
        self.basis = basis
        self.theta = theta
        self.sites = range(basis.L) if sites is None else list(sites)
        # on the full basis states[i] == i, so flipping bit j permutes indices by XOR
        self._perm = [np.arange(basis.dim) ^ (1 << j) for j in self.sites]

    @property
    def dim(self):
        return self.basis.dim

    def apply(self, psi):
        c, s = np.cos(self.theta), -1j * np.sin(self.theta)
        for perm in self._perm:
            psi = c * psi + s * psi[perm]
        return psi

    def dense(self):
        return self.apply(np.eye(self.dim, dtype=complex))


class MatrixFactor:
    def __init__(self, U):
        self.U = np.asarray(U, dtype=complex)

    @property
    def dim(self):
        return self.U.shape[0]

    def apply(self, psi):
        return self.U @ psi

    def dense(self):
        return self.U


class FloquetOperator:
    """One-period propagator as a time-ordered list of factors (earliest first).

    With ``dense=True`` the product is formed once and every application is a
    matrix-vector product; otherwise factors are applied one by one.
    """

    def __init__(self, factors, period: float, basis: FockBasis | None = None, dense: bool | None = None):
        factors = list(factors)
        if not factors:
            raise ValueError("a Floquet operator needs at least one factor")
        dims = {f.dim for f in factors}
        if len(dims) != 1:
            raise ValueError(f"factor dimensions disagree: {dims}")
        self.dim = dims.pop()
        self.period = period
        self.basis = basis
        self.factors = factors
        if dense is None:
            dense = self.dim <= DENSE_LIMIT
        self._U = None
        if dense:
            U = np.eye(self.dim, dtype=complex)
            for f in factors:
                U = f.dense() @ U
            self._U = U

    @property
    def is_dense(self) -> bool:
        return self._U is not None

    @property
    def matrix(self) -> np.ndarray:
        if self._U is None:
            raise ValueError(f"dimension {self.dim} exceeds the dense limit; use apply()")
        return self._U

    def apply(self, psi, n: int = 1):
        psi = np.asarray(psi, dtype=complex)
        for _ in range(n):
            if self._U is not None:
                psi = self._U @ psi
            else:
                for f in self.factors:
                    psi = f.apply(psi)
        return psi

    def trajectory(self, psi, n_cycles: int, observe):
        """``[observe(psi_0), ..., observe(psi_n)]`` along the stroboscopic orbit."""
        out = [observe(psi)]
        for _ in range(n_cycles):
            psi = self.apply(psi)
            out.append(observe(psi))
        return out

    def unitarity_defect(self) -> float:
        U = self.matrix
        return float(np.max(np.abs(U.conj().T @ U - np.eye(self.dim))))


def floquet_squarepulse(H_first, H_second, T: float, basis=None, dense: bool | None = None, tol=1e-10):
    """``exp(-i H_second T/2) exp(-i H_first T/2)``; ``H_first`` acts on ``[0, T/2]``."""
    if T <= 0:
        raise ValueError("period must be positive")
    if H_first.shape != H_second.shape:
        raise ValueError("both halves must act on the same basis")
    return FloquetOperator(
        [ExpFactor(H_first, T / 2, tol), ExpFactor(H_second, T / 2, tol)], T, basis, dense
    )


def kick_unitary(K, theta: float, basis: FockBasis | None = None):
    """``exp(-i theta K)`` as a factor.

    ``K`` may be a Hermitian matrix, or the string ``"sum_x"`` for
    ``sum_j sigma^x_j``, whose exponential is applied site by site.
    """
    if isinstance(K, str):
        if K != "sum_x" or basis is None:
            raise ValueError("only 'sum_x' with a spin-half basis is supported as a named kick")
        return SiteFlip(basis, theta)
    return ExpFactor(K, theta)


# ---------------------------------------------------------------- spectra


@dataclass
class EigenReport:
    """Per-eigenstate quasienergies and derived columns, sorted by quasienergy."""

    period: float
    eps: np.ndarray
    vectors: np.ndarray
    columns: dict = field(default_factory=dict)
    near_degenerate: int = 0

    def __len__(self):
        return len(self.eps)

    def add(self, name, values):
        values = np.asarray(values)
        if values.shape != self.eps.shape:
            raise ValueError(f"column {name!r} has shape {values.shape}, expected {self.eps.shape}")
        self.columns[name] = values
        return self

    def overlaps(self, ref) -> np.ndarray:
        ref = np.asarray(ref, dtype=complex)
        return np.abs(self.vectors.conj().T @ ref) ** 2

    def expectation(self, diag_or_matrix) -> np.ndarray:
        O = diag_or_matrix
        if sp.issparse(O):
            return np.real(np.sum(self.vectors.conj() * (O @ self.vectors), axis=0))
        O = np.asarray(O)
        if O.ndim == 1:
            return (np.abs(self.vectors) ** 2).T @ O.real
        return np.real(np.sum(self.vectors.conj() * (O @ self.vectors), axis=0))

    def to_csv(self, path):
        write_csv(path, {"eps": self.eps, **self.columns})


def quasienergies(U: FloquetOperator, gap_tol: float = 1e-12) -> EigenReport:
    """Diagonalise a dense Floquet operator.

    ``eps = -arg(lambda)/T`` folded into ``(-pi/T, pi/T]``.  A complex Schur
    form gives orthonormal eigenvectors even inside degenerate blocks.
    """
    M = U.matrix
    Tm, Z = sla.schur(M, output="complex")
    off = np.max(np.abs(np.triu(Tm, 1)), initial=0.0)
    if off > 1e-8:
        raise ConsistencyError(f"Floquet operator is not normal (Schur off-diagonal {off:.2g})")
    lam = np.diag(Tm)
    eps = -np.angle(lam) / U.period
    eps[np.isclose(eps, -np.pi / U.period, rtol=0, atol=1e-14)] = np.pi / U.period
    order = np.argsort(eps, kind="stable")
    eps = eps[order]
    vecs = Z[:, order]
    gaps = np.diff(eps)
    return EigenReport(U.period, eps, vecs, near_degenerate=int(np.sum(gaps < gap_tol)))


# ---------------------------------------------------------------- entanglement


def page_value(dim_A: int, dim_B: int) -> float:
    """Mean entanglement entropy of a random pure state on ``dim_A x dim_B``."""
    if dim_A > dim_B:
        raise ValueError("page_value expects dim_A <= dim_B")
    return float(np.log(dim_A) - dim_A / (2 * dim_B))


def schmidt_values(state, basis: FockBasis, L_A: int) -> np.ndarray:
    """Schmidt coefficients for the cut between sites ``[0, L_A)`` and the rest."""
    if not 0 <= L_A <= basis.L:
        raise ValueError(f"cut must lie in [0, L], got {L_A}")
    state = np.asarray(state, dtype=complex)
    if state.shape != (basis.dim,):
        raise ValueError("state does not match the basis dimension")
    nrm = np.linalg.norm(state)
    if abs(nrm - 1) > 1e-8:
        raise ValueError(f"state is not normalised (|psi| = {nrm})")
    shift = basis.bits * L_A
    left = basis.states & ((1 << shift) - 1)
    right = basis.states >> shift
    # only configurations that actually occur are kept on either side
    lu, li = np.unique(left, return_inverse=True)
    ru, ri = np.unique(right, return_inverse=True)
    M = np.zeros((len(lu), len(ru)), dtype=complex)
    M[li, ri] = state
    return np.linalg.svd(M, compute_uv=False)


def entanglement_entropy(state, basis: FockBasis, L_A: int) -> float:
    """Von Neumann entropy of sites ``[0, L_A)``."""
    p = schmidt_values(state, basis, L_A) ** 2
    return float(-np.sum(xlogy(p, p)))
