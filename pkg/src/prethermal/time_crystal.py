"""Kicked Ising chain as a period-doubling time crystal.

One period is Ising evolution for time ``T`` followed by a global kick
``X_eps = prod_j exp(-i (pi/2)(1 - eps) sigma^x_j)``:

    U(T, 0) = X_eps exp(-i H_1 T),   H_1 = -J sum sigma^z_j sigma^z_{j+1} - h_z sum sigma^z_j.

Spins are stored as bits with ``1`` meaning ``sigma^z = +1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import FockBasis, FullSpinHalf, build_basis
from .ed import DiagonalPhase, FloquetOperator, SiteFlip, quasienergies
from .hsf import Boundary
from .io import TimeSeries
from .parallel import ordered_map

__all__ = [
    "CatReport",
    "TcParams",
    "cat_analysis",
    "ising_diagonal",
    "magnetization_diagonal",
    "melting_cycle",
    "melting_scan",
    "period2_amplitude",
    "subharmonic_run",
    "tc_basis",
    "tc_floquet",
]

WINDOW = 20


@dataclass(frozen=True)
class TcParams:
    """``initial`` is a bit pattern (default all up); ``eps`` the kick error."""

    L: int
    T: float = 1.0
    J: float = 1.0
    h_z: float = 0.0
    eps: float = 0.0
    bc: Boundary = Boundary.PBC
    initial: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "bc", Boundary(self.bc))
        if not 2 <= self.L <= 14:
            raise ValueError(f"L must be in [2, 14], got {self.L}")
        if not 0 <= self.eps < 0.5:
            raise ValueError(f"kick error must be in [0, 0.5), got {self.eps}")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.initial is not None and not 0 <= self.initial < 2**self.L:
            raise ValueError("initial bit pattern out of range")

    @property
    def initial_state(self) -> int:
        return (1 << self.L) - 1 if self.initial is None else self.initial

    @property
    def kick_angle(self) -> float:
        return 0.5 * np.pi * (1 - self.eps)


def tc_basis(params: TcParams) -> FockBasis:
    return build_basis(params.L, FullSpinHalf)


def _sz(basis, j):
    return 2.0 * basis.site(j) - 1


def ising_diagonal(params: TcParams, basis: FockBasis) -> np.ndarray:
    L = params.L
    bonds = range(L) if params.bc is Boundary.PBC and L > 2 else range(L - 1)
    d = np.zeros(basis.dim)
    for j in bonds:
        d -= params.J * _sz(basis, j) * _sz(basis, (j + 1) % L)
    for j in range(L):
        d -= params.h_z * _sz(basis, j)
    return d


def magnetization_diagonal(basis: FockBasis) -> np.ndarray:
    return sum(_sz(basis, j) for j in range(basis.L)) / basis.L


def tc_floquet(params: TcParams, basis: FockBasis | None = None, dense: bool | None = None) -> FloquetOperator:
    basis = tc_basis(params) if basis is None else basis
    factors = [DiagonalPhase(ising_diagonal(params, basis), params.T), SiteFlip(basis, params.kick_angle)]
    return FloquetOperator(factors, params.T, basis, dense)


def subharmonic_run(params: TcParams, n_cycles: int, basis: FockBasis | None = None) -> TimeSeries:
    """Stroboscopic ``M(nT) = (1/L) sum_j <sigma^z_j>`` for ``n = 0..n_cycles``."""
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    basis = tc_basis(params) if basis is None else basis
    U = tc_floquet(params, basis, dense=False)
    m = magnetization_diagonal(basis)
    psi = basis.basis_vector(params.initial_state)
    M = U.trajectory(psi, n_cycles, lambda v: float(np.dot(np.abs(v) ** 2, m)))
    return TimeSeries(n=np.arange(n_cycles + 1), M=np.array(M))


def period2_amplitude(M, window: int = WINDOW) -> np.ndarray:
    """``|mean_{m in [n, n+window)} (-1)^m M(m)|`` for every full window start ``n``."""
    M = np.asarray(M, dtype=float)
    if len(M) < window:
        raise ValueError(f"need at least {window} cycles")
    s = M * (-1.0) ** np.arange(len(M))
    c = np.concatenate([[0.0], np.cumsum(s)])
    return np.abs(c[window:] - c[:-window]) / window


def melting_cycle(params: TcParams, cap: int = 100_000, chunk: int = 2000, basis=None):
    """First window start at which the period-2 amplitude falls below half its initial value.

    Returns ``(n_star, censored)``; a censored point reports ``cap`` as a lower bound.
    """
    basis = tc_basis(params) if basis is None else basis
    U = tc_floquet(params, basis, dense=False)
    m = magnetization_diagonal(basis)
    psi = basis.basis_vector(params.initial_state)
    M = [float(np.dot(np.abs(psi) ** 2, m))]
    a0 = None
    done = 0
    while done < cap:
        steps = min(chunk, cap - done)
        for _ in range(steps):
            psi = U.apply(psi)
            M.append(float(np.dot(np.abs(psi) ** 2, m)))
        done += steps
        amp = period2_amplitude(M)
        if a0 is None:
            a0 = amp[0]
            if a0 == 0:
                return 0, False
        hit = np.nonzero(amp < 0.5 * a0)[0]
        if len(hit):
            return int(hit[0]), False
    return cap, True


def _melting_point(args):
    params, cap = args
    n, censored = melting_cycle(params, cap)
    return params.T, params.eps, n, censored


def melting_scan(Ts, epss, L: int = 10, cap: int = 100_000, workers=None, **kw):
    """Melting cycle on a (T, eps) grid; also fits ``log n*`` against ``1/T`` per eps.

    Returns ``(table, slopes)`` where ``table`` has columns ``T, eps, n_star,
    censored`` and ``slopes[eps]`` is the least-squares slope over uncensored points.
    """
    jobs = [(TcParams(L=L, T=T, eps=e, **kw), cap) for e in epss for T in Ts]
    rows = ordered_map(_melting_point, jobs, workers)
    T, e, n, c = (np.array(v) for v in zip(*rows))
    table = {"T": T, "eps": e, "n_star": n.astype(np.int64), "censored": c.astype(bool)}
    slopes = {}
    for eps in epss:
        sel = (e == eps) & ~c & (n > 0)
        if sel.sum() >= 2:
            slopes[eps] = float(np.polyfit(1 / T[sel], np.log(n[sel]), 1)[0])
        else:
            slopes[eps] = float("nan")
    return table, slopes


@dataclass
class CatReport:
    all_cats: bool
    max_defect: float
    pair_labels: np.ndarray
    splittings: np.ndarray
    pi_pair_defect: float


def cat_analysis(params: TcParams, basis: FockBasis | None = None, degeneracy_tol: float = 1e-9) -> CatReport:
    """Check that every Floquet eigenvector is ``(|z> +- |zbar>)/sqrt 2``.

    Inside each degenerate eigenspace the vectors are rotated to diagonalise
    the pair label ``min(z, zbar)``, which removes the arbitrary mixing an
    eigensolver may introduce.
    """
    if params.eps != 0 or params.h_z != 0:
        raise ValueError("cat structure is exact only for a perfect kick and h_z = 0")
    basis = tc_basis(params) if basis is None else basis
    rep = quasienergies(tc_floquet(params, basis, dense=True))
    full = (1 << params.L) - 1
    label = np.minimum(basis.states, basis.states ^ full).astype(float)
    V = rep.vectors.copy()
    eps = rep.eps
    # group by quasienergy on the circle
    order = np.argsort(eps)
    groups, cur = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if eps[b] - eps[a] < degeneracy_tol:
            cur.append(b)
        else:
            groups.append(cur)
            cur = [b]
    groups.append(cur)
    if len(groups) > 1 and eps[order[0]] + 2 * np.pi / params.T - eps[order[-1]] < degeneracy_tol:
        groups[0] = groups[-1] + groups[0]
        groups.pop()
    for g in groups:
        sub = V[:, g]
        K = sub.conj().T @ (label[:, None] * sub)
        _, R = np.linalg.eigh(K)
        V[:, g] = sub @ R
    target = 1 / np.sqrt(2)
    defects = np.empty(V.shape[1])
    labels = np.empty(V.shape[1], dtype=np.int64)
    for i in range(V.shape[1]):
        a = np.abs(V[:, i])
        top = np.argsort(a)[-2:]
        z = basis.states[top]
        pair_ok = (z[0] ^ z[1]) == full
        rest = np.delete(a, top)
        defects[i] = max(np.max(np.abs(a[top] - target)), np.max(rest, initial=0.0)) if pair_ok else 1.0
        labels[i] = min(z)
    uniq = np.unique(labels)
    split = np.empty(len(uniq))
    for k, lab in enumerate(uniq):
        e = np.sort(eps[labels == lab])
        split[k] = (e[-1] - e[0]) if len(e) == 2 else np.nan
    half = np.pi / params.T
    pi_def = float(np.nanmax(np.abs(split - half))) if len(split) else 0.0
    if np.any(np.isnan(split)):
        pi_def = np.inf
    return CatReport(bool(np.all(defects < 1e-8)), float(defects.max()), uniq, split, pi_def)
