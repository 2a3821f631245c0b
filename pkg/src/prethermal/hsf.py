"""Driven spinless-fermion chain with nearest and next-nearest density interactions.

    H(t) = -J sum_j (c_j^dag c_{j+1} + h.c.) + sum_j n_j [(V_0 + V(t)) n_{j+1} + V_2 n_{j+2}]

with a square pulse ``V(t) = -V_1`` on the first half period and ``+V_1`` on
the second.  When ``gamma_1 = V_1 T / 4`` is a multiple of pi, hops that change
the number of nearest-neighbour pairs drop out of the first-order Floquet
Hamiltonian and the half-filled sector shatters into many disconnected
fragments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .basis import ConstraintKind, FockBasis, NumberSector, build_basis
from .ed import (
    assemble,
    commutator_norm,
    entanglement_entropy,
    floquet_squarepulse,
    lookup_targets,
    page_value,
    quasienergies,
    require_hermitian,
)
from .io import TimeSeries, write_csv

__all__ = [
    "Boundary",
    "FragmentDecomposition",
    "HsfParams",
    "autocorrelator",
    "cdw_state",
    "conservation_check",
    "density_pair_operator",
    "entanglement_run",
    "fragments",
    "hsf_basis",
    "hsf_floquet",
    "hsf_hf1",
    "hsf_static_hamiltonian",
    "threshold_cycle",
]


class Boundary(str, enum.Enum):
    PBC = "pbc"
    OBC = "obc"


@dataclass(frozen=True)
class HsfParams:
    """Chain parameters; ``T = 2 pi / omega``, ``gamma_1 = V_1 T / 4``."""

    L: int
    V1: float
    omega: float
    N: int | None = None
    J: float = 1.0
    V0: float = 1.0
    V2: float = 0.5
    bc: Boundary = Boundary.PBC

    def __post_init__(self):
        object.__setattr__(self, "bc", Boundary(self.bc))
        if self.N is None:
            object.__setattr__(self, "N", self.L // 2)
        if self.L < 4:
            raise ValueError("L must be >= 4")
        if not 0 <= self.N <= self.L:
            raise ValueError(f"N must be in [0, L], got {self.N}")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.V1 < 0:
            raise ValueError("V1 must be non-negative")

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    @property
    def gamma1(self) -> float:
        return self.V1 * self.period / 4

    @property
    def is_special(self) -> bool:
        r = self.gamma1 / np.pi
        return r > 0.5 and abs(r - round(r)) < 1e-9

    @classmethod
    def at_ratio(cls, L, V1, ratio, **kw) -> "HsfParams":
        """Parameters with ``omega / V_1 = ratio`` (``1/2`` is the first special point)."""
        return cls(L=L, V1=V1, omega=ratio * V1, **kw)


def hsf_basis(params: HsfParams) -> FockBasis:
    return build_basis(params.L, NumberSector(params.N))


def _bonds(L, bc, reach):
    return [(j, (j + reach) % L) for j in range(L if bc is Boundary.PBC else L - reach)]


def _density(basis, j, L, bc):
    # a site outside an open chain is empty
    if 0 <= j < L:
        return basis.site(j)
    if bc is Boundary.PBC:
        return basis.site(j % L)
    return np.zeros(basis.dim, dtype=np.int64)


def _diagonal(params, basis, V):
    d = np.zeros(basis.dim)
    for j, k in _bonds(params.L, params.bc, 1):
        d += (params.V0 + V) * basis.site(j) * basis.site(k)
    for j, k in _bonds(params.L, params.bc, 2):
        d += params.V2 * basis.site(j) * basis.site(k)
    return d


def _hops(params, basis, amplitude):
    """Matrix of ``sum_j t_j c_j^dag c_{j+1} + h.c.``.

    ``amplitude(j, cols)`` gives ``t_j`` for the source states ``cols`` (site
    ``j+1`` occupied, ``j`` empty).
    """
    _check_number_basis(basis)
    L, N = params.L, params.N
    rows, cols, vals = [], [], []
    for j, k in _bonds(L, params.bc, 1):
        src = np.nonzero((basis.site(k) == 1) & (basis.site(j) == 0))[0]
        if not len(src):
            continue
        dst = lookup_targets(basis, basis.states[src] ^ ((1 << j) | (1 << k)))
        # the hop across the periodic seam passes the other N-1 fermions
        sign = (-1) ** (N - 1) if k < j else 1
        t = sign * amplitude(j, src)
        rows += [dst, src]
        cols += [src, dst]
        vals += [t, np.conj(t)]
    return assemble(basis.dim, rows, cols, vals)


def _check_number_basis(basis):
    if basis.constraint.kind is not ConstraintKind.NUMBER:
        raise ValueError("the fermion chain lives in a particle-number sector")


def hsf_static_hamiltonian(params: HsfParams, basis: FockBasis, V: float) -> sp.csr_matrix:
    """``H`` with the drive frozen at ``V`` (pass ``-V1`` or ``+V1`` for the two halves)."""
    _check_number_basis(basis)
    H = _hops(params, basis, lambda j, src: np.full(len(src), -params.J, dtype=complex))
    H = H + sp.diags(_diagonal(params, basis, V))
    return require_hermitian(sp.csr_matrix(H), 1e-12, "static Hamiltonian")


def hsf_floquet(params: HsfParams, basis: FockBasis | None = None, dense: bool | None = None):
    """``U(T,0) = exp(-i H[+V_1] T/2) exp(-i H[-V_1] T/2)``."""
    basis = hsf_basis(params) if basis is None else basis
    H_minus = hsf_static_hamiltonian(params, basis, -params.V1)
    H_plus = hsf_static_hamiltonian(params, basis, +params.V1)
    return floquet_squarepulse(H_minus, H_plus, params.period, basis, dense)


def constraint_factor(A, gamma1):
    """``(1 - A^2) + A^2 sin(g)/g exp(i g A)`` for ``A`` in {-1, 0, 1}."""
    A = np.asarray(A, dtype=float)
    alpha = np.sinc(gamma1 / np.pi) * np.exp(1j * gamma1 * A)
    return (1 - A**2) + alpha * A**2


def hsf_hf1(params: HsfParams, basis: FockBasis | None = None, gamma1: float | None = None):
    """First-order Floquet Hamiltonian: density interactions plus hopping dressed by
    ``A_j = n_{j+2} - n_{j-1}``, the change in nearest-neighbour pairs caused by the hop.

    On an open chain a missing neighbour counts as an empty site.
    """
    basis = hsf_basis(params) if basis is None else basis
    g = params.gamma1 if gamma1 is None else gamma1
    L, bc = params.L, params.bc

    def amp(j, src):
        A = _density(basis, j + 2, L, bc)[src] - _density(basis, j - 1, L, bc)[src]
        return -params.J * constraint_factor(A, g)

    H = _hops(params, basis, amp) + sp.diags(_diagonal(params, basis, 0.0))
    return require_hermitian(sp.csr_matrix(H), 1e-10, "first-order Floquet Hamiltonian")


# ---------------------------------------------------------------- fragments


def density_pair_operator(params: HsfParams, basis: FockBasis, staggered: bool = False):
    """``n_d = sum_j n_j n_{j+1}`` or ``n_d^s = sum_j (-1)^j n_j n_{j+1}`` (diagonal)."""
    d = np.zeros(basis.dim)
    for j, k in _bonds(params.L, params.bc, 1):
        d += (-1) ** (j if staggered else 0) * basis.site(j) * basis.site(k)
    return sp.diags(d).tocsr()


def conservation_check(op, params: HsfParams, basis: FockBasis, Q: str) -> float:
    """``max |[op, Q]|`` for ``Q`` in {"n_d", "n_d_s", "N"}."""
    if Q == "n_d":
        Qm = density_pair_operator(params, basis)
    elif Q == "n_d_s":
        Qm = density_pair_operator(params, basis, staggered=True)
    elif Q == "N":
        Qm = sp.diags(sum(basis.site(j) for j in range(basis.L)).astype(float)).tocsr()
    else:
        raise ValueError(f"unknown charge {Q!r}")
    return commutator_norm(op, Qm)


@dataclass
class FragmentDecomposition:
    """Connected components of an operator's off-diagonal graph.

    Fragments are ordered by decreasing dimension, ties broken by their
    smallest basis index, so the partition is reproducible.
    """

    basis: FockBasis
    labels: np.ndarray
    members: list = field(repr=False)

    @property
    def dims(self) -> np.ndarray:
        return np.array([len(m) for m in self.members])

    @property
    def count(self) -> int:
        return len(self.members)

    @property
    def D_L(self) -> int:
        return int(self.dims.max())

    @property
    def D_t(self) -> int:
        return self.basis.dim

    @property
    def ratio(self) -> float:
        return self.D_L / self.D_t

    def fragment_of(self, config: int) -> int:
        return int(self.labels[self.basis.index(config)])

    def report(self, params: HsfParams):
        nd = density_pair_operator(params, self.basis).diagonal()
        nds = density_pair_operator(params, self.basis, staggered=True).diagonal()
        ex = [m[0] for m in self.members]
        return {
            "fragment_id": np.arange(self.count),
            "dim": self.dims,
            "n_d": nd[ex],
            "n_d_s": nds[ex],
            "example_state": [self.basis.bitstring(i) for i in ex],
        }

    def to_csv(self, path, params):
        write_csv(path, self.report(params))


def fragments(op, basis: FockBasis, threshold: float = 1e-12) -> FragmentDecomposition:
    A = abs(sp.csr_matrix(op))
    A.setdiag(0)
    A.data[A.data <= threshold] = 0
    A.eliminate_zeros()
    _, raw = connected_components(A, directed=False)
    groups = {}
    for i, lab in enumerate(raw):
        groups.setdefault(lab, []).append(i)
    members = sorted((np.array(g) for g in groups.values()), key=lambda g: (-len(g), g[0]))
    labels = np.empty(basis.dim, dtype=np.int64)
    for f, g in enumerate(members):
        labels[g] = f
    return FragmentDecomposition(basis, labels, members)


def cdw_state(L: int, offset: int = 0) -> int:
    return sum(1 << j for j in range(offset, L, 2))


# ---------------------------------------------------------------- dynamics


def entanglement_run(params: HsfParams, initial: int, cycles, basis: FockBasis | None = None) -> TimeSeries:
    """Half-chain entropy after ``n`` drive cycles for every ``n`` in ``cycles``.

    Powers of ``U`` come from its eigendecomposition, so sparse, late cycle
    lists are as cheap as early ones.  Columns: ``n, S, S_over_Sp`` where
    ``S_p = page_value(2^{L/2}, 2^{L/2})``, plus ``S_p`` itself.
    """
    basis = hsf_basis(params) if basis is None else basis
    U = hsf_floquet(params, basis, dense=True)
    rep = quasienergies(U)
    cycles = np.asarray(cycles, dtype=np.int64)
    if np.any(cycles < 0):
        raise ValueError("cycle numbers must be non-negative")
    c0 = rep.vectors.conj().T @ basis.basis_vector(initial)
    LA = params.L // 2
    Sp = page_value(2**LA, 2 ** (params.L - LA))
    S = np.empty(len(cycles))
    for i, n in enumerate(cycles):
        psi = rep.vectors @ (np.exp(-1j * rep.eps * params.period * n) * c0)
        S[i] = entanglement_entropy(psi / np.linalg.norm(psi), basis, LA)
    return TimeSeries(n=cycles, S=S, S_over_Sp=S / Sp, S_p=np.full(len(cycles), Sp))


def autocorrelator(params: HsfParams, cycles, site: int | None = None, basis: FockBasis | None = None) -> TimeSeries:
    """Infinite-temperature density autocorrelator of the last site.

    Columns ``C_raw = Tr[n(nT) n]/D``, ``C_connected = C_raw - (N/L)^2`` and
    ``C_sigma = 4 C_connected``, the correlator of ``2n - 1`` (starts at 1).
    """
    basis = hsf_basis(params) if basis is None else basis
    site = params.L - 1 if site is None else site
    U = hsf_floquet(params, basis, dense=True)
    rep = quasienergies(U)
    V = rep.vectors
    nvec = basis.site(site).astype(float)
    W = np.abs(V.conj().T @ (nvec[:, None] * V)) ** 2
    theta = rep.eps * params.period
    cycles = np.asarray(cycles, dtype=np.int64)
    C = np.empty(len(cycles))
    # chunks of cycles keep the phase matrix small
    for lo in range(0, len(cycles), 256):
        ns = cycles[lo : lo + 256]
        Phi = np.exp(1j * np.outer(theta, ns))
        C[lo : lo + 256] = np.real(np.sum(Phi.conj() * (W @ Phi), axis=0)) / basis.dim
    m = params.N / params.L
    conn = C - m * m
    return TimeSeries(n=cycles, C_raw=C, C_connected=conn, C_sigma=4 * conn)


def threshold_cycle(series: TimeSeries, column: str = "C_sigma", level: float = 0.125):
    """First cycle at which ``column`` drops below ``level`` (``None`` if it never does)."""
    below = np.nonzero(series[column] < level)[0]
    return int(series["n"][below[0]]) if len(below) else None
