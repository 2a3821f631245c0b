"""Scar models: the spin-one XY chain with its bimagnon tower, and the driven PXP chain.

Spin-half sites store ``1`` for up (excited) and ``0`` for down; the PXP
projector ``P`` picks the down state.  Spin-one sites store ``m + 1``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import BlockadeOBC, BlockadePBC, ConstraintKind, FockBasis, FullSpinOne, build_basis
from .ed import (
    EigenReport,
    assemble,
    entanglement_entropy,
    floquet_squarepulse,
    lookup_targets,
    quasienergies,
    require_hermitian,
)
from .errors import ConsistencyError
from .hsf import Boundary
from .io import TimeSeries

__all__ = [
    "PulseOrder",
    "PxpParams",
    "XyParams",
    "bimagnon_tower",
    "eigenstate_scan",
    "fidelity_run",
    "hf3_amplitude",
    "ladder_coefficients",
    "neel_state",
    "pxp_basis",
    "pxp_floquet",
    "pxp_hamiltonian",
    "pxp_hf1",
    "pxp_hf3",
    "sigma_tilde",
    "su2_closure_defect",
    "staggered_triple",
    "su2_generators",
    "vacuum_state",
    "xy_hamiltonian",
]


# ================================================================ spin-one XY


@dataclass(frozen=True)
class XyParams:
    L: int
    J: float = 1.0
    B0: float = 1.0
    bc: Boundary = Boundary.OBC

    def __post_init__(self):
        object.__setattr__(self, "bc", Boundary(self.bc))
        if not 2 <= self.L <= 8:
            raise ValueError(f"spin-one chain limited to 2 <= L <= 8, got {self.L}")


def _spin_one_basis(params):
    return build_basis(params.L, FullSpinOne)


def _raise_site(basis, j, amount=1):
    """Sources and targets of ``m_j -> m_j + amount`` (staying within ``|m| <= 1``)."""
    v = basis.site(j)
    src = np.nonzero(v + amount <= 2)[0]
    dst = lookup_targets(basis, basis.states[src] + (amount << (2 * j)))
    return src, dst, v[src]


def xy_hamiltonian(params: XyParams, basis: FockBasis | None = None) -> sp.csr_matrix:
    """``-J sum (S_i^+ S_j^- + h.c.) - B_0 sum S^z`` with ``S^+- = (S^x +- i S^y)/2``.

    With that normalisation each nearest-neighbour exchange has amplitude
    ``(sqrt 2 / 2)^2 = 1/2``.
    """
    basis = _spin_one_basis(params) if basis is None else basis
    if basis.constraint.kind is not ConstraintKind.SPIN_ONE:
        raise ValueError("the XY chain needs a spin-one basis")
    L = params.L
    bonds = [(j, (j + 1) % L) for j in range(L if params.bc is Boundary.PBC and L > 2 else L - 1)]
    rows, cols, vals = [], [], []
    for i, j in bonds:
        vi, vj = basis.site(i), basis.site(j)
        src = np.nonzero((vi < 2) & (vj > 0))[0]
        dst = lookup_targets(basis, basis.states[src] + (1 << (2 * i)) - (1 << (2 * j)))
        amp = np.full(len(src), -params.J * 0.5, dtype=complex)
        rows += [dst, src]
        cols += [src, dst]
        vals += [amp, amp]
    mz = sum(basis.site(j) - 1 for j in range(L)).astype(float)
    H = assemble(basis.dim, rows, cols, vals) + sp.diags(-params.B0 * mz)
    return require_hermitian(sp.csr_matrix(H), 1e-12, "XY Hamiltonian")


def su2_generators(params: XyParams, basis: FockBasis | None = None):
    """``(J_+, J_-, J_z)`` with ``J_+ = sum_l (-1)^l (S_l^+)^2 / 2``.

    Here ``S^+`` is the ordinary raising operator, so ``(S^+)^2/2`` takes
    ``m = -1`` to ``m = +1`` with unit amplitude and ``J_z = sum S^z / 2``.
    """
    basis = _spin_one_basis(params) if basis is None else basis
    rows, cols, vals = [], [], []
    for l in range(params.L):
        src, dst, _ = _raise_site(basis, l, amount=2)
        rows.append(dst)
        cols.append(src)
        vals.append(np.full(len(src), (-1.0) ** l, dtype=complex))
    Jp = assemble(basis.dim, rows, cols, vals)
    Jm = Jp.conj().T.tocsr()
    Jz = sp.csr_matrix(0.5 * (Jp @ Jm - Jm @ Jp))
    return Jp, Jm, Jz


def bimagnon_tower(params: XyParams, basis: FockBasis | None = None):
    """The ``L + 1`` normalised states ``(J_+)^n |G>``, ``|G> = |-1, ..., -1>``.

    Raises
    ------
    ValueError
        On a periodic ring of odd length, where the staggered sign of ``J_+``
        clashes across the wrap bond and the states are not eigenstates.
    """
    if params.bc == Boundary.PBC and params.L % 2:
        raise ValueError(f"staggered tower needs an even ring, got L = {params.L}")
    basis = _spin_one_basis(params) if basis is None else basis
    Jp, _, _ = su2_generators(params, basis)
    state = basis.basis_vector(0)
    tower = [state]
    for n in range(1, params.L + 1):
        state = Jp @ state
        nrm = np.linalg.norm(state)
        if nrm < 1e-12:
            raise ConsistencyError(f"tower terminated early at n = {n}")
        state = state / nrm
        tower.append(state)
    if np.linalg.norm(Jp @ state) > 1e-10:
        raise ConsistencyError("J_+ does not annihilate the top of the tower")
    return tower


def ladder_coefficients(L: int) -> np.ndarray:
    """Spin-``L/2`` raising coefficients ``sqrt(j(j+1) - m(m+1))`` for ``m = -j .. j-1``."""
    j = L / 2
    m = np.arange(L) - j
    return np.sqrt(j * (j + 1) - m * (m + 1))


# ================================================================ PXP chain


class PulseOrder(str, enum.Enum):
    PLUS_FIRST = "plus_first"
    MINUS_FIRST = "minus_first"


@dataclass(frozen=True)
class PxpParams:
    """Driven PXP chain.

    The longitudinal field ``lambda(t)`` is ``+lambda_0/2`` on the first half
    period and ``-lambda_0/2`` on the second (``PLUS_FIRST``), so a spin flip
    costs ``+-lambda_0``.  ``MINUS_FIRST`` swaps the halves.
    """

    L: int
    lambda0: float
    omega: float
    Omega: float = 1.0
    bc: Boundary = Boundary.OBC
    order: PulseOrder = PulseOrder.PLUS_FIRST

    def __post_init__(self):
        object.__setattr__(self, "bc", Boundary(self.bc))
        object.__setattr__(self, "order", PulseOrder(self.order))
        if self.L < 3:
            raise ValueError("L must be >= 3")
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    @property
    def is_special(self) -> bool:
        r = self.lambda0 * self.period / (4 * np.pi)
        return r > 0.5 and abs(r - round(r)) < 1e-9

    @classmethod
    def special(cls, L, lambda0, n=1, **kw) -> "PxpParams":
        """Drive frequency with ``lambda_0 T = 4 n pi``."""
        return cls(L=L, lambda0=lambda0, omega=lambda0 / (2 * n), **kw)


def pxp_basis(params_or_L, bc=None) -> FockBasis:
    if isinstance(params_or_L, PxpParams):
        L, bc = params_or_L.L, params_or_L.bc
    else:
        L, bc = params_or_L, Boundary(bc or Boundary.OBC)
    return build_basis(L, BlockadePBC if bc is Boundary.PBC else BlockadeOBC)


def _periodic(basis):
    return basis.constraint.kind is ConstraintKind.BLOCKADE_PBC


def _neighbours(basis, j):
    L = basis.L
    if _periodic(basis):
        return [(j - 1) % L, (j + 1) % L]
    return [k for k in (j - 1, j + 1) if 0 <= k < L]


def sigma_tilde(basis: FockBasis, j: int, raising: bool = True) -> sp.csr_matrix:
    """``P_{j-1} sigma^+-_j P_{j+1}`` (an absent open-chain neighbour has no projector)."""
    if basis.constraint.kind not in (ConstraintKind.BLOCKADE_OBC, ConstraintKind.BLOCKADE_PBC):
        raise ValueError("projected spin flips need a blockade basis")
    free = np.ones(basis.dim, dtype=bool)
    for k in _neighbours(basis, j):
        free &= basis.site(k) == 0
    v = basis.site(j)
    src = np.nonzero(free & (v == (0 if raising else 1)))[0]
    dst = lookup_targets(basis, basis.states[src] ^ (1 << j))
    return assemble(basis.dim, [dst], [src], [np.ones(len(src))])


def _sigma_z(basis):
    return [2.0 * basis.site(j) - 1 for j in range(basis.L)]


def pxp_hamiltonian(Omega: float, lam: float, basis: FockBasis) -> sp.csr_matrix:
    """``sum_j (-lambda sigma^z_j + Omega P sigma^x_j P)`` on a blockade basis."""
    sx = sum(sigma_tilde(basis, j) for j in range(basis.L))
    sx = sx + sx.T
    sz = sum(_sigma_z(basis))
    H = Omega * sx + sp.diags(-lam * sz)
    return require_hermitian(sp.csr_matrix(H, dtype=complex), 1e-12, "PXP Hamiltonian")


def _half_fields(params):
    half = 0.5 * params.lambda0
    return (half, -half) if params.order is PulseOrder.PLUS_FIRST else (-half, half)


def pxp_floquet(params: PxpParams, basis: FockBasis | None = None, dense: bool | None = None):
    basis = pxp_basis(params) if basis is None else basis
    first, second = _half_fields(params)
    return floquet_squarepulse(
        pxp_hamiltonian(params.Omega, first, basis),
        pxp_hamiltonian(params.Omega, second, basis),
        params.period, basis, dense,
    )


def pxp_hf1(params: PxpParams, basis: FockBasis | None = None) -> sp.csr_matrix:
    """``Omega sinc(lambda_0 T/4) e^{-i lambda_0 T/4} sum_j sigma~^+_j + h.c.``

    The phase is conjugated for ``MINUS_FIRST``.
    """
    basis = pxp_basis(params) if basis is None else basis
    th = params.lambda0 * params.period / 4
    c = params.Omega * np.sinc(th / np.pi) * np.exp(-1j * th)
    if params.order is PulseOrder.MINUS_FIRST:
        c = np.conj(c)
    A = c * sum(sigma_tilde(basis, j) for j in range(basis.L))
    return require_hermitian(sp.csr_matrix(A + A.conj().T), 1e-12, "H_F^(1)")


_SERIES_BELOW = 0.5


def _hf3_bracket(theta):
    if abs(theta) < _SERIES_BELOW:
        # the bracket starts at theta^4/32; the closed form cancels O(1) terms,
        # so below the switch-over sum the Taylor series instead
        total = 0j
        fact = 1.0
        for m in range(1, 40):
            fact *= m
            if m < 4:
                continue
            c = (1.5j) ** m + 3 * (0.5j) ** m + 3j * m * (0.5j) ** (m - 1) - 6 * (1j) ** m
            total += c / fact * theta**m
        return total
    return (
        np.exp(1.5j * theta) + 3 * np.exp(0.5j * theta) * (1 + 1j * theta)
        + 2 * (1 - 3 * np.exp(1j * theta))
    )


def hf3_amplitude(params: PxpParams) -> complex:
    """``A_0 = bracket(lambda_0 T) Omega^3 e^{-i lambda_0 T} / (3 i lambda_0^3 T)``.

    Finite as ``lambda_0 -> 0`` (the bracket vanishes as ``theta^4``).
    """
    T = params.period
    theta = params.lambda0 * T
    Om = params.Omega
    if abs(theta) < _SERIES_BELOW:
        # bracket / lambda_0^3 = T^3 * (bracket / theta^3)
        b = _hf3_bracket(theta)
        ratio = b / theta**3 if theta != 0 else 0.0
        a = ratio * T**3 * Om**3 * np.exp(-1j * theta) / (3j * T)
    else:
        a = _hf3_bracket(theta) * Om**3 * np.exp(-1j * theta) / (3j * params.lambda0**3 * T)
    return np.conj(a) if params.order is PulseOrder.MINUS_FIRST else a


def pxp_hf3(params: PxpParams, basis: FockBasis | None = None, form: str = "derived") -> sp.csr_matrix:
    """Third-order Floquet term.

    ``form="undressed"``:  ``sum_j A_0 [(s+_{j-1} s+_{j+1} + s+_{j+1} s+_{j-1}) s-_j - 6 s+_j] + h.c.``
    with ``s = sigma~``.

    ``form="derived"``: ``-sum_j A_0 [(...) s-_j - 6 s+_j + 2 (n_{j-2} + n_{j+2}) s+_j] + h.c.``,
    the combination that matches ``i log U / T - H_F^(1)`` at third order
    (opposite overall sign, plus a density-dressed flip from the constraint).
    """
    if form not in ("derived", "undressed"):
        raise ValueError(f"unknown form {form!r}")
    basis = pxp_basis(params) if basis is None else basis
    L = basis.L
    pbc = _periodic(basis)
    sp_ = [sigma_tilde(basis, j) for j in range(L)]
    sm_ = [m.T.tocsr() for m in sp_]
    dens = [basis.site(j).astype(float) for j in range(L)]

    def site(k):
        if pbc:
            return k % L
        return k if 0 <= k < L else None

    M = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for j in range(L):
        term = -6 * sp_[j]
        jm, jp = site(j - 1), site(j + 1)
        if jm is not None and jp is not None:
            term = term + (sp_[jm] @ sp_[jp] + sp_[jp] @ sp_[jm]) @ sm_[j]
        if form == "derived":
            for k in (site(j - 2), site(j + 2)):
                if k is not None:
                    term = term + 2 * sp.diags(dens[k]) @ sp_[j]
            term = -term
        M = M + term
    A = hf3_amplitude(params) * M
    return require_hermitian(sp.csr_matrix(A + A.conj().T), 1e-10, "H_F^(3)")


def neel_state(basis: FockBasis, offset: int = 0) -> np.ndarray:
    """``|up, down, up, ...>`` (``offset=1`` starts with down)."""
    return basis.basis_vector(sum(1 << j for j in range(offset, basis.L, 2)))


def vacuum_state(basis: FockBasis) -> np.ndarray:
    return basis.basis_vector(0)


def fidelity_run(params: PxpParams, initial: str = "Z2", n_cycles: int = 200, basis=None) -> TimeSeries:
    """``F(n) = |<psi(nT)|psi(0)>|`` for ``initial`` in {"Z2", "vacuum"}."""
    basis = pxp_basis(params) if basis is None else basis
    if initial == "Z2":
        psi0 = neel_state(basis)
    elif initial == "vacuum":
        psi0 = vacuum_state(basis)
    else:
        raise ValueError(f"unknown initial state {initial!r}")
    U = pxp_floquet(params, basis)
    F = U.trajectory(psi0, n_cycles, lambda psi: abs(np.vdot(psi, psi0)))
    return TimeSeries(n=np.arange(n_cycles + 1), F=np.array(F))


def su2_closure_defect(basis: FockBasis) -> float:
    """``max |[H_+, H_-] - (S_z + O_z)|`` with ``H_+ = sum_j (s+_{2j} + s-_{2j-1})``.

    Here ``s+- = P (sigma^x +- i sigma^y) P``, twice the unit-amplitude flip;
    with unit flips the commutator is a quarter of ``S_z + O_z``.  The
    identity is exact on even rings; open chains pick up edge terms.
    """
    L = basis.L
    pbc = _periodic(basis)
    if pbc and L % 2:
        raise ValueError("the staggered construction needs even L on a ring")
    sp_ = [2 * sigma_tilde(basis, j) for j in range(L)]
    Hp = sum(sp_[j] if j % 2 == 0 else sp_[j].T for j in range(L))
    Hm = Hp.conj().T
    sz = _sigma_z(basis)
    Sz = sum((-1) ** j * sz[j] for j in range(L))
    Oz = staggered_triple(basis)
    C = (Hp @ Hm - Hm @ Hp) - sp.diags(Sz + Oz)
    return float(abs(C).max()) if C.nnz else 0.0


def staggered_triple(basis: FockBasis) -> np.ndarray:
    """Diagonal of ``O_z = sum_j (-1)^j sigma^z_{j-1} sigma^z_j sigma^z_{j+1}``.

    On an open chain only sites with both neighbours contribute.
    """
    L = basis.L
    sz = _sigma_z(basis)
    js = range(L) if _periodic(basis) else range(1, L - 1)
    return sum((-1) ** j * sz[(j - 1) % L] * sz[j] * sz[(j + 1) % L] for j in js)


def eigenstate_scan(U, basis: FockBasis, pairs=((1, 3),)) -> EigenReport:
    """Quasienergies with ``S_half``, ``ov_Z2``, ``ov_0`` and ``O22 = <n_2 n_4>`` columns.

    Site labels in ``pairs`` count from 1, so ``(1, 3)`` is the second and fourth site.
    """
    rep = quasienergies(U)
    V = rep.vectors
    LA = basis.L // 2
    rep.add("S_half", [entanglement_entropy(V[:, i] / np.linalg.norm(V[:, i]), basis, LA) for i in range(len(rep))])
    rep.add("ov_Z2", rep.overlaps(neel_state(basis)))
    rep.add("ov_0", rep.overlaps(vacuum_state(basis)))
    for a, b in pairs:
        name = "O22" if (a, b) == (1, 3) else f"O_{a}_{b}"
        rep.add(name, rep.expectation((basis.site(a) * basis.site(b)).astype(float)))
    return rep
