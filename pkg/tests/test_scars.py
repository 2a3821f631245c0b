import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import blockade_states, expm_hermitian, site_op, spin_one_matrices
from prethermal.scars import (
    PulseOrder,
    PxpParams,
    XyParams,
    bimagnon_tower,
    eigenstate_scan,
    fidelity_run,
    hf3_amplitude,
    ladder_coefficients,
    neel_state,
    pxp_basis,
    pxp_floquet,
    pxp_hamiltonian,
    pxp_hf1,
    pxp_hf3,
    sigma_tilde,
    staggered_triple,
    su2_closure_defect,
    su2_generators,
    xy_hamiltonian,
)

# ---------------------------------------------------------------- spin-one oracle

SX1, SY1, SZ1 = spin_one_matrices()
SPLUS1 = SX1 + 1j * SY1  # ordinary raising operator


def base_three_order(basis):
    """Row of the dense 3^L matrix holding each basis state."""
    return np.array([sum(int(basis.site(j)[i]) * 3**j for j in range(basis.L)) for i in range(basis.dim)])


def xy_dense(L, J, B0, pbc):
    Sp = [site_op(SPLUS1 / 2, j, L, 3) for j in range(L)]
    H = sum(-B0 * site_op(SZ1, j, L, 3) for j in range(L))
    for i in range(L if pbc and L > 2 else L - 1):
        k = (i + 1) % L
        H = H - J * (Sp[i] @ Sp[k].conj().T + Sp[k] @ Sp[i].conj().T)
    return H


def generator_dense(L):
    return sum((-1) ** l * site_op(SPLUS1 @ SPLUS1 / 2, l, L, 3) for l in range(L))


def in_basis(M, order):
    return M[np.ix_(order, order)]


# ---------------------------------------------------------------- PXP oracle

UP = np.diag([0.0, 1.0]).astype(complex)  # bit 1 is the excited state
DOWN = np.eye(2) - UP
FLIP = np.array([[0, 1], [1, 0]], dtype=complex)
SIGZ = UP - DOWN


def pxp_dense(L, Omega, lam, pbc):
    H = np.zeros((2**L, 2**L), dtype=complex)
    for j in range(L):
        term = site_op(FLIP, j, L)
        for k in (j - 1, j + 1):
            if pbc or 0 <= k < L:
                term = site_op(DOWN, k % L, L) @ term
        H += Omega * term - lam * site_op(SIGZ, j, L)
    states = blockade_states(L, pbc)
    return H[np.ix_(states, states)]


class TestXy:
    @pytest.mark.parametrize("bc", ["obc", "pbc"])
    @pytest.mark.parametrize("L", [2, 3, 4])
    def test_matches_dense(self, L, bc):
        p = XyParams(L=L, J=0.7, B0=1.3, bc=bc)
        H = xy_hamiltonian(p)
        from prethermal.scars import _spin_one_basis

        order = base_three_order(_spin_one_basis(p))
        ref = in_basis(xy_dense(L, 0.7, 1.3, bc == "pbc"), order)
        assert np.abs(H.toarray() - ref).max() <= 1e-14

    def test_exchange_amplitude(self):
        H = xy_hamiltonian(XyParams(L=2, J=1.0, B0=0.0)).toarray()
        off = H[np.abs(H) > 1e-12]
        assert np.allclose(np.abs(off), 0.5)

    def test_generators_match_dense(self):
        p = XyParams(L=4)
        from prethermal.scars import _spin_one_basis

        order = base_three_order(_spin_one_basis(p))
        Jp, Jm, Jz = su2_generators(p)
        ref = in_basis(generator_dense(4), order)
        assert np.abs(Jp.toarray() - ref).max() <= 1e-14
        Sz = in_basis(sum(site_op(SZ1, j, 4, 3) for j in range(4)), order)
        assert np.abs(Jz.toarray() - Sz / 2).max() <= 1e-14

    @pytest.mark.parametrize("bc", ["obc", "pbc"])
    @pytest.mark.parametrize("L", [2, 4, 6])
    def test_tower_is_equally_spaced(self, L, bc):
        p = XyParams(L=L, J=1.0, B0=0.8, bc=bc)
        H = xy_hamiltonian(p)
        tower = bimagnon_tower(p)
        assert len(tower) == L + 1
        for n, t in enumerate(tower):
            E = np.vdot(t, H @ t).real
            assert E == pytest.approx(0.8 * (L - 2 * n), abs=1e-12)
            assert np.linalg.norm(H @ t - E * t) <= 1e-10

    @pytest.mark.parametrize("L", [2, 3, 5, 6])
    def test_ladder(self, L):
        p = XyParams(L=L)
        Jp, _, _ = su2_generators(p)
        tower = bimagnon_tower(p)
        measured = [np.linalg.norm(Jp @ t) for t in tower[:-1]]
        assert np.allclose(measured, ladder_coefficients(L), atol=1e-12)

    def test_tower_orthonormal(self):
        T = np.array(bimagnon_tower(XyParams(L=5)))
        assert np.abs(T.conj() @ T.T - np.eye(6)).max() <= 1e-12

    def test_ladder_values(self):
        assert np.allclose(ladder_coefficients(2), [np.sqrt(2), np.sqrt(2)])
        assert np.allclose(ladder_coefficients(4), [2.0, np.sqrt(6), np.sqrt(6), 2.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            XyParams(L=1)
        with pytest.raises(ValueError):
            XyParams(L=9)
        with pytest.raises(ValueError):
            xy_hamiltonian(XyParams(L=4), pxp_basis(4))

    @pytest.mark.parametrize("L", [3, 5])
    def test_odd_ring_has_no_tower(self, L):
        p = XyParams(L=L, bc="pbc")
        with pytest.raises(ValueError):
            bimagnon_tower(p)
        # the staggered states really do fail to be eigenstates there
        from prethermal.scars import _spin_one_basis

        H = xy_hamiltonian(p)
        t = su2_generators(p)[0] @ _spin_one_basis(p).basis_vector(0)
        t = t / np.linalg.norm(t)
        assert np.linalg.norm(H @ t - np.vdot(t, H @ t) * t) > 0.1


class TestPxpHamiltonian:
    @pytest.mark.parametrize("pbc", [False, True])
    @pytest.mark.parametrize("L", [4, 6, 7])
    def test_matches_dense(self, L, pbc):
        b = pxp_basis(L, "pbc" if pbc else "obc")
        H = pxp_hamiltonian(0.9, 0.35, b)
        assert np.abs(H.toarray() - pxp_dense(L, 0.9, 0.35, pbc)).max() <= 1e-14

    def test_sigma_tilde_adjoint(self):
        b = pxp_basis(6, "pbc")
        up, down = sigma_tilde(b, 2), sigma_tilde(b, 2, raising=False)
        assert abs(up.T - down).max() == 0
        with pytest.raises(ValueError):
            from prethermal.basis import FullSpinHalf, build_basis

            sigma_tilde(build_basis(4, FullSpinHalf), 0)

    @pytest.mark.parametrize("order", list(PulseOrder))
    def test_floquet_matches_dense(self, order):
        p = PxpParams(L=6, lambda0=3.0, omega=2.5, order=order)
        s = 1 if order is PulseOrder.PLUS_FIRST else -1
        H1 = pxp_dense(6, 1.0, s * 1.5, False)
        H2 = pxp_dense(6, 1.0, -s * 1.5, False)
        T = p.period
        ref = sla.expm(-0.5j * T * H2) @ sla.expm(-0.5j * T * H1)
        assert np.abs(pxp_floquet(p, dense=True).matrix - ref).max() <= 1e-10

    def test_orders_are_transposes(self):
        a = pxp_floquet(PxpParams(L=8, lambda0=4.0, omega=3.0), dense=True).matrix
        b = pxp_floquet(PxpParams(L=8, lambda0=4.0, omega=3.0, order="minus_first"), dense=True).matrix
        assert np.abs(a.T - b).max() <= 1e-12

    def test_orders_give_equal_fidelity(self):
        kw = dict(L=10, lambda0=15.0, omega=8.5)
        fa = fidelity_run(PxpParams(**kw), n_cycles=40)["F"]
        fb = fidelity_run(PxpParams(order="minus_first", **kw), n_cycles=40)["F"]
        assert np.abs(fa - fb).max() <= 1e-10

    def test_validation(self):
        with pytest.raises(ValueError):
            PxpParams(L=2, lambda0=1.0, omega=1.0)
        with pytest.raises(ValueError):
            PxpParams(L=6, lambda0=1.0, omega=-1.0)
        with pytest.raises(ValueError):
            PxpParams(L=6, lambda0=1.0, omega=1.0, order="sideways")


class TestPxpEffective:
    def test_special_points(self):
        p = PxpParams.special(10, 15.0, 1)
        assert p.is_special and p.lambda0 * p.period == pytest.approx(4 * np.pi)
        assert PxpParams.special(10, 15.0, 3).is_special
        assert not PxpParams(L=10, lambda0=15.0, omega=8.5).is_special

    @pytest.mark.parametrize("n", [1, 2])
    def test_first_order_vanishes_at_special(self, n):
        p = PxpParams.special(8, 15.0, n)
        assert abs(pxp_hf1(p)).max() <= 1e-15

    @pytest.mark.parametrize("theta", [0.9, np.pi / 2])
    def test_effective_hamiltonian_ladder(self, theta):
        """Residuals of ``i log U / T`` at fixed ``lambda_0 T / 4``."""
        r1, r3, rp = [], [], []
        for omega in (16.0, 32.0):
            T = 2 * np.pi / omega
            p = PxpParams(L=8, lambda0=4 * theta / T, omega=omega, bc="pbc")
            b = pxp_basis(p)
            h = 1j * sla.logm(pxp_floquet(p, b, dense=True).matrix) / T
            h1 = pxp_hf1(p, b).toarray()
            r1.append(np.abs(h - h1).max())
            r3.append(np.abs(h - h1 - pxp_hf3(p, b).toarray()).max())
            rp.append(np.abs(h - h1 - pxp_hf3(p, b, form="undressed").toarray()).max())
        assert r1[0] / r1[1] == pytest.approx(4.0, rel=0.1)
        assert r3[0] / r3[1] == pytest.approx(16.0, rel=0.15)
        assert r3[1] < r1[1] / 50
        # the undressed form does not improve on first order
        assert rp[1] > r1[1]

    def test_one_period_operator_error(self):
        # spectral-norm distance of U from exp(-i H T), frozen at L=12 on an open chain
        p = PxpParams(L=12, lambda0=15.0, omega=8.5)
        b = pxp_basis(p)
        U = pxp_floquet(p, b, dense=True).matrix
        h1 = pxp_hf1(p, b).toarray()
        h3 = pxp_hf3(p, b).toarray()
        err = lambda H: np.linalg.norm(U - expm_hermitian(H, p.period), 2)
        assert err(h1) == pytest.approx(0.125366, abs=1e-5)
        assert err(h1 + h3) == pytest.approx(0.023324, abs=1e-5)

    @pytest.mark.parametrize("theta", [1e-3, 0.5])
    def test_amplitude_is_continuous_at_switch_over(self, theta):
        lo = hf3_amplitude(PxpParams(L=6, lambda0=theta * (1 - 1e-9), omega=2 * np.pi))
        hi = hf3_amplitude(PxpParams(L=6, lambda0=theta * (1 + 1e-9), omega=2 * np.pi))
        assert abs(lo - hi) <= 1e-8 * abs(lo)

    @settings(max_examples=50, deadline=None)
    @given(theta=st.floats(1e-4, 3.0))
    def test_amplitude_leading_order(self, theta):
        # the bracket is theta^4/32 + O(theta^5)
        a = hf3_amplitude(PxpParams(L=6, lambda0=theta, omega=2 * np.pi))
        lead = theta**4 / 32 * np.exp(-1j * theta) / (3j * theta**3)
        assert abs(a - lead) <= abs(lead) * 2 * theta

    def test_amplitude_at_zero_field(self):
        assert hf3_amplitude(PxpParams(L=6, lambda0=0.0, omega=1.0)) == 0

    @settings(max_examples=30, deadline=None)
    @given(lam=st.floats(0.01, 40.0), omega=st.floats(1.0, 30.0))
    def test_orders_conjugate(self, lam, omega):
        a = hf3_amplitude(PxpParams(L=6, lambda0=lam, omega=omega))
        b = hf3_amplitude(PxpParams(L=6, lambda0=lam, omega=omega, order="minus_first"))
        assert b == pytest.approx(np.conj(a), rel=1e-12, abs=1e-300)

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            pxp_hf3(PxpParams(L=6, lambda0=1.0, omega=1.0), form="guessed")


class TestSu2:
    @pytest.mark.parametrize("L", [4, 6, 8, 10])
    def test_closes_on_rings(self, L):
        assert su2_closure_defect(pxp_basis(L, "pbc")) <= 1e-12

    def test_open_chain_edges(self):
        assert su2_closure_defect(pxp_basis(8, "obc")) > 0.5

    def test_odd_ring_rejected(self):
        with pytest.raises(ValueError):
            su2_closure_defect(pxp_basis(7, "pbc"))

    def test_triple_on_neel(self):
        b = pxp_basis(6, "pbc")
        i = b.index(0b010101)
        # direct product of the three sigma^z values on each triple
        ref = sum((-1) ** j * np.prod([1 if (0b010101 >> (k % 6)) & 1 else -1 for k in (j - 1, j, j + 1)]) for j in range(6))
        assert staggered_triple(b)[i] == ref


class TestDynamics:
    def test_fidelity_basics(self):
        ts = fidelity_run(PxpParams(L=8, lambda0=15.0, omega=8.5), n_cycles=30)
        assert ts["F"][0] == pytest.approx(1.0)
        assert np.all(ts["F"] <= 1 + 1e-12)
        assert len(ts["n"]) == 31
        with pytest.raises(ValueError):
            fidelity_run(PxpParams(L=8, lambda0=15.0, omega=8.5), initial="Z3")

    def test_fidelity_matches_matrix_power(self):
        p = PxpParams(L=8, lambda0=6.0, omega=5.0, bc="pbc")
        b = pxp_basis(p)
        U = pxp_floquet(p, b, dense=True).matrix
        psi0 = neel_state(b)
        F = fidelity_run(p, "Z2", 12, b)["F"]
        for n in (1, 5, 12):
            ref = abs(np.vdot(np.linalg.matrix_power(U, n) @ psi0, psi0))
            assert F[n] == pytest.approx(ref, abs=1e-9)

    def test_vacuum_start(self):
        F = fidelity_run(PxpParams(L=8, lambda0=15.0, omega=8.5), "vacuum", 5)["F"]
        assert F[0] == pytest.approx(1.0)

    def test_eigenstate_scan(self):
        p = PxpParams(L=8, lambda0=15.0, omega=8.5)
        b = pxp_basis(p)
        rep = eigenstate_scan(pxp_floquet(p, b, dense=True), b)
        assert list(rep.columns) == ["S_half", "ov_Z2", "ov_0", "O22"]
        assert np.sum(rep.columns["ov_Z2"]) == pytest.approx(1.0)
        assert np.sum(rep.columns["ov_0"]) == pytest.approx(1.0)
        assert np.all((rep.columns["O22"] >= -1e-12) & (rep.columns["O22"] <= 1 + 1e-12))
        assert np.all(rep.columns["S_half"] <= 4 * np.log(2))
