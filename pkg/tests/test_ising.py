import warnings

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import special
from scipy.integrate import solve_ivp

from oracles import bdg_fock_state, reduced_density_matrix, vn_entropy
from prethermal.drive import DriveProtocol, special_frequency
from prethermal.errors import ConsistencyError, ConvergenceError
from prethermal.ising import (
    InitialState,
    IsingChainParams,
    alpha_scan,
    bloch_hamiltonian,
    entanglement_entropy,
    evolve_mode_period,
    gaussian_entropy,
    hf1_mode,
    hf2_mode,
    initial_modes,
    magnetization,
    momentum_grid,
    stroboscopic_run,
)

TZ = np.diag([1.0, -1.0]).astype(complex)
TX = np.array([[0, 1], [1, 0]], dtype=complex)


def chain(L=8, h1=20.0, hs=0.1, omega=40.0, gamma=0.0, kind="cosine", J=1.0):
    return IsingChainParams(L, DriveProtocol.from_omega(kind, h1, omega, offset=hs, gamma=gamma), J=J)


def propagator_by_ode(k, p):
    """U_k(T, 0) from an adaptive Runge-Kutta solve of i dU/dt = H_k(t) U."""

    def rhs(t, y):
        U = y.reshape(2, 2)
        return (-1j * bloch_hamiltonian(k, t, p) @ U).ravel()

    sol = solve_ivp(rhs, (0, p.period), np.eye(2, dtype=complex).ravel(), method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[:, -1].reshape(2, 2)


def hf1_by_hand(k, p):
    # 2 [tau_z (h_s - cos k + i gamma) + tau_x J_0(4 h_1 / omega) sin k]
    mu = 4 * p.h_1 / p.drive.omega
    return 2 * (TZ * (p.h_s - np.cos(k) + 1j * p.gamma) + TX * special.j0(mu) * np.sin(k))


def effective_hamiltonian(U, T):
    return 1j * sla.logm(U) / T


class TestGrid:
    def test_small(self):
        assert np.allclose(momentum_grid(4), [np.pi / 4, 3 * np.pi / 4])
        g = momentum_grid(8)
        assert len(g) == 4 and g.max() == pytest.approx(7 * np.pi / 8)

    @given(st.integers(2, 500).map(lambda m: 2 * m))
    def test_properties(self, L):
        g = momentum_grid(L)
        assert len(g) == L // 2
        assert np.all(np.diff(g) > 0) and g[0] > 0 and g[-1] < np.pi
        assert np.sum(np.full(len(g), 2 / L)) == pytest.approx(1.0)

    def test_rejects_odd(self):
        with pytest.raises(ValueError):
            momentum_grid(5)
        with pytest.raises(ValueError):
            chain(L=7)


class TestBloch:
    def test_half_filling_point(self):
        # h_s + h_1 cos(omega t) = 0 at omega t = pi/2 when h_s = 0
        p = chain(hs=0.0, omega=2.0)
        H = bloch_hamiltonian(np.pi / 2, np.pi / 4, p)
        assert np.allclose(H, 2 * TX, atol=1e-12)

    def test_small_k(self):
        H = bloch_hamiltonian(1e-9, 0.3, chain())
        assert abs(H[0, 1]) < 1e-8

    @settings(max_examples=50, deadline=None)
    @given(k=st.floats(0.01, 3.1), t=st.floats(0, 10), g=st.floats(0.0, 2.0))
    def test_hermitian_part(self, k, t, g):
        H = bloch_hamiltonian(k, t, chain(gamma=g))
        assert np.allclose((H - H.conj().T) / 2, 2j * g * TZ, atol=1e-12)


class TestPropagator:
    def test_unitary(self):
        p = chain(L=50)
        U = evolve_mode_period(momentum_grid(50), p)
        err = np.abs(np.conj(np.swapaxes(U, 1, 2)) @ U - np.eye(2)).max()
        assert err <= 1e-9
        assert np.abs(np.abs(np.linalg.det(U)) - 1).max() <= 1e-10

    def test_static_closed_form(self):
        p = chain(h1=0.0, hs=0.7, omega=3.0)
        for k in momentum_grid(8):
            ref = sla.expm(-1j * p.period * bloch_hamiltonian(k, 0.0, p))
            assert np.abs(evolve_mode_period(k, p) - ref).max() <= 1e-9

    @pytest.mark.parametrize("omega,gamma", [(40.0, 0.0), (9.0, 0.0), (14.0, 0.3)])
    def test_against_ode(self, omega, gamma):
        p = chain(omega=omega, gamma=gamma)
        for k in (0.3, 1.7):
            assert np.abs(evolve_mode_period(k, p) - propagator_by_ode(k, p)).max() <= 1e-8

    def test_midpoint_agrees(self):
        p = chain(omega=30.0)
        a = evolve_mode_period(0.9, p, method="cf4")
        b = evolve_mode_period(0.9, p, method="midpoint")
        assert np.abs(a - b).max() <= 1e-8

    def test_square_pulse_exact(self):
        p = chain(kind="square", h1=3.0, omega=5.0)
        k = 0.8
        T = p.period
        ref = sla.expm(-1j * T / 2 * bloch_hamiltonian(k, 0.75 * T, p)) @ sla.expm(
            -1j * T / 2 * bloch_hamiltonian(k, 0.25 * T, p)
        )
        assert np.abs(evolve_mode_period(k, p) - ref).max() <= 1e-12

    def test_non_convergence(self):
        with pytest.raises(ConvergenceError):
            evolve_mode_period(1.0, chain(omega=1.0), steps=1, max_steps=4)

    def test_hf1_accuracy_improves(self):
        # fixed mu = 4 h_1 / omega, so only the expansion parameter 1/omega changes
        mu = 2.0
        ks = momentum_grid(20)
        errs = []
        for omega in (50.0, 100.0, 200.0):
            p = chain(h1=mu * omega / 4, omega=omega)
            U = evolve_mode_period(ks, p)
            V = np.array([sla.expm(-1j * p.period * h) for h in hf1_mode(ks, p)])
            errs.append(np.linalg.norm(U - V, ord=2, axis=(1, 2)).max())
        assert errs[0] > errs[1] > errs[2]
        assert errs[1] / errs[0] <= 0.55 and errs[2] / errs[1] <= 0.55


class TestFloquetTerms:
    def test_hf1_generic_entries(self):
        p = chain(hs=0.1, h1=20.0, omega=40.0)
        assert np.abs(hf1_mode(1.0, p) - hf1_by_hand(1.0, p)).max() <= 1e-12

    def test_hf1_no_drive(self):
        p = chain(h1=0.0, hs=0.3)
        assert np.allclose(hf1_mode(np.pi / 2, p), 2 * 0.3 * TZ + 2 * TX, atol=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_hf1_commutes_with_tau_z_at_special(self, n):
        p0 = chain()
        p = p0.with_drive(period=2 * np.pi / special_frequency(p0.drive, n))
        H = hf1_mode(momentum_grid(100), p)
        assert np.abs(H @ TZ - TZ @ H).max() <= 1e-9

    def test_hf1_symmetry_broken_off_special(self):
        p0 = chain()
        p = p0.with_drive(period=2 * np.pi / (1.2 * special_frequency(p0.drive, 1)))
        H = hf1_mode(momentum_grid(100), p)
        assert np.abs(H @ TZ - TZ @ H).max() > 1e-6

    def test_hf2_scaling(self):
        mu = 2.0
        r = []
        for omega in (200.0, 400.0):
            p = chain(h1=mu * omega / 4, omega=omega)
            r.append(np.linalg.norm(hf2_mode(1.1, p)) / np.linalg.norm(hf1_mode(1.1, p)))
        assert r[1] / r[0] == pytest.approx(0.5, rel=0.2)

    def test_hf2_breaks_symmetry_at_special(self):
        p0 = chain()
        p = p0.with_drive(period=2 * np.pi / special_frequency(p0.drive, 1))
        assert abs(hf2_mode(1.0, p)[0, 1]) > 1e-6

    def test_hf2_vanishes_without_drive(self):
        assert np.abs(hf2_mode(0.7, chain(h1=1e-14))).max() <= 1e-12

    def test_hf2_unit_block_is_quarter(self):
        p = chain(omega=60.0)
        assert np.allclose(hf2_mode(0.4, p, form="derived"), 4 * hf2_mode(0.4, p, form="unit_block"), atol=1e-15)

    def test_hf2_truncation_converged(self):
        p = chain(omega=60.0)
        assert np.abs(hf2_mode(0.4, p) - hf2_mode(0.4, p, n_max=200)).max() <= 1e-12

    # frozen from the logm oracle below (mu = 0.4, h_s = 0.1, k = 1.1); falls as 1/omega^2
    HF2_RESIDUAL = {200.0: 6.585e-5, 400.0: 1.625e-5, 800.0: 4.038e-6}

    @pytest.mark.parametrize("omega", [200.0, 400.0, 800.0])
    def test_hf2_matches_log_of_propagator(self, omega):
        p = chain(h1=0.4 * omega / 4, omega=omega)
        k = 1.1
        Heff = effective_hamiltonian(evolve_mode_period(k, p, tol=1e-13), p.period)
        resid = np.abs(Heff - hf1_mode(k, p) - hf2_mode(k, p)).max()
        assert resid == pytest.approx(self.HF2_RESIDUAL[omega], rel=0.02)
        # the unit-block normalisation leaves a second-order error behind
        unit_block = np.abs(Heff - hf1_mode(k, p) - hf2_mode(k, p, form="unit_block")).max()
        assert unit_block > 10 * resid


class TestDynamics:
    def test_static_ground_state(self):
        p = chain(L=40, h1=0.0, hs=3.0, omega=2.0)
        ts = stroboscopic_run(p, 50)
        assert np.ptp(ts["M_z"]) <= 1e-8

    def test_all_down(self):
        p = chain(L=10)
        assert magnetization(initial_modes(p, InitialState.ALL_DOWN)) == -1.0

    def test_columns(self):
        ts = stroboscopic_run(chain(L=10), 4, entropy_every=2)
        assert set(ts.columns) == {"n", "t", "M_z", "S_half", "norm_loss"}
        assert np.isnan(ts["S_half"][1]) and not np.isnan(ts["S_half"][2])
        assert np.abs(ts["norm_loss"]).max() <= 1e-12

    def test_non_hermitian_loses_norm(self):
        ts = stroboscopic_run(chain(L=10, gamma=0.2), 3)
        assert np.all(ts["norm_loss"][1:] > 1e-6)
        assert np.all(np.abs(ts["M_z"]) <= 1)

    def test_rejects_zero_cycles(self):
        with pytest.raises(ValueError):
            stroboscopic_run(chain(), 0)


class TestEntropy:
    def test_product_state(self):
        p = chain(L=20)
        assert entanglement_entropy(initial_modes(p, "all_down"), 20, 10) <= 1e-9

    def test_single_fermion_two_sites(self):
        # (c_0^dag + c_1^dag)/sqrt 2 |0>: <c_0^dag c_0> = 1/2 on one site
        assert gaussian_entropy(np.array([[0.5]]), np.zeros((1, 1))) == pytest.approx(np.log(2), abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(
        L=st.sampled_from([4, 6, 8]),
        raw=arrays(np.float64, (4, 4), elements=st.floats(-1, 1)),
        cut=st.integers(1, 4),
    )
    def test_matches_partial_trace(self, L, raw, cut):
        modes = (raw[: L // 2, :2] + 1j * raw[: L // 2, 2:]) + np.array([0.05, 0.0])
        modes /= np.linalg.norm(modes, axis=1)[:, None]
        cut = min(cut, L // 2)
        psi = bdg_fock_state(modes, L)
        ref = vn_entropy(reduced_density_matrix(psi, L, cut))
        assert entanglement_entropy(modes, L, cut) == pytest.approx(ref, abs=1e-10)

    def test_spectrum_outside_range_aborts(self):
        with pytest.raises(ConsistencyError):
            gaussian_entropy(np.array([[1.0 + 1e-6]]), np.zeros((1, 1)))

    def test_small_excursion_warns(self):
        with pytest.warns(RuntimeWarning):
            gaussian_entropy(np.array([[1.0 + 1e-10]]), np.zeros((1, 1)))

    def test_roundoff_is_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            gaussian_entropy(np.array([[1.0 + 1e-15]]), np.zeros((1, 1)))

    def test_non_hermitian_block_aborts(self):
        G = np.array([[0.5, 0.1], [0.3, 0.5]])
        with pytest.raises(ConsistencyError):
            gaussian_entropy(G, np.zeros((2, 2)))

    def test_rejects_bad_cut(self):
        with pytest.raises(ValueError):
            entanglement_entropy(initial_modes(chain(L=8)), 8, 5)


class TestAlphaScan:
    SIZES = (50, 100, 150, 200)

    def test_special_frequency_area_law(self):
        p = chain(L=50)
        w1 = special_frequency(p.drive, 1)
        scan = alpha_scan([0.01, 0.5], [w1], p, sizes=self.SIZES)
        assert np.all(scan.alpha <= 0.02)

    def test_small_gamma_generic_log_growth(self):
        scan = alpha_scan([0.01], [30.0], chain(L=50), sizes=self.SIZES)
        assert scan.alpha[0, 0] > 0.05

    def test_large_gamma_area_law(self):
        scan = alpha_scan([5.0], [20.0], chain(L=50), sizes=self.SIZES)
        assert scan.alpha[0, 0] <= 0.02

    def test_validation(self):
        with pytest.raises(ValueError):
            alpha_scan([0.0], [20.0], chain(L=50), sizes=self.SIZES)
        with pytest.raises(ValueError):
            alpha_scan([0.1], [20.0], chain(L=50), sizes=(50, 100))
