"""Occupation fluctuation of free fermions on a ring in an AC electric field.

With vector potential ``A(t) = -x sin(omega t)``, ``x = E_0 / omega``, every
momentum state accumulates a displacement set by

    C(t) = int_0^t cos A = J_0(x) t + mu(t),    S(t) = int_0^t sin A = -nu(t),

and the half-filled band gives ``<n^2>(t) = 2 J' [(J_0(x) t + mu)^2 + nu^2]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .drive import bessel_j_orders
from .errors import ConvergenceError
from .io import TimeSeries

__all__ = ["AcLatticeParams", "mu_nu", "n2_analytic", "n2_numeric", "n2_series"]


@dataclass(frozen=True)
class AcLatticeParams:
    omega: float
    E0: float = 1.0
    J: float = 1.0  # hopping J'
    L: int = 1000
    filling: float = 0.5

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if self.filling == 0.5 and self.L % 2:
            raise ValueError("half filling needs an even number of sites")
        if not np.isfinite(self.E0 / self.omega):
            raise ValueError("E0/omega must be finite")

    @property
    def x(self) -> float:
        return self.E0 / self.omega

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    @classmethod
    def from_x(cls, x: float, omega: float = 1.0, **kwargs) -> "AcLatticeParams":
        return cls(omega=omega, E0=x * omega, **kwargs)


def _orders_needed(x, omega, tol):
    # J_n(x) falls off like (ex/2n)^n past n ~ |x|; grow the table until the tail is below tol
    n = int(abs(x)) + 16
    while True:
        J = bessel_j_orders(n, x)
        tail = np.abs(J[-8:]) * 2 / (np.arange(n - 7, n + 1) * omega)
        if np.all(tail < tol) or n > 4000:
            return J
        n *= 2


def mu_nu(t, x: float, omega: float = 1.0, tol: float = 1e-15):
    """Oscillating parts of the integrated drive phase.

    ``mu(t) = sum_{n even > 0} 2 J_n(x) sin(n omega t)/(n omega)`` and
    ``nu(t) = sum_{n odd > 0} 2 J_n(x) (1 - cos(n omega t))/(n omega)``,
    which are the ``n != 0`` Fourier sums with the ``+-n`` terms paired.
    Terms with ``2|J_n|/(n omega) < tol`` are dropped.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    t = np.asarray(t, dtype=float)
    J = _orders_needed(x, omega, tol)
    n = np.arange(1, len(J))
    w = 2 * J[1:] / (n * omega)
    keep = np.abs(w) >= tol
    n, w = n[keep], w[keep]
    even = n % 2 == 0
    phase = np.multiply.outer(t, n * omega)
    mu = np.sin(phase[..., even]) @ w[even]
    nu = (1 - np.cos(phase[..., ~even])) @ w[~even]
    return mu, nu


def n2_analytic(t, params: AcLatticeParams):
    """``2 J' [(J_0(x) t + mu)^2 + nu^2]`` at half filling."""
    if params.filling != 0.5:
        raise ValueError("the closed form holds at half filling only")
    t = np.asarray(t, dtype=float)
    j0 = bessel_j_orders(0, params.x)[0]
    mu, nu = mu_nu(t, params.x, params.omega)
    return 2 * params.J * ((j0 * t + mu) ** 2 + nu**2)


def _phase_integrals(t, x, omega, epsabs=1e-13):
    # int_0^t cos A and int_0^t sin A, split into whole periods for the adaptive rule
    T = 2 * np.pi / omega
    edges = np.arange(0.0, t, T)
    edges = np.append(edges, t) if t > 0 else np.array([0.0, 0.0])
    C = S = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        for trig, acc in ((np.cos, "C"), (np.sin, "S")):
            val, err, *info = quad(
                lambda s: trig(-x * np.sin(omega * s)), lo, hi,
                epsabs=epsabs, epsrel=1e-13, limit=200, full_output=1,
            )
            if len(info) > 1 and err > 1e-9:
                raise ConvergenceError(f"phase quadrature failed on [{lo}, {hi}]: {info[1]}")
            if acc == "C":
                C += val
            else:
                S += val
    return C, S


def n2_numeric(t, params: AcLatticeParams):
    """Quadrature route to ``<n^2>`` that does not use the Bessel expansion.

    Each occupied momentum ``|k| < pi/2`` (antiperiodic grid, so the Fermi sea is
    symmetric) is displaced by ``d(k) = -2J' int_0^t sin(k + A) dt'``.  The band
    average of ``d^2`` divided by ``J'`` is returned, which is the normalisation
    of the closed form.
    """
    if params.filling != 0.5:
        raise ValueError("only half filling is implemented")
    L = params.L
    k = (2 * np.arange(L) + 1 - L) * np.pi / L
    occ = k[np.abs(k) < np.pi / 2]
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(ts.shape)
    for i, ti in enumerate(ts):
        C, S = _phase_integrals(ti, params.x, params.omega)
        d = -2 * params.J * (np.sin(occ) * C + np.cos(occ) * S)
        out[i] = np.mean(d**2) / params.J
    return out.reshape(np.shape(t))


def n2_series(params: AcLatticeParams, times, numeric: bool = True) -> TimeSeries:
    times = np.asarray(times, dtype=float)
    a = n2_analytic(times, params)
    b = n2_numeric(times, params) if numeric else np.full_like(times, np.nan)
    n = len(times)
    return TimeSeries(
        t=times, n2_analytic=a, n2_numeric=b,
        x=np.full(n, params.x), omega_D=np.full(n, params.omega),
    )
