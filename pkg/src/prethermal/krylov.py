"""Lanczos propagation ``exp(-i t H) v`` for sparse Hermitian ``H``."""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConvergenceError

__all__ = ["expm_lanczos", "lanczos"]


def lanczos(H, v, m):
    """Orthonormal Krylov basis (full reorthogonalisation) and tridiagonal coefficients.

    Returns ``V (k x n), alpha (k), beta (k - 1), beta_last, exhausted`` where
    ``exhausted`` is true when an invariant subspace was hit before ``m`` vectors.
    """
    n = v.shape[0]
    m = min(m, n)
    V = np.empty((m, n), dtype=complex)
    alpha = np.empty(m)
    beta = np.empty(m)
    V[0] = v / np.linalg.norm(v)
    scale = None
    for j in range(m):
        w = H @ V[j]
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j] - (beta[j - 1] * V[j - 1] if j else 0)
        # second Gram-Schmidt pass against everything kept so far
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if scale is None:
            scale = max(abs(alpha[0]), beta[0], 1.0)
        if beta[j] < 1e-13 * scale:
            return V[: j + 1], alpha[: j + 1], beta[:j], 0.0, True
        if j + 1 < m:
            V[j + 1] = w / beta[j]
    return V, alpha, beta[: m - 1], beta[m - 1], False


def expm_lanczos(H, v, t: float, tol: float = 1e-10, m: int = 40, max_substeps: int = 100_000):
    """``exp(-i t H) v`` with an a-posteriori error bound ``tol`` (2-norm, relative to |v|).

    The interval is split adaptively; on each piece the local error estimate
    ``beta_m |e_m^T exp(-i dt T_m) e_1|`` must stay below ``tol * dt / t``.
    """
    v = np.asarray(v, dtype=complex)
    nrm = np.linalg.norm(v)
    if nrm == 0 or t == 0:
        return v.copy()
    w = v / nrm
    remaining = abs(t)
    sign = np.sign(t)
    dt = remaining
    steps = 0
    while remaining > 0:
        V, a, b, b_last, exhausted = lanczos(H, w, m)
        evals, evecs = eigh_tridiagonal(a, b) if len(a) > 1 else (a, np.ones((1, 1)))
        dt = min(dt, remaining)
        while True:
            c = evecs @ (np.exp(-1j * sign * dt * evals) * evecs[0].conj())
            err = 0.0 if exhausted else b_last * abs(c[-1])
            if err <= tol * dt / abs(t):
                break
            dt *= 0.5
            if dt < abs(t) * 1e-12:
                raise ConvergenceError("Lanczos step size underflow")
        w = V.T @ c
        w /= np.linalg.norm(w)
        remaining -= dt
        steps += 1
        if steps > max_substeps:
            raise ConvergenceError(f"Lanczos propagation needed more than {max_substeps} substeps")
        if err < 0.1 * tol * dt / abs(t):
            dt *= 1.5
    return nrm * w
