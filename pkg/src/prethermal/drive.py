"""Drive waveforms, Bessel functions of the first kind and freezing frequencies.

Units: hbar = 1 everywhere in the package.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "DriveKind",
    "DriveProtocol",
    "bessel_j",
    "bessel_j_orders",
    "bessel_zero",
    "special_frequency",
    "suppression_factor",
]


class DriveKind(str, enum.Enum):
    COSINE = "cosine"
    SQUARE = "square"
    KICK = "kick"


@dataclass(frozen=True)
class DriveProtocol:
    """Periodic modulation of a single Hamiltonian parameter.

    Parameters
    ----------
    kind : DriveKind
        ``COSINE``: ``offset + amplitude * cos(omega t)``.
        ``SQUARE``: ``offset - amplitude`` on ``[0, T/2]`` and
        ``offset + amplitude`` on ``(T/2, T]``.
        ``KICK``: instantaneous kick of angle ``amplitude`` at ``t = kT``.
    amplitude : float
        Drive amplitude (``h_1``, ``V_1``, ``lambda_0`` or kick angle).
    period : float
        Drive period ``T = 2 pi / omega``.
    offset : float
        Static part ``h_s``.
    gamma : float
        Imaginary part of the driven field (cosine drive only).
    """

    kind: DriveKind
    amplitude: float
    period: float
    offset: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DriveKind(self.kind))
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be non-negative, got {self.amplitude}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.gamma and self.kind is not DriveKind.COSINE:
            raise ValueError("dissipation gamma is only defined for the cosine drive")

    @classmethod
    def from_omega(cls, kind, amplitude, omega, **kwargs) -> "DriveProtocol":
        return cls(kind, amplitude, 2 * np.pi / omega, **kwargs)

    @property
    def omega(self) -> float:
        return 2 * np.pi / self.period

    def value(self, t):
        """Real part of the driven parameter at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        if self.kind is DriveKind.COSINE:
            return self.offset + self.amplitude * np.cos(self.omega * t)
        if self.kind is DriveKind.SQUARE:
            phase = np.mod(t, self.period)
            # closed interval [0, T/2] belongs to the first half
            first = (phase <= 0.5 * self.period) & ~((phase == 0) & (t > 0))
            return np.where(first, self.offset - self.amplitude, self.offset + self.amplitude)
        raise ValueError("a kick has no finite-valued waveform; apply it as a unitary")

    def kick_times(self, n_cycles: int) -> np.ndarray:
        if self.kind is not DriveKind.KICK:
            raise ValueError("only kick protocols have kick times")
        return self.period * np.arange(n_cycles + 1)


def _series(n: int, x: float) -> float:
    # ascending series, used only for small |x|
    term = (0.5 * x) ** n / math.factorial(n)
    total = term
    q = -0.25 * x * x
    k = 0
    while abs(term) > 1e-18 * max(abs(total), 1e-300):
        k += 1
        term *= q / (k * (n + k))
        total += term
        if k > 200:
            break
    return total


def bessel_j_orders(nmax: int, x: float) -> np.ndarray:
    """Return ``[J_0(x), ..., J_nmax(x)]`` by Miller's downward recurrence.

    The recurrence is started well above ``max(nmax, |x|)`` and normalised
    with ``J_0 + 2 sum_k J_2k = 1``.
    """
    if nmax < 0:
        raise ValueError("nmax must be >= 0")
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("x must be finite")
    out = np.zeros(nmax + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    sign = 1.0
    if x < 0:
        x = -x
        sign = -1.0
    if x < 0.5:
        out[:] = [_series(n, x) for n in range(nmax + 1)]
    else:
        top = max(nmax, int(x)) + 20 + int(math.sqrt(40 * max(nmax, x)))
        top += top % 2
        vals = np.zeros(top + 2)
        j_next, j_cur = 0.0, 1e-300
        norm = 0.0
        for m in range(top, 0, -1):
            j_prev = (2 * m / x) * j_cur - j_next
            j_next, j_cur = j_cur, j_prev
            if abs(j_cur) > 1e250:
                j_cur *= 1e-250
                j_next *= 1e-250
                vals[m:] *= 1e-250
                norm *= 1e-250
            vals[m - 1] = j_cur
            if (m - 1) % 2 == 0 and m - 1 > 0:
                norm += 2 * j_cur
        norm += vals[0]
        out[:] = vals[: nmax + 1] / norm
    if sign < 0:
        out[1::2] *= -1
    return out


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind ``J_n(x)`` for integer ``n >= 0``."""
    if n < 0:
        raise ValueError("order must be non-negative")
    return float(bessel_j_orders(n, x)[n])


def bessel_zero(n: int) -> float:
    """n-th positive zero of ``J_0``."""
    if n < 1:
        raise ValueError(f"zero index must be >= 1, got {n}")
    lo = (n - 1) * np.pi + (0.5 if n == 1 else 0.0)
    hi = n * np.pi
    return brentq(lambda x: bessel_j(0, x), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def special_frequency(protocol: DriveProtocol, n: int) -> float:
    """Drive frequency at which the first-order Floquet hopping of the Ising chain vanishes.

    Cosine: ``4 h_1 / beta_n``; square pulse: ``2 h_1 / n``.
    """
    if protocol.amplitude <= 0:
        raise ValueError("special frequencies need a positive amplitude")
    if n < 1:
        raise ValueError("n must be >= 1")
    if protocol.kind is DriveKind.COSINE:
        return 4 * protocol.amplitude / bessel_zero(n)
    if protocol.kind is DriveKind.SQUARE:
        return 2 * protocol.amplitude / n
    raise ValueError("no freezing frequency is defined for kicked drives")


def suppression_factor(protocol: DriveProtocol, omega: float | None = None) -> complex:
    """Renormalisation of the transverse Ising term in the first-order Floquet Hamiltonian.

    Cosine drive: ``J_0(4 h_1 / omega)``.  Square pulse: ``exp(i h_1 T) sin(h_1 T)/(h_1 T)``.
    """
    omega = protocol.omega if omega is None else omega
    if protocol.kind is DriveKind.COSINE:
        return bessel_j(0, 4 * protocol.amplitude / omega)
    if protocol.kind is DriveKind.SQUARE:
        phase = protocol.amplitude * 2 * np.pi / omega
        return np.exp(1j * phase) * np.sinc(phase / np.pi)
    raise ValueError("kicked drives have no suppression factor")
