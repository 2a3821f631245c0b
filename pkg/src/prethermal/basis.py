"""Bit-encoded many-body bases.

Site ``j`` is bit ``j`` of the integer label (two bits ``2j, 2j+1`` for spin
one, storing ``m + 1``).  States are kept sorted so lookup is a binary search.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError

__all__ = [
    "BlockadeOBC",
    "BlockadePBC",
    "Constraint",
    "ConstraintKind",
    "FockBasis",
    "FullSpinHalf",
    "FullSpinOne",
    "NumberSector",
    "build_basis",
    "popcount",
]


class ConstraintKind(str, enum.Enum):
    NUMBER = "number"
    BLOCKADE_PBC = "blockade_pbc"
    BLOCKADE_OBC = "blockade_obc"
    SPIN_HALF = "spin_half"
    SPIN_ONE = "spin_one"


@dataclass(frozen=True)
class Constraint:
    kind: ConstraintKind
    N: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        if (self.kind is ConstraintKind.NUMBER) != (self.N is not None):
            raise ValueError("N is required for, and only for, a number sector")


def NumberSector(N: int) -> Constraint:
    return Constraint(ConstraintKind.NUMBER, int(N))


BlockadePBC = Constraint(ConstraintKind.BLOCKADE_PBC)
BlockadeOBC = Constraint(ConstraintKind.BLOCKADE_OBC)
FullSpinHalf = Constraint(ConstraintKind.SPIN_HALF)
FullSpinOne = Constraint(ConstraintKind.SPIN_ONE)


def popcount(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    count = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        count += (x & np.uint64(1)).astype(np.int64)
        x = x >> np.uint64(1)
    return count


def _number_states(L, N):
    out = np.fromiter(
        (sum(1 << j for j in c) for c in itertools.combinations(range(L), N)),
        dtype=np.int64,
    )
    return np.sort(out)


def _blockade_states(L, periodic):
    # grow strings site by site, never placing a 1 next to a 1
    states = np.array([0, 1], dtype=np.int64)
    for j in range(1, L):
        prev_up = (states >> (j - 1)) & 1
        states = np.concatenate([states, states[prev_up == 0] | (1 << j)])
    if periodic and L > 2:
        wrap = (states & 1) & (states >> (L - 1))
        states = states[wrap == 0]
    return np.sort(states)


def _spin_one_states(L):
    states = np.zeros(1, dtype=np.int64)
    for j in range(L):
        states = np.concatenate([states | (v << (2 * j)) for v in range(3)])
    return np.sort(states)


class FockBasis:
    """Sorted configurations of one sector, with lookup.

    Attributes
    ----------
    L : int
    constraint : Constraint
    states : ndarray of int64
    bits : int
        Bits per site (1, or 2 for spin one).
    """

    def __init__(self, L: int, constraint: Constraint, states: np.ndarray):
        self.L = L
        self.constraint = constraint
        self.states = np.asarray(states, dtype=np.int64)
        self.bits = 2 if constraint.kind is ConstraintKind.SPIN_ONE else 1
        if len(self.states) > 1 and np.any(np.diff(self.states) <= 0):
            raise ConsistencyError("basis states must be strictly ascending")

    def __len__(self):
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def local_dim(self) -> int:
        return 3 if self.bits == 2 else 2

    def __repr__(self):
        return f"FockBasis(L={self.L}, {self.constraint.kind.value}, dim={self.dim})"

    def find(self, configs) -> np.ndarray:
        """Positions of ``configs``; ``-1`` where a configuration is not in the basis."""
        configs = np.asarray(configs, dtype=np.int64)
        pos = np.searchsorted(self.states, configs)
        pos_c = np.minimum(pos, self.dim - 1)
        hit = self.states[pos_c] == configs
        return np.where(hit, pos_c, -1)

    def index(self, configs) -> np.ndarray:
        pos = self.find(configs)
        if np.any(pos < 0):
            bad = np.asarray(configs).ravel()[np.asarray(pos).ravel() < 0][0]
            raise KeyError(f"configuration {int(bad):#b} is not in {self!r}")
        return pos

    def site(self, j: int) -> np.ndarray:
        """Local value on site ``j`` for every state (occupation, or ``m + 1`` for spin one)."""
        if not 0 <= j < self.L:
            raise IndexError(j)
        mask = (1 << self.bits) - 1
        return (self.states >> (self.bits * j)) & mask

    def bitstring(self, i: int) -> str:
        s = int(self.states[i])
        mask = (1 << self.bits) - 1
        return "".join(str((s >> (self.bits * j)) & mask) for j in range(self.L))

    def basis_vector(self, config: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(config)] = 1.0
        return v

    def dump_rows(self):
        return {"index": np.arange(self.dim), "bitstring": [self.bitstring(i) for i in range(self.dim)]}


def build_basis(L: int, constraint: Constraint) -> FockBasis:
    if L < 1:
        raise ValueError("L must be >= 1")
    kind = constraint.kind
    budget = 16 if kind is ConstraintKind.SPIN_ONE else 32
    if L > budget:
        raise ValueError(f"L={L} exceeds the {budget}-site bit budget for {kind.value}")
    if kind is ConstraintKind.NUMBER:
        if not 0 <= constraint.N <= L:
            raise ValueError(f"N must be in [0, L], got {constraint.N}")
        states = _number_states(L, constraint.N)
    elif kind is ConstraintKind.BLOCKADE_PBC:
        states = _blockade_states(L, periodic=True)
    elif kind is ConstraintKind.BLOCKADE_OBC:
        states = _blockade_states(L, periodic=False)
    elif kind is ConstraintKind.SPIN_HALF:
        states = np.arange(2**L, dtype=np.int64)
    else:
        states = _spin_one_states(L)
    return FockBasis(L, constraint, states)
