"""Occupation-number bases and elementary fermion operator actions.

States are bit words: bit ``j`` set means site ``j`` is occupied.  Spinful
states are a pair of words ``(up, dn)``.  Fermionic signs follow one fixed
ordering of creation operators,

    c†_{0↑} c†_{1↑} ... c†_{L-1,↑} c†_{0↓} ... c†_{L-1,↓} |vac>,

i.e. ascending site index with every up operator to the left of every down
operator.  Hops of one species therefore only see their own word.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .errors import DomainError

UP = 0
DOWN = 1

FockState = Union[int, Tuple[int, int]]
# (dagger, site, spin); spin is None for spinless fermions
Op = Tuple[bool, int, Optional[int]]

_SPIN_NAMES = {None: None, UP: UP, DOWN: DOWN, "up": UP, "dn": DOWN, "down": DOWN}


def spin_index(spin) -> Optional[int]:
    try:
        return _SPIN_NAMES[spin]
    except (KeyError, TypeError):
        raise DomainError(f"unknown spin label {spin!r}") from None


def popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(words, dtype=np.int64)).astype(np.int64)


def _words(L: int, n: int) -> np.ndarray:
    out = np.fromiter(
        (sum(1 << j for j in c) for c in combinations(range(L), n)),
        dtype=np.int64,
        count=comb(L, n),
    )
    out.sort()
    return out


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Sorted basis of one particle-number sector.

    ``up`` holds the words of a spinless basis (``dn`` is None) or the up
    words of a spinful one.  ``keys`` is the total-order key used for exact
    reverse lookup: the word itself for spinless states and
    ``(up << L) | dn`` for spinful ones.
    """

    L: int
    sector: Tuple[int, ...]
    up: np.ndarray
    dn: Optional[np.ndarray]
    keys: np.ndarray

    @property
    def spinful(self) -> bool:
        return self.dn is not None

    @property
    def dim(self) -> int:
        return int(self.keys.size)

    def __len__(self) -> int:
        return self.dim

    def state(self, i: int) -> FockState:
        if self.spinful:
            return int(self.up[i]), int(self.dn[i])
        return int(self.up[i])

    @property
    def states(self) -> list:
        return [self.state(i) for i in range(self.dim)]

    def key(self, state: FockState) -> int:
        if self.spinful:
            u, d = state
            return (int(u) << self.L) | int(d)
        return int(state)

    def index_of(self, state: FockState) -> int:
        k = self.key(state)
        i = int(np.searchsorted(self.keys, k))
        if i >= self.dim or self.keys[i] != k:
            raise KeyError(f"state {state!r} not in sector {self.sector}")
        return i

    def lookup(self, up: np.ndarray, dn: Optional[np.ndarray] = None) -> np.ndarray:
        """Vectorized ``index_of``; every word must belong to the basis."""
        keys = up if dn is None else (up << self.L) | dn
        idx = np.searchsorted(self.keys, keys)
        if idx.size and (idx.max() >= self.dim or np.any(self.keys[idx] != keys)):
            raise KeyError("state outside the sector")
        return idx

    def occupations(self, spin=None) -> np.ndarray:
        """(dim, L) array of 0/1 occupation numbers for one species."""
        words = self.dn if spin_index(spin) == DOWN else self.up
        return ((words[:, None] >> np.arange(self.L)) & 1).astype(np.int8)

    def same_space(self, other: "FockBasis") -> bool:
        return self.L == other.L and self.sector == other.sector and self.spinful == other.spinful


def enumerate_basis(L: int, sector: Union[int, Sequence[int]]) -> FockBasis:
    """Enumerate a fixed-N (spinless) or fixed-(N↑, N↓) (spinful) sector.

    >>> enumerate_basis(2, 1).states
    [1, 2]
    """
    if L < 1:
        raise DomainError(f"chain length must be positive, got {L}")
    sec = (int(sector),) if np.isscalar(sector) else tuple(int(n) for n in sector)
    if len(sec) not in (1, 2):
        raise DomainError(f"sector must be N or (N_up, N_dn), got {sector!r}")
    for n in sec:
        if not 0 <= n <= L:
            raise DomainError(f"particle number {n} outside [0, {L}]")
    if len(sec) == 1:
        w = _words(L, sec[0])
        return FockBasis(L, sec, w, None, w)
    wu, wd = _words(L, sec[0]), _words(L, sec[1])
    up = np.repeat(wu, wd.size)
    dn = np.tile(wd, wu.size)
    return FockBasis(L, sec, up, dn, (up << L) | dn)


def number_eigenvalue(state: FockState, j: int, spin=None) -> int:
    s = spin_index(spin)
    if isinstance(state, tuple):
        word = state[1] if s == DOWN else state[0]
    else:
        if s is not None:
            raise DomainError("spin given for a spinless state")
        word = state
    return (int(word) >> j) & 1


def apply_ops(state: FockState, ops: Sequence[Op]) -> Optional[Tuple[FockState, int]]:
    """Apply an operator string (written left to right) to one basis state.

    Returns ``(new_state, sign)`` or None when the result vanishes.
    """
    spinful = isinstance(state, tuple)
    up, dn = (int(state[0]), int(state[1])) if spinful else (int(state), 0)
    sign = 1
    for dagger, j, spin in reversed(ops):
        s = spin_index(spin)
        if spinful == (s is None):
            raise DomainError("operator spin does not match state type")
        bit = 1 << j
        word = dn if s == DOWN else up
        occupied = bool(word & bit)
        if occupied == dagger:
            return None
        before = bin(word & (bit - 1)).count("1")
        if s == DOWN:
            before += bin(up).count("1")
        if before & 1:
            sign = -sign
        if s == DOWN:
            dn ^= bit
        else:
            up ^= bit
    return ((up, dn) if spinful else up), sign


def apply_hop(state: FockState, j: int, k: int, spin=None) -> Optional[Tuple[FockState, int]]:
    """Image of ``c†_j c_k`` on ``state``: ``(new_state, ±1)`` or None."""
    if j == k:
        raise DomainError("apply_hop needs j != k")
    return apply_ops(state, [(True, j, spin), (False, k, spin)])


def apply_ops_vec(
    up: np.ndarray, dn: Optional[np.ndarray], ops: Sequence[Op]
) -> Tuple[np.ndarray, Optional[np.ndarray], np.ndarray, np.ndarray]:
    """Vectorized :func:`apply_ops` over arrays of words.

    Returns ``(up, dn, sign, valid)``; entries with ``valid == False`` carry
    garbage words and must be discarded.
    """
    up = np.array(up, dtype=np.int64, copy=True)
    dn = None if dn is None else np.array(dn, dtype=np.int64, copy=True)
    sign = np.ones(up.shape, dtype=np.int8)
    valid = np.ones(up.shape, dtype=bool)
    for dagger, j, spin in reversed(ops):
        s = spin_index(spin)
        if (dn is None) != (s is None):
            raise DomainError("operator spin does not match basis type")
        bit = np.int64(1 << j)
        word = dn if s == DOWN else up
        occupied = (word & bit) != 0
        valid &= ~occupied if dagger else occupied
        before = popcount(word & (bit - 1))
        if s == DOWN:
            before = before + popcount(up)
        sign = np.where(before & 1, -sign, sign).astype(np.int8)
        word ^= bit
    return up, dn, sign, valid


def op_elements(basis: FockBasis, ops: Sequence[Op], target: Optional[FockBasis] = None):
    """Nonzero elements ``(rows, cols, signs)`` of an operator string.

    ``cols`` index ``basis``, ``rows`` index ``target`` (default ``basis``).
    """
    target = basis if target is None else target
    up, dn, sign, valid = apply_ops_vec(basis.up, basis.dn, ops)
    cols = np.nonzero(valid)[0]
    rows = target.lookup(up[cols], None if dn is None else dn[cols])
    return rows, cols, sign[cols].astype(np.float64)


def op_matrix(basis: FockBasis, ops: Sequence[Op], target: Optional[FockBasis] = None) -> sp.csr_matrix:
    target = basis if target is None else target
    rows, cols, vals = op_elements(basis, ops, target)
    return sp.csr_matrix((vals, (rows, cols)), shape=(target.dim, basis.dim))


def create_state(basis: FockBasis, terms: Iterable[Tuple[complex, Sequence[Op]]]) -> np.ndarray:
    """Vector of ``Σ coef · ops |vac>`` expressed in ``basis``.

    Each ``ops`` is a string of creation operators; terms landing outside
    the sector raise ``KeyError``.
    """
    vac: FockState = (0, 0) if basis.spinful else 0
    vec = np.zeros(basis.dim, dtype=complex)
    for coef, ops in terms:
        res = apply_ops(vac, ops)
        if res is None:
            continue
        st, sign = res
        vec[basis.index_of(st)] += sign * coef
    return vec
