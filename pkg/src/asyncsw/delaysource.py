"""Correlated memoryless sources observed with a relative delay.

Encoder 1 sees X_1..X_n and encoder 2 sees Y_{1+d}..Y_{n+d}.  For |d| <= n
the pair splits into |d| unmatched x symbols, n-|d| matched pairs and |d|
unmatched y symbols, so the block PMF is a product of three i.i.d.
segments.

Sequences are indexed little-endian: position i (0-based) holds digit
``(index // K**i) % K``.  `lex_rank` gives each index its position in
lexicographic order of the sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .probcore import JointPmf, entropy, joint_quantities, h_index

ENUMERATION_BUDGET = 2 ** 24


# ---------------------------------------------------------------- sequences

@lru_cache(maxsize=64)
def all_digits(n: int, k: int) -> np.ndarray:
    """Digit matrix of every length-n sequence over k symbols, one row per index."""
    idx = np.arange(k ** n, dtype=np.int64)
    out = np.empty((k ** n, n), dtype=np.int8)
    for i in range(n):
        out[:, i] = (idx // k ** i) % k
    out.setflags(write=False)
    return out


def seq_to_index(seq: Sequence[int], k: int) -> int:
    return int(sum(int(s) * k ** i for i, s in enumerate(seq)))


def index_to_seq(index: int, n: int, k: int) -> tuple[int, ...]:
    return tuple((index // k ** i) % k for i in range(n))


def digits_to_index(d: np.ndarray, k: int) -> np.ndarray:
    """Row-wise inverse of `all_digits` for a batch of digit rows."""
    d = np.asarray(d, dtype=np.int64)
    weights = k ** np.arange(d.shape[-1], dtype=np.int64)
    return d @ weights


@lru_cache(maxsize=16)
def lex_rank(n: int, k: int) -> np.ndarray:
    """Rank of every index in lexicographic sequence order (digit reversal).

    Reversing the digits twice is the identity, so the array is its own
    inverse permutation.
    """
    dig = all_digits(n, k).astype(np.int64)
    rank = dig @ (k ** np.arange(n - 1, -1, -1, dtype=np.int64))
    rank.setflags(write=False)
    return rank


# ---------------------------------------------------------------- segments

@dataclass(frozen=True)
class DelayedSegments:
    """0-based positions of the three segments for one (n, d).

    ``x_common[i]`` is paired with ``y_common[i]``.
    """

    n: int
    d: int
    x_indep: tuple[int, ...]
    x_common: tuple[int, ...]
    y_common: tuple[int, ...]
    y_indep: tuple[int, ...]


def _check_delay(n: int, d: int):
    if n < 1:
        raise ValueError(f"blocklength must be positive, got {n}")
    if abs(d) > n:
        raise ValueError(f"|d| = {abs(d)} exceeds blocklength {n}")


@lru_cache(maxsize=4096)
def segments(n: int, d: int) -> DelayedSegments:
    _check_delay(n, d)
    if d >= 0:
        x_indep = range(0, d)
        x_common = range(d, n)
        y_common = range(0, n - d)
        y_indep = range(n - d, n)
    else:
        x_indep = range(n + d, n)
        x_common = range(0, n + d)
        y_common = range(-d, n)
        y_indep = range(0, -d)
    return DelayedSegments(n, d, tuple(x_indep), tuple(x_common),
                           tuple(y_common), tuple(y_indep))


# ---------------------------------------------------------------- block PMFs

def delayed_pmf(j: JointPmf, n: int, d: int, x_seq: Sequence[int], y_seq: Sequence[int]) -> float:
    """P(X^n = x, Y_(d)^n = y): product of the three segment probabilities."""
    seg = segments(n, d)
    if len(x_seq) != n or len(y_seq) != n:
        raise ValueError("sequences must have length n")
    p = 1.0
    for i in seg.x_indep:
        p *= j.px[x_seq[i]]
    for a, b in zip(seg.x_common, seg.y_common):
        p *= j.probs[x_seq[a], y_seq[b]]
    for i in seg.y_indep:
        p *= j.py[y_seq[i]]
    return float(p)


def _log(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p)


def segment_log_terms(j: JointPmf, n: int, d: int, xdig: np.ndarray, ydig: np.ndarray):
    """Natural-log segment masses for batches of x and y digit rows.

    Returns ``(ax, by, pairs)`` where ``ax[r]`` is the unmatched-x log mass of
    x row r, ``by`` likewise for y, and ``pairs`` is a list of
    (x column, y column) giving the matched positions.
    """
    seg = segments(n, d)
    lx, ly = _log(j.px), _log(j.py)
    ax = np.zeros(xdig.shape[0])
    for i in seg.x_indep:
        ax += lx[xdig[:, i]]
    by = np.zeros(ydig.shape[0])
    for i in seg.y_indep:
        by += ly[ydig[:, i]]
    return ax, by, list(zip(seg.x_common, seg.y_common))


def delayed_block_logpmf(j: JointPmf, n: int, d: int) -> np.ndarray:
    """Natural log of the full |X|^n x |Y|^n block PMF at delay d (-inf for zeros)."""
    kx, ky = j.shape
    if kx ** n * ky ** n > ENUMERATION_BUDGET:
        raise ValueError(f"{kx ** n * ky ** n} sequence pairs exceed the enumeration "
                         f"budget of {ENUMERATION_BUDGET}")
    xd, yd = all_digits(n, kx), all_digits(n, ky)
    ax, by, pairs = segment_log_terms(j, n, d, xd, yd)
    lxy = _log(j.probs)
    out = ax[:, None] + by[None, :]
    for a, b in pairs:
        out += lxy[xd[:, a][:, None], yd[:, b][None, :]]
    return out


def delayed_block_pmf(j: JointPmf, n: int, d: int) -> np.ndarray:
    return np.exp(delayed_block_logpmf(j, n, d))


def sample_delayed(j: JointPmf, n: int, d: int, size: int,
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw `size` pairs (x index, y index) from the delayed block PMF.

    The three segments are drawn independently from P_X, P_XY and P_Y.
    """
    seg = segments(n, d)
    kx, ky = j.shape
    xdig = np.zeros((size, n), dtype=np.int64)
    ydig = np.zeros((size, n), dtype=np.int64)
    if seg.x_indep:
        xdig[:, list(seg.x_indep)] = rng.choice(kx, size=(size, len(seg.x_indep)), p=j.px)
    if seg.x_common:
        cells = rng.choice(kx * ky, size=(size, len(seg.x_common)), p=j.probs.ravel())
        xdig[:, list(seg.x_common)] = cells // ky
        ydig[:, list(seg.y_common)] = cells % ky
    if seg.y_indep:
        ydig[:, list(seg.y_indep)] = rng.choice(ky, size=(size, len(seg.y_indep)), p=j.py)
    return digits_to_index(xdig, kx), digits_to_index(ydig, ky)


# ---------------------------------------------------------------- entropies

def delayed_block_entropy(j: JointPmf, n: int, d: int, index: int) -> float:
    """Closed form n*H_i(X,Y) + |d|*I(X;Y) in bits."""
    _check_delay(n, d)
    return n * h_index(j, index) + abs(d) * joint_quantities(j)["I(X;Y)"]


def brute_force_block_entropy(j: JointPmf, n: int, d: int, index: int) -> float:
    """Block entropy by enumerating every sequence pair of the delayed PMF."""
    if index not in (1, 2, 3):
        raise ValueError(f"index must be 1, 2 or 3, got {index!r}")
    block = delayed_block_pmf(j, n, d)
    hxy = entropy(block)
    if index == 3:
        return hxy
    if index == 1:
        return hxy - entropy(block.sum(axis=0))
    return hxy - entropy(block.sum(axis=1))


# ---------------------------------------------------------------- delay bounds

@dataclass(frozen=True)
class DelaySpec:
    """Per-blocklength delay bounds (lo_n, hi_n).

    kind "constant": lo_n = -c, hi_n = c.  kind "linear": hi_n = floor(alpha*n),
    lo_n = -hi_n.  kind "explicit": listed (lo_n, hi_n) for n = 1..N; beyond N
    the last listed ratios lo_N/N, hi_N/N are held (rounded toward zero).
    All bounds are clamped to [-n, n].
    """

    kind: str
    value: float | tuple = 0

    @classmethod
    def constant(cls, c: int) -> "DelaySpec":
        if int(c) != c or c < 0:
            raise ValueError(f"constant delay bound must be a non-negative integer, got {c}")
        return cls("constant", int(c))

    @classmethod
    def linear(cls, alpha: float) -> "DelaySpec":
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"delay ratio must lie in [0, 1], got {alpha}")
        return cls("linear", float(alpha))

    @classmethod
    def explicit(cls, pairs) -> "DelaySpec":
        pairs = tuple((int(lo), int(hi)) for lo, hi in pairs)
        if not pairs:
            raise ValueError("explicit delay sequence is empty")
        for n, (lo, hi) in enumerate(pairs, start=1):
            if lo > hi:
                raise ValueError(f"lower delay {lo} exceeds upper delay {hi} at n={n}")
        return cls("explicit", pairs)

    def bounds(self, n: int) -> tuple[int, int]:
        if n < 1:
            raise ValueError(f"blocklength must be positive, got {n}")
        if self.kind == "constant":
            lo, hi = -self.value, self.value
        elif self.kind == "linear":
            hi = math.floor(self.value * n + 1e-12)
            lo = -hi
        elif self.kind == "explicit":
            pairs = self.value
            if n <= len(pairs):
                lo, hi = pairs[n - 1]
            else:
                last = len(pairs)
                lo_l, hi_l = pairs[-1]
                lo = int(math.trunc(lo_l * n / last))
                hi = int(math.trunc(hi_l * n / last))
        else:
            raise ValueError(f"unknown delay kind {self.kind!r}")
        return max(-n, lo), min(n, hi)

    def delay_set(self, n: int) -> list[int]:
        lo, hi = self.bounds(n)
        return list(range(lo, hi + 1))

    def ratio(self, n: int) -> float:
        lo, hi = self.bounds(n)
        return max(abs(lo), abs(hi)) / n

    @property
    def limit_ratio(self) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "linear":
            return self.value
        last = len(self.value)
        lo, hi = self.value[-1]
        return min(1.0, max(abs(lo), abs(hi)) / last)
