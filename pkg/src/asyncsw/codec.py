"""Random-binning Slepian-Wolf codes with maximum-likelihood decoding.

Each encoder maps its length-n sequence to a uniformly random bin drawn once
from a seeded PCG64 stream.  The decoder picks, inside the announced bin
pair, the sequence pair with the largest score under a decode rule: either
one known (PMF, delay) component or the uniform mixture over n-types and
delays.  Ties go to the lexicographically smallest (x, y) sequence pair;
inside each bin, members are kept in lexicographic order so a first-maximum
scan implements that rule.

Error probabilities are computed exactly by enumerating every bin pair for
small n and estimated by seeded Monte Carlo otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterable, Sequence

import numpy as np

from .delaysource import all_digits, index_to_seq, lex_rank, sample_delayed, segments
from .probcore import JointPmf
from .typesys import ApproxConstants, MixedSource, likelihood_ratio_cap_check, mixed_source

GENERATOR = "PCG64"
SEQUENCE_BUDGET = 2 ** 22
EXACT_BUDGET = 2 ** 24
MC_BLOCK = 1024
_TABLE_CELLS = 2 ** 16
_FULL_DECODE_PAIRS = 4096
_NEAR_TIE = 1e-9
_Z95 = NormalDist().inv_cdf(0.975)


# ---------------------------------------------------------------- codes

def bin_count(n: int, rate: float) -> int:
    """ceil(2^(n R)), with values within 1e-9 of an integer snapped to it first."""
    if rate < 0:
        raise ValueError(f"rate must be non-negative, got {rate}")
    v = 2.0 ** (n * rate)
    if not math.isfinite(v) or v > 2.0 ** 62:
        raise ValueError(f"2^(n R) = 2^{n * rate:g} bins is too many")
    r = round(v)
    if abs(v - r) <= 1e-9 * max(1.0, v):
        v = r
    return max(1, math.ceil(v))


def _generator(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


@dataclass(frozen=True, eq=False)
class BinningCode:
    """Bin assignments for both encoders.  Bins are numbered 1..m."""

    n: int
    kx: int
    ky: int
    R1: float
    R2: float
    m1: int
    m2: int
    bins1: np.ndarray
    bins2: np.ndarray
    seed: int
    _order1: np.ndarray = field(init=False, repr=False)
    _order2: np.ndarray = field(init=False, repr=False)
    _sorted1: np.ndarray = field(init=False, repr=False)
    _sorted2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.bins1.setflags(write=False)
        self.bins2.setflags(write=False)
        # by bin, then lexicographic within the bin
        o1 = np.lexsort((lex_rank(self.n, self.kx), self.bins1))
        o2 = np.lexsort((lex_rank(self.n, self.ky), self.bins2))
        object.__setattr__(self, "_order1", o1)
        object.__setattr__(self, "_order2", o2)
        object.__setattr__(self, "_sorted1", self.bins1[o1])
        object.__setattr__(self, "_sorted2", self.bins2[o2])

    @property
    def rate1(self) -> float:
        return math.log2(self.m1) / self.n

    @property
    def rate2(self) -> float:
        return math.log2(self.m2) / self.n

    @property
    def lex1(self) -> np.ndarray:
        return lex_rank(self.n, self.kx)

    @property
    def lex2(self) -> np.ndarray:
        return lex_rank(self.n, self.ky)

    def members1(self, b: int) -> np.ndarray:
        """Sequence indices in bin b, in lexicographic sequence order."""
        lo, hi = np.searchsorted(self._sorted1, [b, b + 1])
        return self._order1[lo:hi]

    def members2(self, b: int) -> np.ndarray:
        lo, hi = np.searchsorted(self._sorted2, [b, b + 1])
        return self._order2[lo:hi]

    def encode(self, x_seq: Sequence[int], y_seq: Sequence[int]) -> tuple[int, int]:
        from .delaysource import seq_to_index
        return int(self.bins1[seq_to_index(x_seq, self.kx)]), int(self.bins2[seq_to_index(y_seq, self.ky)])


def build_code(n: int, R1: float, R2: float, seed: int, kx: int = 2, ky: int = 2) -> BinningCode:
    """Uniform bin assignment from PCG64(seed): all x bins first, then all y bins."""
    if n < 1:
        raise ValueError(f"blocklength must be positive, got {n}")
    if kx ** n > SEQUENCE_BUDGET or ky ** n > SEQUENCE_BUDGET:
        raise ValueError(f"sequence spaces {kx}^{n} / {ky}^{n} exceed the budget of "
                         f"{SEQUENCE_BUDGET} sequences per encoder")
    seed = _check_seed(seed)
    m1, m2 = bin_count(n, R1), bin_count(n, R2)
    rng = _generator(seed)
    bins1 = rng.integers(1, m1, size=kx ** n, endpoint=True, dtype=np.int64)
    bins2 = rng.integers(1, m2, size=ky ** n, endpoint=True, dtype=np.int64)
    return BinningCode(n, kx, ky, float(R1), float(R2), m1, m2, bins1, bins2, seed)


# ---------------------------------------------------------------- scoring

class _ComponentScorer:
    """Natural-log delayed block PMF of one (joint, delay), evaluated on
    sequence-index grids through per-sequence features and lookup tables
    over chunks of matched positions."""

    def __init__(self, j: JointPmf, n: int, d: int):
        self.j, self.n, self.d = j, n, d
        self.kx, self.ky = j.shape
        seg = segments(n, d)
        self.seg = seg
        cells = self.kx * self.ky
        c = 1
        while cells ** (c + 1) <= _TABLE_CELLS:
            c += 1
        pairs = list(zip(seg.x_common, seg.y_common))
        self.chunks = [pairs[k:k + c] for k in range(0, len(pairs), c)]
        with np.errstate(divide="ignore"):
            self.lxy = np.log(j.probs)
            self.lx = np.log(j.px)
            self.ly = np.log(j.py)
        self._tables = {}
        self._xf = None
        self._yf = None

    def _table(self, length: int) -> np.ndarray:
        if length not in self._tables:
            xd, yd = all_digits(length, self.kx), all_digits(length, self.ky)
            t = np.zeros((xd.shape[0], yd.shape[0]))
            for p in range(length):
                t += self.lxy[xd[:, p][:, None], yd[:, p][None, :]]
            self._tables[length] = t
        return self._tables[length]

    @staticmethod
    def _codes(dig: np.ndarray, positions: Sequence[int], k: int) -> np.ndarray:
        code = np.zeros(dig.shape[0], dtype=np.int64)
        for p in positions:
            code = code * k + dig[:, p]
        return code

    def _features(self, side: str):
        if side == "x":
            if self._xf is None:
                dig = all_digits(self.n, self.kx)
                base = np.zeros(dig.shape[0])
                for i in self.seg.x_indep:
                    base += self.lx[dig[:, i]]
                codes = [self._codes(dig, [a for a, _ in ch], self.kx) for ch in self.chunks]
                self._xf = (base, codes)
            return self._xf
        if self._yf is None:
            dig = all_digits(self.n, self.ky)
            base = np.zeros(dig.shape[0])
            for i in self.seg.y_indep:
                base += self.ly[dig[:, i]]
            codes = [self._codes(dig, [b for _, b in ch], self.ky) for ch in self.chunks]
            self._yf = (base, codes)
        return self._yf

    def grid(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Log-PMF matrix over X (rows) by Y (columns)."""
        xb, xc = self._features("x")
        yb, yc = self._features("y")
        out = xb[X][:, None] + yb[Y][None, :]
        for k, ch in enumerate(self.chunks):
            out += np.take(self._table(len(ch))[xc[k][X]], yc[k][Y], axis=1)
        return out

    def pairs(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Log-PMF at the element-wise pairs (X[i], Y[i])."""
        xb, xc = self._features("x")
        yb, yc = self._features("y")
        out = xb[X] + yb[Y]
        for k, ch in enumerate(self.chunks):
            out += self._table(len(ch))[xc[k][X], yc[k][Y]]
        return out


class DecodeRule:
    """Uniform mixture of delayed block PMFs used as the decoding score.

    One component is the oracle ML decoder for a known (PMF, delay); the
    mixed rule has one component per (n-type, delay) of a MixedSource.
    """

    def __init__(self, components: Iterable[tuple[JointPmf, int]], n: int, name: str = "mixed"):
        self.components = tuple(components)
        if not self.components:
            raise ValueError("decode rule needs at least one component")
        self.n = n
        self.name = name
        self.shape = self.components[0][0].shape
        self._scorers = [_ComponentScorer(j, n, d) for j, d in self.components]
        self._log_w = -math.log(len(self.components))

    @classmethod
    def oracle(cls, j: JointPmf, d: int, n: int) -> "DecodeRule":
        return cls([(j, d)], n, name="oracle")

    @classmethod
    def mixed(cls, ms: MixedSource, name: str = "mixed") -> "DecodeRule":
        return cls(ms.components(), ms.n, name=name)

    def _combine(self, parts) -> np.ndarray:
        acc = None
        for s in parts:
            acc = s if acc is None else np.logaddexp(acc, s)
        return acc + self._log_w

    def score(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=np.int64)
        Y = np.asarray(Y, dtype=np.int64)
        return self._combine(sc.grid(X, Y) for sc in self._scorers)

    def relative_mass(self, X, Y, ref: float) -> np.ndarray:
        """exp(score - ref) on the X by Y grid, without the final logarithm."""
        X = np.asarray(X, dtype=np.int64)
        Y = np.asarray(Y, dtype=np.int64)
        acc = None
        with np.errstate(over="ignore"):
            for sc in self._scorers:
                e = np.exp(sc.grid(X, Y) + (self._log_w - ref))
                acc = e if acc is None else acc + e
        return acc

    def score_pairs(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=np.int64)
        Y = np.asarray(Y, dtype=np.int64)
        return self._combine(sc.pairs(X, Y) for sc in self._scorers)


def _check_compatible(code: BinningCode, rule: DecodeRule):
    if code.n != rule.n or (code.kx, code.ky) != rule.shape:
        raise ValueError(f"rule (n={rule.n}, alphabets {rule.shape}) does not match code "
                         f"(n={code.n}, alphabets {(code.kx, code.ky)})")


# ---------------------------------------------------------------- decoding

def _argmax_first(S: np.ndarray) -> tuple[int, int]:
    k = int(np.argmax(S))
    return divmod(k, S.shape[1])


def decode_indices(code: BinningCode, rule: DecodeRule, bin1: int, bin2: int) -> tuple[int, int]:
    _check_compatible(code, rule)
    if not (1 <= bin1 <= code.m1 and 1 <= bin2 <= code.m2):
        raise ValueError(f"bin pair ({bin1}, {bin2}) out of range 1..{code.m1} x 1..{code.m2}")
    X, Y = code.members1(bin1), code.members2(bin2)
    if X.size == 0 or Y.size == 0:
        raise ValueError(f"bin pair ({bin1}, {bin2}) has no candidates")
    r, c = _argmax_first(rule.score(X, Y))
    return int(X[r]), int(Y[c])


def decode(code: BinningCode, rule: DecodeRule, bin1: int, bin2: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """ML sequence pair inside the bin pair; ties to the lexicographically smallest."""
    x, y = decode_indices(code, rule, bin1, bin2)
    return index_to_seq(x, code.n, code.kx), index_to_seq(y, code.n, code.ky)


def decoded_correctly(code: BinningCode, rule: DecodeRule, x: int, y: int) -> bool:
    """Whether the decoder returns (x, y) when it was encoded.

    Same decision as decode_indices, but stops at the first candidate that
    beats (x, y): a larger score, or an equal score at a smaller pair.
    """
    b1, b2 = int(code.bins1[x]), int(code.bins2[y])
    X, Y = code.members1(b1), code.members2(b2)
    if X.size * Y.size <= _FULL_DECODE_PAIRS:
        r, c = _argmax_first(rule.score(X, Y))
        return int(X[r]) == x and int(Y[c]) == y
    s0 = rule.score([x], [y])[0, 0]
    rows = max(1, 4096 // Y.size)
    start = 0
    while start < X.size:
        Xc = X[start:start + rows]
        # mixture relative to the truth; only near-ties need the exact score
        rel = rule.relative_mass(Xc, Y, s0)
        if np.any(rel > 1.0 + _NEAR_TIE):
            return False
        near_r, near_c = np.nonzero(rel >= 1.0 - _NEAR_TIE)
        if near_r.size:
            tx, ty = Xc[near_r], Y[near_c]
            s = rule.score_pairs(tx, ty)
            lx, ly = code.lex1[tx], code.lex2[ty]
            lx0, ly0 = code.lex1[x], code.lex2[y]
            if np.any(s > s0) or np.any((s == s0) & ((lx < lx0) | ((lx == lx0) & (ly < ly0)))):
                return False
        start += rows
        rows *= 4
    return True


@dataclass(frozen=True)
class DecodingTable:
    """Decoder output for every non-empty bin pair.

    ``dec_x[a, b]`` and ``dec_y[a, b]`` are the decoded sequence indices for
    bins ``bins1[a]`` and ``bins2[b]``.
    """

    bins1: np.ndarray
    bins2: np.ndarray
    dec_x: np.ndarray
    dec_y: np.ndarray


def _groups(code_bins: np.ndarray, order: np.ndarray):
    sb = code_bins[order]
    starts = np.flatnonzero(np.r_[True, sb[1:] != sb[:-1]])
    counts = np.diff(np.r_[starts, sb.size])
    return sb[starts], starts, counts


def decoding_table(code: BinningCode, rule: DecodeRule) -> DecodingTable:
    """Decode every non-empty bin pair at once from the full score matrix."""
    _check_compatible(code, rule)
    n1, n2 = code.kx ** code.n, code.ky ** code.n
    if n1 * n2 > EXACT_BUDGET:
        raise ValueError(f"{n1 * n2} sequence pairs exceed the exact budget of {EXACT_BUDGET}")
    o1, o2 = code._order1, code._order2
    b1, s1, c1 = _groups(code.bins1, o1)
    b2, s2, c2 = _groups(code.bins2, o2)

    # rows are x sorted by bin, then lexicographically; columns likewise
    S = rule.score(o1, o2)
    M = np.maximum.reduceat(S, s1, axis=0)
    pos = np.where(S == np.repeat(M, c1, axis=0), np.arange(n1, dtype=np.int32)[:, None], np.int32(n1))
    del S
    argx = o1[np.minimum.reduceat(pos, s1, axis=0)]
    del pos
    C = np.maximum.reduceat(M, s2, axis=1)
    lex1, lex2 = code.lex1, code.lex2
    key = np.where(M == np.repeat(C, c2, axis=1), lex1[argx] * n2 + lex2[o2][None, :],
                   np.int64(n1) * n2)
    kmin = np.minimum.reduceat(key, s2, axis=1)
    # lex ranks are self-inverse permutations
    return DecodingTable(b1, b2, lex1[kmin // n2], lex2[kmin % n2])


def table_error_probability(table: DecodingTable, j: JointPmf, d: int, n: int) -> float:
    """1 - P(decoded pairs); every sequence pair lands in exactly one bin pair."""
    lp = _ComponentScorer(j, n, d).pairs(table.dec_x.ravel(), table.dec_y.ravel())
    correct = float(np.exp(lp).sum())
    return min(1.0, max(0.0, 1.0 - correct))


def exact_error_probability(code: BinningCode, rule: DecodeRule, true_source: tuple[JointPmf, int],
                            table: DecodingTable | None = None) -> float:
    j, d = true_source
    if (code.kx, code.ky) != j.shape:
        raise ValueError("true source alphabets do not match the code")
    table = decoding_table(code, rule) if table is None else table
    return table_error_probability(table, j, d, code.n)


def brute_force_error_probability(code: BinningCode, rule: DecodeRule, true_source) -> float:
    """Independent oracle: decode each bin pair by direct scan and sum the
    mass of every sequence pair that is not reproduced.  Tiny n only."""
    from .delaysource import delayed_block_pmf
    j, d = true_source
    block = delayed_block_pmf(j, code.n, d)
    cache = {}
    err = 0.0
    for x in range(block.shape[0]):
        for y in range(block.shape[1]):
            key = (int(code.bins1[x]), int(code.bins2[y]))
            if key not in cache:
                X = np.flatnonzero(code.bins1 == key[0])
                Y = np.flatnonzero(code.bins2 == key[1])
                cands = sorted((index_to_seq(int(xx), code.n, code.kx), index_to_seq(int(yy), code.n, code.ky),
                                int(xx), int(yy)) for xx in X for yy in Y)
                best = None
                for _, _, xx, yy in cands:
                    s = float(rule.score([xx], [yy])[0, 0])
                    if best is None or s > best[0]:
                        best = (s, xx, yy)
                cache[key] = best[1:]
            if cache[key] != (x, y):
                err += block[x, y]
    return float(err)


def _members(s) -> tuple[JointPmf, ...]:
    from .bounds import as_class
    return as_class(s).members


def sup_max_error(code: BinningCode, rule: DecodeRule, s, delay, n: int | None = None,
                  table: DecodingTable | None = None) -> float:
    """max over class members and delays of the exact error probability.

    `delay` is a DelaySpec or an explicit iterable of delays.
    """
    n = code.n if n is None else n
    if n != code.n:
        raise ValueError(f"blocklength {n} does not match the code's {code.n}")
    delays = delay.delay_set(n) if hasattr(delay, "delay_set") else list(delay)
    table = decoding_table(code, rule) if table is None else table
    return max(table_error_probability(table, j, d, n) for j in _members(s) for d in delays)


def universality_gap_check(code: BinningCode, s, delay, n: int | None = None) -> dict:
    """Sup-max error of the mixed-source decoder against its guaranteed bound.

    rhs = e^(3(alpha+eps_n)) (2n+1) (n+1)^(|X||Y|) times the mixed-source
    error.  ``tight_rhs`` replaces the constant cap by the exact worst
    likelihood ratio of each member against its n-type and the counting
    factor by |types| * |delays|, which is the chain the bound is built on.
    """
    n = code.n if n is None else n
    members = _members(s)
    delays = delay.delay_set(n) if hasattr(delay, "delay_set") else list(delay)
    ms = mixed_source(members, n, delays)
    rule = DecodeRule.mixed(ms)
    table = decoding_table(code, rule)
    lhs = max(table_error_probability(table, j, d, n) for j in members for d in delays)
    comp_err = [table_error_probability(table, t, d, n) for t, d in ms.components()]
    mixed_err = float(np.mean(comp_err))

    k = code.kx * code.ky
    const = ApproxConstants(k, n, factors=3)
    log_count = math.log(2 * n + 1) + k * math.log(n + 1)
    rhs = _scaled(const.cap_exponent + log_count, mixed_err)

    from .typesys import n_type_approx
    log_tight = -math.inf
    for j in members:
        t = n_type_approx(j, n)
        for d in delays:
            log_tight = max(log_tight, likelihood_ratio_cap_check(j, t, n, delays=[d])["log_max_ratio"])
    tight_rhs = _scaled(log_tight + math.log(len(ms.types) * len(ms.delays)), mixed_err)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "slack": rhs - lhs,
        "pass": bool(lhs <= rhs),
        "mixed_error": mixed_err,
        "tight_rhs": tight_rhs,
        "tight_pass": bool(lhs <= tight_rhs + 1e-12),
        "guaranteed": n >= const.alpha,
    }


def _scaled(log_factor: float, value: float) -> float:
    if value == 0.0:
        return 0.0
    if math.isinf(log_factor):
        return math.inf
    e = log_factor + math.log(value)
    return math.exp(e) if e < 700 else math.inf


# ---------------------------------------------------------------- Monte Carlo

def wilson_interval(errors: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("trials must be positive")
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: float
    errors: int
    trials: int
    wilson_95_interval: tuple[float, float]

    @property
    def width(self) -> float:
        lo, hi = self.wilson_95_interval
        return hi - lo


def _entropy_words(seed) -> list[int]:
    words = [seed] if isinstance(seed, (int, np.integer)) else list(seed)
    for w in words:
        if int(w) < 0:
            raise ValueError(f"seed words must be non-negative, got {w}")
    return [int(w) for w in words]


def monte_carlo_error(code: BinningCode, rule: DecodeRule, true_source: tuple[JointPmf, int],
                      trials: int, seed) -> MonteCarloResult:
    """Fraction of seeded draws that the decoder gets wrong.

    Trials are split into blocks of MC_BLOCK; block b draws from
    PCG64(SeedSequence(seed words + [b])), so any partition of the blocks
    across workers reproduces the serial estimate.
    """
    _check_compatible(code, rule)
    if trials < 1:
        raise ValueError("trials must be positive")
    j, d = true_source
    words = _entropy_words(seed)
    errors = 0
    cache: dict[tuple[int, int], tuple[int, int]] = {}
    for b, start in enumerate(range(0, trials, MC_BLOCK)):
        size = min(MC_BLOCK, trials - start)
        rng = _generator(np.random.SeedSequence(words + [b]))
        xs, ys = sample_delayed(j, code.n, d, size, rng)
        for x, y in zip(xs.tolist(), ys.tolist()):
            key = (int(code.bins1[x]), int(code.bins2[y]))
            if key in cache:
                ok = cache[key] == (x, y)
            elif code.members1(key[0]).size * code.members2(key[1]).size <= _FULL_DECODE_PAIRS:
                cache[key] = decode_indices(code, rule, *key)
                ok = cache[key] == (x, y)
            else:
                ok = decoded_correctly(code, rule, x, y)
            errors += not ok
    return MonteCarloResult(errors / trials, errors, trials, wilson_interval(errors, trials))


def monte_carlo_sup_max(code: BinningCode, rule: DecodeRule, s, delays: Iterable[int],
                        trials: int, seed: int) -> tuple[MonteCarloResult, list[tuple[int, int, MonteCarloResult]]]:
    """Per-(member, delay) estimates and the cell with the largest estimate.

    Cell (m, d) uses seed words [seed, m, d + n].
    """
    cells = []
    for mi, j in enumerate(_members(s)):
        for d in delays:
            res = monte_carlo_error(code, rule, (j, d), trials, [seed, mi, d + code.n])
            cells.append((mi, d, res))
    worst = max(cells, key=lambda c: c[2].errors)[2]
    return worst, cells


# ---------------------------------------------------------------- dummy bound

def dummy_delays(n: int) -> list[int]:
    c = math.isqrt(n)
    if c * c < n:
        c += 1
    c = min(c, n)
    return list(range(-c, c + 1))


def dummy_bound_code(n: int, R1: float, R2: float, s, seed: int) -> tuple[BinningCode, DecodeRule]:
    """Code plus a mixed decoder over delays -ceil(sqrt n)..ceil(sqrt n); needs
    no knowledge of the true delay range."""
    members = _members(s)
    kx, ky = members[0].shape
    code = build_code(n, R1, R2, seed, kx, ky)
    rule = DecodeRule.mixed(mixed_source(members, n, dummy_delays(n)), name="dummy")
    return code, rule
