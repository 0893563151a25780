"""n-type approximation of PMFs and the mixed source built from it.

A PMF is rounded to an n-type by taking ceil(n p(x)) counts for every
symbol except the most probable one, which absorbs the remainder.  For
n >= alpha = K(K-1) this keeps every count in [0, n], the variational
distance below 2(K-1)/n and the per-sequence likelihood ratio below an
explicit constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .delaysource import delayed_pmf, segments
from .probcore import JointPmf, Pmf, variational_distance

# ceil(n p) is taken after removing this much relative rounding noise, so
# that e.g. 10 * 0.3 = 3.0000000000000004 counts as 3
_CEIL_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class NType:
    counts: np.ndarray
    n: int
    guaranteed: bool = True

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if int(c.sum()) != self.n or np.any(c < 0):
            raise ValueError(f"counts {c.tolist()} do not form an {self.n}-type")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def key(self) -> tuple:
        return (self.counts.shape, tuple(self.counts.ravel().tolist()))

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.n

    def as_pmf(self) -> Pmf | JointPmf:
        if self.counts.ndim == 2:
            return JointPmf(self.probs)
        return Pmf(self.probs)

    def __eq__(self, other):
        return isinstance(other, NType) and self.n == other.n and self.key == other.key

    def __hash__(self):
        return hash((self.n, self.key))


@dataclass(frozen=True)
class ApproxConstants:
    """alpha = K(K-1) and eps_n = alpha ln(1 + alpha/(n - alpha)), natural base.

    ``cap_exponent`` is the exponent of e in the likelihood-ratio cap: one
    factor (alpha + eps_n) for a plain PMF, three for the delayed joint.
    eps_n is infinite at n = alpha and undefined below it.
    """

    alphabet_size: int
    n: int
    factors: int = 3

    @property
    def alpha(self) -> int:
        k = self.alphabet_size
        return k * (k - 1)

    @property
    def eps_n(self) -> float:
        a = self.alpha
        if self.n < a:
            return math.nan
        if self.n == a:
            return math.inf if a > 0 else 0.0
        return a * math.log1p(a / (self.n - a))

    @property
    def cap_exponent(self) -> float:
        return self.factors * (self.alpha + self.eps_n)

    @property
    def ratio_cap(self) -> float:
        e = self.cap_exponent
        return math.exp(e) if e < 700 else math.inf


def _alphabet(p) -> int:
    return int(np.asarray(p.probs if isinstance(p, (Pmf, JointPmf)) else p).size)


def n_type_approx(p, n: int) -> NType:
    """Round a PMF (or joint PMF, cell-wise) to an n-type.

    Ties for the most probable symbol go to the lowest (row-major) index.
    Below n = alpha the construction can push the absorbing count negative;
    it is then lifted to zero by lowering the other counts with the largest
    rounding excess, and the result is flagged as unguaranteed.
    """
    if n < 1:
        raise ValueError(f"blocklength must be positive, got {n}")
    arr = np.asarray(p.probs if isinstance(p, (Pmf, JointPmf)) else p, dtype=float)
    flat = arr.ravel()
    k = flat.size
    star = int(np.argmax(flat))
    scaled = n * flat
    counts = np.ceil(scaled - _CEIL_SLACK * np.maximum(1.0, scaled)).astype(np.int64)
    counts = np.maximum(counts, 0)
    counts[star] = 0
    counts[star] = n - int(counts.sum())
    if counts[star] < 0:
        excess = counts - scaled
        excess[star] = -np.inf
        for idx in np.argsort(-excess, kind="stable"):
            if counts[star] >= 0:
                break
            take = min(int(counts[idx]), -int(counts[star]))
            counts[idx] -= take
            counts[star] += take
    guaranteed = n >= k * (k - 1)
    return NType(counts.reshape(arr.shape), n, guaranteed)


def _max_log_ratio(p: np.ndarray, t: np.ndarray) -> float:
    """log max(1, max_x p(x)/t(x)); inf when t misses part of p's support."""
    if np.any((p > 0) & (t <= 0)):
        return math.inf
    pos = p > 0
    return max(0.0, float(np.max(np.log(p[pos]) - np.log(t[pos]))))


def likelihood_ratio_cap_check(p, t: NType, n: int | None = None,
                               delays: Iterable[int] | None = None) -> dict:
    """Worst-case P^n / T^n over all sequences versus the e^(...) cap.

    The worst sequence repeats the symbol of largest ratio p/t in every
    position, so the maximum is analytic.  For a joint PMF the delayed block
    is split into its three segments (unmatched x, matched pairs, unmatched
    y) and each is maximized separately, for every delay in `delays`
    (default -n..n).  Ratios are reported in natural-log form as well.
    """
    n = t.n if n is None else n
    arr = np.asarray(p.probs if isinstance(p, (Pmf, JointPmf)) else p, dtype=float)
    tp = t.probs
    if arr.ndim == 2:
        const = ApproxConstants(arr.size, n, factors=3)
        lr_xy = _max_log_ratio(arr, tp)
        lr_x = _max_log_ratio(arr.sum(axis=1), tp.sum(axis=1))
        lr_y = _max_log_ratio(arr.sum(axis=0), tp.sum(axis=0))
        delays = range(-n, n + 1) if delays is None else delays
        worst = -math.inf
        worst_d = None
        for d in delays:
            seg = segments(n, d)
            terms = [(len(seg.x_common), lr_xy), (len(seg.x_indep), lr_x), (len(seg.y_indep), lr_y)]
            val = sum(cnt * lr for cnt, lr in terms if cnt)
            if val > worst:
                worst, worst_d = val, d
    else:
        const = ApproxConstants(arr.size, n, factors=1)
        worst = n * _max_log_ratio(arr, tp)
        worst_d = None
    cap = const.cap_exponent
    guaranteed = n >= const.alpha
    return {
        "log_max_ratio": worst,
        "log_cap": cap,
        "max_ratio": math.exp(worst) if worst < 700 else math.inf,
        "cap": const.ratio_cap,
        "worst_delay": worst_d,
        "pass": bool(worst <= cap),
        "guaranteed": guaranteed,
    }


def brute_force_max_ratio(j: JointPmf, t: NType, n: int, d: int) -> float:
    """Enumerated max over sequence pairs of P_d / T_d (natural log); tiny n only."""
    from .delaysource import delayed_block_logpmf
    lp = delayed_block_logpmf(j, n, d)
    lt = delayed_block_logpmf(t.as_pmf(), n, d)
    pos = np.isfinite(lp)
    if np.any(~np.isfinite(lt[pos])):
        return math.inf
    return float(np.max(lp[pos] - lt[pos]))


def build_class_shadow(members: Sequence, n: int) -> list[NType]:
    """n-types of each member, deduplicated by exact counts, first occurrence kept."""
    seen = {}
    for m in members:
        t = n_type_approx(m, n)
        seen.setdefault(t.key, t)
    return list(seen.values())


@dataclass(frozen=True, eq=False)
class MixedSource:
    """Uniform mixture over (n-type, delay) of the delayed block PMFs."""

    types: tuple[NType, ...]
    delays: tuple[int, ...]
    n: int

    def __post_init__(self):
        if not self.types or not self.delays:
            raise ValueError("mixed source needs at least one type and one delay")
        for d in self.delays:
            if abs(d) > self.n:
                raise ValueError(f"delay {d} exceeds blocklength {self.n}")

    @property
    def weight(self) -> float:
        return 1.0 / (len(self.types) * len(self.delays))

    def components(self) -> list[tuple[JointPmf, int]]:
        return [(t.as_pmf(), d) for t in self.types for d in self.delays]


def mixed_source(members: Sequence, n: int, delays: Iterable[int]) -> MixedSource:
    return MixedSource(tuple(build_class_shadow(members, n)), tuple(delays), n)


def mixed_pmf(ms: MixedSource, n: int, x_seq, y_seq) -> float:
    total = 0.0
    for j, d in ms.components():
        total += delayed_pmf(j, n, d, x_seq, y_seq)
    return total * ms.weight


def shadow_distance(p, t: NType) -> float:
    return variational_distance(np.asarray(p.probs if isinstance(p, (Pmf, JointPmf)) else p), t.probs)
