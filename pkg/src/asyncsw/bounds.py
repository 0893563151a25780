"""Rate thresholds, converse floors, error-exponent functions and the
positivity certificate for asynchronous Slepian-Wolf coding over a finite
class of joint PMFs.  Everything is in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .delaysource import DelaySpec
from .probcore import (
    JointPmf,
    binary_entropy,
    conditional_entropy,
    entropy,
    gallager_E,
    h_index,
    joint_quantities,
    kl_divergence,
    tilt,
    variational_distance,
)

REGION_TOL = 1e-12
_INDICES = (1, 2, 3)


# ---------------------------------------------------------------- classes

@dataclass(frozen=True)
class SourceClass:
    members: tuple[JointPmf, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("source class is empty")
        shape = members[0].shape
        for m in members:
            if not isinstance(m, JointPmf):
                raise TypeError(f"class members must be JointPmf, got {type(m).__name__}")
            if m.shape != shape:
                raise ValueError(f"member shapes differ: {shape} vs {m.shape}")
        object.__setattr__(self, "members", members)

    @property
    def shape(self) -> tuple[int, int]:
        return self.members[0].shape

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def as_class(s) -> SourceClass:
    if isinstance(s, SourceClass):
        return s
    if isinstance(s, BallClass):
        return SourceClass(s.samples)
    if isinstance(s, JointPmf):
        return SourceClass((s,))
    return SourceClass(tuple(s))


@dataclass(frozen=True)
class RateRegion:
    r1_star: float
    r2_star: float
    r3_star: float

    @property
    def thresholds(self) -> tuple[float, float, float]:
        return (self.r1_star, self.r2_star, self.r3_star)

    def contains(self, r1: float, r2: float) -> bool:
        return (r1 >= self.r1_star - REGION_TOL and r2 >= self.r2_star - REGION_TOL
                and r1 + r2 >= self.r3_star - REGION_TOL)

    def slack(self, r1: float, r2: float) -> float:
        return min(r1 - self.r1_star, r2 - self.r2_star, r1 + r2 - self.r3_star)

    def boundary(self, points: int = 3, extent: float | None = None) -> list[tuple[float, float]]:
        """Polyline of the lower-left boundary, from the vertical ray to the horizontal one.

        The corner points are (r1*, r3* - r1*) and (r3* - r2*, r2*) when the
        sum-rate face is active; `points` samples are spread along that face.
        `extent` is how far the two rays run past the corners.
        """
        r1, r2, r3 = self.thresholds
        extent = max(r1, r2, 1.0) if extent is None else extent
        top = (r1, max(r2, r3 - r1))
        right = (max(r1, r3 - r2), r2)
        pts = [(r1, top[1] + extent), top]
        if top != right:
            for t in np.linspace(0.0, 1.0, max(points, 2))[1:-1]:
                pts.append((top[0] + t * (right[0] - top[0]), top[1] + t * (right[1] - top[1])))
            pts.append(right)
        pts.append((right[0] + extent, r2))
        return [(float(a), float(b)) for a, b in pts]


def _per_member(j: JointPmf, delta_ratio: float) -> tuple[float, float, float]:
    q = joint_quantities(j)
    i = q["I(X;Y)"]
    return (q["H(X|Y)"] + delta_ratio * i, q["H(Y|X)"] + delta_ratio * i, q["H(X,Y)"] + delta_ratio * i)


def _check_unit(x: float, name: str) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")
    return x


def rate_region(s, delta_ratio: float) -> RateRegion:
    """r_i* = max over the class of H_i + delta_ratio * I(X;Y)."""
    delta_ratio = _check_unit(delta_ratio, "delay ratio")
    vals = np.array([_per_member(j, delta_ratio) for j in as_class(s)])
    return RateRegion(*(float(v) for v in vals.max(axis=0)))


def _same(a: JointPmf, b: JointPmf) -> bool:
    return a is b or (a.shape == b.shape and np.allclose(a.probs, b.probs, rtol=0, atol=1e-12))


def region_equality_check(s, delta_ratio: float, reference: JointPmf) -> bool:
    """True iff the asynchronous region of the class equals the synchronous
    region of `reference`, i.e. each threshold equals H_i(reference)."""
    cls = as_class(s)
    if not any(_same(reference, m) for m in cls):
        raise ValueError("reference PMF is not a member of the class")
    region = rate_region(cls, delta_ratio)
    return all(abs(r - h_index(reference, i)) <= REGION_TOL
               for i, r in zip(_INDICES, region.thresholds))


def converse_rate_floor(s, n: int, delay: DelaySpec, err_prob: float) -> tuple[float, float, float]:
    """Rates any code with sup-max error <= err_prob must meet at blocklength n."""
    if n < 1:
        raise ValueError(f"blocklength must be positive, got {n}")
    err_prob = _check_unit(err_prob, "error probability")
    cls = as_class(s)
    ratio = delay.ratio(n)
    kx, ky = cls.shape
    penalty = err_prob * math.log2(kx * ky) + 1.0 / n
    vals = np.array([_per_member(j, ratio) for j in cls]).max(axis=0)
    return tuple(float(v - penalty) for v in vals)


# ---------------------------------------------------------------- exponents

def block_exponent_with_delay(index: int, rho: float, j: JointPmf, d_ratio: float) -> float:
    """(1/n) E_n^(i) of the delayed block PMF at |d|/n = d_ratio."""
    d_ratio = _check_unit(d_ratio, "delay ratio")
    if index == 1:
        sync, indep = gallager_E(1, rho, j), gallager_E(3, rho, j.px)
    elif index == 2:
        sync, indep = gallager_E(2, rho, j), gallager_E(3, rho, j.py)
    elif index == 3:
        sync = gallager_E(3, rho, j)
        indep = gallager_E(3, rho, j.px) + gallager_E(3, rho, j.py)
    else:
        raise ValueError(f"index must be 1, 2 or 3, got {index!r}")
    return (1.0 - d_ratio) * sync + d_ratio * indep


def block_exponent(index: int, rho: float, block: np.ndarray, n: int) -> float:
    """(1/n) E_n^(i) computed directly from a block PMF matrix (rows: x^n)."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    s = 1.0 / (1.0 + rho)
    w = np.where(block > 0, block, 0.0) ** s
    if index == 1:
        val = np.log2(np.sum(w.sum(axis=0) ** (1.0 + rho)))
    elif index == 2:
        val = np.log2(np.sum(w.sum(axis=1) ** (1.0 + rho)))
    elif index == 3:
        val = (1.0 + rho) * np.log2(w.sum())
    else:
        raise ValueError(f"index must be 1, 2 or 3, got {index!r}")
    return float(val) / n


def _pos(x: float) -> float:
    return x if x > 0.0 else 0.0


def _F_all(rho: float, rates: Sequence[float], j: JointPmf, delta: float) -> tuple[float, float, float]:
    if rho == 0.0:
        return (0.0, 0.0, 0.0)
    tt = tilt(j, rho)
    p = j.probs
    hx, hy = entropy(tt.tilted_x), entropy(tt.tilted_y)
    dx = kl_divergence(tt.tilted_x, j.px)
    dy = kl_divergence(tt.tilted_y, j.py)

    h1 = conditional_entropy(tt.cond_x_given_y, tt.bar_y, axis=0)
    d1 = kl_divergence(tt.product_bar_y(), p)
    f1 = rho * (rates[0] - h1 - delta * _pos(hx - h1)) + d1 - delta * _pos(d1 - dx)

    h2 = conditional_entropy(tt.cond_y_given_x, tt.bar_x, axis=1)
    d2 = kl_divergence(tt.product_bar_x(), p)
    f2 = rho * (rates[1] - h2 - delta * _pos(hy - h2)) + d2 - delta * _pos(d2 - dy)

    h3 = entropy(tt.tilted_joint)
    d3 = kl_divergence(tt.tilted_joint, p)
    f3 = rho * (rates[2] - h3 - delta * _pos(hx + hy - h3)) + d3 - delta * _pos(d3 - dx - dy)
    return (f1, f2, f3)


def F(index: int, rho: float, R: float, j: JointPmf, delta_ratio: float) -> float:
    """Asynchronous exponent function F_i(rho, R, P, Delta)."""
    if index not in _INDICES:
        raise ValueError(f"index must be 1, 2 or 3, got {index!r}")
    rho = _check_unit(rho, "rho")
    delta_ratio = _check_unit(delta_ratio, "delay ratio")
    rates = [0.0, 0.0, 0.0]
    rates[index - 1] = R
    return _F_all(rho, rates, j, delta_ratio)[index - 1]


@dataclass(frozen=True)
class ExponentResult:
    value: float
    binding_index: int
    per_index: tuple[float, float, float]
    argmax_rho: tuple[float, float, float]
    argmin_member: tuple[int, int, int]


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def best_exponent(R1: float, R2: float, s, delta_ratio: float,
                  rho_grid_resolution: int = 101) -> ExponentResult:
    """min_i max_rho min_member F_i(rho, R_i, member, Delta), R_3 = R_1 + R_2.

    The maximum over rho is a uniform grid on [0, 1] followed by three
    golden-section steps in the bracket around the best grid point; the
    refinement can only raise the reported value.
    """
    if rho_grid_resolution < 11:
        raise ValueError("rho grid needs at least 11 points")
    delta_ratio = _check_unit(delta_ratio, "delay ratio")
    members = as_class(s).members
    rates = (R1, R2, R1 + R2)
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def evaluate(rho: float):
        if rho not in cache:
            vals = np.array([_F_all(rho, rates, m, delta_ratio) for m in members])
            cache[rho] = (vals.min(axis=0), vals.argmin(axis=0))
        return cache[rho]

    grid = np.linspace(0.0, 1.0, rho_grid_resolution)
    for rho in grid:
        evaluate(float(rho))

    per, arg_rho, arg_mem = [], [], []
    for i in range(3):
        best_rho = max(cache, key=lambda r: (cache[r][0][i], -r))
        k = int(np.argmin(np.abs(grid - best_rho)))
        lo, hi = float(grid[max(k - 1, 0)]), float(grid[min(k + 1, len(grid) - 1)])
        a = hi - _GOLDEN * (hi - lo)
        b = lo + _GOLDEN * (hi - lo)
        for _ in range(3):
            if evaluate(a)[0][i] >= evaluate(b)[0][i]:
                hi, b = b, a
                a = hi - _GOLDEN * (hi - lo)
            else:
                lo, a = a, b
                b = lo + _GOLDEN * (hi - lo)
        best_rho = max(cache, key=lambda r: (cache[r][0][i], -r))
        per.append(float(cache[best_rho][0][i]))
        arg_rho.append(float(best_rho))
        arg_mem.append(int(cache[best_rho][1][i]))
    binding = int(np.argmin(per))
    return ExponentResult(per[binding], binding + 1, tuple(per), tuple(arg_rho), tuple(arg_mem))


# ---------------------------------------------------------------- continuity and positivity

def delta_bar(K: int, delta: float) -> float:
    """Continuity modulus 0.5*delta*log2(K-1) + h(delta/2); zero for K = 1."""
    if K < 1:
        raise ValueError(f"alphabet size must be positive, got {K}")
    delta = _check_unit(delta, "delta")
    if K == 1:
        return 0.0
    return 0.5 * delta * math.log2(K - 1) + binary_entropy(delta / 2.0)


def _geometric_grid(start: float, ratio: float = 0.9, count: int = 700) -> np.ndarray:
    return start * ratio ** np.arange(count)


@dataclass(frozen=True)
class BallClass:
    base: SourceClass
    delta: float
    samples: tuple[JointPmf, ...]


def ball_sample(s, delta: float, per_member: int, seed: int = 0) -> BallClass:
    """Base members plus `per_member` seeded perturbations of each, all within
    variational distance `delta` of their base member.

    A perturbation moves toward a Dirichlet-random point of the simplex.
    Even-numbered draws go out to distance exactly delta (when the simplex
    allows), odd ones to a uniform fraction of it.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if per_member < 0:
        raise ValueError("per_member must be non-negative")
    base = as_class(s)
    rng = np.random.default_rng(seed)
    samples = list(base.members)
    for m in base.members:
        p = m.probs
        for k in range(per_member):
            u = rng.dirichlet(np.ones(p.size)).reshape(p.shape)
            radius = delta if k % 2 == 0 else delta * rng.uniform(0.0, 1.0)
            dist = variational_distance(u, p)
            t = 1.0 if dist == 0 else min(1.0, radius / dist)
            q = (1.0 - t) * p + t * u
            q = JointPmf(q / q.sum())
            if variational_distance(q, p) > delta + 1e-12:
                raise AssertionError("ball sample escaped the delta ball")
            samples.append(q)
    return BallClass(base, float(delta), tuple(samples))


@dataclass(frozen=True)
class PositivityCertificate:
    gamma: float
    delta: float
    rho: float
    exponent: float
    exponent_at_rho: float
    floor: float
    passed: bool


def _delta_ok(delta: float, kx: int, ky: int, big_delta: float, gamma: float) -> bool:
    bxy, bx, by = delta_bar(kx * ky, delta), delta_bar(kx, delta), delta_bar(ky, delta)
    return ((1 + big_delta) * 2 * bxy + big_delta * bx <= gamma
            and (1 + big_delta) * 2 * bxy + big_delta * by <= gamma
            and bxy + big_delta * (bx + by + bxy) <= gamma)


def positivity_certificate(R1: float, R2: float, s, delta_ratio: float,
                           per_member: int = 20, seed: int = 0,
                           rho_grid_resolution: int = 101) -> PositivityCertificate:
    """Witness that the exponent over a small ball around the class is positive.

    gamma is a third of the smallest rate slack.  delta is the largest grid
    value meeting the three continuity inequalities, rho the largest grid
    value with 2(1 - K^-rho) <= delta for every alphabet size involved.
    Passes when the ball exponent is at least rho * gamma > 0.
    """
    cls = as_class(s)
    delta_ratio = _check_unit(delta_ratio, "delay ratio")
    slack = rate_region(cls, delta_ratio).slack(R1, R2)
    if not slack > REGION_TOL:
        raise ValueError(f"no slack: rates ({R1}, {R2}) are not strictly inside the region "
                         f"(slack {slack:.3g})")
    gamma = slack / 3.0
    kx, ky = cls.shape
    delta = next((float(d) for d in _geometric_grid(1.0) if _delta_ok(d, kx, ky, delta_ratio, gamma)), None)
    if delta is None:
        raise ValueError("no delta on the grid satisfies the continuity inequalities")
    sizes = {kx, ky, kx * ky}
    rho = next((float(r) for r in _geometric_grid(1.0)
                if all(2 * (1 - k ** (-r)) <= delta for k in sizes)), None)
    if rho is None or rho <= 0:
        raise ValueError("no rho on the grid satisfies the distance conditions")
    ball = ball_sample(cls, delta, per_member, seed)
    at_rho = np.array([_F_all(rho, (R1, R2, R1 + R2), m, delta_ratio) for m in ball.samples])
    exponent = best_exponent(R1, R2, ball, delta_ratio, rho_grid_resolution).value
    floor = rho * gamma
    return PositivityCertificate(gamma, delta, rho, exponent, float(at_rho.min()), floor,
                                 bool(exponent >= floor > 0))
