"""Oracle and identity checks run by ``asyncsw verify``.

Each check returns one record: name, blocklength (if any), status
("pass", "fail" or "unguaranteed"), the worst residual and a short detail.
Residuals of inequalities are lhs - rhs, so anything <= tolerance passes.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from . import bounds, codec, delaysource, probcore, typesys
from .bounds import SourceClass
from .delaysource import DelaySpec

TOL = 1e-9
RHO_GRID = np.linspace(0.0, 1.0, 11)


def _record(check, residual, detail="", n=None, status=None):
    if status is None:
        status = "pass" if residual <= TOL else "fail"
    return {"check": check, "n": "" if n is None else n, "status": status,
            "worst_residual": float(residual), "detail": detail}


def block_entropy(cls: SourceClass, n_max: int = 5) -> dict:
    worst = 0.0
    for j in cls:
        for n in range(1, n_max + 1):
            if j.size_x ** n * j.size_y ** n > 2 ** 16:
                break
            for d in range(-n, n + 1):
                for i in (1, 2, 3):
                    closed = delaysource.delayed_block_entropy(j, n, d, i)
                    brute = delaysource.brute_force_block_entropy(j, n, d, i)
                    worst = max(worst, abs(closed - brute))
    return _record("block_entropy_closed_form", worst, f"n <= {n_max}, all delays, i = 1..3")


def type_caps(cls: SourceClass, n: int) -> dict:
    worst = -math.inf
    guaranteed = True
    for j in cls:
        t = typesys.n_type_approx(j, n)
        k = j.size_x * j.size_y
        dv = probcore.variational_distance(j.probs, t.probs) - 2 * (k - 1) / n
        cap = typesys.likelihood_ratio_cap_check(j, t, n)
        guaranteed &= cap["guaranteed"]
        lr = cap["log_max_ratio"] - cap["log_cap"] if math.isfinite(cap["log_cap"]) else -math.inf
        worst = max(worst, dv, lr)
    status = None if guaranteed else "unguaranteed"
    detail = "distance and likelihood-ratio caps of the n-type"
    if not guaranteed:
        detail += "; n is below alpha so the caps are not promised"
    return _record("n_type_caps", worst, detail, n=n, status=status)


def mixture_exponent(cls: SourceClass, seed: int, instances: int = 40, n: int = 3) -> dict:
    rng = np.random.default_rng(seed)
    kx, ky = cls.shape
    if kx ** n * ky ** n > 2 ** 12:
        n = 1
    worst = -math.inf
    for _ in range(instances):
        count = int(rng.integers(1, 5))
        comps = []
        for _ in range(count):
            j = cls.members[int(rng.integers(len(cls)))] if rng.random() < 0.5 else \
                probcore.random_joint(rng, kx, ky)
            d = int(rng.integers(-n, n + 1))
            comps.append(delaysource.delayed_block_pmf(j, n, d))
        q = sum(comps) / count
        rho = float(rng.uniform())
        for i in (1, 2, 3):
            lhs = bounds.block_exponent(i, rho, q, n)
            rhs = math.log2(count) / n + max(bounds.block_exponent(i, rho, c, n) for c in comps)
            worst = max(worst, lhs - rhs)
    return _record("mixture_exponent_bound", worst, f"{instances} random mixtures at n={n}")


def gallager_identities(cls: SourceClass) -> dict:
    worst = 0.0
    for j in cls:
        for rho in RHO_GRID:
            for i in (1, 2):
                worst = max(worst, abs(probcore.gallager_identity_residual(i, rho, j)))
            worst = max(worst, abs(probcore.gallager_identity_residual(3, rho, j.px)))
            worst = max(worst, abs(probcore.gallager_identity_residual(3, rho, j.py)))
            worst = max(worst, abs(probcore.gallager_identity_residual(3, rho, j.probs)))
            for i in (1, 2, 3):
                f = bounds.F(i, rho, 1.0, j, 0.0)
                e = probcore.gallager_E(i, rho, j)
                worst = max(worst, abs(f - (rho * 1.0 - e)))
    return _record("gallager_identities", worst, "tilted entropy minus exponent equals divergence; zero-delay collapse")


def tilt_distances(cls: SourceClass) -> dict:
    worst = -math.inf
    for j in cls:
        for jj in (j, j.transpose()):
            kx = jj.size_x
            for rho in RHO_GRID:
                tt = probcore.tilt(jj, rho)
                bound = 2 * (1 - kx ** (-rho))
                worst = max(worst,
                            probcore.variational_distance(jj.px, tt.tilted_x) - bound,
                            probcore.variational_distance(jj.probs, tt.product_bar_y()) - bound)
    return _record("tilt_distance_bounds", worst, "distance to the tilted marginal and conditional")


def power_sum_bounds(cls: SourceClass) -> dict:
    worst = -math.inf
    for j in cls:
        kx = j.size_x
        for rho in RHO_GRID:
            s = 1.0 / (1.0 + rho)
            inner = (np.where(j.probs > 0, j.probs, 0.0) ** s).sum(axis=0) ** (1.0 + rho)
            worst = max(worst, float(np.max(j.py - inner)), float(np.max(inner - j.py * kx ** rho)))
            tt = probcore.tilt(j, rho)
            worst = max(worst,
                        probcore.kl_divergence(tt.tilted_x, j.px) - math.log2(kx),
                        probcore.kl_divergence(tt.product_bar_y(), j.probs) - math.log2(kx))
    return _record("power_sum_and_divergence_bounds", worst, "per-column power sums and divergence ceilings")


def universality(cls: SourceClass, n: int, seeds: Iterable[int], delay: DelaySpec,
                 rates: tuple[float, float] | None = None) -> dict:
    kx, ky = cls.shape
    if kx ** n * ky ** n > codec.EXACT_BUDGET:
        return _record("universality_inequality", 0.0, "beyond the exact enumeration budget", n=n,
                       status="skipped")
    r1, r2 = rates or (0.85 * math.log2(kx), 0.85 * math.log2(ky))
    worst = -math.inf
    tight = -math.inf
    guaranteed = True
    for seed in seeds:
        res = codec.universality_gap_check(codec.build_code(n, r1, r2, seed, kx, ky), cls,
                                           delay.delay_set(n), n)
        guaranteed &= res["guaranteed"]
        worst = max(worst, res["lhs"] - res["rhs"])
        tight = max(tight, res["lhs"] - res["tight_rhs"])
    status = None if guaranteed else "unguaranteed"
    if guaranteed and tight > TOL:
        status = "fail"
    return _record("universality_inequality", worst,
                   f"exhaustive; worst lhs - tight rhs = {tight:.3g}", n=n, status=status)


def run_suite(cls: SourceClass, n_list: Iterable[int], seeds: Iterable[int],
              delay: DelaySpec) -> list[dict]:
    seeds = list(seeds)
    out = [block_entropy(cls)]
    out += [type_caps(cls, n) for n in n_list]
    out += [mixture_exponent(cls, seeds[0]), gallager_identities(cls),
            tilt_distances(cls), power_sum_bounds(cls)]
    out += [universality(cls, n, seeds, delay) for n in n_list]
    return out
