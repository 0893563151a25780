import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asyncsw.codec import (
    BinningCode,
    DecodeRule,
    bin_count,
    brute_force_error_probability,
    build_code,
    decode,
    decode_indices,
    decoded_correctly,
    decoding_table,
    dummy_bound_code,
    dummy_delays,
    exact_error_probability,
    monte_carlo_error,
    monte_carlo_sup_max,
    sup_max_error,
    universality_gap_check,
    wilson_interval,
)
from asyncsw.delaysource import DelaySpec, delayed_block_pmf, index_to_seq
from asyncsw.probcore import JointPmf, dsbs, random_joint
from asyncsw.typesys import mixed_source

UNIFORM = JointPmf(np.full((2, 2), 0.25))


def crafted(n, bins1, bins2, kx=2, ky=2):
    b1, b2 = np.asarray(bins1, dtype=np.int64), np.asarray(bins2, dtype=np.int64)
    return BinningCode(n, kx, ky, 0.0, 0.0, int(b1.max()), int(b2.max()), b1, b2, 0)


class TestBuild:
    def test_zero_rate_single_bin(self):
        code = build_code(4, 0.0, 0.0, 5)
        assert code.m1 == code.m2 == 1
        assert np.all(code.bins1 == 1) and np.all(code.bins2 == 1)

    def test_bin_count(self):
        assert bin_count(10, 0.5) == 32
        assert bin_count(3, 1 / 3) == 2  # 2^1 after float snapping
        assert bin_count(5, 0.3) == math.ceil(2 ** 1.5)

    def test_deterministic(self):
        a, b = build_code(8, 0.7, 0.6, 42), build_code(8, 0.7, 0.6, 42)
        assert np.array_equal(a.bins1, b.bins1) and np.array_equal(a.bins2, b.bins2)
        assert not np.array_equal(a.bins1, build_code(8, 0.7, 0.6, 43).bins1)

    def test_partition(self):
        code = build_code(6, 0.5, 0.5, 1)
        assert code.bins1.min() >= 1 and code.bins1.max() <= code.m1
        seen = np.concatenate([code.members1(b) for b in range(1, code.m1 + 1)])
        assert sorted(seen.tolist()) == list(range(64))
        assert code.rate1 == pytest.approx(math.log2(code.m1) / 6)

    def test_members_are_lexicographic(self):
        code = build_code(5, 0.4, 0.4, 9)
        for b in range(1, code.m1 + 1):
            seqs = [index_to_seq(int(i), 5, 2) for i in code.members1(b)]
            assert seqs == sorted(seqs)

    def test_budget_and_seed(self):
        with pytest.raises(ValueError, match="budget"):
            build_code(23, 0.5, 0.5, 0)
        with pytest.raises(ValueError, match="64-bit"):
            build_code(3, 0.5, 0.5, -1)
        with pytest.raises(ValueError):
            build_code(3, -0.1, 0.5, 0)

    def test_encode(self):
        code = build_code(4, 0.5, 0.5, 3)
        x, y = (1, 0, 1, 1), (0, 0, 1, 0)
        assert code.encode(x, y) == (int(code.bins1[13]), int(code.bins2[4]))


class TestDecode:
    def test_single_candidates(self):
        code = crafted(2, [1, 2, 3, 4], [1, 2, 3, 4])
        rule = DecodeRule.oracle(dsbs(0.1), 0, 2)
        assert decode(code, rule, 2, 3) == ((1, 0), (0, 1))

    def test_lexicographic_tie(self):
        # uniform source: every candidate ties; bin 1 holds (1,0,0) and (0,1,0)
        code = crafted(3, [2, 1, 1, 2, 2, 2, 2, 2], [1] * 8)
        rule = DecodeRule.oracle(UNIFORM, 0, 3)
        assert decode(code, rule, 1, 1) == ((0, 1, 0), (0, 0, 0))
        assert decode_indices(code, rule, 1, 1) == (2, 0)
        assert decoded_correctly(code, rule, 2, 0)
        assert not decoded_correctly(code, rule, 1, 0)

    def test_out_of_range(self):
        code = build_code(3, 0.5, 0.5, 0)
        with pytest.raises(ValueError, match="out of range"):
            decode(code, DecodeRule.oracle(dsbs(0.1), 0, 3), code.m1 + 1, 1)

    def test_mismatched_rule(self):
        with pytest.raises(ValueError, match="does not match"):
            decode(build_code(3, 0.5, 0.5, 0), DecodeRule.oracle(dsbs(0.1), 0, 4), 1, 1)

    def test_mixed_singleton_is_classical(self):
        j = JointPmf([[0.5, 0.25], [0.0, 0.25]])  # already a 4-type
        code = build_code(4, 0.6, 0.6, 2)
        mixed = DecodeRule.mixed(mixed_source([j], 4, [0]))
        oracle = DecodeRule.oracle(j, 0, 4)
        for b1, b2 in itertools.product(range(1, code.m1 + 1), range(1, code.m2 + 1)):
            assert decode(code, mixed, b1, b2) == decode(code, oracle, b1, b2)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_brute_force_argmax(self, seed):
        rng = np.random.default_rng(seed)
        j = random_joint(rng)
        d = int(rng.integers(-3, 4))
        code = build_code(3, 0.5, 0.4, seed)
        rule = DecodeRule.oracle(j, d, 3)
        block = delayed_block_pmf(j, 3, d)
        for b1, b2 in itertools.product(range(1, code.m1 + 1), range(1, code.m2 + 1)):
            X, Y = code.members1(b1), code.members2(b2)
            if X.size == 0 or Y.size == 0:
                continue
            best = max(((block[x, y], tuple(-v for v in index_to_seq(int(x), 3, 2)),
                         tuple(-v for v in index_to_seq(int(y), 3, 2)), int(x), int(y))
                        for x in X for y in Y))
            assert decode_indices(code, rule, b1, b2) == best[3:]

    def test_decoded_correctly_equivalence(self):
        j = dsbs(0.2)
        code = build_code(8, 0.3, 0.3, 7)  # large bins exercise the early exit
        rule = DecodeRule.mixed(mixed_source([j], 8, [-1, 0, 1]))
        table = decoding_table(code, rule)
        rng = np.random.default_rng(0)
        for x, y in rng.integers(0, 256, size=(60, 2)):
            a = int(np.searchsorted(table.bins1, code.bins1[x]))
            b = int(np.searchsorted(table.bins2, code.bins2[y]))
            expect = table.dec_x[a, b] == x and table.dec_y[a, b] == y
            assert decoded_correctly(code, rule, int(x), int(y)) == expect


class TestExactError:
    def test_injective_is_lossless(self):
        code = crafted(3, np.arange(1, 9), np.arange(1, 9))
        assert exact_error_probability(code, DecodeRule.oracle(dsbs(0.1), 1, 3), (dsbs(0.1), 1)) == pytest.approx(0, abs=1e-12)

    def test_single_bin(self):
        j = JointPmf([[0.2, 0.1], [0.3, 0.4]])
        code = build_code(2, 0.0, 0.0, 0)
        block = delayed_block_pmf(j, 2, 1)
        err = exact_error_probability(code, DecodeRule.oracle(j, 1, 2), (j, 1))
        assert err == pytest.approx(1 - block.max(), abs=1e-12)

    def test_dsbs_against_oracle(self):
        j = dsbs(0.1)
        code = build_code(3, 1.0, 1.0, 11)
        rule = DecodeRule.oracle(j, 0, 3)
        assert exact_error_probability(code, rule, (j, 0)) == pytest.approx(
            brute_force_error_probability(code, rule, (j, 0)), abs=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.floats(0, 1), st.floats(0, 1))
    def test_table_matches_oracle(self, seed, n, r1, r2):
        rng = np.random.default_rng(seed)
        members = [random_joint(rng) for _ in range(2)]
        code = build_code(n, r1, r2, seed)
        rule = DecodeRule.mixed(mixed_source(members, n, range(-n, n + 1)))
        d = int(rng.integers(-n, n + 1))
        assert exact_error_probability(code, rule, (members[0], d)) == pytest.approx(
            brute_force_error_probability(code, rule, (members[0], d)), abs=1e-12)

    def test_budget(self):
        code = build_code(13, 0.5, 0.5, 0)
        with pytest.raises(ValueError, match="budget"):
            exact_error_probability(code, DecodeRule.oracle(dsbs(0.1), 0, 13), (dsbs(0.1), 0))


class TestSupMax:
    def test_singleton_zero_delay(self):
        j = dsbs(0.2)
        code = build_code(4, 0.5, 0.5, 1)
        rule = DecodeRule.oracle(j, 0, 4)
        assert sup_max_error(code, rule, [j], [0]) == exact_error_probability(code, rule, (j, 0))

    def test_brute_double_loop(self):
        members = [dsbs(0.1), JointPmf([[0.40, 0.08], [0.12, 0.40]])]
        spec = DelaySpec.constant(1)
        code = build_code(3, 0.6, 0.6, 4)
        rule = DecodeRule.mixed(mixed_source(members, 3, spec.delay_set(3)))
        brute = max(brute_force_error_probability(code, rule, (j, d)) for j in members for d in (-1, 0, 1))
        assert sup_max_error(code, rule, members, spec) == pytest.approx(brute, abs=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_monotone_in_delays_and_class(self, seed):
        j, k = dsbs(0.1), dsbs(0.25)
        code = build_code(4, 0.6, 0.6, seed)
        rule = DecodeRule.mixed(mixed_source([j, k], 4, [-1, 0, 1]))
        base = sup_max_error(code, rule, [j], [0, 1])
        assert sup_max_error(code, rule, [j], [0, 1, 4]) >= base
        assert sup_max_error(code, rule, [j, k], [0, 1]) >= base


class TestOracleDominance:
    @pytest.mark.parametrize("n", [1, 2])
    def test_oracle_minimizes_over_all_decoders(self, n):
        # decoders act on each bin pair separately, so the best possible
        # error comes from picking the heaviest candidate in every bin pair
        rng = np.random.default_rng(n)
        members = [random_joint(rng), dsbs(0.15)]
        for seed in range(3):
            code = build_code(n, 0.5, 0.5, seed)
            for j in members:
                for d in range(-n, n + 1):
                    block = delayed_block_pmf(j, n, d)
                    best = 0.0
                    for b1, b2 in itertools.product(range(1, code.m1 + 1), range(1, code.m2 + 1)):
                        X, Y = code.members1(b1), code.members2(b2)
                        if X.size and Y.size:
                            best += max(block[x, y] for x in X for y in Y)
                    optimum = 1.0 - best
                    oracle = exact_error_probability(code, DecodeRule.oracle(j, d, n), (j, d))
                    assert oracle == pytest.approx(optimum, abs=1e-12)
                    for rule in (DecodeRule.mixed(mixed_source(members, n, range(-n, n + 1))),
                                 dummy_bound_code(n, 0.5, 0.5, members, seed)[1],
                                 DecodeRule.oracle(UNIFORM, 0, n)):
                        assert exact_error_probability(code, rule, (j, d)) >= oracle - 1e-12


class TestUniversality:
    def test_small_instance(self):
        j = dsbs(0.1)
        res = universality_gap_check(build_code(6, 0.85, 0.85, 1), [j], [-1, 0, 1])
        assert res["pass"] and res["tight_pass"]
        assert not res["guaranteed"]

    def test_deterministic_source(self):
        j = JointPmf([[1.0, 0.0], [0.0, 0.0]])
        res = universality_gap_check(build_code(4, 0.2, 0.2, 0), [j], [0])
        assert res["lhs"] == pytest.approx(0, abs=1e-12) and res["pass"]


class TestMonteCarlo:
    def test_lossless_zero(self):
        code = crafted(3, np.arange(1, 9), np.arange(1, 9))
        res = monte_carlo_error(code, DecodeRule.oracle(dsbs(0.1), 0, 3), (dsbs(0.1), 0), 500, 1)
        assert res.estimate == 0.0 and res.errors == 0

    def test_single_trial(self):
        code = build_code(6, 0.5, 0.5, 0)
        res = monte_carlo_error(code, DecodeRule.oracle(dsbs(0.1), 0, 6), (dsbs(0.1), 0), 1, 3)
        assert res.estimate in (0.0, 1.0)

    def test_deterministic(self):
        code = build_code(8, 0.6, 0.6, 0)
        rule = DecodeRule.oracle(dsbs(0.1), 1, 8)
        a = monte_carlo_error(code, rule, (dsbs(0.1), 1), 3000, 5)
        b = monte_carlo_error(code, rule, (dsbs(0.1), 1), 3000, 5)
        assert a == b

    def test_block_partition(self):
        # block b draws depend only on (seed words, b); the first 1024 trials
        # of a longer run are those of a 1024-trial run
        code = build_code(8, 0.6, 0.6, 0)
        rule = DecodeRule.oracle(dsbs(0.1), 0, 8)
        short = monte_carlo_error(code, rule, (dsbs(0.1), 0), 1024, 9)
        long = monte_carlo_error(code, rule, (dsbs(0.1), 0), 2048, 9)
        assert long.errors >= short.errors

    def test_matches_exact(self):
        hits = 0
        runs = 0
        for seed in range(5):
            j = dsbs(0.2)
            code = build_code(4, 0.6, 0.6, seed)
            rule = DecodeRule.mixed(mixed_source([j], 4, [-1, 0, 1]))
            for d in (-1, 0, 1):
                exact = exact_error_probability(code, rule, (j, d))
                lo, hi = monte_carlo_error(code, rule, (j, d), 10 ** 5, [seed, d + 4]).wilson_95_interval
                runs += 1
                hits += lo <= exact <= hi
        assert hits >= 0.95 * runs - 1  # one miss in 15 is allowed at 95%

    def test_sup_max_cells(self):
        code = build_code(6, 0.7, 0.7, 1)
        members = [dsbs(0.1), dsbs(0.2)]
        rule = DecodeRule.mixed(mixed_source(members, 6, [-1, 0, 1]))
        worst, cells = monte_carlo_sup_max(code, rule, members, [-1, 0, 1], 500, 3)
        assert len(cells) == 6
        assert worst.errors == max(c[2].errors for c in cells)

    def test_wilson(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0 and 0.03 < hi < 0.04
        lo, hi = wilson_interval(50, 100)
        assert lo == pytest.approx(0.4038, abs=1e-3) and hi == pytest.approx(0.5962, abs=1e-3)
        with pytest.raises(ValueError):
            wilson_interval(0, 0)


class TestDummy:
    def test_delays(self):
        assert dummy_delays(9) == list(range(-3, 4))
        assert dummy_delays(10) == list(range(-4, 5))
        assert dummy_delays(1) == [-1, 0, 1]

    def test_code_independent_of_delay(self):
        code, rule = dummy_bound_code(6, 0.6, 0.6, [dsbs(0.1)], 4)
        assert np.array_equal(code.bins1, build_code(6, 0.6, 0.6, 4).bins1)
        assert rule.name == "dummy"
        assert {d for _, d in rule.components} == set(range(-3, 4))

    def test_subset_monotonicity(self):
        j = dsbs(0.1)
        code, rule = dummy_bound_code(4, 0.6, 0.6, [j], 2)
        full = sup_max_error(code, rule, [j], dummy_delays(4))
        for d in dummy_delays(4):
            assert sup_max_error(code, rule, [j], [d]) <= full
