import itertools

import pytest
from hypothesis import assume, given, settings, strategies as st

from kteach.errors import DegenerateError, InputError, InsufficientDataError
from kteach.metrics import (
    CRITICAL_ONE_TAILED,
    DurationOverhead,
    PairedSample,
    duration_overhead,
    session_report,
    signed_rank_statistic,
    wilcoxon_signed_rank,
)


def pairs(diffs):
    return [PairedSample(f"s{i}", 0.0, d) for i, d in enumerate(diffs)]


def brute_force_w(diffs):
    """Independent oracle: rank |d| by explicit sorting with average ranks,
    then sum positive/negative rank sets directly."""
    nonzero = [d for d in diffs if d != 0]
    magnitudes = sorted(abs(d) for d in nonzero)
    def rank_of(value):
        positions = [i + 1 for i, m in enumerate(magnitudes) if m == abs(value)]
        return sum(positions) / len(positions)
    w_plus = sum(rank_of(d) for d in nonzero if d > 0)
    w_minus = sum(rank_of(d) for d in nonzero if d < 0)
    return min(w_plus, w_minus)


def exact_critical_value(n, alpha):
    """Independent oracle: exact null distribution of W+ by subset-sum DP."""
    counts = [0] * (n * (n + 1) // 2 + 1)
    counts[0] = 1
    for r in range(1, n + 1):
        for w in range(len(counts) - 1, r - 1, -1):
            counts[w] += counts[w - r]
    total = 2 ** n
    cumulative = 0
    best = None
    for w, c in enumerate(counts):
        cumulative += c
        if cumulative / total <= alpha:
            best = w
        else:
            break
    return best


class TestCriticalTable:
    def test_n12_alpha05_is_17(self):
        result = wilcoxon_signed_rank(pairs([1, -2, 3, -4, 5, 6, 7, 8, 9, 10, 11, 12]))
        assert result.w_critical == 17

    @pytest.mark.parametrize("alpha", [0.05, 0.01])
    def test_table_matches_exact_enumeration(self, alpha):
        for n, tabulated in CRITICAL_ONE_TAILED[alpha].items():
            assert tabulated == exact_critical_value(n, alpha), (n, alpha)

    def test_reported_decision_fail_to_reject(self):
        # W = 20 with n = 12 and W_c = 17 must not reject:
        # negative signs sit at ranks 9 and 11, so W- = 20 = min(W+, W-)
        diffs = [1, 2, 3, 4, 5, 6, 7, 8, -9, 10, -11, 12]
        result = wilcoxon_signed_rank(pairs(diffs))
        assert result.w == 20
        assert result.w_critical == 17
        assert not result.reject


class TestStatistic:
    def test_all_positive_differences(self):
        w, w_plus, w_minus, n = signed_rank_statistic([1, 2, 3])
        assert (w, w_minus, n) == (0, 0, 3)
        assert w_plus == 6

    def test_zero_differences_dropped(self):
        w, _, _, n = signed_rank_statistic([0, 1, -2, 0, 3])
        assert n == 3
        assert w == 2  # |-2| ranks second

    def test_ties_get_average_ranks(self):
        w, w_plus, w_minus, _ = signed_rank_statistic([1, -1, 2])
        assert w_plus == pytest.approx(1.5 + 3)
        assert w_minus == pytest.approx(1.5)
        assert w == pytest.approx(1.5)

    def test_all_zero_degenerate(self):
        with pytest.raises(DegenerateError):
            signed_rank_statistic([0.0, 0.0])

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_exhaustive_sign_patterns_match_brute_force(self, n):
        magnitudes = [1.5, 2.25, 3.0, 4.5, 5.0, 7.75][:n]
        for signs in itertools.product([1, -1], repeat=n):
            diffs = [s * m for s, m in zip(signs, magnitudes)]
            w, *_ = signed_rank_statistic(diffs)
            assert w == pytest.approx(brute_force_w(diffs))

    def test_w_range_invariant(self):
        diffs = [3, -1, 4, -2, 6, 5, 8, -5, 7, 9]
        w, *_ , n = signed_rank_statistic(diffs)
        assert 0 <= w <= n * (n + 1) / 2


class TestWilcoxonValidation:
    def test_too_few_samples(self):
        with pytest.raises(InsufficientDataError):
            wilcoxon_signed_rank(pairs([1, 2, 3]))

    def test_zeros_can_push_n_below_range(self):
        with pytest.raises(InsufficientDataError):
            wilcoxon_signed_rank(pairs([0, 0, 0, 0, 0, 0, 0, 1, 2, 3]))

    def test_all_zero_differences(self):
        with pytest.raises(DegenerateError):
            wilcoxon_signed_rank(pairs([0.0] * 8))

    def test_unsupported_alpha(self):
        with pytest.raises(InputError):
            wilcoxon_signed_rank(pairs([1, 2, 3, 4, 5, 6, 7]), alpha=0.10)

    def test_non_finite_sample_rejected(self):
        with pytest.raises(InputError):
            PairedSample("s", float("nan"), 1.0)


@settings(max_examples=100, deadline=None)
@given(
    diffs=st.lists(
        st.floats(-100, 100, allow_nan=False).filter(lambda d: abs(d) > 1e-6),
        min_size=6, max_size=20, unique_by=abs),
    scale=st.floats(0.1, 50.0),
    shift=st.floats(-100, 100),
)
def test_invariant_under_affine_transform_of_both_members(diffs, scale, shift):
    base = [PairedSample(f"s{i}", 10.0, 10.0 + d) for i, d in enumerate(diffs)]
    mapped = [PairedSample(s.subject_id, scale * s.value_c1 + shift,
                           scale * s.value_c2 + shift) for s in base]
    base_diffs = [s.value_c2 - s.value_c1 for s in base]
    mapped_diffs = [s.value_c2 - s.value_c1 for s in mapped]
    # premise of the invariance: the transform preserved signs and the strict
    # rank order of magnitudes (float rounding can collapse near-ties)
    assume(all(a * b > 0 for a, b in zip(base_diffs, mapped_diffs)))
    base_order = sorted(range(len(base_diffs)), key=lambda i: abs(base_diffs[i]))
    mapped_order = sorted(range(len(mapped_diffs)), key=lambda i: abs(mapped_diffs[i]))
    assume(base_order == mapped_order)
    assume(len({abs(d) for d in mapped_diffs}) == len(mapped_diffs))
    w_base, *_ = signed_rank_statistic(base_diffs)
    w_mapped, *_ = signed_rank_statistic(mapped_diffs)
    assert w_base == pytest.approx(w_mapped, rel=1e-9)


class TestDurationOverhead:
    def test_single_pair(self):
        result = duration_overhead([PairedSample("s1", 100.0, 144.0)])
        assert result == DurationOverhead(mean_diff=44.0, mean_relative=0.44)

    def test_identical_conditions(self):
        result = duration_overhead([PairedSample("s1", 90.0, 90.0)])
        assert result.mean_diff == 0.0
        assert result.mean_relative == 0.0

    def test_synthetic_cohort_hits_target_aggregates(self):
        # constructed so the mean overhead is 44 s and 37% relative
        c1 = [100.0, 120.0, 140.0, 110.0]
        rel = 0.37
        mean_diff = 44.0
        base = [rel * v for v in c1]
        correction = (mean_diff - sum(base) / len(base))
        samples = [PairedSample(f"s{i}", v, v + rel * v + correction)
                   for i, v in enumerate(c1)]
        result = duration_overhead(samples)
        assert result.mean_diff == pytest.approx(44.0, abs=1e-9)
        corrected_rel = sum((rel * v + correction) / v for v in c1) / len(c1)
        assert result.mean_relative == pytest.approx(corrected_rel, abs=1e-9)

    def test_nonpositive_c1_rejected(self):
        with pytest.raises(InputError):
            duration_overhead([PairedSample("s1", 0.0, 10.0)])

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            duration_overhead([])


class TestSessionReport:
    def test_record_fields(self, tmp_path, planar2):
        from kteach.metrics import append_report, read_report_log
        from kteach.scene import spawn_scene
        from kteach.session import Gripper, RobotState, Trajectory

        states = tuple(RobotState(i * 50, (0.0, 0.0), Gripper.OPEN) for i in range(100))
        traj = Trajectory("s1", states, 0, 4950)
        scene = spawn_scene({
            "cubes": [{"id": "a", "xy": [0.4, 0.0]}],
            "target_order": ["a"], "target_base_xy": [0.4, 0.0],
        })
        record = session_report(traj, None, scene, subject="p1", condition="C1")
        assert record["states"] == 100
        assert record["duration_s"] == pytest.approx(4.95)
        assert record["cubes_stacked"] == 1
        log = tmp_path / "results.jsonl"
        append_report(log, record)
        append_report(log, record)
        assert len(read_report_log(log)) == 2

    def test_unfinalized_rejected(self):
        with pytest.raises(InputError):
            session_report(None, None, None)
