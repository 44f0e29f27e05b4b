"""Generalized quantities, monopoly prediction, and limit-ratio bounds."""

import math

import numpy as np
import pytest

from trialmarket import (
    AQGSI,
    MarketConfig,
    Ranking,
    ReplicationStream,
    run_simulation,
    trial_probabilities,
)
from trialmarket.analysis import (
    AsymptoticReport,
    TieBreakingError,
    asymptotic_report,
    dtot_threshold,
    generalized_appeal,
    generalized_quality,
    limit_quantities,
    monopoly_predictor,
    no_signal_purchase_probability,
    purchase_probabilities_static,
    quality_sandwich_bound,
    reconstructed_purchase_probabilities,
    tie_breaking_global,
    tie_breaking_segmented,
    tightness_instance,
)
from trialmarket.policies import average_quality, average_quality_ranking

from test_model import random_config


def random_state(rng, n):
    return rng.integers(0, 30, n)


class TestGeneralizedQuantities:
    def test_single_class_collapse(self):
        rng = np.random.default_rng(0)
        cfg = random_config(rng, 5, 1)
        ranking = Ranking.from_item_order(rng.permutation(5))
        d = random_state(rng, 5)
        np.testing.assert_allclose(generalized_appeal(cfg, ranking, d), cfg.appeals[:, 0], atol=1e-12)
        np.testing.assert_allclose(generalized_quality(cfg, ranking, d), cfg.qualities[:, 0], atol=1e-12)

    def test_equal_appeals_across_classes(self):
        rng = np.random.default_rng(1)
        a = rng.random(4) + 0.1
        cfg = MarketConfig(
            appeals=np.stack([a, a], axis=1),
            qualities=rng.random((4, 2)) * 0.9 + 0.05,
            visibilities=np.sort(rng.random(4))[::-1] + 0.1,
            class_weights=[0.3, 0.7],
        )
        got = generalized_appeal(cfg, Ranking.identity(4), random_state(rng, 4))
        np.testing.assert_allclose(got, a, atol=1e-12)

    def test_appeal_stays_between_class_extremes(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n, k = int(rng.integers(2, 7)), int(rng.integers(2, 5))
            cfg = random_config(rng, n, k, z=float(rng.choice([0.0, 1.0])))
            ranking = Ranking.from_item_order(rng.permutation(n))
            got = generalized_appeal(cfg, ranking, random_state(rng, n))
            lo, hi = cfg.appeals.min(axis=1), cfg.appeals.max(axis=1)
            ok = ~np.isnan(got)
            assert np.all(got[ok] >= lo[ok] - 1e-12)
            assert np.all(got[ok] <= hi[ok] + 1e-12)

    def test_zero_weighted_quality_reports_nan(self):
        cfg = MarketConfig(
            appeals=[[1.0, 2.0], [1.0, 1.0]],
            qualities=[[0.0, 0.0], [0.5, 0.5]],
            visibilities=[1.0, 0.5],
            class_weights=[0.5, 0.5],
        )
        got = generalized_appeal(cfg, Ranking.identity(2), [0, 0])
        assert math.isnan(got[0]) and not math.isnan(got[1])
        # the decomposition stays exact despite the undefined entry
        direct = purchase_probabilities_static(cfg, Ranking.identity(2), [3, 4])
        rebuilt = reconstructed_purchase_probabilities(cfg, Ranking.identity(2), [3, 4])
        np.testing.assert_allclose(rebuilt, direct, atol=1e-12)

    def test_decomposition_identity_random(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            n, k = int(rng.integers(1, 8)), int(rng.integers(1, 5))
            cfg = random_config(rng, n, k, z=float(rng.choice([0.0, 0.5, 2.0])))
            ranking = Ranking.from_item_order(rng.permutation(n))
            d = random_state(rng, n)
            direct = purchase_probabilities_static(cfg, ranking, d)
            rebuilt = reconstructed_purchase_probabilities(cfg, ranking, d)
            np.testing.assert_allclose(rebuilt, direct, atol=1e-12)

    def test_sandwich_bounds_random(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            n, k = int(rng.integers(2, 7)), int(rng.integers(2, 4))
            cfg = random_config(rng, n, k, z=float(rng.choice([0.0, 1.0])))
            ranking = Ranking.from_item_order(rng.permutation(n))
            d = rng.integers(1, 50, n)  # ensure positive weighted purchases
            bound = quality_sandwich_bound(cfg, ranking, d)
            qbar = average_quality(cfg)
            qt = generalized_quality(cfg, ranking, d)
            assert np.all(qt >= (1 - bound) * qbar - 1e-12)
            assert np.all(qt <= (1 + bound) * qbar + 1e-12)

    def test_quality_converges_with_large_counts(self):
        rng = np.random.default_rng(5)
        cfg = random_config(rng, 5, 3)
        ranking = Ranking.identity(5)
        d = rng.integers(1, 5, 5) * 10**6
        qbar = average_quality(cfg)
        qt = generalized_quality(cfg, ranking, d)
        bound = quality_sandwich_bound(cfg, ranking, d)
        assert bound < 1e-4
        assert np.all(np.abs(qt - qbar) <= bound * qbar + 1e-15)


class TestLimitQuantities:
    def test_single_class(self):
        rng = np.random.default_rng(6)
        cfg = random_config(rng, 4, 1)
        abar, qbar = limit_quantities(cfg)
        np.testing.assert_allclose(abar, cfg.appeals[:, 0], atol=1e-12)
        np.testing.assert_allclose(qbar, cfg.qualities[:, 0], atol=1e-12)

    def test_equal_quality_weighted_average(self):
        cfg = MarketConfig(
            appeals=[[2.0, 4.0]],
            qualities=[[1.0, 1.0]],
            visibilities=[1.0],
            class_weights=[0.5, 0.5],
        )
        abar, qbar = limit_quantities(cfg)
        assert abs(abar[0] - 3.0) <= 1e-12
        assert abs(qbar[0] - 1.0) <= 1e-12

    def test_degenerate_weight_collapse(self):
        cfg = MarketConfig(
            appeals=[[2.5, 9.0]],
            qualities=[[1.0, 0.0]],
            visibilities=[1.0],
            class_weights=[0.5, 0.5],
        )
        abar, _ = limit_quantities(cfg)
        assert abs(abar[0] - 2.5) <= 1e-12

    def test_zero_quality_item_is_nan(self):
        cfg = MarketConfig(
            appeals=[[1.0], [1.0]],
            qualities=[[0.0], [0.5]],
            visibilities=[1.0, 0.5],
            class_weights=[1.0],
        )
        abar, _ = limit_quantities(cfg)
        assert math.isnan(abar[0]) and abar[1] == 1.0


class TestMonopolyPredictor:
    def test_visibility_quality_tradeoff(self):
        cfg = MarketConfig(
            appeals=np.ones((2, 1)),
            qualities=[[0.4], [0.9]],
            visibilities=[1.0, 0.5],
            class_weights=[1.0],
        )
        assert monopoly_predictor(cfg, Ranking.identity(2)) == 1  # 0.45 > 0.4

    def test_average_quality_ranking_gives_best_item(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            cfg = random_config(rng, 6, 2)
            ranking = average_quality_ranking(cfg)
            assert monopoly_predictor(cfg, ranking) == int(np.argmax(average_quality(cfg)))

    def test_exact_tie_rejected(self):
        cfg = MarketConfig(
            appeals=np.ones((2, 1)),
            qualities=[[0.5], [0.5]],
            visibilities=[1.0, 1.0],
            class_weights=[1.0],
        )
        with pytest.raises(TieBreakingError):
            monopoly_predictor(cfg, Ranking.identity(2))


class TestTieBreaking:
    def test_distinct_values_pass(self):
        cfg = MarketConfig(
            appeals=np.ones((3, 1)),
            qualities=[[0.9], [0.5], [0.1]],
            visibilities=[1.0, 0.7, 0.3],
            class_weights=[1.0],
        )
        assert tie_breaking_global(cfg, Ranking.identity(3))
        assert tie_breaking_segmented(cfg)

    def test_duplicate_top_fails(self):
        cfg = MarketConfig(
            appeals=np.ones((2, 1)),
            qualities=[[0.8], [0.8]],
            visibilities=[1.0, 1.0],
            class_weights=[1.0],
        )
        assert not tie_breaking_global(cfg, Ranking.identity(2))
        assert not tie_breaking_segmented(cfg)

    def test_segmented_fails_while_global_holds(self):
        # class 2 has a duplicated top quality; weighted averages differ
        cfg = MarketConfig(
            appeals=np.ones((2, 2)),
            qualities=[[0.9, 0.6], [0.2, 0.6]],
            visibilities=[1.0, 0.5],
            class_weights=[0.5, 0.5],
        )
        assert not tie_breaking_segmented(cfg)
        assert tie_breaking_global(cfg, average_quality_ranking(cfg))


class TestDtotThreshold:
    def test_uniform_visibility_formula(self):
        cfg = MarketConfig(
            appeals=[[0.5], [0.25]],
            qualities=[[0.8], [0.2]],
            visibilities=[1.0, 1.0],
            class_weights=[1.0],
        )
        got = dtot_threshold(cfg, Ranking.identity(2))
        # ratio 1, sum of max appeals 0.75, gap 0.6, sum of top two 1.0
        assert abs(got - 0.75 / 0.6 * 1.0) <= 1e-12

    def test_threshold_grows_as_gap_shrinks(self):
        def make(gap):
            return MarketConfig(
                appeals=[[0.5], [0.5]],
                qualities=[[0.5 + gap], [0.5]],
                visibilities=[1.0, 1.0],
                class_weights=[1.0],
            )

        assert dtot_threshold(make(0.01), Ranking.identity(2)) > dtot_threshold(
            make(0.2), Ranking.identity(2)
        )

    def test_zero_visibility_rejected(self):
        cfg = MarketConfig(
            appeals=[[1.0], [1.0]],
            qualities=[[0.9], [0.1]],
            visibilities=[1.0, 0.0],
            class_weights=[1.0],
        )
        with pytest.raises(ValueError):
            dtot_threshold(cfg, Ranking.identity(2))

    def test_leader_stays_ahead_past_threshold(self):
        rng = np.random.default_rng(8)
        cfg = MarketConfig(
            appeals=rng.random((4, 2)) + 0.1,
            qualities=np.array([[0.95, 0.9], [0.3, 0.2], [0.25, 0.15], [0.1, 0.05]]),
            visibilities=[1.0, 0.8, 0.6, 0.4],
            class_weights=[0.5, 0.5],
        )
        ranking = average_quality_ranking(cfg)
        threshold = dtot_threshold(cfg, ranking)
        leader = monopoly_predictor(cfg, ranking)
        veff = cfg.visibilities[ranking.position_of_item]
        trace = run_simulation(cfg, AQGSI, 3000, ReplicationStream.for_replication(17, 0, 0))
        state = trace.final_state
        assert state.total_purchases() > threshold
        scores = veff * generalized_quality(cfg, ranking, state.global_purchases)
        others = np.delete(scores, leader)
        assert scores[leader] > others.max()


class TestAsymptoticReport:
    def test_opposite_diagonal_classes(self):
        cfg = MarketConfig(
            appeals=np.ones((2, 2)),
            qualities=[[1.0, 0.0], [0.0, 1.0]],
            visibilities=[1.0, 0.5],
            class_weights=[0.5, 0.5],
        )
        report = asymptotic_report(cfg)
        assert report.p_sqssi == 1.0
        assert report.p_aqgsi == 0.5
        assert abs(report.ratio_sqssi_aqgsi - 2.0) <= 1e-12
        assert report.aqgsi_monopoly_item == 0
        assert report.sqssi_monopoly_items == [0, 1]

    def test_single_class_ratio_is_one(self):
        rng = np.random.default_rng(9)
        cfg = random_config(rng, 5, 1)
        report = asymptotic_report(cfg)
        assert abs(report.ratio_sqssi_aqgsi - 1.0) <= 1e-12
        assert report.p_sqssi == report.p_aqgsi == cfg.qualities[:, 0].max()

    def test_no_signal_value_matches_direct_formula(self):
        rng = np.random.default_rng(10)
        cfg = random_config(rng, 5, 3, z=0.5)
        ranking = average_quality_ranking(cfg)
        expected = 0.0
        for k in range(3):
            p, _ = trial_probabilities(cfg, ranking, np.zeros(5, dtype=int), k)
            expected += cfg.class_weights[k] * float(p @ cfg.qualities[:, k])
        assert abs(no_signal_purchase_probability(cfg, [ranking] * 3) - expected) <= 1e-12
        assert abs(asymptotic_report(cfg).p_aqnsi - expected) <= 1e-12

    def test_tie_failure_marks_fields_unavailable(self):
        cfg = MarketConfig(
            appeals=np.ones((2, 2)),
            qualities=[[0.6, 0.6], [0.6, 0.6]],
            visibilities=[1.0, 1.0],
            class_weights=[0.5, 0.5],
        )
        report = asymptotic_report(cfg)
        assert report.p_aqgsi is None and report.p_sqssi is None
        assert report.ratio_sqssi_aqgsi is None
        assert '"p_aqgsi": null' in report.to_json()

    def test_ratio_bounds_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n, k = int(rng.integers(2, 8)), int(rng.integers(2, 6))
            cfg = random_config(rng, n, k, z=float(rng.choice([0.0, 1.0])))
            report = asymptotic_report(cfg)
            if report.ratio_sqssi_aqgsi is not None:
                assert 1.0 - 1e-12 <= report.ratio_sqssi_aqgsi <= k + 1e-12
            if report.ratio_aqnsi_aqgsi is not None:
                assert 0.0 <= report.ratio_aqnsi_aqgsi <= k + 1e-12


class TestTightnessInstances:
    def test_hidden_signal_upper_ratio(self):
        cfg = tightness_instance("theorem3_upper", 3, 0.01)
        report = asymptotic_report(cfg)
        assert abs(report.ratio_aqnsi_aqgsi - 2.98) <= 1e-9  # K - eps*(K-1)

    def test_hidden_signal_lower_ratio_collapses(self):
        for eps_a, limit in [(1e-3, 1e-2), (1e-6, 1e-5)]:
            cfg = tightness_instance("theorem3_lower", 3, 0.01, epsilon_appeal=eps_a)
            report = asymptotic_report(cfg)
            assert 0.0 <= report.ratio_aqnsi_aqgsi <= limit

    def test_segmentation_ratio(self):
        cfg = tightness_instance("theorem4", 2, 0.01)
        report = asymptotic_report(cfg)
        assert abs(report.ratio_sqssi_aqgsi - 1.99) <= 1e-12

    def test_instances_satisfy_model_invariants(self):
        for kind in ("theorem3_upper", "theorem3_lower", "theorem4"):
            cfg = tightness_instance(kind, 4, 0.05, epsilon_appeal=0.01)
            assert isinstance(cfg, MarketConfig)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            tightness_instance("bogus", 3, 0.01)
        with pytest.raises(ValueError):
            tightness_instance("theorem4", 1, 0.01)
        with pytest.raises(ValueError):
            tightness_instance("theorem3_lower", 3, 0.01)  # missing epsilon_appeal
