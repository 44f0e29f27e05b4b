"""Scheme generators and the figure experiment driver."""

import json

import numpy as np
import pytest

from trialmarket import InvalidInstanceError, MarketConfig
from trialmarket.experiments import (
    APPEAL_FLOOR,
    ExperimentScale,
    SchemeSpec,
    default_visibilities,
    generate_scheme,
    parse_figure_id,
    run_figure_experiment,
)


class TestVisibilities:
    def test_power_profile(self):
        v = default_visibilities(4)
        assert v[0] == 1.0
        assert np.all(np.diff(v) < 0)
        np.testing.assert_allclose(v, (1.0 / np.arange(1, 5)) ** 0.8)


class TestSchemes:
    def test_scheme1_appeal_quality_sum_to_one(self):
        cfg = generate_scheme(SchemeSpec(scheme=1, num_items=50, seed=3))
        np.testing.assert_allclose(cfg.appeals + cfg.qualities, 1.0, atol=1e-9)

    def test_scheme2_appeal_quality_ratio_range(self):
        cfg = generate_scheme(SchemeSpec(scheme=2, num_items=50, seed=4))
        ratio = cfg.appeals / cfg.qualities
        mask = cfg.qualities > 1e-6
        assert np.all(ratio[mask] >= 0.8 - 1e-9)
        assert np.all(ratio[mask] <= 1.2 + 1e-9)

    def test_scheme3_classes_nearly_complementary(self):
        cfg = generate_scheme(SchemeSpec(scheme=3, num_items=50, seed=5))
        total = cfg.qualities[:, 0] + cfg.qualities[:, 1]
        assert np.all(total >= 1.0 - 1e-9)
        assert np.all(total <= 1.01 + 1e-9)

    def test_scheme3_and_4_anticorrelated_tastes(self):
        for scheme in (3, 4):
            cfg = generate_scheme(SchemeSpec(scheme=scheme, num_items=50, seed=6))
            corr = np.corrcoef(cfg.qualities[:, 0], cfg.qualities[:, 1])[0, 1]
            assert corr <= -0.95

    def test_scheme4_shares_scheme3_qualities(self):
        q3 = generate_scheme(SchemeSpec(scheme=3, num_items=30, seed=7)).qualities
        q4 = generate_scheme(SchemeSpec(scheme=4, num_items=30, seed=7)).qualities
        np.testing.assert_array_equal(q3, q4)

    def test_generation_deterministic(self):
        a = generate_scheme(SchemeSpec(scheme=2, num_items=25, seed=8))
        b = generate_scheme(SchemeSpec(scheme=2, num_items=25, seed=8))
        np.testing.assert_array_equal(a.appeals, b.appeals)
        np.testing.assert_array_equal(a.qualities, b.qualities)
        c = generate_scheme(SchemeSpec(scheme=2, num_items=25, seed=9))
        assert not np.array_equal(a.qualities, c.qualities)

    def test_all_schemes_produce_valid_configs(self):
        for scheme in (1, 2, 3, 4):
            for seed in range(5):
                cfg = generate_scheme(SchemeSpec(scheme=scheme, num_items=20, seed=seed))
                assert isinstance(cfg, MarketConfig)
                assert cfg.num_classes == 2
                np.testing.assert_allclose(cfg.class_weights, [0.5, 0.5])
                assert cfg.appeals.min() >= APPEAL_FLOOR

    def test_additive_noise_reading_differs(self):
        base = generate_scheme(SchemeSpec(scheme=2, num_items=20, seed=10))
        alt = generate_scheme(SchemeSpec(scheme=2, num_items=20, seed=10, scheme2_additive_noise=True))
        np.testing.assert_array_equal(base.qualities, alt.qualities)
        assert not np.array_equal(base.appeals, alt.appeals)

    def test_invalid_spec(self):
        with pytest.raises(InvalidInstanceError):
            SchemeSpec(scheme=5)
        with pytest.raises(InvalidInstanceError):
            SchemeSpec(scheme=1, num_items=0)


class TestFigureIds:
    def test_parse_known_ids(self):
        assert parse_figure_id("me-scheme1") == ("efficiency", 1, None)
        assert parse_figure_id("profiles-scheme3-sqssi") == ("profile", 3, "SQSSI")
        assert parse_figure_id("profiles-scheme2-AQGSI") == ("profile", 2, "AQGSI")

    def test_parse_unknown_ids(self):
        for bad in ("me-scheme9", "profiles-scheme1-xyz", "figure42", "me"):
            with pytest.raises(InvalidInstanceError):
                parse_figure_id(bad)


class TestRunFigureExperiment:
    def test_efficiency_artifacts(self, tmp_path):
        scale = ExperimentScale(num_items=6, horizon=60, replications=8)
        manifest = run_figure_experiment("me-scheme1", scale, seed=1, out_dir=tmp_path)
        csv_path = tmp_path / "me-scheme1_efficiency.csv"
        assert csv_path.exists()
        header = csv_path.read_text().splitlines()[0]
        assert header == "policy,step,mean_cum_purchases,stderr"
        assert manifest["policies"] == ["SQSSI", "SQNSI", "AQGSI", "AQNSI"]
        on_disk = json.loads((tmp_path / "me-scheme1_manifest.json").read_text())
        assert on_disk["checksums"] == manifest["checksums"]
        # the recorded config reproduces the generated market
        cfg = MarketConfig.from_json_dict(on_disk["config"])
        assert cfg.num_items == 6

    def test_profile_artifacts(self, tmp_path):
        scale = ExperimentScale(num_items=5, horizon=40, replications=5)
        manifest = run_figure_experiment("profiles-scheme3-sqssi", scale, seed=2, out_dir=tmp_path)
        csv_path = tmp_path / "profiles-scheme3-sqssi_profile.csv"
        assert csv_path.exists()
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0].startswith("policy,item,class_or_total")
        assert all(line.split(",")[0] == "SQSSI" for line in lines[1:])
        assert manifest["figure"] == "profiles-scheme3-sqssi"

    def test_reruns_reproduce_checksums(self, tmp_path):
        scale = ExperimentScale(num_items=5, horizon=30, replications=4)
        m1 = run_figure_experiment("me-scheme2", scale, seed=3, out_dir=tmp_path / "a")
        m2 = run_figure_experiment("me-scheme2", scale, seed=3, out_dir=tmp_path / "b")
        assert m1["checksums"] == m2["checksums"]
