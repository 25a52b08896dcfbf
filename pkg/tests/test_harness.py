import csv

import numpy as np
import pytest

from radialnet import harness, models
from radialnet.harness import ExperimentConfig, ResultRow
from radialnet.models import ModelKind, ParamLayout


def test_default_kinds_have_ledger_param_counts():
    assert models.param_count(harness.default_kind("log_2d", "direct")) == 27
    assert models.param_count(harness.default_kind("crack_2d", "angular")) == 51
    assert models.param_count(
        harness.default_kind("crack_2d", "angular_half_integer")) == 59
    assert models.param_count(harness.default_kind("log_2d", "msn")) == 49
    assert models.param_count(harness.default_kind("coulomb_3d", "msn")) == 73
    assert models.param_count(
        harness.default_kind("two_source_2d", "multicenter")) == 43


def test_experiment_config_overrides():
    cfg = ExperimentConfig("log_2d", kind_overrides={"k": 4},
                           train_overrides={"iterations": 10})
    assert cfg.kind().k == 4
    assert cfg.train_config(0).iterations == 10


def test_dominant_exponents_filters_small_coefficients():
    kind = ModelKind.direct(2, k=6)
    theta = models.exact_power_sum(kind, [-1.0, 1.0], [2.0, 1e-8])
    mus = harness.dominant_exponents(kind, theta)
    assert mus[0] == pytest.approx(-1.0, abs=1e-9)
    assert all(abs(m - 1.0) > 1e-6 for m in mus)


class TestKmeans:
    def test_recovers_separated_clusters(self):
        rng = np.random.default_rng(0)
        true = np.array([[-0.5, -0.5], [0.5, 0.5], [0.5, -0.5]])
        pts = np.concatenate([t + 0.01 * rng.normal(size=(50, 2)) for t in true])
        got = harness.kmeans(pts, 3, seed=1)
        for t in true:
            assert np.min(np.linalg.norm(got - t, axis=1)) < 0.01

    def test_deterministic(self):
        pts = np.random.default_rng(2).normal(size=(100, 2))
        a = harness.kmeans(pts, 4, seed=7)
        b = harness.kmeans(pts, 4, seed=7)
        assert np.array_equal(a, b)

    def test_rejects_degenerate_input(self):
        with pytest.raises(ValueError):
            harness.kmeans(np.zeros((10, 2)), 2)


def test_freeze_log_primitive_mask():
    kind = ModelKind.direct(2, k=6)
    la = ParamLayout(kind)
    mask = harness.freeze_log_primitive_mask(kind)
    assert mask[la.slices["log_coeff"]][0] == 0.0
    assert mask[la.slices["log_mu"]][0] == 0.0
    assert mask.sum() == la.count - 2


def test_pinn_model_is_thirteen_free_parameters():
    """Frozen center and log branch leave coeffs, gaps, and bias trainable."""
    kind = harness.pinn_model_kind()
    mask = harness.freeze_centers_mask(kind)
    assert models.param_count(kind) == int(mask.sum()) + 4
    assert int(mask.sum()) == 13


def test_sample_charge_center_respects_margin():
    rng = np.random.default_rng(0)
    for _ in range(100):
        c = harness.sample_charge_center(rng)
        assert np.max(np.abs(c)) <= 0.85


def test_csv_roundtrip(tmp_path):
    rows = [ResultRow("log_2d", "direct", 0, 1.5e-3, 27,
                      dominant_exponents=(-1.0, 0.5)),
            ResultRow("two_source_2d", "multicenter", 1, 2e-2, 43,
                      centers=((-0.3, 0.0), (0.3, 0.0)))]
    path = tmp_path / "rows.csv"
    harness.write_rows_csv(rows, path)
    with open(path, newline="") as fh:
        recs = list(csv.DictReader(fh))
    assert recs[0]["benchmark"] == "log_2d"
    assert recs[0]["dominant_exponents"] == "-1.000000;0.500000"
    assert recs[1]["centers"] == "-0.300000,0.000000;0.300000,0.000000"
    assert "wall_time_s" not in recs[0]


def test_summarize_groups_and_published_reference():
    rows = [ResultRow("log_2d", "direct", s, 1e-3 * (s + 1), 27)
            for s in range(3)]
    rows.append(ResultRow("log_2d", "direct", 3, float("nan"), 27, failed=True))
    out = harness.summarize(rows)
    assert len(out) == 1
    assert out[0]["n_ok"] == 3
    assert out[0]["rmse_mean"] == pytest.approx(2e-3)
    assert out[0]["published"]["radial"] == pytest.approx(4.85e-3)


def test_radial_error_profile_bins():
    from radialnet import targets
    kind = ModelKind.direct(2, k=6)
    theta = models.exact_power_sum(kind, [-1.0], [1.0])
    prof = harness.radial_error_profile(kind, theta, targets.by_name("inv_2d"), 8)
    assert len(prof) == 8
    radii = [r for r, _ in prof]
    assert radii == sorted(radii)
    assert all(rmse < 1e-10 for _, rmse in prof)


def test_run_single_smoke(tmp_path):
    cfg = ExperimentConfig("sqrt_2d", "direct", seeds=(0,),
                           train_overrides={"iterations": 50})
    row, report = harness.run_single(cfg, 0)
    assert row.param_count == 27
    assert np.isfinite(row.rmse)
    harness.write_report_json(report, tmp_path / "r.json")
    assert (tmp_path / "r.json").exists()
