import numpy as np
import pytest

from radialnet import sampling, targets
from radialnet.gradients import PinnWeights
from radialnet.models import ModelKind, ParamLayout
from radialnet.optimize import (
    Adam, TrainConfig, clip_global_norm, cosine_lr, curriculum_weights, fit,
    init_params, predict,
)


class TestAdam:
    def test_first_step_is_signed_lr(self):
        """With bias correction, step 1 moves each coordinate by ~lr*sign(g)."""
        adam = Adam(3)
        params = np.zeros(3)
        grad = np.array([0.5, -2.0, 1e-3])
        new = adam.step(params, grad, lr=0.1)
        assert np.allclose(new, -0.1 * grad / (np.abs(grad) + 1e-8), atol=1e-6)

    def test_matches_reference_trajectory(self):
        """Hand-rolled reference loop on a quadratic, 50 steps."""
        f_grad = lambda p: 2 * (p - np.array([1.0, -2.0]))
        adam = Adam(2)
        p = np.zeros(2)
        # reference implementation
        m = np.zeros(2)
        v = np.zeros(2)
        q = np.zeros(2)
        for t in range(1, 51):
            g = f_grad(q)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g ** 2
            q = q - 0.05 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
            p = adam.step(p, f_grad(p), 0.05)
        assert np.allclose(p, q, atol=1e-12)

    def test_converges_on_quadratic(self):
        target = np.array([1.0, -2.0, 0.5])
        adam = Adam(3)
        p = np.zeros(3)
        for _ in range(2000):
            p = adam.step(p, 2 * (p - target), 0.05)
        assert np.allclose(p, target, atol=1e-4)

    def test_nonfinite_gradient_aborts_with_index(self):
        adam = Adam(3)
        with pytest.raises(FloatingPointError, match="index 1"):
            adam.step(np.zeros(3), np.array([0.0, np.nan, 1.0]), 0.1)


def test_cosine_schedule_endpoints():
    assert cosine_lr(0, 100, 1e-2, 1e-4) == pytest.approx(1e-2)
    assert cosine_lr(99, 100, 1e-2, 1e-4) == pytest.approx(1e-4)
    mid = cosine_lr(50, 101, 1e-2, 1e-4)
    assert mid == pytest.approx(0.5 * (1e-2 + 1e-4), rel=1e-6)


def test_clip_global_norm():
    g = np.array([3.0, 4.0])
    clipped = clip_global_norm(g, 1.0)
    assert np.linalg.norm(clipped) == pytest.approx(1.0)
    assert np.array_equal(clip_global_norm(g, 10.0), g)


def test_curriculum_phases():
    base = PinnWeights()
    start = curriculum_weights(0, 100, base)
    assert start.pde == pytest.approx(0.1)
    assert start.flux == pytest.approx(0.1 * base.flux)
    assert start.bc == base.bc
    knee = curriculum_weights(40, 100, base)
    assert knee.pde == pytest.approx(1.0)
    assert knee.flux == pytest.approx(0.5 * base.flux)
    done = curriculum_weights(100, 100, base)
    assert done == base


class TestInit:
    def test_coefficients_scale_with_k(self):
        rng = np.random.default_rng(0)
        kind = ModelKind.direct(2, k=200)
        la = ParamLayout(kind)
        samples = [la.get(init_params(kind, rng), "coeffs") for _ in range(20)]
        std = np.std(np.concatenate(samples))
        assert std == pytest.approx(1.0 / 200, rel=0.1)

    def test_log_branch_starts_small_positive(self):
        kind = ModelKind.direct(2, k=6)
        la = ParamLayout(kind)
        theta = init_params(kind, np.random.default_rng(1))
        assert la.get(theta, "log_coeff") == pytest.approx(0.1)
        assert la.get(theta, "log_mu") == pytest.approx(0.1)
        assert la.get(theta, "bias") == 0.0

    def test_given_centers_are_used(self):
        kind = ModelKind.multicenter(2, 2, k=5)
        centers = np.array([[0.1, 0.2], [-0.3, 0.4]])
        theta = init_params(kind, np.random.default_rng(2), centers=centers)
        assert np.array_equal(ParamLayout(kind).get(theta, "centers"), centers)


class TestFit:
    def _fit_sqrt(self, seed, **overrides):
        spec = targets.by_name("sqrt_2d")
        kind = ModelKind.direct(2, k=8)
        x = sampling.sample_uniform(spec.domain, 2000, seed)
        cfg = TrainConfig(lr=2e-3, iterations=400, seed=seed, **overrides)
        theta0 = init_params(kind, np.random.default_rng(seed))
        return kind, fit(kind, theta0, lambda r: x, spec.eval_batch, cfg)

    def test_loss_decreases(self):
        _, report = self._fit_sqrt(0)
        trace = np.array([l for _, l in report.loss_trace])
        assert report.final_loss < 0.1 * trace[0]
        assert not report.failed

    def test_deterministic_given_seed(self):
        _, r1 = self._fit_sqrt(3)
        _, r2 = self._fit_sqrt(3)
        assert np.array_equal(r1.params, r2.params)

    def test_freeze_mask_pins_parameters(self):
        spec = targets.by_name("sqrt_2d")
        kind = ModelKind.direct(2, k=8)
        la = ParamLayout(kind)
        x = sampling.sample_uniform(spec.domain, 500, 0)
        theta0 = init_params(kind, np.random.default_rng(0))
        mask = np.ones(la.count)
        mask[la.slices["log_coeff"]] = 0.0
        cfg = TrainConfig(lr=2e-3, iterations=100)
        report = fit(kind, theta0, lambda r: x, spec.eval_batch, cfg,
                     freeze_mask=mask)
        assert report.params[la.slices["log_coeff"]][0] == theta0[la.slices["log_coeff"]][0]
        assert not np.array_equal(report.params, theta0)

    def test_output_normalization_roundtrip(self):
        kind, report = self._fit_sqrt(1, output_normalization=True)
        spec = targets.by_name("sqrt_2d")
        grid = sampling.test_grid(spec.domain, 500)
        pred = predict(report, grid)
        rmse = np.sqrt(np.mean((pred - spec.eval_batch(grid)) ** 2))
        assert rmse < 0.5
        assert report.norm_scale != 1.0 or report.norm_offset != 0.0

    def test_trace_interval(self):
        _, report = self._fit_sqrt(2)
        steps = [s for s, _ in report.loss_trace]
        assert steps[0] == 0
        assert all(b - a == 50 for a, b in zip(steps, steps[1:]))
