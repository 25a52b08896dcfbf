import numpy as np
import pytest

from radialnet import models, sampling
from radialnet.models import ModelKind, ParamLayout, param_count
from radialnet.optimize import init_params

KINDS = {
    "direct2d": ModelKind.direct(2, k=12),
    "direct3d": ModelKind.direct(3, k=12),
    "angular2d": ModelKind.angular2d(k_r=6, k_a=4, m_max=4),
    "angular2d_half": ModelKind.angular2d(k_r=6, k_a=4, m_max=4,
                                          half_integer=True, n_max=1),
    "angular3d": ModelKind.angular3d(k_r=6, k_a=4, l_max=2),
    "multicenter": ModelKind.multicenter(2, 2, k=9),
    "msn2d": ModelKind.msn(2, k=12),
    "msn3d": ModelKind.msn(3, k=12),
}


def _domain(kind):
    return sampling.Annulus2D() if kind.dim == 2 else sampling.ShellBall3D()


def _points(kind, n=40, seed=0):
    return sampling.sample_uniform(_domain(kind), n, seed)


class TestLayout:
    def test_param_counts_match_ledger(self):
        # standard configurations and their published parameter budgets
        assert param_count(KINDS["direct2d"]) == 27
        assert param_count(KINDS["angular2d"]) == 51
        assert param_count(KINDS["multicenter"]) == 43
        assert param_count(KINDS["msn2d"]) == 49
        assert param_count(KINDS["msn3d"]) == 73

    def test_layout_covers_parameter_vector(self):
        for kind in KINDS.values():
            la = ParamLayout(kind)
            covered = np.zeros(la.count, dtype=int)
            for sl in la.slices.values():
                covered[sl] += 1
            assert np.all(covered == 1)

    def test_get_set_roundtrip(self):
        rng = np.random.default_rng(0)
        for kind in KINDS.values():
            la = ParamLayout(kind)
            theta = rng.normal(size=la.count)
            for name in la.slices:
                block = la.get(theta, name)
                la.set(theta, name, block)
            assert np.allclose(theta, theta)


class TestSpatialDerivatives:
    @pytest.mark.parametrize("name", sorted(KINDS))
    def test_gradient_matches_fd(self, name):
        kind = KINDS[name]
        rng = np.random.default_rng(5)
        theta = init_params(kind, rng)
        x = _points(kind)
        grad = models.spatial_gradient(kind, theta, x)
        h = 1e-6
        for axis in range(kind.dim):
            xp, xm = x.copy(), x.copy()
            xp[:, axis] += h
            xm[:, axis] -= h
            fd = (models.forward(kind, theta, xp)
                  - models.forward(kind, theta, xm)) / (2 * h)
            scale = np.maximum(1.0, np.abs(grad[:, axis]))
            assert np.max(np.abs(grad[:, axis] - fd) / scale) < 1e-4

    @pytest.mark.parametrize("name", sorted(KINDS))
    def test_laplacian_matches_fd(self, name):
        kind = KINDS[name]
        rng = np.random.default_rng(6)
        theta = init_params(kind, rng)
        x = _points(kind, n=25)
        # keep FD points away from the inner radius; the separable family is
        # additionally singular along each coordinate axis
        x = x[np.linalg.norm(x, axis=1) > 0.1]
        if kind.family == "msn":
            x = x[np.min(np.abs(x), axis=1) > 0.15]
        lap = models.laplacian(kind, theta, x)
        h = 1e-4
        fd = -2 * kind.dim * models.forward(kind, theta, x)
        for axis in range(kind.dim):
            for sign in (+1, -1):
                xs = x.copy()
                xs[:, axis] += sign * h
                fd = fd + models.forward(kind, theta, xs)
        fd = fd / h ** 2
        scale = np.maximum(1.0, np.abs(lap))
        assert np.max(np.abs(lap - fd) / scale) < 1e-3

    @pytest.mark.parametrize("name", sorted(KINDS))
    def test_normal_derivative_is_projected_gradient(self, name):
        kind = KINDS[name]
        rng = np.random.default_rng(7)
        theta = init_params(kind, rng)
        x = _points(kind, n=30)
        normals = x / np.linalg.norm(x, axis=1, keepdims=True)
        nd, _ = models.normal_derivative_and_jac(kind, theta, x, normals,
                                                 jac=False)
        grad = models.spatial_gradient(kind, theta, x)
        assert np.allclose(nd, np.sum(grad * normals, axis=1), rtol=1e-10)


class TestExactConstructions:
    def test_power_sum_inverse(self):
        kind = KINDS["direct2d"]
        theta = models.exact_power_sum(kind, [-1.0], [1.0])
        x = _points(kind, 200)
        r = np.linalg.norm(x, axis=1)
        assert np.max(np.abs(models.forward(kind, theta, x) - 1 / r)) < 1e-12

    def test_power_sum_mixture(self):
        kind = KINDS["direct2d"]
        theta = models.exact_power_sum(kind, [0.5, -0.5, 1.5], [0.5, 0.3, 0.2])
        x = _points(kind, 200)
        r = np.linalg.norm(x, axis=1)
        target = 0.5 * r ** 0.5 + 0.3 * r ** -0.5 + 0.2 * r ** 1.5
        assert np.max(np.abs(models.forward(kind, theta, x) - target)) < 1e-12

    def test_power_sum_rejects_overfull_grid(self):
        kind = ModelKind.direct(2, k=3)
        with pytest.raises(ValueError):
            models.exact_power_sum(kind, [-1.0, 0.5, 1.0, 2.0], [1, 1, 1, 1])

    def test_exact_log(self):
        kind = KINDS["direct2d"]
        theta = models.exact_log(kind, coeff=2.5)
        x = _points(kind, 100)
        r = np.linalg.norm(x, axis=1)
        assert np.max(np.abs(models.forward(kind, theta, x) - 2.5 * np.log(r))) < 1e-12

    def test_multi_source_log(self):
        kind = KINDS["multicenter"]
        centers = [[-0.3, 0.0], [0.3, 0.0]]
        theta = models.exact_multi_source_log(kind, centers, [1.0, 0.5])
        x = sampling.sample_uniform(sampling.Square2D(), 300, 1)
        d0 = np.linalg.norm(x - centers[0], axis=1)
        d1 = np.linalg.norm(x - centers[1], axis=1)
        keep = (d0 > 0.05) & (d1 > 0.05)
        x, d0, d1 = x[keep], d0[keep], d1[keep]
        target = np.log(d0) + 0.5 * np.log(d1)
        assert np.max(np.abs(models.forward(kind, theta, x) - target)) < 1e-12

    def test_crack_mode(self):
        kind = KINDS["angular2d_half"]
        theta = models.exact_crack(kind)
        x = _points(kind, 200)
        r = np.linalg.norm(x, axis=1)
        th = np.arctan2(x[:, 1], x[:, 0])
        target = np.sqrt(r) * np.cos(th / 2)
        assert np.max(np.abs(models.forward(kind, theta, x) - target)) < 1e-12

    def test_dipole(self):
        kind = ModelKind.angular3d(k_r=6, k_a=4, l_max=2, ang_mu_min=-3.0)
        theta = models.exact_dipole(kind)
        x = _points(kind, 200)
        r = np.linalg.norm(x, axis=1)
        target = x[:, 2] / r ** 3
        assert np.max(np.abs(models.forward(kind, theta, x) - target)) < 1e-11


class TestSerde:
    def test_json_roundtrip_is_exact(self):
        rng = np.random.default_rng(9)
        for kind in KINDS.values():
            theta = init_params(kind, rng)
            doc = models.params_to_json(kind, theta)
            kind2, back = models.params_from_json(doc)
            assert kind2 == kind
            assert np.array_equal(theta, back)

    def test_exponent_spectrum_sorted(self):
        kind = KINDS["direct2d"]
        theta = init_params(kind, np.random.default_rng(10))
        mus = np.ravel(models.exponents(kind, theta))
        assert np.all(np.diff(mus) > 0)
        assert mus[-1] == pytest.approx(kind.mu_max)
