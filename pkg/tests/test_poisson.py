import numpy as np
import pytest

from radialnet import models, poisson, sampling
from radialnet.models import ModelKind
from radialnet.poisson import ChargeConfig, singular_part, solve_smooth_correction

CENTER_CFG = ChargeConfig(charges=(((0.0, 0.0, 0.0), 1.0),))


@pytest.fixture(scope="module")
def center_field():
    return solve_smooth_correction(CENTER_CFG, n_grid=33)


class TestChargeConfig:
    def test_rejects_charge_near_boundary(self):
        with pytest.raises(ValueError, match="d_min"):
            ChargeConfig(charges=(((0.9, 0.0, 0.0), 1.0),))

    def test_rejects_puncture_wider_than_margin(self):
        with pytest.raises(ValueError):
            ChargeConfig(charges=(((0.0, 0.0, 0.0), 1.0),), eps=0.2, d_min=0.1)

    def test_cache_key_depends_on_geometry(self):
        a = ChargeConfig(charges=(((0.0, 0.0, 0.0), 1.0),))
        b = ChargeConfig(charges=(((0.0, 0.0, 0.1), 1.0),))
        assert a.key() != b.key()
        assert a.key() == CENTER_CFG.key()


def test_singular_part_is_coulomb():
    x = np.array([[0.5, 0.0, 0.0]])
    assert singular_part(CENTER_CFG, x)[0] == pytest.approx(1 / (2 * np.pi))


class TestSmoothCorrection:
    def test_boundary_values_cancel_singular_part(self, center_field):
        f = center_field
        # total field vanishes on the boundary face x = +hw
        face = f.v[-1, :, :]
        axis = f.axis
        yy, zz = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([np.full(yy.size, 1.0), yy.ravel(), zz.ravel()], axis=1)
        total = singular_part(CENTER_CFG, pts) + face.ravel()
        assert np.max(np.abs(total)) < 1e-12

    def test_octahedral_symmetry(self, center_field):
        v = center_field.v
        assert np.allclose(v, v[::-1, :, :], atol=1e-10)
        assert np.allclose(v, np.transpose(v, (1, 0, 2)), atol=1e-10)

    def test_maximum_principle(self, center_field):
        # harmonic correction attains its extrema on the boundary
        v = center_field.v
        inner = v[1:-1, 1:-1, 1:-1]
        boundary_max = max(v[0].max(), v[-1].max(), v[:, 0].max(),
                           v[:, -1].max(), v[:, :, 0].max(), v[:, :, -1].max())
        boundary_min = min(v[0].min(), v[-1].min(), v[:, 0].min(),
                           v[:, -1].min(), v[:, :, 0].min(), v[:, :, -1].min())
        tol = 1e-8
        assert inner.max() <= boundary_max + tol
        assert inner.min() >= boundary_min - tol

    def test_grid_refinement_converges(self, center_field):
        fine = solve_smooth_correction(CENTER_CFG, n_grid=49)
        pts = sampling.sample_uniform(
            sampling.PuncturedCube(punctures=(((0, 0, 0), 0.15),)), 500, 0)
        coarse_u = center_field.eval(pts)
        fine_u = fine.eval(pts)
        rel = np.linalg.norm(coarse_u - fine_u) / np.linalg.norm(fine_u)
        assert rel < 5e-3

    def test_interpolation_matches_nodes(self, center_field):
        f = center_field
        axis = f.axis
        nodes = np.array([[axis[i], axis[j], axis[k]]
                          for i, j, k in [(3, 5, 7), (16, 16, 16), (1, 30, 12)]])
        got = f.interp_v(nodes)
        expect = [f.v[3, 5, 7], f.v[16, 16, 16], f.v[1, 30, 12]]
        assert np.allclose(got, expect, atol=1e-12)


def test_flux_error_oracle():
    """An exact q/(4 pi r) profile satisfies the Gauss constraint to
    quadrature precision."""
    kind = ModelKind.multicenter(3, 1, k=6)
    theta = models.exact_multicenter_power(kind, [[0.0, 0.0, 0.0]],
                                           [1.0 / (4 * np.pi)], -1.0)
    err = poisson.flux_error(kind, theta, CENTER_CFG, n_sphere=1000)
    assert err[0] < 1e-12


def test_rel_l2_zero_truth_raises():
    empty = ChargeConfig(charges=())
    field = solve_smooth_correction(empty, n_grid=17)
    kind = ModelKind.multicenter(3, 1, k=6)
    theta = models.exact_multicenter_power(kind, [[0.0, 0.0, 0.0]], [0.0], -1.0)
    with pytest.raises(ValueError):
        poisson.rel_l2(kind, theta, field, np.full((4, 3), 0.3))


def test_load_or_solve_caches(tmp_path, center_field):
    f1 = poisson.load_or_solve(CENTER_CFG, 33, 1e-8, tmp_path)
    assert (tmp_path / f"field_{CENTER_CFG.key()}_33.npz").exists()
    f2 = poisson.load_or_solve(CENTER_CFG, 33, 1e-8, tmp_path)
    assert np.array_equal(f1.v, f2.v)
    assert np.allclose(f1.v, center_field.v, atol=1e-10)
