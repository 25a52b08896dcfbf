"""Bounded-domain 3D Poisson point-charge problem.

Ground truth on the cube [-1,1]^3 with homogeneous Dirichlet data is built
by singular-smooth decomposition: u = u_sing + v where u_sing is the
free-space field of the charges and v solves the discrete Laplace equation
with boundary values -u_sing. The solve uses a 7-point stencil and
conjugate gradients; v is stored on the grid and queried by trilinear
interpolation. Fields are cached to disk keyed by their configuration.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import diags, identity, kron
from scipy.sparse.linalg import cg

from . import models
from .sampling import fibonacci_sphere


@dataclass(frozen=True)
class ChargeConfig:
    charges: tuple          # ((center_xyz, q), ...)
    eps: float = 0.08       # puncture radius around each charge
    d_min: float = 0.15     # min distance of a charge from every face
    half_width: float = 1.0

    def __post_init__(self):
        for c, _ in self.charges:
            if np.max(np.abs(c)) > self.half_width - self.d_min + 1e-12:
                raise ValueError(f"charge at {c} closer than d_min to the boundary")
        if not self.eps < self.d_min:
            raise ValueError("puncture radius must be smaller than d_min")

    def key(self) -> str:
        doc = {"charges": [[list(map(float, c)), float(q)] for c, q in self.charges],
               "eps": self.eps, "d_min": self.d_min, "hw": self.half_width}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def singular_part(cfg: ChargeConfig, x) -> np.ndarray:
    """Free-space field of the charges: sum_j q_j / (4 pi ||x - c_j||)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.zeros(len(x))
    for c, q in cfg.charges:
        u += q / (4.0 * np.pi * np.linalg.norm(x - np.asarray(c), axis=1))
    return u


@dataclass
class GroundTruthField:
    cfg: ChargeConfig
    n_grid: int
    v: np.ndarray           # (n, n, n) smooth-correction node values

    @property
    def axis(self):
        return np.linspace(-self.cfg.half_width, self.cfg.half_width, self.n_grid)

    def interp_v(self, x) -> np.ndarray:
        """Trilinear interpolation of the smooth correction."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        hw, n = self.cfg.half_width, self.n_grid
        h = 2.0 * hw / (n - 1)
        t = (x + hw) / h
        i0 = np.clip(np.floor(t).astype(int), 0, n - 2)
        f = t - i0
        out = np.zeros(len(x))
        for dx in (0, 1):
            for dy in (0, 1):
                for dz in (0, 1):
                    w = (np.where(dx, f[:, 0], 1 - f[:, 0])
                         * np.where(dy, f[:, 1], 1 - f[:, 1])
                         * np.where(dz, f[:, 2], 1 - f[:, 2]))
                    out += w * self.v[i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz]
        return out

    def eval(self, x) -> np.ndarray:
        return singular_part(self.cfg, x) + self.interp_v(x)


def solve_smooth_correction(cfg: ChargeConfig, n_grid: int = 65,
                            tol: float = 1e-8) -> GroundTruthField:
    """Solve Δv = 0 on the cube with v = -u_sing on the boundary."""
    if n_grid < 17:
        raise ValueError("n_grid must be at least 17")
    axis = np.linspace(-cfg.half_width, cfg.half_width, n_grid)
    if not cfg.charges:
        return GroundTruthField(cfg, n_grid, np.zeros((n_grid,) * 3))

    xg, yg, zg = np.meshgrid(axis, axis, axis, indexing="ij")
    nodes = np.stack([xg.ravel(), yg.ravel(), zg.ravel()], axis=1)
    interior = np.all((np.abs(nodes) < cfg.half_width - 1e-12), axis=1)

    # Dirichlet values live on the boundary ring; interior solves the
    # homogeneous 7-point Laplace system with those values moved to the rhs.
    bvals = np.zeros(n_grid ** 3)
    bmask = ~interior
    bvals[bmask] = -singular_part(cfg, nodes[bmask])

    # full-grid 1D second difference; only interior rows are ever read
    d1 = diags([-np.ones(n_grid - 1), 2.0 * np.ones(n_grid),
                -np.ones(n_grid - 1)], [-1, 0, 1], format="csr")
    eye = identity(n_grid, format="csr")
    lap = (kron(kron(d1, eye), eye) + kron(kron(eye, d1), eye)
           + kron(kron(eye, eye), d1)).tocsr()

    rhs = -(lap @ bvals)
    idx = np.flatnonzero(interior)
    a = lap[idx][:, idx]
    b = rhs[idx]
    sol, info = cg(a, b, rtol=tol, maxiter=20000)
    if info != 0:
        res = float(np.linalg.norm(a @ sol - b) / np.linalg.norm(b))
        raise RuntimeError(f"grid solve did not converge (info={info}, residual {res:.2e})")
    v = bvals.copy()
    v[idx] = sol
    return GroundTruthField(cfg, n_grid, v.reshape((n_grid,) * 3))


def load_or_solve(cfg: ChargeConfig, n_grid: int, tol: float,
                  cache_dir) -> GroundTruthField:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"field_{cfg.key()}_{n_grid}.npz"
    if path.exists():
        data = np.load(path)
        return GroundTruthField(cfg, n_grid, data["v"])
    field = solve_smooth_correction(cfg, n_grid, tol)
    np.savez_compressed(path, v=field.v)
    return field


def flux_error(kind, theta, cfg: ChargeConfig, n_sphere: int = 1500):
    """Per-charge absolute violation of the Gauss flux constraint."""
    errs = []
    for c, q in cfg.charges:
        pts, normals = fibonacci_sphere(c, cfg.eps, n_sphere)
        dn, _ = models.normal_derivative_and_jac(kind, theta, pts, normals, jac=False)
        errs.append(abs(4.0 * np.pi * cfg.eps ** 2 * float(np.mean(dn)) + q))
    return np.array(errs)


def rel_l2(kind, theta, field: GroundTruthField, eval_points) -> float:
    truth = field.eval(eval_points)
    denom = float(np.linalg.norm(truth))
    if denom == 0.0:
        raise ValueError("ground truth is identically zero on the evaluation set")
    pred = models.forward(kind, theta, eval_points)
    return float(np.linalg.norm(pred - truth) / denom)
