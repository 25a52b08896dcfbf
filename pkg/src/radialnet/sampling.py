"""Seeded samplers for punctured domains, boundaries, and evaluation grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc


@dataclass(frozen=True)
class Annulus2D:
    r_min: float = 0.01
    r_max: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")

    def contains(self, x):
        r = np.linalg.norm(x, axis=-1)
        return (r >= self.r_min - 1e-15) & (r <= self.r_max + 1e-15)


@dataclass(frozen=True)
class ShellBall3D:
    r_min: float = 0.01
    r_max: float = 1.0
    dim: int = 3

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")

    def contains(self, x):
        r = np.linalg.norm(x, axis=-1)
        return (r >= self.r_min - 1e-15) & (r <= self.r_max + 1e-15)


@dataclass(frozen=True)
class Square2D:
    """[-half_width, half_width]^2 with small disks removed around punctures."""

    half_width: float = 1.0
    punctures: tuple = ()     # ((center_xy, radius), ...)
    dim: int = 2

    def contains(self, x):
        x = np.atleast_2d(x)
        ok = np.all(np.abs(x) <= self.half_width + 1e-15, axis=-1)
        for c, eps in self.punctures:
            ok &= np.linalg.norm(x - np.asarray(c), axis=-1) >= eps - 1e-15
        return ok


@dataclass(frozen=True)
class PuncturedCube:
    """[-half_width, half_width]^3 with balls removed around point charges."""

    half_width: float = 1.0
    punctures: tuple = ()
    dim: int = 3

    def contains(self, x):
        x = np.atleast_2d(x)
        ok = np.all(np.abs(x) <= self.half_width + 1e-15, axis=-1)
        for c, eps in self.punctures:
            ok &= np.linalg.norm(x - np.asarray(c), axis=-1) >= eps - 1e-15
        return ok


def _puncture_volume_fraction(dom):
    ball = {2: np.pi, 3: 4.0 * np.pi / 3.0}[dom.dim]
    total = (2.0 * dom.half_width) ** dom.dim
    return sum(ball * eps ** dom.dim for _, eps in dom.punctures) / total


def sample_uniform(domain, n, seed):
    """n i.i.d. points uniform (w.r.t. volume) on the domain."""
    rng = np.random.default_rng(seed)
    if isinstance(domain, (Annulus2D, ShellBall3D)):
        d = domain.dim
        # radius by inverse CDF of the r^(d-1) density, direction uniform
        u = rng.uniform(size=n)
        a, b = domain.r_min ** d, domain.r_max ** d
        r = (a + u * (b - a)) ** (1.0 / d)
        v = rng.normal(size=(n, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return r[:, None] * v
    if isinstance(domain, (Square2D, PuncturedCube)):
        if _puncture_volume_fraction(domain) >= 0.5:
            raise ValueError("punctures cover >= 50% of the cube; rejection would stall")
        out = np.empty((0, domain.dim))
        while len(out) < n:
            cand = rng.uniform(-domain.half_width, domain.half_width,
                               (2 * (n - len(out)) + 16, domain.dim))
            out = np.concatenate([out, cand[domain.contains(cand)]])
        return out[:n]
    raise TypeError(f"unsupported domain {type(domain).__name__}")


def fibonacci_sphere(center, radius, n):
    """Near-uniform points on a sphere with outward unit normals."""
    center = np.asarray(center, dtype=float)
    i = np.arange(n)
    phi = np.arccos(1.0 - 2.0 * (i + 0.5) / n)
    golden = np.pi * (1.0 + np.sqrt(5.0))
    theta = golden * i
    normals = np.stack([np.sin(phi) * np.cos(theta),
                        np.sin(phi) * np.sin(theta),
                        np.cos(phi)], axis=1)
    return center + radius * normals, normals


def boundary_sample_cube(half_width, n, seed):
    """Uniform points on the surface of the cube, faces weighted by area."""
    rng = np.random.default_rng(seed)
    face = rng.integers(0, 6, n)
    pts = rng.uniform(-half_width, half_width, (n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, -1.0, 1.0)
    pts[np.arange(n), axis] = sign * half_width
    return pts


def test_grid(domain, n):
    """Deterministic low-discrepancy evaluation set inside the domain.

    Uses an unscrambled Halton sequence mapped into the bounding box and
    filtered by the membership predicate, continuing the sequence until
    exactly n points survive. Seed-free, so test metrics are comparable
    across training seeds.
    """
    d = domain.dim
    sampler = qmc.Halton(d=d, scramble=False)
    sampler.fast_forward(1)   # skip the origin point
    out = np.empty((0, d))
    if isinstance(domain, (Annulus2D, ShellBall3D)):
        a, b = domain.r_min ** d, domain.r_max ** d
        while len(out) < n:
            u = sampler.random(2 * (n - len(out)) + 16)
            r = (a + u[:, 0] * (b - a)) ** (1.0 / d)
            if d == 2:
                ang = 2.0 * np.pi * u[:, 1]
                cand = r[:, None] * np.stack([np.cos(ang), np.sin(ang)], 1)
            else:
                cosb = 1.0 - 2.0 * u[:, 1]
                sinb = np.sqrt(np.maximum(0.0, 1.0 - cosb ** 2))
                az = 2.0 * np.pi * u[:, 2]
                cand = r[:, None] * np.stack([sinb * np.cos(az),
                                              sinb * np.sin(az), cosb], 1)
            out = np.concatenate([out, cand])
        return out[:n]
    if isinstance(domain, (Square2D, PuncturedCube)):
        while len(out) < n:
            u = sampler.random(2 * (n - len(out)) + 16)
            cand = domain.half_width * (2.0 * u - 1.0)
            out = np.concatenate([out, cand[domain.contains(cand)]])
        return out[:n]
    raise TypeError(f"unsupported domain {type(domain).__name__}")
