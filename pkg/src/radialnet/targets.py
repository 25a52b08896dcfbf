"""Benchmark target functions with exact values and gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sampling import Annulus2D, ShellBall3D, Square2D

TWO_SOURCE_CENTERS = ((-0.3, 0.0), (0.3, 0.0))
TWO_SOURCE_WEIGHTS = (1.0, 0.5)
# alternate two-source layout used by the center-recovery tables
TWO_SOURCE_CENTERS_OFFSET = ((-0.3, -0.2), (0.3, -0.2))
THREE_SOURCE_CENTERS = ((-0.3, -0.2), (0.3, -0.2), (0.0, 0.3))
THREE_SOURCE_WEIGHTS = (1.0, 0.7, 0.5)


@dataclass(frozen=True)
class TargetSpec:
    name: str
    dim: int
    domain: object
    value: callable
    gradient: callable = None
    known_exponents: tuple | None = None
    source_centers: tuple | None = None
    source_weights: tuple | None = None
    notes: str = ""

    def eval_batch(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if not np.all(self.domain.contains(x)):
            raise ValueError(f"points outside the domain of target {self.name!r}")
        return self.value(x)


def _r(x):
    return np.linalg.norm(x, axis=1)


def _radial_target(h, hprime):
    def value(x):
        return h(_r(x))

    def gradient(x):
        r = _r(x)
        return (hprime(r) / r)[:, None] * x

    return value, gradient


def _multi_log(centers, weights):
    centers = np.asarray(centers, dtype=float)
    weights = np.asarray(weights, dtype=float)

    def value(x):
        return sum(w * np.log(np.linalg.norm(x - c, axis=1))
                   for c, w in zip(centers, weights))

    def gradient(x):
        g = np.zeros_like(x)
        for c, w in zip(centers, weights):
            y = x - c
            g += w * y / np.sum(y ** 2, axis=1)[:, None]
        return g

    return value, gradient


def _source_domain(centers, eps=0.05):
    return Square2D(half_width=1.0,
                    punctures=tuple((tuple(c), eps) for c in centers))


def catalog() -> list:
    specs = []
    ann = Annulus2D(0.01, 1.0)
    shell = ShellBall3D(0.01, 1.0)

    v, g = _radial_target(np.log, lambda r: 1.0 / r)
    specs.append(TargetSpec("log_2d", 2, ann, v, g, known_exponents=(),
                            notes="log r; exact via the log-primitive limit"))

    v, g = _radial_target(np.sqrt, lambda r: 0.5 / np.sqrt(r))
    specs.append(TargetSpec("sqrt_2d", 2, ann, v, g, known_exponents=(0.5,)))

    v, g = _radial_target(lambda r: 1.0 / r, lambda r: -1.0 / r ** 2)
    specs.append(TargetSpec("inv_2d", 2, ann, v, g, known_exponents=(-1.0,)))

    v, g = _radial_target(
        lambda r: 0.5 * r ** 0.5 + 0.3 * r ** -0.5 + 0.2 * r ** 1.5,
        lambda r: 0.25 * r ** -0.5 - 0.15 * r ** -1.5 + 0.3 * r ** 0.5)
    specs.append(TargetSpec("multipower_2d", 2, ann, v, g,
                            known_exponents=(0.5, -0.5, 1.5)))

    def crack_value(x):
        r = _r(x)
        th = np.arctan2(x[:, 1], x[:, 0])
        return np.sqrt(r) * np.cos(th / 2.0)

    def crack_gradient(x):
        r = _r(x)
        th = np.arctan2(x[:, 1], x[:, 0])
        dr = 0.5 / np.sqrt(r) * np.cos(th / 2.0)
        dth = -0.5 * np.sqrt(r) * np.sin(th / 2.0)
        rhat = x / r[:, None]
        that = np.stack([-x[:, 1], x[:, 0]], 1) / r[:, None]
        return dr[:, None] * rhat + (dth / r)[:, None] * that

    specs.append(TargetSpec("crack_2d", 2, ann, crack_value, crack_gradient,
                            known_exponents=(0.5,),
                            notes="r^(1/2) cos(theta/2); discontinuous across theta = pi"))

    v, g = _multi_log(TWO_SOURCE_CENTERS, TWO_SOURCE_WEIGHTS)
    specs.append(TargetSpec("two_source_2d", 2, _source_domain(TWO_SOURCE_CENTERS),
                            v, g, source_centers=TWO_SOURCE_CENTERS,
                            source_weights=TWO_SOURCE_WEIGHTS))

    v, g = _multi_log(TWO_SOURCE_CENTERS_OFFSET, TWO_SOURCE_WEIGHTS)
    specs.append(TargetSpec("two_source_offset_2d", 2,
                            _source_domain(TWO_SOURCE_CENTERS_OFFSET), v, g,
                            source_centers=TWO_SOURCE_CENTERS_OFFSET,
                            source_weights=TWO_SOURCE_WEIGHTS))

    v, g = _multi_log(THREE_SOURCE_CENTERS, THREE_SOURCE_WEIGHTS)
    specs.append(TargetSpec("three_source_2d", 2,
                            _source_domain(THREE_SOURCE_CENTERS), v, g,
                            source_centers=THREE_SOURCE_CENTERS,
                            source_weights=THREE_SOURCE_WEIGHTS))

    v, g = _radial_target(lambda r: 1.0 / r, lambda r: -1.0 / r ** 2)
    specs.append(TargetSpec("coulomb_3d", 3, shell, v, g, known_exponents=(-1.0,)))

    def dipole_value(x):
        return x[:, 2] / _r(x) ** 3

    def dipole_gradient(x):
        r = _r(x)
        g = -3.0 * (x[:, 2] / r ** 5)[:, None] * x
        g[:, 2] += 1.0 / r ** 3
        return g

    specs.append(TargetSpec("dipole_3d", 3, shell, dipole_value, dipole_gradient,
                            known_exponents=(-2.0,),
                            notes="z / r^3; large dynamic range near the poles"))

    def smooth_value(x):
        return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])

    def smooth_gradient(x):
        sx, cx = np.sin(np.pi * x[:, 0]), np.cos(np.pi * x[:, 0])
        sy, cy = np.sin(np.pi * x[:, 1]), np.cos(np.pi * x[:, 1])
        return np.pi * np.stack([cx * sy, sx * cy], 1)

    specs.append(TargetSpec("smooth_2d", 2, Square2D(half_width=1.0),
                            smooth_value, smooth_gradient,
                            notes="non-radial control; expected failure mode"))
    return specs


def by_name(name: str) -> TargetSpec:
    for spec in catalog():
        if spec.name == name:
            return spec
    valid = ", ".join(s.name for s in catalog())
    raise KeyError(f"unknown benchmark {name!r}; valid names: {valid}")
