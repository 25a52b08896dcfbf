"""Loss gradients assembled from the analytic parameter Jacobians.

Everything is reverse-mode by hand: each model family exposes N x P
Jacobians of value / Laplacian / normal derivative, and the losses chain
through them with a single matrix-vector product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models
from .models import ModelKind


def mse_loss_and_grad(kind: ModelKind, theta, x, target, weights=None):
    """Mean squared error against target values, with d loss / d theta."""
    target = np.asarray(target, dtype=float)
    phi, jac = models.value_and_jac(kind, theta, x)
    res = phi - target
    if weights is None:
        loss = float(np.mean(res ** 2))
        grad = (2.0 / len(res)) * (res @ jac)
    else:
        w = np.asarray(weights, dtype=float)
        loss = float(np.mean(w * res ** 2))
        grad = (2.0 / len(res)) * ((w * res) @ jac)
    return loss, grad


@dataclass
class PinnBatch:
    """Collocation, boundary, and flux-shell points for one PDE step."""

    interior: np.ndarray
    boundary: np.ndarray
    boundary_targets: np.ndarray
    shells: list          # per charge: (points, outward unit normals)
    charges: np.ndarray   # q_j, one per shell
    shell_radius: float


@dataclass
class PinnWeights:
    pde: float = 1.0
    bc: float = 200.0
    flux: float = 50.0


def pinn_loss_and_grad(kind: ModelKind, theta, batch: PinnBatch,
                       weights: PinnWeights):
    """Weighted PDE + boundary + flux loss and its full parameter gradient.

    PDE:  mean over interior points of (laplacian phi)^2
    BC:   mean over boundary points of (phi - g)^2
    Flux: per charge shell, (4 pi eps^2 * mean(grad phi . n) + q_j)^2
    """
    lap, lap_jac = models.laplacian_and_jac(kind, theta, batch.interior)
    l_pde = float(np.mean(lap ** 2))
    g_pde = (2.0 / len(lap)) * (lap @ lap_jac)

    phi, phi_jac = models.value_and_jac(kind, theta, batch.boundary)
    res = phi - batch.boundary_targets
    l_bc = float(np.mean(res ** 2))
    g_bc = (2.0 / len(res)) * (res @ phi_jac)

    area_factor = 4.0 * np.pi * batch.shell_radius ** 2
    l_flux = 0.0
    g_flux = np.zeros_like(theta)
    for (pts, normals), q in zip(batch.shells, batch.charges):
        dn, dn_jac = models.normal_derivative_and_jac(kind, theta, pts, normals)
        flux = area_factor * float(np.mean(dn)) + q
        l_flux += flux ** 2
        g_flux += 2.0 * flux * area_factor * np.mean(dn_jac, axis=0)

    loss = weights.pde * l_pde + weights.bc * l_bc + weights.flux * l_flux
    grad = weights.pde * g_pde + weights.bc * g_bc + weights.flux * g_flux
    parts = {"pde": l_pde, "bc": l_bc, "flux": l_flux}
    return loss, grad, parts


def fd_check(fn, theta, step=1e-6, rel_tol=1e-4, indices=None):
    """Compare fn's analytic gradient to central differences.

    fn(theta) must return (loss, grad). Returns (max_rel_err, worst_index).
    Entries where both gradients are tiny relative to the gradient scale are
    compared with an absolute floor so exact zeros do not inflate the ratio.
    """
    _, grad = fn(theta)
    grad = np.asarray(grad, dtype=float)
    floor = 1e-6 * max(1.0, float(np.max(np.abs(grad))))
    if indices is None:
        indices = range(len(theta))
    worst, worst_i = 0.0, -1
    for i in indices:
        h = step * max(1.0, abs(theta[i]))
        tp = theta.copy(); tp[i] += h
        tm = theta.copy(); tm[i] -= h
        num = (fn(tp)[0] - fn(tm)[0]) / (2.0 * h)
        err = abs(num - grad[i]) / max(abs(num), abs(grad[i]), floor)
        if err > worst:
            worst, worst_i = err, i
    return worst, worst_i
