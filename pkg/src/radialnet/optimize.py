"""Adam, learning-rate schedules, loss-weight curriculum, and training loops."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import models
from .gradients import (
    PinnBatch,
    PinnWeights,
    mse_loss_and_grad,
    pinn_loss_and_grad,
)
from .models import ModelKind, ParamLayout


class Adam:
    """Plain Adam with bias correction.

    Moments live alongside the flat parameter vector; `step` applies one
    update in place and returns the new parameters.
    """

    def __init__(self, n_params: int, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        if not np.all(np.isfinite(grad)):
            bad = int(np.flatnonzero(~np.isfinite(grad))[0])
            raise FloatingPointError(f"non-finite gradient at parameter index {bad}")
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad ** 2
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        return params - lr * mhat / (np.sqrt(vhat) + self.eps)


def cosine_lr(step: int, total: int, lr_init: float, lr_final: float) -> float:
    frac = min(step / max(total - 1, 1), 1.0)
    return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + np.cos(np.pi * frac))


def clip_global_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def curriculum_weights(step: int, warmup_steps: int,
                       base: PinnWeights) -> PinnWeights:
    """Two-phase ramp on the PDE and flux multipliers during warmup."""
    if warmup_steps <= 0 or step >= warmup_steps:
        return base
    frac = step / warmup_steps
    if frac < 0.4:
        t = frac / 0.4
        s_pde = 0.1 + 0.9 * t
        s_flux = 0.1 + 0.4 * t
    else:
        t = (frac - 0.4) / 0.6
        s_pde = 1.0
        s_flux = 0.5 + 0.5 * t
    return PinnWeights(pde=base.pde * s_pde, bc=base.bc, flux=base.flux * s_flux)


@dataclass
class TrainConfig:
    lr: float = 2e-3
    iterations: int = 5000
    schedule: str = "constant"            # "constant" | "cosine"
    lr_final: float = 0.0
    clip_norm: float | None = None
    resample_every: int | None = None
    seed: int = 0
    weighting: str = "uniform"            # "uniform" | "r_squared"
    output_normalization: bool = False
    trace_every: int = 50

    def lr_at(self, step: int) -> float:
        if self.schedule == "cosine":
            return cosine_lr(step, self.iterations, self.lr, self.lr_final)
        return self.lr


@dataclass
class TrainReport:
    kind: ModelKind
    params: np.ndarray
    loss_trace: list = field(default_factory=list)   # (iter, loss) or (iter, loss, parts)
    final_loss: float = np.nan
    failed: bool = False
    wall_time_s: float = 0.0
    seed: int = 0
    norm_scale: float = 1.0
    norm_offset: float = 0.0

    def exponent_spectrum(self):
        return models.exponent_spectrum(self.kind, self.params)

    def centers(self):
        if self.kind.family != "multicenter":
            return None
        return ParamLayout(self.kind).get(self.params, "centers").copy()


def init_params(kind: ModelKind, rng: np.random.Generator,
                centers=None) -> np.ndarray:
    """Default initialization.

    Raw exponent gaps are standard normal (the gap normalization spreads the
    derived exponents roughly uniformly over the range); coefficients are
    N(0, 1)/K, which keeps the initial output small so no single power term
    dominates early training.
    """
    la = ParamLayout(kind)
    theta = la.zeros()
    la.set(theta, "raw_gaps", rng.normal(0.0, 1.0, la.shapes["raw_gaps"]))
    la.set(theta, "coeffs",
           rng.normal(0.0, 1.0, la.shapes["coeffs"]) / kind.k)
    if "ang_raw_gaps" in la.slices:
        la.set(theta, "ang_raw_gaps", rng.normal(0.0, 1.0, kind.k_ang))
        la.set(theta, "ang_coeffs",
               rng.normal(0.0, 1.0, la.shapes["ang_coeffs"]) / kind.k_ang)
    if "log_coeff" in la.slices:
        la.set(theta, "log_coeff", 0.1)
        la.set(theta, "log_mu", 0.1)
    if "log_coeffs" in la.slices:
        la.set(theta, "log_coeffs", np.full(kind.n_centers, 0.1))
    if "centers" in la.slices:
        if centers is None:
            centers = rng.uniform(-0.5, 0.5, (kind.n_centers, kind.dim))
        la.set(theta, "centers", np.asarray(centers, dtype=float))
    return theta


def fit(kind: ModelKind, theta0: np.ndarray, sample_fn, target_fn,
        cfg: TrainConfig, freeze_mask=None) -> TrainReport:
    """Least-squares fit of the model to target_fn on points from sample_fn.

    sample_fn(rng) -> points; called once up front and again every
    cfg.resample_every iterations when resampling is enabled.
    """
    rng = np.random.default_rng(cfg.seed)
    theta = theta0.copy()
    adam = Adam(len(theta))
    t0 = time.perf_counter()

    x = sample_fn(rng)
    y, weights, scale, offset = _prepare_targets(x, target_fn, cfg)
    report = TrainReport(kind=kind, params=theta, seed=cfg.seed,
                         norm_scale=scale, norm_offset=offset)
    for it in range(cfg.iterations):
        if cfg.resample_every and it > 0 and it % cfg.resample_every == 0:
            x = sample_fn(rng)
            y, weights, scale, offset = _prepare_targets(x, target_fn, cfg)
        loss, grad = mse_loss_and_grad(kind, theta, x, y, weights)
        if not np.isfinite(loss):
            report.failed = True
            break
        if freeze_mask is not None:
            grad = grad * freeze_mask
        if cfg.clip_norm is not None:
            grad = clip_global_norm(grad, cfg.clip_norm)
        if it % cfg.trace_every == 0:
            report.loss_trace.append((it, loss))
        theta = adam.step(theta, grad, cfg.lr_at(it))
        report.params = theta
        report.final_loss = loss
    report.wall_time_s = time.perf_counter() - t0
    return report


def _prepare_targets(x, target_fn, cfg: TrainConfig):
    y = np.asarray(target_fn(x), dtype=float)
    scale, offset = 1.0, 0.0
    if cfg.output_normalization:
        offset = float(np.mean(y))
        scale = float(np.std(y))
        if scale <= 0:
            scale = 1.0
        y = (y - offset) / scale
    weights = None
    if cfg.weighting == "r_squared":
        r2 = np.sum(x ** 2, axis=1)
        weights = r2 / np.mean(r2)
    return y, weights, scale, offset


def predict(report: TrainReport, x) -> np.ndarray:
    """Model output with the report's output normalization undone."""
    return models.forward(report.kind, report.params, x) * report.norm_scale \
        + report.norm_offset


def fit_pinn(kind: ModelKind, theta0: np.ndarray, batch_fn,
             cfg: TrainConfig, base_weights: PinnWeights,
             warmup_steps: int | None = None,
             freeze_mask=None) -> TrainReport:
    """PDE-constrained training with curriculum weights and resampling.

    batch_fn(rng) -> PinnBatch; resampled every cfg.resample_every steps.
    """
    rng = np.random.default_rng(cfg.seed)
    theta = theta0.copy()
    adam = Adam(len(theta))
    if warmup_steps is None:
        warmup_steps = int(0.2 * cfg.iterations)
    t0 = time.perf_counter()

    batch = batch_fn(rng)
    report = TrainReport(kind=kind, params=theta, seed=cfg.seed)
    for it in range(cfg.iterations):
        if cfg.resample_every and it > 0 and it % cfg.resample_every == 0:
            batch = batch_fn(rng)
        w = curriculum_weights(it, warmup_steps, base_weights)
        loss, grad, parts = pinn_loss_and_grad(kind, theta, batch, w)
        if not np.isfinite(loss):
            report.failed = True
            break
        if freeze_mask is not None:
            grad = grad * freeze_mask
        if cfg.clip_norm is not None:
            grad = clip_global_norm(grad, cfg.clip_norm)
        if it % cfg.trace_every == 0:
            report.loss_trace.append((it, loss, parts["pde"], parts["bc"], parts["flux"]))
        theta = adam.step(theta, grad, cfg.lr_at(it))
        report.params = theta
        report.final_loss = loss
    report.wall_time_s = time.perf_counter() - t0
    return report
