"""Stabilized radial powers, the ordered-exponent ladder, and the log-primitive.

Everything here is a pure scalar/array function; all model evaluation and
gradient code builds on these primitives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EPS_GAP = 0.01
DEFAULT_EPS_LOG = 1e-4
DEFAULT_R_FLOOR = 1e-12


@dataclass(frozen=True)
class StabilizationConfig:
    r_floor: float = DEFAULT_R_FLOOR

    def __post_init__(self):
        if self.r_floor <= 0:
            raise ValueError("r_floor must be positive")


@dataclass(frozen=True)
class LogPrimitiveParams:
    """Coefficient and learnable exponent of the log-primitive term."""

    coeff: float = 0.0
    mu_log: float = 0.0
    eps_log: float = DEFAULT_EPS_LOG

    def __post_init__(self):
        if self.eps_log <= 0:
            raise ValueError("eps_log must be positive")


@dataclass(frozen=True)
class ExponentLadder:
    """Raw gap parameters and the exponent range they map into.

    The derived exponents mu_1 < ... < mu_K live in (mu_min, mu_max] with the
    last one pinned to mu_max by the cumulative-gap normalization.
    """

    raw_gaps: np.ndarray
    mu_min: float
    mu_max: float
    eps_gap: float = DEFAULT_EPS_GAP

    def __post_init__(self):
        object.__setattr__(self, "raw_gaps", np.asarray(self.raw_gaps, dtype=float))
        if self.raw_gaps.ndim != 1 or self.raw_gaps.size < 1:
            raise ValueError("raw_gaps must be a non-empty 1D array")
        if not self.mu_min < self.mu_max:
            raise ValueError("need mu_min < mu_max")
        if self.eps_gap <= 0:
            raise ValueError("eps_gap must be positive")

    @property
    def size(self) -> int:
        return self.raw_gaps.size


def softplus(s):
    """log(1 + e^s), computed without overflow for large |s|."""
    s = np.asarray(s, dtype=float)
    return np.log1p(np.exp(-np.abs(s))) + np.maximum(s, 0.0)


def logistic(s):
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return out


def softplus_inverse(y):
    """Inverse of softplus for y > 0: log(e^y - 1)."""
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def ladder_exponents(ladder: ExponentLadder) -> np.ndarray:
    """Ordered exponents mu_k = mu_min + (mu_max - mu_min) * sigma_k / sigma_K."""
    gaps = softplus(ladder.raw_gaps) + ladder.eps_gap
    sigma = np.cumsum(gaps)
    u = sigma / sigma[-1]
    return ladder.mu_min + (ladder.mu_max - ladder.mu_min) * u


def ladder_jacobian(ladder: ExponentLadder) -> np.ndarray:
    """d mu_k / d s_j as a (K, K) matrix; row K is zero since mu_K is pinned."""
    s = ladder.raw_gaps
    k = s.size
    gaps = softplus(s) + ladder.eps_gap
    sigma = np.cumsum(gaps)
    sig_k = sigma[-1]
    lower = np.tril(np.ones((k, k)))  # [j <= k] indicator
    jac = (ladder.mu_max - ladder.mu_min) * logistic(s)[None, :] * (
        lower / sig_k - sigma[:, None] / sig_k**2
    )
    jac[-1, :] = 0.0
    return jac


def raw_gaps_for_exponents(mus, mu_min, mu_max, eps_gap=DEFAULT_EPS_GAP) -> np.ndarray:
    """Raw gap parameters whose ladder reproduces the given exponents exactly.

    The exponents must be strictly increasing and the last one must equal
    mu_max (the ladder pins it there regardless).
    """
    mus = np.asarray(mus, dtype=float)
    if np.any(np.diff(mus) <= 0):
        raise ValueError("exponents must be strictly increasing")
    if not np.isclose(mus[-1], mu_max):
        raise ValueError("last exponent must equal mu_max")
    if mus[0] <= mu_min:
        raise ValueError("first exponent must exceed mu_min")
    u = (mus - mu_min) / (mu_max - mu_min)
    du = np.diff(np.concatenate([[0.0], u]))
    # scale total so every gap clears the softplus floor
    total = max(1.0, 1.1 * eps_gap / du.min())
    gaps = du * total
    return softplus_inverse(gaps - eps_gap)


def floor_r(r, cfg: StabilizationConfig = StabilizationConfig()):
    return np.maximum(np.asarray(r, dtype=float), cfg.r_floor)


def stable_pow(r, mu, cfg: StabilizationConfig = StabilizationConfig()):
    """r^mu computed as exp(mu * log(max(r, r_floor)))."""
    return np.exp(np.asarray(mu, dtype=float) * np.log(floor_r(r, cfg)))


def log_primitive(r, mu, params: LogPrimitiveParams = LogPrimitiveParams(),
                  cfg: StabilizationConfig = StabilizationConfig()):
    """(r^mu - 1)/mu with a 3-term Taylor branch below |mu| <= eps_log.

    The Taylor branch L + mu L^2/2 + mu^2 L^3/6 (L = log r) agrees with the
    direct formula to ~1e-12 at the threshold, so the hard switch is
    effectively continuous.
    """
    mu = np.asarray(mu, dtype=float)
    ell = np.log(floor_r(r, cfg))
    small = np.abs(mu) <= params.eps_log
    mu_safe = np.where(small, 1.0, mu)
    direct = (np.exp(mu * ell) - 1.0) / mu_safe
    taylor = ell + mu * ell**2 / 2.0 + mu**2 * ell**3 / 6.0
    return np.where(small, taylor, direct)


def log_primitive_dmu(r, mu, params: LogPrimitiveParams = LogPrimitiveParams(),
                      cfg: StabilizationConfig = StabilizationConfig()):
    """Derivative of the log-primitive in its exponent."""
    mu = np.asarray(mu, dtype=float)
    ell = np.log(floor_r(r, cfg))
    small = np.abs(mu) <= params.eps_log
    mu_safe = np.where(small, 1.0, mu)
    rp = np.exp(mu * ell)
    direct = (mu * rp * ell - rp + 1.0) / mu_safe**2
    taylor = ell**2 / 2.0 + mu * ell**3 / 3.0
    return np.where(small, taylor, direct)


def log_primitive_dr(r, mu, cfg: StabilizationConfig = StabilizationConfig()):
    """Radial derivative of the log-primitive: r^(mu-1), valid in both branches."""
    rf = floor_r(r, cfg)
    return np.exp((np.asarray(mu, dtype=float) - 1.0) * np.log(rf))
