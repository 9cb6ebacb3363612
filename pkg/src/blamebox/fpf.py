"""Functional profiling fingerprint: per-function, per-timestep Gaussians
fitted over successful executions, plus the exponentially weighted window
statistics that feed the blame likelihood.

Both the expected statistic and the executed statistic are normalized by the
same 1/N_w factor over the same window, so they are directly comparable in
``deviation_mass``; the variance combination rule assumes per-timestep
independence (diagonal covariance).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .core import ExperienceDb, Fingerprint
from .errors import ConfigError, ValidationError

# deviation_mass asymptotically approaches 0.5 but must never attain it
_HALF_OPEN = float(np.nextafter(0.5, 0.0))


@dataclass(frozen=True)
class BlameConfig:
    """Knobs shared by the fingerprint statistics and the blame likelihood.

    alpha is the exponential decay per timestep inside the blame window;
    window_steps is the window length W in timesteps. The default pairing
    makes the oldest in-window weight exp(-alpha*W) ~ 0.1.
    """

    alpha: float = math.log(10.0) / 40.0
    window_steps: int = 40
    epsilon_floor: float = 1e-6
    var_floor: float = 1e-6
    success_deviation_weight: float = 0.05

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.window_steps < 1:
            raise ConfigError(f"window_steps must be >= 1, got {self.window_steps}")
        if not (0.0 < self.epsilon_floor < 0.5):
            raise ConfigError(f"epsilon_floor must lie in (0, 0.5), got {self.epsilon_floor}")
        if self.var_floor <= 0:
            raise ConfigError(f"var_floor must be positive, got {self.var_floor}")
        if not (0.0 <= self.success_deviation_weight < 1.0):
            raise ConfigError("success_deviation_weight must lie in [0, 1)")

    @classmethod
    def for_sampling(cls, dt: float, window_seconds: float = 2.0, **kw) -> "BlameConfig":
        """Window covering ``window_seconds`` of wall time at interval ``dt``."""
        if dt <= 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        w = max(1, math.ceil(window_seconds / dt))
        return cls(alpha=math.log(10.0) / w, window_steps=w, **kw)


@dataclass(frozen=True)
class FpfModel:
    """Per-cell Gaussian fit of call counts across a skill's experiences."""

    mean: np.ndarray
    var: np.ndarray
    n_samples: int
    var_floor: float

    def __post_init__(self):
        mean = np.ascontiguousarray(np.asarray(self.mean, dtype=np.float64))
        var = np.ascontiguousarray(np.asarray(self.var, dtype=np.float64))
        if mean.shape != var.shape or mean.ndim != 2:
            raise ValidationError("mean and var must be matching (F, T) matrices")
        if np.any(var < self.var_floor):
            raise ValidationError("variance entries below the configured floor")
        mean.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def F(self) -> int:
        return self.mean.shape[0]

    @property
    def T(self) -> int:
        return self.mean.shape[1]


def fit_fpf(db: ExperienceDb, config: BlameConfig) -> FpfModel:
    """Cell-wise sample mean and maximum-likelihood (population) variance,
    floored at ``config.var_floor``."""
    if len(db) == 0:
        raise ValidationError("cannot fit a fingerprint model on an empty database")
    stack = db.counts_stack()
    mean = stack.mean(axis=0)
    var = np.maximum(stack.var(axis=0), config.var_floor)
    return FpfModel(mean=mean, var=var, n_samples=len(db), var_floor=config.var_floor)


def window_bounds(t_fail: int, T: int, config: BlameConfig) -> tuple[int, int]:
    """Inclusive window start and its length N_w for a failure at ``t_fail``."""
    if not (0 <= t_fail < T):
        raise ValidationError(f"t_fail={t_fail} outside [0, {T})")
    t0 = max(0, t_fail - config.window_steps + 1)
    return t0, t_fail - t0 + 1


def _window_weights(t_fail: int, T: int, config: BlameConfig) -> tuple[int, np.ndarray, int]:
    t0, n_w = window_bounds(t_fail, T, config)
    ts = np.arange(t0, t_fail + 1)
    return t0, np.exp(-config.alpha * (t_fail - ts)), n_w


def expected_weighted_stats(model: FpfModel, f: int, t_fail: int,
                            config: BlameConfig) -> tuple[float, float]:
    """Weighted window mean of the model's expectation for function ``f`` and
    the variance of that weighted mean (independent timesteps)."""
    t0, w, n_w = _window_weights(t_fail, model.T, config)
    mean_exp = float((w * model.mean[f, t0:t_fail + 1]).sum() / n_w)
    var_exp = float((w ** 2 * model.var[f, t0:t_fail + 1]).sum() / n_w ** 2)
    return mean_exp, var_exp


def exec_weighted_mean(fingerprint: Fingerprint, f: int, t_fail: int,
                       config: BlameConfig) -> float:
    """Same window, weights and normalization, applied to observed counts."""
    t0, w, n_w = _window_weights(t_fail, fingerprint.T, config)
    return float((w * fingerprint.counts[f, t0:t_fail + 1]).sum() / n_w)


def deviation_mass(x: float, mean: float, var: float) -> float:
    """Gaussian probability mass between ``x`` and ``mean`` under N(mean, var).

    Equals |Phi((x - mean)/sqrt(var)) - 0.5|; symmetric in the deviation,
    non-decreasing in |x - mean|, and clamped into [0, 0.5) because the
    half-mass asymptote is never attained.
    """
    if var <= 0:
        raise ValidationError(f"variance must be positive, got {var}")
    z = (x - mean) / math.sqrt(var)
    return min(0.5 * abs(float(erf(z / math.sqrt(2.0)))), _HALF_OPEN)


# ---------------------------------------------------------------------------
# Vectorized forms. The planner evaluates the deviation statistic for every
# (observation, function, candidate failure time) triple, which is a banded
# matrix product against the weight kernel rather than a triple loop.

def weight_kernel(T: int, config: BlameConfig) -> tuple[np.ndarray, np.ndarray]:
    """(K, N_w): K[t_fail, t] is the window weight of timestep t for a failure
    at t_fail (zero outside the window); N_w[t_fail] is the window length."""
    tf = np.arange(T)[:, None]
    t = np.arange(T)[None, :]
    delta = tf - t
    in_win = (delta >= 0) & (delta < config.window_steps)
    K = np.where(in_win, np.exp(-config.alpha * delta), 0.0)
    n_w = in_win.sum(axis=1).astype(np.float64)
    return K, n_w


def deviation_grid(model: FpfModel, counts: np.ndarray,
                   config: BlameConfig) -> tuple[np.ndarray, np.ndarray]:
    """Deviation mass and window-inactivity mask for all failure times at once.

    ``counts`` may be one fingerprint matrix (F, T) or a stack (n, F, T);
    outputs have the same leading shape with a trailing t_fail axis.
    A function is "inactive" at (obs, t_fail) when both the model mean and the
    executed counts are ~zero (<= 1e-9) everywhere inside the window.
    """
    K, n_w = weight_kernel(model.T, config)
    mean_exp = (model.mean @ K.T) / n_w
    var_exp = (model.var @ (K * K).T) / (n_w * n_w)
    exec_wm = (counts @ K.T) / n_w
    z = (exec_wm - mean_exp) / np.sqrt(var_exp)
    pd = np.minimum(0.5 * np.abs(erf(z / math.sqrt(2.0))), _HALF_OPEN)
    occupancy = (K > 0).astype(np.float64).T   # (T, T_fail)
    model_active = (model.mean @ occupancy) > 1e-9
    exec_active = (counts @ occupancy) > 1e-9
    inactive = ~(model_active | exec_active)
    return pd, inactive


def deviation_at(model: FpfModel, fingerprint: Fingerprint, t_fail: int,
                 config: BlameConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-function deviation mass and inactivity mask at one failure time."""
    if not (0 <= t_fail < model.T):
        raise ValidationError(f"t_fail={t_fail} outside [0, {model.T})")
    pd, inactive = deviation_grid(model, fingerprint.counts, config)
    return pd[:, t_fail], inactive[:, t_fail]
