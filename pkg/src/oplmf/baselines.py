"""
Baseline LMF variants: fixed-step LMF, normalized LMF and the quotient-form
variable step-size LMF (VSSLMFQ).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FilterState, apply_increment, error, lmf_update, predict


@dataclass(frozen=True)
class LmfConfig:
    mu: float = 0.001

    name = "LMF"

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError("mu must be non-negative")


@dataclass(frozen=True)
class NlmfConfig:
    mu: float = 0.005
    epsilon: float = 1e-6

    name = "NLMF"

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be non-negative")


@dataclass(frozen=True)
class VsslmfqConfig:
    alpha: float = 0.997
    gamma_q: float = 0.000002
    a: float = 0.95
    b: float = 0.995
    mu_max: float = 0.005
    mu_min: float = 0.0

    name = "VSSLMFQ"

    def __post_init__(self):
        for nm in ("alpha", "a", "b"):
            v = getattr(self, nm)
            if not 0 < v < 1:
                raise ValueError(f"{nm} must lie in (0, 1), got {v}")
        if self.mu_min > self.mu_max:
            raise ValueError("mu_min must not exceed mu_max")


def nlmf_denominator(window, epsilon):
    energy = np.einsum("...i,...i->...", window, window)
    return epsilon + energy**2


def nlmf_update(state: FilterState, cfg: NlmfConfig, err, raise_on_divergence=None):
    """``W <- W + mu / (eps + (X^T X)^2) * X * e**3``; returns the state and the effective step."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        step = cfg.mu / nlmf_denominator(state.window, cfg.epsilon)
        increment = (step * np.power(err, 3))[..., None] * state.window
    apply_increment(state, increment, raise_on_divergence)
    return state, step


@dataclass
class QuotientSmoothers:
    """Running error statistics driving the VSSLMFQ step size."""

    p: np.ndarray
    q: np.ndarray
    mu: np.ndarray
    e_prev: np.ndarray

    Q_FLOOR = 1e-12

    @classmethod
    def initial(cls, batch_shape=(), q0: float = 1e-6, mu0: float = 0.0):
        return cls(
            p=np.zeros(batch_shape),
            q=np.full(batch_shape, q0),
            mu=np.full(batch_shape, mu0),
            e_prev=np.zeros(batch_shape),
        )


def vsslmfq_step_size(cfg: VsslmfqConfig, sm: QuotientSmoothers, err):
    """Advance the smoothers with ``err`` and return the new clamped step."""
    err = np.asarray(err, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        sm.p = cfg.a * sm.p + (1 - cfg.a) * err * sm.e_prev
        sm.q = np.maximum(cfg.b * sm.q + (1 - cfg.b) * err * err, QuotientSmoothers.Q_FLOOR)
        mu = cfg.alpha * sm.mu + cfg.gamma_q * sm.p / sm.q
    mu = np.where(np.isfinite(mu), mu, cfg.mu_min)
    sm.mu = np.clip(mu, cfg.mu_min, cfg.mu_max)
    sm.e_prev = err
    return sm.mu


def vsslmfq_update(state: FilterState, cfg: VsslmfqConfig, err, smoothers: QuotientSmoothers,
                   raise_on_divergence=None):
    mu = vsslmfq_step_size(cfg, smoothers, err)
    mu = np.where(state.diverged, 0.0, mu)
    lmf_update(state, mu, err, raise_on_divergence)
    return state, mu


# Per-sample drivers used by the harness: ``step(desired) -> (mu, e)``.

@dataclass
class LmfFilter:
    state: FilterState
    cfg: LmfConfig = field(default_factory=LmfConfig)

    def step(self, desired, w_true=None):
        e = error(desired, predict(self.state))
        mu = np.where(self.state.diverged, 0.0, self.cfg.mu)
        lmf_update(self.state, mu, e)
        return mu, e


@dataclass
class NlmfFilter:
    state: FilterState
    cfg: NlmfConfig = field(default_factory=NlmfConfig)

    def step(self, desired, w_true=None):
        e = error(desired, predict(self.state))
        _, mu = nlmf_update(self.state, self.cfg, e)
        return mu, e


@dataclass
class VsslmfqFilter:
    state: FilterState
    cfg: VsslmfqConfig = field(default_factory=VsslmfqConfig)
    smoothers: QuotientSmoothers = None

    def __post_init__(self):
        if self.smoothers is None:
            self.smoothers = QuotientSmoothers.initial(self.state.weights.shape[:-1])

    def step(self, desired, w_true=None):
        e = error(desired, predict(self.state))
        _, mu = vsslmfq_update(self.state, self.cfg, e, self.smoothers)
        return mu, e
