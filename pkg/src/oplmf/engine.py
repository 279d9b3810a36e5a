"""
Optimal step-size LMF (OPLMF)
=============================

Closed-form pieces of the mean-square-deviation analysis of the LMF update
and the filter that uses them: a smoothed input-power estimate, the one-step
MSD map, the step size that minimizes it, the stability clamp and the EMSE.

Moment convention: ``sigma_x_sq`` everywhere below is the per-tap input
power. :func:`update_power` smooths the raw inner product ``X^T X`` (whose
mean is ``L`` times larger); :attr:`PowerEstimate.per_tap` converts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import FilterState, error, lmf_update, predict, squared_deviation

log = logging.getLogger(__name__)


class DegenerateInputError(ValueError):
    """Input or noise power is zero where a formula divides by it."""


@dataclass(frozen=True)
class MomentSet:
    """Second, fourth and sixth moments of the additive noise.

    For non-zero-mean noise these are raw moments about zero, which is what
    the expansion of ``E[e^k]`` needs.
    """

    sigma_rho_sq: float
    m4: float
    m6: float

    def __post_init__(self):
        vals = (self.sigma_rho_sq, self.m4, self.m6)
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"moments must be finite and non-negative, got {vals}")
        # Jensen: E[rho^4] >= E[rho^2]^2
        if self.m4 < self.sigma_rho_sq**2 * (1 - 1e-12):
            raise ValueError(
                f"m4={self.m4} < sigma_rho_sq**2={self.sigma_rho_sq ** 2} violates Jensen"
            )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.sigma_rho_sq, self.m4, self.m6)


@dataclass
class PowerEstimate:
    """Exponentially smoothed ``X^T X``; ``sigma_x_sq`` may be an array (one per run).

    ``sigma_x_sq`` follows ``gamma * prev + (1 - gamma) * X^T X`` exactly.
    When the recursion starts from zero, :attr:`per_tap` divides out the
    start-up bias ``1 - gamma**k`` after ``k`` updates; otherwise the
    estimate would read far too low for the first ``~1/(1-gamma)`` samples
    and the stability clamp built on it would not bind.
    """

    length: int
    gamma: float = 0.98
    sigma_x_sq: np.ndarray | float = 0.0
    debias: bool = True
    steps: int = 0

    def __post_init__(self):
        lo = 1.0 - 1.0 / (2 * self.length)
        if not (lo <= self.gamma < 1.0):
            raise ValueError(f"gamma must lie in [{lo:g}, 1) for L={self.length}, got {self.gamma}")
        if np.any(np.asarray(self.sigma_x_sq) < 0):
            raise ValueError("sigma_x_sq must be non-negative")
        if np.any(np.asarray(self.sigma_x_sq) > 0):
            self.debias = False

    @property
    def per_tap(self):
        """Per-sample input power used by the step-size formulas."""
        est = np.asarray(self.sigma_x_sq) / self.length
        if self.debias and self.steps > 0:
            est = est / (1.0 - self.gamma**self.steps)
        return est


def update_power(est: PowerEstimate, window) -> PowerEstimate:
    window = np.asarray(window, dtype=float)
    if window.shape[-1] != est.length:
        raise ValueError(f"window length {window.shape[-1]} != {est.length}")
    energy = np.einsum("...i,...i->...", window, window)
    est.sigma_x_sq = est.gamma * np.asarray(est.sigma_x_sq) + (1.0 - est.gamma) * energy
    est.steps += 1
    return est


def f_factor(L, mu, sigma_x_sq, moments: MomentSet):
    """Linear contraction factor of the MSD recursion."""
    s2, m4, _ = moments.as_tuple()
    return 1.0 + 15 * (L + 2) * mu**2 * sigma_x_sq**2 * m4 - 6 * mu * sigma_x_sq * s2


def g_factor(L, mu, sigma_x_sq, moments: MomentSet):
    s2 = moments.sigma_rho_sq
    return 15 * (3 * L + 12) * mu**2 * sigma_x_sq**3 * s2 - 6 * mu * sigma_x_sq**2


def cubic_factor(L, mu, sigma_x_sq):
    return (15 * L + 90) * mu**2 * sigma_x_sq**4


def t_term(L, mu, sigma_x_sq, moments: MomentSet):
    """Noise-driven excitation ``mu^2 L sigma_x^2 E[rho^6]``."""
    return mu**2 * L * sigma_x_sq * moments.m6


def _check_powers(sigma_x_sq, moments):
    if np.any(np.asarray(sigma_x_sq) <= 0):
        raise DegenerateInputError("sigma_x_sq must be positive")
    if moments.m4 <= 0:
        raise DegenerateInputError("E[rho^4] must be positive")


def fastest_convergence_step(L, sigma_x_sq, moments: MomentSet):
    """Vertex of the parabola ``f_factor(mu)``."""
    _check_powers(sigma_x_sq, moments)
    return moments.sigma_rho_sq / (5 * (L + 2) * np.asarray(sigma_x_sq) * moments.m4)


def stability_bound(L, sigma_x_sq, moments: MomentSet):
    """Upper step-size limit used by the clamp.

    Equal to the fastest-convergence vertex. Solving ``|f| < 1`` directly
    gives twice this value; the tighter limit is kept as a safety margin.
    """
    return fastest_convergence_step(L, sigma_x_sq, moments)


def _mu_denominator(L, msd, sigma_x_sq, moments):
    s2, m4, m6 = moments.as_tuple()
    inner = (L + 2) * m4 + (3 * L + 12) * sigma_x_sq * s2 * msd + (L + 6) * sigma_x_sq**2 * msd**2
    return 15 * sigma_x_sq * msd * inner + L * m6


def optimal_step(msd, sigma_x_sq, moments: MomentSet, L: int):
    """Step size minimizing the one-step MSD map :func:`propagate_msd`.

    Returns 0 wherever ``msd == 0`` or ``sigma_x_sq == 0`` (nothing to learn
    or no excitation).
    """
    msd = np.asarray(msd, dtype=float)
    sx = np.asarray(sigma_x_sq, dtype=float)
    if np.any(msd < 0):
        raise ValueError("msd must be non-negative")
    num = 3.0 * msd * (moments.sigma_rho_sq + sx * msd)
    den = _mu_denominator(L, msd, sx, moments)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.where((num > 0) & (den > 0) & (sx > 0), num / den, 0.0)
    return mu[()] if mu.ndim == 0 else mu


def one_step_msd(msd, sigma_x_sq, mu, moments: MomentSet, L: int):
    """Unclamped right-hand side of the full cubic MSD recursion."""
    return (
        f_factor(L, mu, sigma_x_sq, moments) * msd
        + g_factor(L, mu, sigma_x_sq, moments) * msd**2
        + cubic_factor(L, mu, sigma_x_sq) * msd**3
        + t_term(L, mu, sigma_x_sq, moments)
    )


def propagate_msd(msd, sigma_x_sq, mu, moments: MomentSet, L: int):
    """Next model MSD, clamped at zero from below."""
    nxt = np.asarray(one_step_msd(msd, sigma_x_sq, mu, moments, L), dtype=float)
    if np.any(nxt < 0):
        log.debug("MSD recursion undershot zero (min %g); clamped", float(nxt.min()))
        nxt = np.maximum(nxt, 0.0)
    return nxt[()] if nxt.ndim == 0 else nxt


def propagate_msd_truncated(msd, sigma_x_sq, mu, moments: MomentSet, L: int):
    """Small-MSD form ``f * MSD + t`` (quadratic and cubic terms dropped)."""
    return np.maximum(
        f_factor(L, mu, sigma_x_sq, moments) * msd + t_term(L, mu, sigma_x_sq, moments), 0.0
    )


def optimal_msd_update(msd, sigma_x_sq, moments: MomentSet, L: int):
    """Small-MSD recursion ``f * MSD + t`` with the optimal step substituted.

    Equal to :func:`propagate_msd_truncated` evaluated at :func:`optimal_step`;
    used for steady-state reasoning. Runtime propagation uses the full map.
    """
    msd = np.asarray(msd, dtype=float)
    s2, m4, m6 = moments.as_tuple()
    den = _mu_denominator(L, msd, sigma_x_sq, moments)
    q = msd * (s2 + sigma_x_sq * msd)
    nxt = (
        msd * (1 + 15 * (9 * L + 18) * q**2 * sigma_x_sq**2 * m4 / den**2
               - 18 * q * sigma_x_sq * s2 / den)
        + 9 * L * sigma_x_sq * q**2 * m6 / den**2
    )
    return np.maximum(nxt, 0.0)


def emse(msd, sigma_x_sq, sigma_rho_sq):
    """Excess mean-square error ``sigma_rho^2 + sigma_x^2 MSD``."""
    return sigma_rho_sq + sigma_x_sq * np.asarray(msd)


@dataclass
class MsdModel:
    msd: np.ndarray | float
    length: int
    moments: MomentSet

    def __post_init__(self):
        if np.any(np.asarray(self.msd) < 0):
            raise ValueError("model MSD must be non-negative")


@dataclass(frozen=True)
class OplmfConfig:
    gamma: float = 0.98
    msd_mode: str = "oracle"
    msd_init: float | None = None
    clamp_to_stability: bool = True

    name = "OPLMF"

    def __post_init__(self):
        if self.msd_mode not in ("oracle", "model"):
            raise ValueError(f"msd_mode must be 'oracle' or 'model', got {self.msd_mode!r}")
        if self.msd_init is not None and self.msd_init <= 0:
            raise ValueError("msd_init must be positive")


@dataclass
class StepDiagnostics:
    iteration: int
    mu: np.ndarray
    sigma_x_sq: np.ndarray
    model_msd: np.ndarray | None
    oracle_msd: np.ndarray | None
    error: np.ndarray


@dataclass
class OplmfFilter:
    """Engine state for OPLMF: power estimate plus (in model mode) an MSD model.

    Call :meth:`step` once per sample after the new input has been pushed
    into ``state.window``.
    """

    cfg: OplmfConfig
    moments: MomentSet
    state: FilterState
    power: PowerEstimate = field(init=False)
    model: MsdModel | None = field(init=False, default=None)

    def __post_init__(self):
        L = self.state.length
        batch = self.state.weights.shape[:-1]
        self.power = PowerEstimate(L, self.cfg.gamma, np.zeros(batch))
        if self.cfg.msd_mode == "model":
            init = self.cfg.msd_init
            if init is None:
                init = float(np.max(np.sum(self.state.weights**2, axis=-1))) or float(L)
            self.model = MsdModel(np.full(batch, init), L, self.moments)

    def step(self, desired, w_true=None) -> StepDiagnostics:
        st = self.state
        L = st.length
        e = error(desired, predict(st))
        update_power(self.power, st.window)
        sx = self.power.per_tap

        oracle = None
        if w_true is not None:
            oracle = squared_deviation(w_true, st.weights)
        if self.cfg.msd_mode == "oracle":
            if oracle is None:
                raise ValueError("oracle mode needs the true weights")
            msd_now = oracle
        else:
            msd_now = self.model.msd

        mu = np.asarray(optimal_step(msd_now, sx, self.moments, L), dtype=float)
        # noiseless case (m4 == 0) has no finite bound
        if self.cfg.clamp_to_stability and self.moments.m4 > 0:
            mu = np.minimum(mu, stability_bound(L, np.where(sx > 0, sx, np.inf), self.moments))
        mu = np.where(st.diverged, 0.0, mu)

        diag = StepDiagnostics(
            iteration=st.iteration,
            mu=mu,
            sigma_x_sq=sx,
            model_msd=None if self.model is None else np.array(self.model.msd, copy=True),
            oracle_msd=oracle,
            error=e,
        )
        lmf_update(st, mu, e)
        if self.model is not None:
            self.model.msd = propagate_msd(self.model.msd, sx, mu, self.moments, L)
        return diag


def oplmf_step(state: FilterState, cfg: OplmfConfig, engine: OplmfFilter, desired, w_true=None):
    """Functional wrapper around :meth:`OplmfFilter.step`."""
    if engine.state is not state or engine.cfg != cfg:
        raise ValueError("engine is bound to a different filter state or config")
    diag = engine.step(desired, w_true)
    return state, diag
