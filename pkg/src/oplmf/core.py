"""
LMF filtering kernel
====================

Tapped-delay-line state, prediction, error, the cubic-error weight update and
the mean-square-deviation metric shared by every algorithm in the package.

All arrays may carry a leading batch axis so that independent Monte Carlo
runs advance in lock-step: ``weights`` and ``window`` have shape ``(L,)`` for
a single filter or ``(runs, L)`` for a batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_GUARD = 1e6
MSD_FLOOR_DB = -300.0


class DivergenceError(RuntimeError):
    """Raised when an update produces non-finite or runaway weights."""


class LengthMismatchError(ValueError):
    pass


@dataclass
class FilterState:
    """Weights, regressor window and bookkeeping for one filter or a batch.

    The window is ordered newest-first, ``[x(n), x(n-1), ..., x(n-L+1)]``,
    and starts out filled with zeros.
    """

    weights: np.ndarray
    window: np.ndarray
    iteration: int = 0
    diverged: np.ndarray = field(default=None)
    guard: float = DEFAULT_GUARD

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        self.window = np.array(self.window, dtype=float)
        if self.weights.ndim not in (1, 2) or self.weights.shape[-1] < 1:
            raise ValueError("weights must have shape (L,) or (runs, L) with L >= 1")
        if self.window.shape != self.weights.shape:
            raise LengthMismatchError(
                f"window shape {self.window.shape} != weights shape {self.weights.shape}"
            )
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("initial weights must be finite")
        if self.diverged is None:
            self.diverged = np.zeros(self.weights.shape[:-1], dtype=bool)
        else:
            self.diverged = np.broadcast_to(
                np.asarray(self.diverged, dtype=bool), self.weights.shape[:-1]
            ).copy()

    @classmethod
    def zeros(cls, length: int, runs: int | None = None, guard: float = DEFAULT_GUARD):
        shape = (length,) if runs is None else (runs, length)
        return cls(np.zeros(shape), np.zeros(shape), guard=guard)

    @property
    def length(self) -> int:
        return self.weights.shape[-1]

    @property
    def batched(self) -> bool:
        return self.weights.ndim == 2

    def push(self, sample) -> None:
        """Shift one new input sample (per run) into the delay line."""
        self.window[..., 1:] = self.window[..., :-1]
        self.window[..., 0] = sample


def predict(state: FilterState):
    """Filter output ``y(n) = W(n)^T X(n)``."""
    return np.einsum("...i,...i->...", state.weights, state.window)


def error(desired, output):
    return np.subtract(desired, output)


def apply_increment(state: FilterState, increment: np.ndarray, raise_on_divergence=None):
    """Add ``increment`` to the weights of every healthy run.

    Runs whose new weights are non-finite or exceed ``state.guard`` in
    magnitude are flagged as diverged and keep their previous weights. A
    single (unbatched) filter raises :class:`DivergenceError` instead of
    silently freezing; a batch raises only if ``raise_on_divergence`` is set.
    """
    if raise_on_divergence is None:
        raise_on_divergence = not state.batched
    if raise_on_divergence and np.any(state.diverged):
        raise DivergenceError("filter has diverged; further updates are refused")

    with np.errstate(over="ignore", invalid="ignore"):
        candidate = state.weights + increment
    bad = ~np.all(np.isfinite(candidate), axis=-1) | np.any(
        np.abs(candidate) > state.guard, axis=-1
    )
    newly = bad & ~state.diverged
    frozen = state.diverged | bad
    if state.batched:
        state.weights = np.where(frozen[:, None], state.weights, candidate)
    elif not frozen:
        state.weights = candidate
    state.diverged = np.asarray(frozen)
    state.iteration += 1
    if raise_on_divergence and np.any(newly):
        raise DivergenceError(f"weights diverged at iteration {state.iteration}")
    return state


def lmf_update(state: FilterState, step_size, err, raise_on_divergence=None) -> FilterState:
    """``W <- W + mu * X * e**3`` (in place; the state is returned)."""
    mu = np.asarray(step_size, dtype=float)
    if np.any(mu < 0) or not np.all(np.isfinite(mu)):
        raise ValueError("step size must be finite and non-negative")
    with np.errstate(over="ignore", invalid="ignore"):
        gain = mu * np.power(err, 3)
        increment = np.asarray(gain)[..., None] * state.window
    return apply_increment(state, increment, raise_on_divergence)


def squared_deviation(w_true, w_est):
    w_true = np.asarray(w_true, dtype=float)
    w_est = np.asarray(w_est, dtype=float)
    if w_true.shape[-1] != w_est.shape[-1]:
        raise LengthMismatchError(f"lengths differ: {w_true.shape[-1]} vs {w_est.shape[-1]}")
    return np.sum((w_true - w_est) ** 2, axis=-1)


def to_db(value):
    """``10 log10`` with the -300 dB floor for (near-)zero values."""
    value = np.asarray(value, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(value < 1e-30, MSD_FLOOR_DB, 10.0 * np.log10(np.maximum(value, 1e-300)))
    out = np.where(np.isnan(value), np.nan, out)
    return out[()] if out.ndim == 0 else out


def msd_db(w_true, w_est):
    """Mean-square deviation ``10 log10 ||W_o - W||^2`` in dB."""
    return to_db(squared_deviation(w_true, w_est))
