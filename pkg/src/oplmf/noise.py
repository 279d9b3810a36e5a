"""
Noise families
==============

Gaussian, Uniform, Binary, Rayleigh and Poisson measurement noise with
closed-form moments and SNR-based rescaling.

Parameterization of ``scale`` per family:

=========  ==========================================================
Gaussian   standard deviation
Uniform    interval width ``c``: ``U(0, c)`` or ``U(-c/2, c/2)`` centered
Binary     amplitude ``s``: ``+s`` / ``-s`` with equal probability
Rayleigh   Rayleigh scale parameter ``sigma``
Poisson    rate ``lambda``
=========  ==========================================================

Rayleigh, Poisson and uncentered Uniform noise have non-zero mean. For them
:func:`moments` returns raw moments about zero unless ``centered`` is set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import MomentSet

FAMILIES = ("gaussian", "uniform", "binary", "rayleigh", "poisson")


class UnscalableError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    family: str
    scale: float = 1.0
    centered: bool = False
    # Report the uniform 4th/6th moments transposed (27/7 and 9/5 times var^k),
    # a variant that circulates in the literature; for sensitivity studies.
    swap_uniform_moments: bool = False

    def __post_init__(self):
        fam = self.family.lower()
        if fam == "passion":  # common misspelling, accepted in configs
            fam = "poisson"
        if fam not in FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", fam)
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError("scale must be positive and finite")
        if self.swap_uniform_moments and not (fam == "uniform" and self.centered):
            raise ValueError("swap_uniform_moments applies to centered uniform noise only")

    def to_dict(self) -> dict:
        d = {"family": self.family, "scale": float(self.scale), "centered": bool(self.centered)}
        if self.swap_uniform_moments:
            d["swap_uniform_moments"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(
            family=d["family"],
            scale=float(d.get("scale", 1.0)),
            centered=bool(d.get("centered", False)),
            swap_uniform_moments=bool(d.get("swap_uniform_moments", False)),
        )


def mean(spec: NoiseSpec) -> float:
    """Mean of the uncentered family."""
    s = spec.scale
    return {
        "gaussian": 0.0,
        "binary": 0.0,
        "uniform": s / 2,
        "rayleigh": s * math.sqrt(math.pi / 2),
        "poisson": s,
    }[spec.family]


def variance(spec: NoiseSpec) -> float:
    s = spec.scale
    return {
        "gaussian": s**2,
        "binary": s**2,
        "uniform": s**2 / 12,
        "rayleigh": (4 - math.pi) / 2 * s**2,
        "poisson": s,
    }[spec.family]


def raw_moment(spec: NoiseSpec, k: int) -> float:
    """``E[rho^k]`` of the uncentered family, ``k >= 0``."""
    s = spec.scale
    fam = spec.family
    if fam == "gaussian":
        return 0.0 if k % 2 else s**k * math.prod(range(k - 1, 0, -2))
    if fam == "binary":
        return 0.0 if k % 2 else s**k
    if fam == "uniform":
        return s**k / (k + 1)
    if fam == "rayleigh":
        return s**k * 2 ** (k / 2) * math.gamma(1 + k / 2)
    # Poisson raw moments are Touchard polynomials: sum_j S(k, j) lambda^j
    return sum(_stirling2(k, j) * s**j for j in range(k + 1))


def _stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return sum((-1) ** i * math.comb(k, i) * (k - i) ** n for i in range(k + 1)) // math.factorial(k)


def central_moment(spec: NoiseSpec, k: int) -> float:
    m = mean(spec)
    return sum(math.comb(k, j) * raw_moment(spec, j) * (-m) ** (k - j) for j in range(k + 1))


def moments(spec: NoiseSpec) -> MomentSet:
    """``(E[rho^2], E[rho^4], E[rho^6])`` for the noise as it is sampled."""
    fam = spec.family
    if fam in ("gaussian", "binary") or spec.centered:
        m2, m4, m6 = (central_moment(spec, k) for k in (2, 4, 6))
    else:
        m2, m4, m6 = (raw_moment(spec, k) for k in (2, 4, 6))
    if spec.swap_uniform_moments:
        m4, m6 = 27 / 7 * m2**2, 9 / 5 * m2**3
    return MomentSet(m2, m4, m6)


def sample(spec: NoiseSpec, rng: np.random.Generator, size=None):
    """Draw noise samples; the family mean is removed when ``centered``."""
    s = spec.scale
    fam = spec.family
    if fam == "gaussian":
        out = rng.normal(0.0, s, size)
    elif fam == "binary":
        out = s * (2.0 * rng.integers(0, 2, size) - 1.0)
    elif fam == "uniform":
        out = rng.uniform(0.0, s, size)
    elif fam == "rayleigh":
        out = rng.rayleigh(s, size)
    else:
        out = rng.poisson(s, size).astype(float)
    if spec.centered:
        out = out - mean(spec)
    return out


def with_variance(spec: NoiseSpec, var: float) -> NoiseSpec:
    """Same family and options, rescaled to the given variance."""
    if not var > 0:
        raise UnscalableError(f"cannot scale {spec.family} noise to variance {var}")
    scale = {
        "gaussian": math.sqrt(var),
        "binary": math.sqrt(var),
        "uniform": math.sqrt(12 * var),
        "rayleigh": math.sqrt(2 * var / (4 - math.pi)),
        "poisson": var,
    }[spec.family]
    return replace(spec, scale=scale)


def scale_for_snr(spec: NoiseSpec, signal_power: float, snr_db: float) -> NoiseSpec:
    """Rescale ``spec`` so that ``signal_power / variance`` equals ``snr_db``."""
    if not signal_power > 0:
        raise ValueError("signal_power must be positive")
    return with_variance(spec, signal_power / 10 ** (snr_db / 10))


def monte_carlo_moments(spec: NoiseSpec, n: int, rng: np.random.Generator, chunk: int = 1_000_000):
    """Sample estimates of ``(E[rho^2], E[rho^4], E[rho^6])`` matching :func:`moments`.

    For Gaussian/Binary and centered noise the sample is drawn already
    centered, so raw sample moments estimate the central moments.
    """
    acc = np.zeros(3)
    done = 0
    while done < n:
        m = min(chunk, n - done)
        x = sample(spec, rng, m)
        x2 = x * x
        x4 = x2 * x2
        acc += (x2.sum(), x4.sum(), (x4 * x2).sum())
        done += m
    return tuple(acc / n)
