"""
System-identification harness
=============================

Unknown-system and input models, the seven benchmark experiments, a
Monte Carlo runner that advances all independent runs of one algorithm in
lock-step, and the theoretical OPLMF learning curve it is compared with.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml
from scipy.signal import lfilter

from . import noise as nz
from .baselines import (
    LmfConfig,
    LmfFilter,
    NlmfConfig,
    NlmfFilter,
    VsslmfqConfig,
    VsslmfqFilter,
)
from .core import FilterState, to_db
from .engine import MomentSet, OplmfConfig, OplmfFilter, optimal_step, propagate_msd, stability_bound

log = logging.getLogger(__name__)

W_BASE = (0.8, 0.2, -0.7, 0.2, 0.1)

# Steady-state MSD (dB) reported for the benchmark; None marks divergence.
REPORTED_MSD_DB = {
    1: {"NLMF": -28.51, "VSSLMFQ": -31.53, "OPLMF": -60.91},
    2: {"NLMF": -26.17, "VSSLMFQ": None, "OPLMF": -57.24},
    3: {"NLMF": -30.82, "VSSLMFQ": -33.84, "OPLMF": -58.47},
    4: {"NLMF": -16.88, "VSSLMFQ": -21.06, "OPLMF": -44.37},
    5: {"NLMF": -22.43, "VSSLMFQ": -26.41, "OPLMF": -57.28},
    6: {"NLMF": -18.50, "VSSLMFQ": -26.92, "OPLMF": -85.88},
    7: {"NLMF": -19.25, "VSSLMFQ": -22.69, "OPLMF": -28.34},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SystemModel:
    """Unknown FIR system, fixed or randomly perturbed each iteration.

    ``random_walk`` draws a fresh i.i.d. perturbation ``tau(n)`` around
    ``w_base`` at every step, ``W_o(n) = w_base + tau(n)``; with
    ``cumulative=True`` the perturbations accumulate instead. For the
    non-cumulative model the deviation is measured against ``w_base``, the
    only part of the system a causal filter can identify.
    """

    w_base: tuple = W_BASE
    variant: str = "time_invariant"
    sigma_tau_sq: float = 0.01
    cumulative: bool = False

    def __post_init__(self):
        object.__setattr__(self, "w_base", tuple(float(w) for w in self.w_base))
        if self.variant not in ("time_invariant", "random_walk"):
            raise ConfigError(f"unknown system variant {self.variant!r}")
        if not self.w_base:
            raise ConfigError("w_base must not be empty")
        if self.sigma_tau_sq < 0:
            raise ConfigError("sigma_tau_sq must be non-negative")

    @property
    def length(self) -> int:
        return len(self.w_base)

    @property
    def time_varying(self) -> bool:
        return self.variant == "random_walk"

    def trajectory(self, rng: np.random.Generator, iterations: int) -> np.ndarray | None:
        """Per-iteration ``W_o(n)`` as an ``(iterations, L)`` array, or None if fixed."""
        if not self.time_varying:
            return None
        tau = rng.normal(0.0, np.sqrt(self.sigma_tau_sq), (iterations, self.length))
        if self.cumulative:
            tau = np.cumsum(tau, axis=0)
        return np.asarray(self.w_base) + tau

    def to_dict(self) -> dict:
        d = {"w_base": list(self.w_base), "variant": self.variant}
        if self.time_varying:
            d["sigma_tau_sq"] = self.sigma_tau_sq
            d["cumulative"] = self.cumulative
        return d


@dataclass(frozen=True)
class InputModel:
    """White Gaussian input, optionally colored by ``y(n) = a y(n-1) + x(n)``."""

    kind: str = "white"
    sigma_x_sq: float = 1.0
    coefficient: float = 0.5

    def __post_init__(self):
        if self.kind not in ("white", "ar1"):
            raise ConfigError(f"unknown input kind {self.kind!r}")
        if not self.sigma_x_sq > 0:
            raise ConfigError("sigma_x_sq must be positive")
        if self.kind == "ar1" and not abs(self.coefficient) < 1:
            raise ConfigError("AR(1) coefficient must satisfy |a| < 1")

    @property
    def power(self) -> float:
        """Stationary per-sample power of the filter input."""
        if self.kind == "white":
            return self.sigma_x_sq
        return self.sigma_x_sq / (1 - self.coefficient**2)

    def autocorrelation(self, L: int) -> np.ndarray:
        lag = np.abs(np.subtract.outer(np.arange(L), np.arange(L)))
        a = 0.0 if self.kind == "white" else self.coefficient
        return self.power * np.where(lag == 0, 1.0, a**lag)

    def generate(self, rng: np.random.Generator, n: int) -> np.ndarray:
        x = rng.normal(0.0, np.sqrt(self.sigma_x_sq), n)
        if self.kind == "ar1":
            x = lfilter([1.0], [1.0, -self.coefficient], x)
        return x

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "sigma_x_sq": self.sigma_x_sq}
        if self.kind == "ar1":
            d["coefficient"] = self.coefficient
        return d


ALGORITHM_TYPES = {
    "LMF": LmfConfig,
    "NLMF": NlmfConfig,
    "VSSLMFQ": VsslmfqConfig,
    "OPLMF": OplmfConfig,
}


def algorithm_from_dict(d: dict):
    d = dict(d)
    tag = str(d.pop("type", "")).upper()
    if tag not in ALGORITHM_TYPES:
        raise ConfigError(f"unknown algorithm {tag!r}; expected one of {sorted(ALGORITHM_TYPES)}")
    try:
        return ALGORITHM_TYPES[tag](**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {tag} parameters: {exc}") from exc


def algorithm_to_dict(alg) -> dict:
    return {"type": alg.name, **asdict(alg)}


def default_algorithms():
    return (NlmfConfig(), VsslmfqConfig(), OplmfConfig())


@dataclass(frozen=True)
class ExperimentConfig:
    id: int | None
    system: SystemModel
    input: InputModel
    noise: nz.NoiseSpec
    snr_db: float | None
    algorithms: tuple = field(default_factory=default_algorithms)
    runs: int = 50
    iterations: int = 5000
    seed: int = 0
    description: str = ""

    def __post_init__(self):
        if self.runs < 1 or self.iterations < 1:
            raise ConfigError("runs and iterations must be positive")
        for alg in self.algorithms:
            if not isinstance(alg, tuple(ALGORITHM_TYPES.values())):
                raise ConfigError(f"unknown algorithm {alg!r}")
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate algorithms in {names}")

    @property
    def length(self) -> int:
        return self.system.length

    def signal_power(self) -> float:
        """``E[(w_base^T X)^2]`` for the configured input."""
        w = np.asarray(self.system.w_base)
        return float(w @ self.input.autocorrelation(len(w)) @ w)

    def noise_spec(self) -> nz.NoiseSpec:
        """The noise actually injected: rescaled to ``snr_db`` when one is set."""
        if self.snr_db is None:
            return self.noise
        return nz.scale_for_snr(self.noise, self.signal_power(), self.snr_db)

    def moments(self) -> MomentSet:
        return nz.moments(self.noise_spec())

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "system": self.system.to_dict(),
            "input": self.input.to_dict(),
            "noise": self.noise.to_dict(),
            "snr_db": self.snr_db,
            "algorithms": [algorithm_to_dict(a) for a in self.algorithms],
            "runs": self.runs,
            "iterations": self.iterations,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            algs = d.get("algorithms")
            return cls(
                id=d.get("id"),
                description=d.get("description", ""),
                system=SystemModel(**d.get("system", {})),
                input=InputModel(**d.get("input", {})),
                noise=nz.NoiseSpec.from_dict(d["noise"]),
                snr_db=d.get("snr_db"),
                algorithms=(
                    tuple(algorithm_from_dict(a) for a in algs) if algs else default_algorithms()
                ),
                runs=int(d.get("runs", 50)),
                iterations=int(d.get("iterations", 5000)),
                seed=int(d.get("seed", 0)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return ExperimentConfig.from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def experiment_catalog(seed: int = 0) -> list[ExperimentConfig]:
    """The seven benchmark configurations (L = 5, 50 runs of 5000 samples)."""
    fixed = SystemModel(variant="time_invariant")
    walk = SystemModel(variant="random_walk", sigma_tau_sq=0.01)
    ar1 = InputModel("ar1", 1.0, 0.5)
    white = InputModel("white", 1.0)
    uni = nz.NoiseSpec("uniform", 1.0)
    rows = [
        (1, fixed, ar1, uni, 3.0, "time-invariant, correlated input, uniform(0,1) noise"),
        (2, fixed, ar1, uni, 1.5, "time-invariant, correlated input, uniform(0,1) noise"),
        (3, fixed, ar1, uni, 0.0, "time-invariant, correlated input, uniform(0,1) noise"),
        (4, walk, white, nz.NoiseSpec("gaussian", 1.0), 1.0,
         "time-varying, uncorrelated input, gaussian noise"),
        (5, walk, ar1, nz.NoiseSpec("binary", 1.0), 1.0,
         "time-varying, correlated input, binary noise"),
        (6, walk, ar1, nz.NoiseSpec("rayleigh", 3.0), 0.0,
         "time-varying, correlated input, rayleigh noise"),
        (7, walk, ar1, nz.NoiseSpec("poisson", 1.0), 3.0,
         "time-varying, correlated input, poisson noise"),
    ]
    return [
        ExperimentConfig(i, sysm, inp, ns, snr, seed=seed, description=desc)
        for i, sysm, inp, ns, snr, desc in rows
    ]


def catalog_entry(exp_id: int, seed: int | None = None) -> ExperimentConfig:
    for cfg in experiment_catalog():
        if cfg.id == exp_id:
            return cfg if seed is None else replace(cfg, seed=seed)
    raise ConfigError(f"no catalog experiment {exp_id}; valid ids are 1..7")


@dataclass
class MsdTrace:
    """Run-averaged learning curve of one algorithm in one experiment.

    ``msd_lin_sim`` averages squared deviations over the runs that never
    diverged; diverged runs only show up in ``divergence_count``.
    """

    algorithm: str
    msd_lin_sim: np.ndarray
    mu_mean: np.ndarray
    e2_mean: np.ndarray
    divergence_count: int
    runs: int
    msd_lin_theory: np.ndarray | None = None
    mu_theory: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return len(self.msd_lin_sim)

    @property
    def msd_db_sim(self) -> np.ndarray:
        return to_db(self.msd_lin_sim)

    @property
    def msd_db_theory(self) -> np.ndarray | None:
        return None if self.msd_lin_theory is None else to_db(self.msd_lin_theory)

    @property
    def all_diverged(self) -> bool:
        return self.divergence_count >= self.runs

    @property
    def steady_state(self) -> float:
        return steady_state_msd(self)


def steady_state_msd(trace, window_fraction: float = 0.1) -> float:
    """Mean of the final ``window_fraction`` of a dB learning curve."""
    db = trace.msd_db_sim if isinstance(trace, MsdTrace) else np.asarray(trace, dtype=float)
    if db.size == 0:
        raise ValueError("empty trace")
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must lie in (0, 1]")
    k = max(1, int(round(window_fraction * db.size)))
    return float(np.mean(db[-k:]))


def theory_error(trace: MsdTrace):
    """``|simulated - theoretical|`` linear MSD per iteration, and the same in dB."""
    if trace.msd_lin_theory is None:
        raise ValueError(f"{trace.algorithm} trace has no theoretical curve")
    err = np.abs(trace.msd_lin_sim - trace.msd_lin_theory)
    return err, to_db(err)


def theory_trace(L: int, msd0: float, sigma_x_sq: float, moments: MomentSet, iterations: int,
                 clamp_to_stability: bool = True, mu_override: float | None = None):
    """Deterministic OPLMF learning curve from the full cubic MSD recursion.

    Returns ``(msd, mu)`` where ``msd[n]`` is the model MSD after ``n + 1``
    updates and ``mu[n]`` the step used in update ``n``.
    """
    bound = np.inf
    if clamp_to_stability and moments.m4 > 0 and sigma_x_sq > 0:
        bound = float(stability_bound(L, sigma_x_sq, moments))
    msd = np.empty(iterations)
    mus = np.empty(iterations)
    m = float(msd0)
    for n in range(iterations):
        if mu_override is None:
            mu = min(float(optimal_step(m, sigma_x_sq, moments, L)), bound)
        else:
            mu = float(mu_override)
        m = float(propagate_msd(m, sigma_x_sq, mu, moments, L))
        msd[n] = m
        mus[n] = mu
    return msd, mus


@dataclass
class _Realization:
    windows: np.ndarray  # (runs, N, L), newest sample first
    desired: np.ndarray  # (runs, N)
    reference: np.ndarray  # (runs, N, L) or (L,)


def _realize(cfg: ExperimentConfig) -> _Realization:
    L, N, R = cfg.length, cfg.iterations, cfg.runs
    spec = cfg.noise_spec()
    w_base = np.asarray(cfg.system.w_base)
    windows = np.empty((R, N, L))
    desired = np.empty((R, N))
    traj = np.empty((R, N, L)) if cfg.system.time_varying else None
    for r, ss in enumerate(np.random.SeedSequence(cfg.seed).spawn(R)):
        rng = np.random.default_rng(ss)
        x = cfg.input.generate(rng, N)
        rho = nz.sample(spec, rng, N)
        padded = np.concatenate([np.zeros(L - 1), x])
        win = np.lib.stride_tricks.sliding_window_view(padded, L)[:, ::-1]
        w_o = cfg.system.trajectory(rng, N)
        if w_o is None:
            desired[r] = win @ w_base + rho
        else:
            desired[r] = np.einsum("nl,nl->n", win, w_o) + rho
            traj[r] = w_o
        windows[r] = win
    if traj is None or not cfg.system.cumulative:
        reference = w_base
    else:
        reference = traj
    return _Realization(windows, desired, reference)


def _make_filter(alg, state: FilterState, moments: MomentSet):
    if isinstance(alg, OplmfConfig):
        return OplmfFilter(alg, moments, state)
    if isinstance(alg, NlmfConfig):
        return NlmfFilter(state, alg)
    if isinstance(alg, VsslmfqConfig):
        return VsslmfqFilter(state, alg)
    if isinstance(alg, LmfConfig):
        return LmfFilter(state, alg)
    raise ConfigError(f"unsupported algorithm {alg!r}")


def _simulate(alg, cfg: ExperimentConfig, real: _Realization, moments: MomentSet) -> MsdTrace:
    R, N, L = real.windows.shape
    state = FilterState.zeros(L, R)
    flt = _make_filter(alg, state, moments)
    per_run_ref = real.reference.ndim == 3
    sq = np.empty((N, R))
    mus = np.empty((N, R))
    e2 = np.empty((N, R))
    for n in range(N):
        state.window = real.windows[:, n]
        ref = real.reference[:, n] if per_run_ref else real.reference
        if isinstance(flt, OplmfFilter):
            diag = flt.step(real.desired[:, n], ref)
            mu, e = diag.mu, diag.error
        else:
            mu, e = flt.step(real.desired[:, n])
        dev = ref - state.weights
        sq[n] = np.einsum("rl,rl->r", dev, dev)
        mus[n] = mu
        e2[n] = e * e
    ok = ~state.diverged
    n_div = int(np.count_nonzero(state.diverged))
    if n_div:
        log.info("%s: %d of %d runs diverged", alg.name, n_div, R)
    if ok.any():
        msd = sq[:, ok].mean(axis=1)
        mu_mean = mus[:, ok].mean(axis=1)
        e2_mean = e2[:, ok].mean(axis=1)
    else:
        msd = mu_mean = e2_mean = np.full(N, np.nan)
    return MsdTrace(alg.name, msd, mu_mean, e2_mean, n_div, R)


def run_experiment(cfg: ExperimentConfig) -> dict[str, MsdTrace]:
    """Monte Carlo learning curves for every algorithm in ``cfg``.

    All algorithms see the same input, noise and system realizations; run
    ``r`` draws from the ``r``-th child of ``SeedSequence(cfg.seed)``.
    """
    for alg in cfg.algorithms:
        if not isinstance(alg, tuple(ALGORITHM_TYPES.values())):
            raise ConfigError(f"unknown algorithm {alg!r}")
    moments = cfg.moments()
    real = _realize(cfg)
    out = {}
    for alg in cfg.algorithms:
        trace = _simulate(alg, cfg, real, moments)
        if isinstance(alg, OplmfConfig):
            msd0 = float(np.sum(np.square(cfg.system.w_base)))
            trace.msd_lin_theory, trace.mu_theory = theory_trace(
                cfg.length, msd0, cfg.input.power, moments, cfg.iterations,
                clamp_to_stability=alg.clamp_to_stability,
            )
        out[alg.name] = trace
    return out


CSV_COLUMNS = ("iteration", "algorithm", "msd_db_sim", "msd_db_theory", "msd_error", "mu_mean")


def _fmt(v) -> str:
    v = float(v)
    return "" if np.isnan(v) else f"{v:.12g}"


def traces_to_csv(traces: dict[str, MsdTrace]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for name, tr in traces.items():
        sim_db = tr.msd_db_sim
        th_db = tr.msd_db_theory
        err = theory_error(tr)[0] if tr.msd_lin_theory is not None else None
        for n in range(tr.iterations):
            w.writerow([
                n + 1,
                name,
                _fmt(sim_db[n]),
                "" if th_db is None else _fmt(th_db[n]),
                "" if err is None else _fmt(err[n]),
                _fmt(tr.mu_mean[n]),
            ])
    return buf.getvalue()


def write_traces_csv(traces: dict[str, MsdTrace], path) -> Path:
    path = Path(path)
    path.write_text(traces_to_csv(traces))
    return path


def summary_rows(cfg: ExperimentConfig, traces: dict[str, MsdTrace]):
    """``(algorithm, measured dB or None, reported dB or None, divergence count)`` rows."""
    reported = REPORTED_MSD_DB.get(cfg.id, {}) if cfg.id is not None else {}
    rows = []
    for name, tr in traces.items():
        measured = None if tr.all_diverged else tr.steady_state
        rows.append((name, measured, reported.get(name), tr.divergence_count))
    return rows


def format_summary(cfg: ExperimentConfig, traces: dict[str, MsdTrace]) -> str:
    title = f"Experiment {cfg.id}" if cfg.id is not None else "Custom experiment"
    if cfg.description:
        title += f": {cfg.description}"
    if cfg.snr_db is not None:
        title += f" (SNR={cfg.snr_db:g} dB)"
    lines = [title, f"{'algorithm':<10}{'MSD/dB':>12}{'reported':>12}{'delta':>10}{'diverged':>10}"]
    for name, measured, ref, n_div in summary_rows(cfg, traces):
        m = "divergence" if measured is None else f"{measured:.2f}"
        p = "" if cfg.id is None or name not in REPORTED_MSD_DB.get(cfg.id, {}) else (
            "divergence" if ref is None else f"{ref:.2f}")
        delta = f"{measured - ref:+.2f}" if measured is not None and ref is not None else ""
        lines.append(f"{name:<10}{m:>12}{p:>12}{delta:>10}{n_div:>10d}")
    return "\n".join(lines)
