"""Optimal step-size least-mean-fourth adaptive filtering."""
from .core import (
    DivergenceError,
    FilterState,
    LengthMismatchError,
    error,
    lmf_update,
    msd_db,
    predict,
)
from .engine import (
    DegenerateInputError,
    MomentSet,
    MsdModel,
    OplmfConfig,
    OplmfFilter,
    PowerEstimate,
    emse,
    f_factor,
    fastest_convergence_step,
    oplmf_step,
    optimal_step,
    propagate_msd,
    stability_bound,
    update_power,
)
from .baselines import LmfConfig, NlmfConfig, VsslmfqConfig, nlmf_update, vsslmfq_update
from .noise import NoiseSpec, moments, sample, scale_for_snr
from .harness import (
    ConfigError,
    ExperimentConfig,
    InputModel,
    MsdTrace,
    SystemModel,
    experiment_catalog,
    run_experiment,
    steady_state_msd,
    theory_error,
    theory_trace,
)

__version__ = "0.1.0"
