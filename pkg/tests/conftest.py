"""Shared fixtures: the full experiment catalog is simulated once per session."""
from __future__ import annotations

import numpy as np
import pytest

from oplmf.harness import experiment_catalog, run_experiment

W_BASE = np.array([0.8, 0.2, -0.7, 0.2, 0.1])

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def catalog_results():
    """``{id: (config, traces)}`` for all seven catalog experiments at full size."""
    return {cfg.id: (cfg, run_experiment(cfg)) for cfg in experiment_catalog()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


MC_SAMPLES = 10_000_000


def _mc_cache():
    import zlib
    from functools import lru_cache

    from oplmf import noise as nz

    @lru_cache(maxsize=None)
    def estimate(family: str, scale: float, centered: bool = False):
        spec = nz.NoiseSpec(family, scale, centered)
        seed = zlib.crc32(f"{family}:{scale!r}:{centered}".encode())
        return nz.monte_carlo_moments(spec, MC_SAMPLES, np.random.default_rng(seed))

    return estimate


@pytest.fixture(scope="session")
def mc_moments():
    """Cached 10^7-sample moment estimates ``(m2, m4, m6)`` keyed by family/scale."""
    return _mc_cache()
