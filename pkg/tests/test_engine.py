import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from oplmf import noise as nz
from oplmf.core import FilterState, squared_deviation
from oplmf.engine import (
    DegenerateInputError,
    MomentSet,
    MsdModel,
    OplmfConfig,
    OplmfFilter,
    PowerEstimate,
    emse,
    f_factor,
    fastest_convergence_step,
    one_step_msd,
    oplmf_step,
    optimal_msd_update,
    optimal_step,
    propagate_msd,
    propagate_msd_truncated,
    stability_bound,
    t_term,
    update_power,
)

GAUSS = MomentSet(1.0, 3.0, 15.0)
BINARY = MomentSet(1.0, 1.0, 1.0)
W_O = np.array([0.8, 0.2, -0.7, 0.2, 0.1])


@st.composite
def noise_moments(draw):
    fam = draw(st.sampled_from(nz.FAMILIES))
    scale = draw(st.floats(0.05, 5.0))
    centered = draw(st.booleans())
    return nz.moments(nz.NoiseSpec(fam, scale, centered))


class TestMomentSet:
    def test_rejects_jensen_violation(self):
        with pytest.raises(ValueError):
            MomentSet(2.0, 3.0, 10.0)

    @pytest.mark.parametrize("bad", [(-1, 1, 1), (1, np.inf, 1), (1, 1, np.nan)])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            MomentSet(*bad)


class TestPowerEstimate:
    def test_zero_input_decays(self):
        est = PowerEstimate(5, 0.98, 2.0)
        update_power(est, np.zeros(5))
        assert est.sigma_x_sq == pytest.approx(0.98 * 2.0)

    def test_hand_value(self):
        est = PowerEstimate(5, 0.98, 1.0)
        update_power(est, np.array([1.0, 1.0, 1.0, 1.0, 1.0]))
        assert est.sigma_x_sq == pytest.approx(1.08)
        assert est.per_tap == pytest.approx(1.08 / 5)

    def test_long_run_white(self, rng):
        est = PowerEstimate(5, 0.98)
        x = rng.normal(size=100_000 + 4)
        vals = np.empty(100_000)
        for n in range(100_000):
            update_power(est, x[n:n + 5])
            vals[n] = est.sigma_x_sq
        assert vals[1000:].mean() == pytest.approx(5.0, rel=0.02)
        assert est.per_tap == pytest.approx(1.0, rel=0.2)

    def test_debiased_start(self):
        est = PowerEstimate(2, 0.9)
        update_power(est, np.array([1.0, 1.0]))
        assert est.sigma_x_sq == pytest.approx(0.2)
        assert est.per_tap == pytest.approx(1.0)

    @pytest.mark.parametrize("gamma", [0.5, 0.89, 1.0])
    def test_gamma_range(self, gamma):
        with pytest.raises(ValueError):
            PowerEstimate(5, gamma)

    def test_lower_gamma_edge_allowed(self):
        PowerEstimate(5, 0.9)


class TestFactors:
    def test_f_at_zero_step(self):
        assert f_factor(5, 0.0, 1.0, GAUSS) == 1.0

    def test_f_hand_value(self):
        # 1 + 315 mu^2 - 6 mu at mu = 1/105 is 34/35
        assert f_factor(5, 1 / 105, 1.0, GAUSS) == pytest.approx(34 / 35, rel=1e-14)
        assert f_factor(5, 1 / 105, 1.0, GAUSS) == pytest.approx(0.97146, abs=5e-5)

    def test_fastest_step_values(self):
        assert fastest_convergence_step(5, 1.0, GAUSS) == pytest.approx(1 / 105, rel=1e-15)
        assert fastest_convergence_step(5, 1.0, BINARY) == pytest.approx(1 / 35, rel=1e-15)

    def test_fastest_step_is_vertex(self):
        res = minimize_scalar(lambda m: f_factor(5, m, 1.0, GAUSS), bounds=(0, 0.1),
                              method="bounded", options={"xatol": 1e-14})
        assert res.x == pytest.approx(1 / 105, rel=1e-8)

    @given(st.floats(0.1, 10.0))
    def test_fastest_step_scaling(self, c):
        scaled = MomentSet(c * GAUSS.sigma_rho_sq, c**2 * GAUSS.m4, c**3 * GAUSS.m6)
        assert fastest_convergence_step(5, 1.0, scaled) == pytest.approx(
            fastest_convergence_step(5, 1.0, GAUSS) / c, rel=1e-12)

    @pytest.mark.parametrize("sx, m", [(0.0, GAUSS), (1.0, MomentSet(0.0, 0.0, 0.0))])
    def test_degenerate(self, sx, m):
        with pytest.raises(DegenerateInputError):
            fastest_convergence_step(5, sx, m)
        with pytest.raises(DegenerateInputError):
            stability_bound(5, sx, m)

    def test_stability_bound_values(self):
        assert stability_bound(5, 1.0, GAUSS) == pytest.approx(1 / 105)
        assert stability_bound(5, 2.0, GAUSS) == pytest.approx(1 / 210)

    @given(noise_moments(), st.floats(0.1, 10.0), st.integers(1, 32))
    def test_contraction_inside_bound(self, m, sx, L):
        assume(m.sigma_rho_sq > 1e-6)
        bound = stability_bound(L, sx, m)
        mus = np.linspace(0, bound, 1001)[1:-1]
        assert np.all(np.abs(f_factor(L, mus, sx, m)) < 1)


class TestOptimalStep:
    def test_zero_msd(self):
        assert optimal_step(0.0, 1.0, GAUSS, 5) == 0.0

    def test_hand_value(self):
        assert optimal_step(1.0, 1.0, GAUSS, 5) == pytest.approx(6 / 960, rel=1e-14)

    def test_zero_power(self):
        assert optimal_step(1.0, 0.0, GAUSS, 5) == 0.0

    def test_negative_msd_rejected(self):
        with pytest.raises(ValueError):
            optimal_step(-1.0, 1.0, GAUSS, 5)

    @settings(max_examples=200)
    @given(noise_moments(), st.floats(1e-4, 20.0), st.floats(0.05, 10.0), st.integers(1, 16))
    def test_is_argmin_of_one_step_map(self, m, msd, sx, L):
        # The one-step map is a quadratic in mu; recover it from three samples.
        mu = optimal_step(msd, sx, m, L)
        probe = np.array([0.0, 1.0, 2.0]) * mu
        vals = [one_step_msd(msd, sx, u, m, L) for u in probe]
        c2, c1, _ = np.polyfit(probe / mu, vals, 2)
        assert mu * (-c1 / (2 * c2)) == pytest.approx(mu, rel=1e-6)

    def test_dense_grid(self):
        mu = optimal_step(1.0, 1.0, GAUSS, 5)
        grid = np.arange(0.0, 2e-2, 1e-6)
        best = grid[np.argmin(one_step_msd(1.0, 1.0, grid, GAUSS, 5))]
        assert abs(best - mu) <= 1e-6

    @given(noise_moments(), st.floats(0.0, 20.0), st.floats(0.05, 10.0), st.integers(1, 16))
    def test_closed_form_update_matches(self, m, msd, sx, L):
        mu = optimal_step(msd, sx, m, L)
        np.testing.assert_allclose(optimal_msd_update(msd, sx, m, L),
                                   propagate_msd_truncated(msd, sx, mu, m, L),
                                   rtol=1e-9, atol=1e-14)

    def test_full_map_minimum(self):
        # M - 9 sx q^2 / den at the vertex, with q = M (s2 + sx M): 1 - 9*4/960
        mu = optimal_step(1.0, 1.0, GAUSS, 5)
        assert one_step_msd(1.0, 1.0, mu, GAUSS, 5) == pytest.approx(1 - 36 / 960, rel=1e-13)

    @given(noise_moments(), st.floats(0.0, 100.0), st.floats(0.0, 10.0))
    def test_non_negative(self, m, msd, sx):
        assert optimal_step(msd, sx, m, 5) >= 0

    def test_vectorized(self):
        out = optimal_step(np.array([0.0, 1.0]), np.array([1.0, 1.0]), GAUSS, 5)
        np.testing.assert_allclose(out, [0.0, 0.00625])


class TestPropagation:
    def test_absorbing_zero(self):
        assert propagate_msd(0.0, 1.0, 0.0, GAUSS, 5) == 0.0

    def test_noise_drive_only(self):
        mu = 0.003
        assert propagate_msd(0.0, 1.0, mu, GAUSS, 5) == pytest.approx(t_term(5, mu, 1.0, GAUSS))
        assert t_term(5, mu, 1.0, GAUSS) == pytest.approx(mu**2 * 5 * 15)

    def test_fixed_point(self):
        mu = optimal_step(0.0, 1.0, GAUSS, 5)
        assert propagate_msd(0.0, 1.0, mu, GAUSS, 5) == 0.0

    def test_clamped_at_zero(self, monkeypatch, caplog):
        import oplmf.engine as eng

        monkeypatch.setattr(eng, "one_step_msd", lambda *a: np.array([-1e-18, 0.5]))
        with caplog.at_level("DEBUG", logger="oplmf.engine"):
            out = eng.propagate_msd(np.array([1e-9, 1.0]), 1.0, 0.001, GAUSS, 5)
        np.testing.assert_array_equal(out, [0.0, 0.5])
        assert "clamped" in caplog.text

    def test_truncated_form(self):
        mu, msd = 0.002, 0.3
        expect = f_factor(5, mu, 1.0, GAUSS) * msd + t_term(5, mu, 1.0, GAUSS)
        assert propagate_msd_truncated(msd, 1.0, mu, GAUSS, 5) == pytest.approx(expect)

    def test_optimal_trajectory_decreases(self):
        m, msd = GAUSS, 5.0
        seq = []
        for _ in range(3000):
            mu = min(optimal_step(msd, 1.0, m, 5), stability_bound(5, 1.0, m))
            msd = propagate_msd(msd, 1.0, mu, m, 5)
            seq.append(msd)
        assert np.all(np.diff(seq) < 0)

    def test_model_rejects_negative(self):
        with pytest.raises(ValueError):
            MsdModel(-1.0, 5, GAUSS)


class TestEmse:
    def test_limit(self):
        assert emse(0.0, 1.0, 0.7) == 0.7

    def test_sum(self):
        assert emse(0.01, 1.0, 1.0) == pytest.approx(1.01)


class TestConfig:
    def test_bad_mode(self):
        with pytest.raises(ValueError):
            OplmfConfig(msd_mode="magic")

    def test_bad_init(self):
        with pytest.raises(ValueError):
            OplmfConfig(msd_mode="model", msd_init=0.0)


def _drive(engine, w_true, x, noise, oracle=True):
    mus = []
    for n in range(len(noise)):
        engine.state.push(x[..., n])
        d = engine.state.window @ w_true + noise[..., n]
        diag = engine.step(d, w_true if oracle else None)
        mus.append(diag.mu)
    return np.array(mus)


class TestFilter:
    def test_noiseless_at_solution_freezes(self, rng):
        state = FilterState(W_O.copy(), np.zeros(5))
        eng = OplmfFilter(OplmfConfig(), MomentSet(0, 0, 0), state)
        mus = _drive(eng, W_O, rng.normal(size=200), np.zeros(200))
        assert np.all(mus == 0)
        np.testing.assert_array_equal(state.weights, W_O)

    def test_clamp_safety(self, rng):
        m = nz.moments(nz.NoiseSpec("gaussian", 0.5))
        state = FilterState.zeros(5, runs=4)
        eng = OplmfFilter(OplmfConfig(), m, state)
        x = rng.normal(size=(4, 1000))
        for n in range(1000):
            state.push(x[:, n])
            d = state.window @ W_O + rng.normal(0, 0.5, 4)
            diag = eng.step(d, W_O)
            bound = stability_bound(5, diag.sigma_x_sq, m)
            assert np.all((diag.mu >= 0) & (diag.mu <= bound * (1 + 1e-12)))

    def test_converges(self, rng):
        m = nz.moments(nz.NoiseSpec("gaussian", 0.3))
        state = FilterState.zeros(5)
        eng = OplmfFilter(OplmfConfig(), m, state)
        _drive(eng, W_O, rng.normal(size=5000), rng.normal(0, 0.3, 5000))
        assert squared_deviation(W_O, state.weights) < 1e-2

    def test_oracle_needs_truth(self):
        eng = OplmfFilter(OplmfConfig(), GAUSS, FilterState.zeros(5))
        with pytest.raises(ValueError):
            eng.step(1.0)

    def test_model_mode_default_init(self):
        eng = OplmfFilter(OplmfConfig(msd_mode="model"), GAUSS, FilterState.zeros(5))
        assert eng.model.msd == pytest.approx(5.0)
        w = FilterState(np.ones(5) * 0.5, np.zeros(5))
        assert OplmfFilter(OplmfConfig(msd_mode="model"), GAUSS, w).model.msd == pytest.approx(1.25)

    def test_model_mode_runs_without_truth(self, rng):
        m = nz.moments(nz.NoiseSpec("gaussian", 0.3))
        eng = OplmfFilter(OplmfConfig(msd_mode="model", msd_init=float(W_O @ W_O)), m,
                          FilterState.zeros(5))
        mus = _drive(eng, W_O, rng.normal(size=2000), rng.normal(0, 0.3, 2000), oracle=False)
        assert mus[-100:].mean() < mus[:100].mean()
        assert squared_deviation(W_O, eng.state.weights) < 0.05

    def test_diagnostics_fields(self, rng):
        eng = OplmfFilter(OplmfConfig(), GAUSS, FilterState.zeros(5))
        eng.state.push(1.0)
        diag = eng.step(0.8, W_O)
        assert diag.iteration == 0
        assert diag.oracle_msd == pytest.approx(W_O @ W_O)
        assert diag.sigma_x_sq == pytest.approx(0.2)

    def test_functional_wrapper(self):
        state = FilterState.zeros(5)
        cfg = OplmfConfig()
        eng = OplmfFilter(cfg, GAUSS, state)
        state.push(1.0)
        out, diag = oplmf_step(state, cfg, eng, 0.8, W_O)
        assert out is state and state.iteration == 1
        with pytest.raises(ValueError):
            oplmf_step(FilterState.zeros(5), cfg, eng, 0.0, W_O)

    @pytest.mark.parametrize("family", nz.FAMILIES)
    def test_step_from_sampled_moments(self, family, mc_moments):
        exact = nz.moments(nz.NoiseSpec(family, 1.0))
        est = MomentSet(*mc_moments(family, 1.0))
        for msd in (1e-3, 0.1, 1.0):
            a = optimal_step(msd, 1.0, exact, 5)
            b = optimal_step(msd, 1.0, est, 5)
            assert b == pytest.approx(a, rel=0.02)
