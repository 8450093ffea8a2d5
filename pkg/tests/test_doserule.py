"""Tests for dose-rule extraction and value estimation."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from simsl.doserule import (
    DoseRuleEvaluation,
    argmax_dose,
    dose_grid,
    estimate_value_test,
    evaluate_rule,
    optimal_dose,
)
from simsl.errors import DimensionError, ParameterError
from simsl.model import fit_simsl
from simsl.penalized import Family
from simsl.simulation import ScenarioSpec, gen_scenario, optimal_rule, true_mean, true_value_scenario


class StubModel:
    """Exposes just what the dose rule needs: p, a_range and surface_grid."""

    def __init__(self, surface, p=1, a_range=(0.0, 2.0)):
        self.surface = surface
        self.p = p
        self.a_range = a_range

    def surface_grid(self, x, doses):
        return self.surface(np.asarray(x)[:, :1], np.asarray(doses)[None, :])


@pytest.fixture(scope="module")
def s1_fit():
    train = gen_scenario(ScenarioSpec(1, 800), np.random.SeedSequence([31, 0]))
    return fit_simsl(train.dataset)


@pytest.fixture(scope="module")
def s1_test():
    return gen_scenario(ScenarioSpec(1, 2000), np.random.SeedSequence([31, 1]))


class TestArgmax:
    def test_parabola_nearest_grid_point(self):
        grid = dose_grid((0.0, 2.0), 11)
        model = StubModel(lambda u, a: -((a - u) ** 2))
        np.testing.assert_allclose(optimal_dose(model, [[0.73]], grid), [0.8])
        np.testing.assert_allclose(optimal_dose(model, [[0.66]], grid), [0.6])

    def test_constant_surface_gives_smallest_dose(self):
        model = StubModel(lambda u, a: 0 * (u + a) + 3.0)
        np.testing.assert_array_equal(optimal_dose(model, np.zeros((4, 1))), np.zeros(4))

    def test_tie_ignores_grid_order(self):
        grid = np.array([2.0, 0.5, 1.0, 0.0])
        np.testing.assert_array_equal(argmax_dose(np.array([[1.0, 1.0, 0.0, 0.5]]), grid), [0.5])

    def test_supplied_grid_clipped_to_training_range(self):
        model = StubModel(lambda u, a: a, a_range=(0.2, 1.5))
        np.testing.assert_allclose(optimal_dose(model, [[0.0]], [-1.0, 0.5, 3.0]), [1.5])

    def test_default_grid_within_range(self, s1_fit, s1_test):
        doses = optimal_dose(s1_fit, s1_test.x_raw)
        lo, hi = s1_fit.a_range
        assert doses.min() >= lo and doses.max() <= hi
        assert np.isin(doses, dose_grid(s1_fit.a_range)).all()

    def test_errors(self, s1_fit):
        with pytest.raises(DimensionError):
            optimal_dose(s1_fit, np.zeros((2, 3)))
        with pytest.raises(ParameterError):
            optimal_dose(s1_fit, np.zeros((2, s1_fit.p)), [])
        with pytest.raises(ParameterError):
            dose_grid((0, 1), 0)

    @pytest.mark.parametrize("family", ["gaussian", "bernoulli", "poisson"])
    def test_invariant_under_inverse_link(self, s1_fit, s1_test, family):
        fam = Family(family)
        x = s1_test.x_raw[:300]
        base = optimal_dose(s1_fit, x)
        # scale keeps the transformed surface away from saturation in double precision
        link = StubModel(lambda u, a: fam.inverse_link(0.02 * s1_fit.surface_grid(x, a.ravel())), p=s1_fit.p, a_range=s1_fit.a_range)
        scaled = StubModel(lambda u, a: 0.02 * s1_fit.surface_grid(x, a.ravel()), p=s1_fit.p, a_range=s1_fit.a_range)
        np.testing.assert_array_equal(optimal_dose(scaled, x), base)
        np.testing.assert_array_equal(optimal_dose(link, x), base)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=30),
        st.floats(0.01, 100),
        st.floats(-100, 100),
    )
    def test_property_affine_and_monotone_invariance(self, values, c, d):
        values = np.round(np.array(values), 3)
        grid = np.linspace(0, 2, values.size)
        base = argmax_dose(values[None, :], grid)
        assert argmax_dose(c * values[None, :] + d, grid) == pytest.approx(base)
        assert argmax_dose(np.arctan(values[None, :] / 50), grid) == pytest.approx(base)
        assert argmax_dose(expit(values[None, :] / 10), grid) == pytest.approx(base)

    def test_grid_refinement_stability(self, s1_fit, s1_test):
        coarse = optimal_dose(s1_fit, s1_test.x_raw, grid_size=100)
        fine = optimal_dose(s1_fit, s1_test.x_raw, grid_size=199)
        spacing = np.ptp(s1_fit.a_range) / 99
        assert np.abs(coarse - fine).max() <= spacing * (1 + 1e-9)

    def test_scenario_one_rule_accuracy(self, s1_fit):
        test = gen_scenario(ScenarioSpec(1, 5000), np.random.SeedSequence([31, 2]))
        doses = optimal_dose(s1_fit, test.x_raw)
        assert np.mean(np.abs(doses - test.f_opt(test.x_raw))) <= 0.15


class TestEvaluateRule:
    def test_report_fields(self, s1_fit, s1_test):
        ev = evaluate_rule(s1_fit, s1_test.x_raw, scenario=1)
        assert isinstance(ev, DoseRuleEvaluation)
        assert ev.method == "oracle-scenario"
        assert ev.report() == {"value": ev.value, "method": "oracle-scenario", "n": 2000, "grid_size": 100}
        assert 7.0 < ev.value <= 8.2

    def test_without_scenario_value_is_nan(self, s1_fit, s1_test):
        assert np.isnan(evaluate_rule(s1_fit, s1_test.x_raw[:5]).value)


class TestOracleDominance:
    @pytest.mark.parametrize("scenario", [1, 2, 3, 4])
    def test_oracle_beats_alternatives(self, scenario):
        p = 30 if scenario == 1 else 10
        x = np.random.default_rng(scenario).uniform(-1, 1, (5000, p))
        rng = np.random.default_rng(100 + scenario)
        f_opt = optimal_rule(scenario, x)
        oracle = true_mean(scenario, x, f_opt)
        rules = [np.full(5000, c) for c in (0.0, 0.5, 1.0, 1.5, 2.0)] + [rng.uniform(0, 2, 5000)]
        for doses in rules:
            diff = oracle - true_mean(scenario, x, doses)
            mc_sd = diff.std(ddof=1) / np.sqrt(diff.size)
            assert true_value_scenario(f_opt, x, scenario) >= true_value_scenario(doses, x, scenario) - 2 * mc_sd


class TestEstimateValue:
    def test_identity_outcome(self):
        a = np.random.default_rng(20).uniform(0, 2, 1000)
        ev = estimate_value_test(a, a, a)
        assert ev.method == "smoother" and not ev.degenerate
        assert ev.value == pytest.approx(a.mean(), abs=1e-2)

    def test_pure_noise_matches_mean(self):
        rng = np.random.default_rng(21)
        n = 2000
        y, a, f = rng.normal(size=n), rng.uniform(0, 2, n), rng.uniform(0, 2, n)
        ev = estimate_value_test(y, a, f)
        assert abs(ev.value - y.mean()) <= 2 * y.std(ddof=1) / np.sqrt(n)

    def test_degenerate_rule_falls_back(self):
        rng = np.random.default_rng(22)
        a = rng.uniform(0, 2, 1500)
        y = -((a - 1.2) ** 2) + 0.1 * rng.normal(size=1500)
        ev = estimate_value_test(y, a, np.full(1500, 1.2))
        assert ev.degenerate
        assert ev.value == pytest.approx(0.0, abs=0.05)
        assert ev.report()["n"] == 1500

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            estimate_value_test(np.zeros(5), np.zeros(5), np.zeros(4))

    def test_agrees_with_oracle_on_scenario_one(self, s1_fit, s1_test):
        doses = optimal_dose(s1_fit, s1_test.x_raw)
        smooth = estimate_value_test(s1_test.dataset.y, s1_test.dataset.a, doses).value
        oracle = true_value_scenario(doses, s1_test.x_raw, 1)
        assert abs(smooth - oracle) <= 0.4
