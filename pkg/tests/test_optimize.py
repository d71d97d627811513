import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from cvbell.bell import CIRELSON, bell_expectation, bell_operator, correlation_tensor, spectral_bound
from cvbell.fock import make_space
from cvbell.optimize import (
    SearchOptions,
    SweepRow,
    bell_from_tensor,
    canonical_optimum,
    epr_limit,
    lexmin_optimal_settings,
    optimize_settings,
    tensor_bound,
    violation_curve,
    worker_count,
)
from cvbell.states import from_coefficients, nopa_state, nopa_state_auto, random_state


def brute_force_canonical_max(r, grid=20001):
    """Dense scan of 2(cos t + K sin t) over t in [0, pi/2]."""
    k = math.tanh(2 * r)
    t = np.linspace(0, math.pi / 2, grid)
    values = 2 * (np.cos(t) + k * np.sin(t))
    return float(values.max()), float(t[values.argmax()])


class TestCanonicalOptimum:
    def test_vacuum(self):
        report = canonical_optimum(0.0)
        assert report.value == 2.0 and report.settings.b.theta == 0.0

    def test_r_half(self):
        report = canonical_optimum(0.5)
        assert report.analytic_value == pytest.approx(2.513982, abs=1e-6)
        assert report.gap <= 1e-10

    def test_large_squeezing(self):
        assert canonical_optimum(5.0).analytic_value >= 2.828427 - 1e-7

    @pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 2.0])
    def test_closed_form_against_scan(self, r):
        best, argbest = brute_force_canonical_max(r)
        report = canonical_optimum(r)
        assert report.analytic_value == pytest.approx(best, abs=1e-8)
        assert report.settings.b.theta == pytest.approx(argbest, abs=2e-4)


class TestOptimizeSettings:
    def test_nopa_r1(self):
        report = optimize_settings(nopa_state_auto(1.0))
        assert report.value == pytest.approx(2 * math.sqrt(1 + math.tanh(2) ** 2), abs=1e-6)
        assert report.settings.b.theta == pytest.approx(math.atan(math.tanh(2)), abs=1e-5)
        assert report.value >= report.analytic_value - 1e-6

    def test_vacuum(self):
        report = optimize_settings(nopa_state(0.0, make_space(1)))
        assert report.value == pytest.approx(2.0, abs=1e-6)

    def test_qubit_bell_state(self):
        s = make_space(1)
        report = optimize_settings(from_coefficients([[0, 1], [1, 0]], s, s))
        assert report.value == pytest.approx(CIRELSON, abs=1e-6)

    def test_deterministic(self):
        a = optimize_settings(nopa_state_auto(0.7))
        b = optimize_settings(nopa_state_auto(0.7))
        assert a == b

    def test_settings_canonical_ranges(self):
        report = optimize_settings(nopa_state_auto(1.0))
        for theta, phi in zip(report.settings.angles()[0::2], report.settings.angles()[1::2]):
            assert 0 <= theta <= math.pi and 0 <= phi < 2 * math.pi

    @hsettings(max_examples=15)
    @given(st.integers(0, 2**32 - 1))
    def test_random_states_reach_tensor_bound(self, seed):
        s = make_space(2)
        state = random_state(np.random.default_rng(seed), s, s)
        report = optimize_settings(state)
        assert report.value == pytest.approx(tensor_bound(correlation_tensor(state)), abs=1e-6)
        # never above the spectrum of its own operator
        assert report.value <= spectral_bound(bell_operator(s, s, report.settings)) + 1e-10

    def test_search_without_canonical_shortcut(self):
        # a coarse grid still lands on the optimum through refinement
        report = optimize_settings(nopa_state_auto(0.5), SearchOptions(grid_points=5))
        assert report.search_value == pytest.approx(report.analytic_value, abs=1e-6)

    @pytest.mark.parametrize("kwargs", [{"grid_points": 1}, {"objective_tol": 0.0}, {"max_evaluations": 0}])
    def test_options_validated(self, kwargs):
        with pytest.raises(ValueError):
            SearchOptions(**kwargs)


class TestLexmin:
    @given(st.integers(0, 2**32 - 1))
    def test_attains_bound(self, seed):
        t = np.random.default_rng(seed).uniform(-1, 1, (3, 3))
        settings = lexmin_optimal_settings(t)
        assert bell_from_tensor(t, settings.angles()) == pytest.approx(tensor_bound(t), abs=1e-12)

    def test_degenerate_tensors(self):
        for t in (np.zeros((3, 3)), np.diag([1.0, 0, 0]), np.diag([0.5, 0.5, 0.5]), np.diag([1.0, -1.0, 1.0])):
            settings = lexmin_optimal_settings(t)
            assert bell_from_tensor(t, settings.angles()) == pytest.approx(tensor_bound(t), abs=1e-12)


class TestViolationCurve:
    def test_rows(self):
        rows = violation_curve([0, 0.5, 1, 2, 5])
        assert [r.r for r in rows] == [0, 0.5, 1, 2, 5]
        assert rows[0].K == 0 and rows[0].bell_max_analytic == 2
        assert rows[1].bell_max_analytic == pytest.approx(2.513982, abs=1e-6)
        assert abs(rows[-1].bell_max_numeric - CIRELSON) <= 1e-7
        maxima = [r.bell_max_analytic for r in rows]
        assert all(b > a for a, b in zip(maxima, maxima[1:]))
        for row in rows:
            assert 0 <= row.K < 1
            assert row.bell_max_analytic == pytest.approx(2 * math.sqrt(1 + row.K ** 2), abs=1e-15)
            assert abs(row.bell_max_numeric - row.bell_max_analytic) <= max(1e-10, 10 * row.tail_mass)

    def test_fields(self):
        assert SweepRow.FIELDS == ("r", "K", "theta_b_star", "bell_max_analytic", "bell_max_numeric",
                                   "pair_count", "tail_mass")

    def test_parallel_matches_serial(self):
        r_values = [1.5, 0.0, 0.3, 2.2]
        assert violation_curve(r_values, workers=1) == violation_curve(r_values, workers=3)

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv("WORKER_COUNT", "4")
        assert worker_count() == 4
        monkeypatch.setenv("WORKER_COUNT", "0")
        with pytest.raises(ValueError):
            worker_count()

    def test_negative_r(self):
        with pytest.raises(ValueError):
            violation_curve([0.5, -0.1])


def test_epr_limit_decay():
    points = epr_limit()
    deficits = [p.deficit for p in points]
    assert all(b < a for a, b in zip(deficits, deficits[1:]))
    # deficit ~ 2 sqrt 2 exp(-4r) to leading order; agreement tightens with r
    assert abs(points[-1].ratio - 1) < 1e-3
    assert abs(points[0].ratio - 1) < 0.05


def test_report_numeric_matches_expectation():
    state = nopa_state_auto(0.3)
    report = optimize_settings(state)
    assert report.value == bell_expectation(state, report.settings).value
