"""
近似问题解析解测试
"""

import math

import numpy as np
import pytest

from optim import (
    DoseBounds,
    InfeasibleError,
    curative_fixed_n,
    curative_optimal,
    curative_value_approx,
    feasible_n_range_curative,
    log_f1_hat,
    palliative_fixed_n,
    palliative_n_bounds,
    palliative_optimal,
    palliative_total_approx,
    phi1,
    phi2,
    project_simplex_box,
)
from scheduler import capacity, parse_pattern

K2T = 90.0
SWEEP = ((150.0, "7/14d"), (100.0, "21/28d"), (75.0, "21/28d"), (50.0, "28/28d"))


class TestCurative:
    def test_feasible_range(self, bounds):
        rng = feasible_n_range_curative(bounds)
        assert (rng.first, rng.last) == (29, 57)
        assert list(rng.cap(40).values()) == list(range(29, 41))

    def test_optimal_capped_by_five_of_28(self, bounds, five_of_28):
        plan = curative_optimal(bounds, K2T, capacity(five_of_28, 210.0))
        assert plan.n == 40
        assert plan.dose == pytest.approx(143.75)
        assert plan.total == 5750.0

    def test_optimal_uncapped(self, bounds):
        plan = curative_optimal(bounds, K2T)
        assert plan.n == 57
        assert plan.dose == pytest.approx(100.88, abs=0.005)

    def test_fixed_n_window(self, bounds):
        with pytest.raises(InfeasibleError) as err:
            curative_fixed_n(bounds, 28, K2T)
        assert err.value.condition == "d_max"
        with pytest.raises(InfeasibleError) as err:
            curative_fixed_n(bounds, 58, K2T)
        assert err.value.condition == "d_min"

    def test_h1_failure(self):
        bounds = DoseBounds(d_min=130.0, d_max=200.0, cumulative_D=250.0)
        assert feasible_n_range_curative(bounds).is_empty
        with pytest.raises(InfeasibleError) as err:
            curative_optimal(bounds, K2T)
        assert err.value.condition == "H1"

    def test_capacity_failure(self, bounds):
        with pytest.raises(InfeasibleError) as err:
            curative_optimal(bounds, K2T, n_cap=10)
        assert err.value.condition == "capacity"

    def test_degenerate_bounds(self):
        bounds = DoseBounds(d_min=100.0, d_max=100.0, cumulative_D=100.0)
        rng = feasible_n_range_curative(bounds)
        assert (rng.first, rng.last) == (1, 1)
        assert curative_optimal(bounds, K2T).n == 1

    def test_exact_division_boundary(self):
        # D/d_min 恰为整数时不能因舍入丢掉该 N
        bounds = DoseBounds(d_min=0.1, d_max=0.3, cumulative_D=0.7)
        assert feasible_n_range_curative(bounds).last == 7

    @pytest.mark.parametrize("n", [2, 5, 10, 40])
    def test_equal_doses_dominate(self, n):
        bounds = DoseBounds(d_min=100.0, d_max=200.0, cumulative_D=150.0 * n)
        plan = curative_fixed_n(bounds, n, K2T)
        rng = np.random.default_rng(n)
        for _ in range(500):
            v = rng.uniform(50.0, 250.0, size=n)
            d = project_simplex_box(v, bounds.cumulative_D, 100.0, 200.0)
            assert log_f1_hat(K2T, d) <= plan.objective_log_f1_hat + 1e-10

    @pytest.mark.parametrize("d_min, label", SWEEP)
    def test_longest_treatment_is_optimal(self, d_min, label):
        bounds = DoseBounds(d_min=d_min, d_max=200.0, cumulative_D=5750.0)
        n_cap = capacity(parse_pattern(label), 210.0)
        best = curative_optimal(bounds, K2T, n_cap)
        values = {
            n: curative_fixed_n(bounds, n, K2T).objective_log_f1_hat
            for n in feasible_n_range_curative(bounds).cap(n_cap).values()
        }
        assert max(values, key=values.get) == best.n

    def test_sweep_values(self):
        expected = {150.0: (38, 151.32), 100.0: (57, 100.88), 75.0: (76, 75.66), 50.0: (115, 50.0)}
        for d_min, label in SWEEP:
            bounds = DoseBounds(d_min=d_min, d_max=200.0, cumulative_D=5750.0)
            plan = curative_optimal(bounds, K2T, capacity(parse_pattern(label), 210.0))
            n, dose = expected[d_min]
            assert plan.n == n
            assert plan.dose == pytest.approx(dose, abs=0.005)

    def test_value_approx(self):
        # D/d_min 为整数时近似式与最优值一致
        exact = curative_optimal(DoseBounds(d_min=50.0, d_max=200.0, cumulative_D=5750.0), K2T)
        assert curative_value_approx(50.0, 5750.0, K2T) == pytest.approx(
            exact.objective_log_f1_hat, rel=1e-12
        )
        values = [curative_value_approx(d, 5750.0, K2T) for d in (50.0, 75.0, 100.0, 150.0)]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestPhi:
    def test_phi1_increasing(self):
        xs = np.logspace(-3, 3, 200)
        values = [phi1(x) for x in xs]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert values[-1] < math.e

    def test_phi2_decreasing(self):
        xs = np.logspace(math.log10(2e-3), 3, 200)
        values = [phi2(x) for x in xs]
        assert all(b < a for a, b in zip(values, values[1:]))
        assert values[-1] > 1.0

    def test_known_values(self):
        assert phi1(1.0) == pytest.approx(2.0, rel=1e-15)
        assert phi2(1e8) == pytest.approx(1.0, rel=1e-7)

    def test_integer_monotonicity(self, target):
        n = np.arange(1, 10_001, dtype=float)
        curative = n * np.log1p(5750.0 / (n * K2T))
        palliative = n * K2T * np.expm1(target.t_r_tilde / n)
        assert np.all(np.diff(curative) > 0)
        assert np.all(np.diff(palliative) < 0)

    def test_domain(self):
        with pytest.raises(ValueError):
            phi1(0.0)
        with pytest.raises(ValueError):
            phi2(-1.0)


class TestPalliative:
    def test_n_bounds(self, target):
        bounds = DoseBounds(d_min=100.0, d_max=200.0)
        assert palliative_n_bounds(target.t_r_tilde, K2T, bounds) == (33, 52)

    @pytest.mark.parametrize(
        "n, dose, total",
        [(33, 196.18, 6473.84), (36, 169.88, 6115.59), (40, 143.73, 5749.24)],
    )
    def test_fixed_n(self, target, n, dose, total):
        bounds = DoseBounds(d_min=100.0, d_max=200.0)
        plan = palliative_fixed_n(target.t_r_tilde, K2T, n, bounds)
        assert plan.case_tag == "fixed_n"
        assert plan.dose == pytest.approx(dose, abs=0.005)
        assert plan.total == pytest.approx(total, abs=0.01)
        assert n * math.log1p(plan.dose / K2T) == pytest.approx(target.t_r_tilde, rel=1e-12)

    def test_fixed_n_window(self, target):
        bounds = DoseBounds(d_min=100.0, d_max=200.0)
        with pytest.raises(InfeasibleError) as err:
            palliative_fixed_n(target.t_r_tilde, K2T, 32, bounds)
        assert err.value.condition == "d_max"
        with pytest.raises(InfeasibleError) as err:
            palliative_fixed_n(target.t_r_tilde, K2T, 52, bounds)
        assert err.value.condition == "d_min"

    @pytest.mark.parametrize(
        "d_min, label, n, dose, total, case",
        [
            (150.0, "7/14d", 39, 150.00, 5850.00, "b"),
            (100.0, "21/28d", 51, 100.25, 5112.64, "a"),
            (75.0, "21/28d", 63, 75.00, 4725.00, "b"),
            (50.0, "28/28d", 86, 50.29, 4324.78, "a"),
        ],
    )
    def test_optimal_cases(self, target, d_min, label, n, dose, total, case):
        bounds = DoseBounds(d_min=d_min, d_max=200.0)
        n_cap = capacity(parse_pattern(label), 210.0)
        plan = palliative_optimal(target.t_r_tilde, K2T, bounds, n_cap)
        assert (plan.n, plan.case_tag) == (n, case)
        assert plan.dose == pytest.approx(dose, abs=0.005)
        assert plan.total == pytest.approx(total, abs=0.01)

    @pytest.mark.parametrize("d_min", [150.0, 100.0, 75.0, 50.0])
    def test_enumeration_confirms_selection(self, target, d_min):
        bounds = DoseBounds(d_min=d_min, d_max=200.0)
        n_min, n_max = palliative_n_bounds(target.t_r_tilde, K2T, bounds)
        totals = {
            n: palliative_fixed_n(target.t_r_tilde, K2T, n, bounds).total
            for n in range(n_min, n_max)
        }
        candidates = list(totals.values()) + [n_max * d_min]
        best = palliative_optimal(target.t_r_tilde, K2T, bounds)
        assert best.total == pytest.approx(min(candidates), rel=1e-14)

    @pytest.mark.parametrize("d_min", [100.0, 50.0])
    def test_case_a_bracket(self, target, d_min):
        bounds = DoseBounds(d_min=d_min, d_max=200.0)
        _, n_max = palliative_n_bounds(target.t_r_tilde, K2T, bounds)
        plan = palliative_optimal(target.t_r_tilde, K2T, bounds)
        assert plan.case_tag == "a"
        assert d_min <= plan.dose <= n_max / (n_max - 1) * d_min

    def test_capacity_below_n_max(self, target):
        bounds = DoseBounds(d_min=100.0, d_max=200.0)
        plan = palliative_optimal(target.t_r_tilde, K2T, bounds, n_cap=40)
        assert plan.n == 40
        assert plan.case_tag == "fixed_n"
        with pytest.raises(InfeasibleError) as err:
            palliative_optimal(target.t_r_tilde, K2T, bounds, n_cap=20)
        assert err.value.condition == "capacity"

    def test_empty_fixed_window(self, target):
        # d_min = d_max 时 N_min = N_max，只剩情形 b
        bounds = DoseBounds(d_min=200.0, d_max=200.0)
        n_min, n_max = palliative_n_bounds(target.t_r_tilde, K2T, bounds)
        assert n_min == n_max
        plan = palliative_optimal(target.t_r_tilde, K2T, bounds)
        assert (plan.n, plan.dose, plan.case_tag) == (n_max, 200.0, "b")

    def test_small_target_needs_one_dose(self):
        bounds = DoseBounds(d_min=100.0, d_max=200.0)
        assert palliative_n_bounds(1e-6, K2T, bounds)[0] == 1
        with pytest.raises(ValueError):
            palliative_n_bounds(0.0, K2T, bounds)

    def test_log_two_dose(self):
        bounds = DoseBounds(d_min=50.0, d_max=200.0)
        plan = palliative_fixed_n(10 * math.log(2.0), K2T, 10, bounds)
        assert plan.dose == pytest.approx(90.0, rel=1e-12)

    def test_trivial_threshold(self, run_cfg):
        # 阈值高于未治疗的 L(T)/θ
        target = run_cfg.with_overrides(l_star_rel=0.7).target()
        assert target.t_r_tilde < 0
        bounds = DoseBounds(d_min=100.0, d_max=200.0)
        plan = palliative_optimal(target.t_r_tilde, K2T, bounds)
        assert (plan.n, plan.dose, plan.case_tag) == (1, 100.0, "trivial")

    def test_total_approx(self, target):
        values = [palliative_total_approx(target.t_r_tilde, K2T, d) for d in (50.0, 75.0, 100.0, 150.0)]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert values[0] == pytest.approx(4324.78, rel=0.01)


class TestSensitivity:
    @pytest.mark.parametrize("d_min", [150.0, 100.0, 75.0, 50.0])
    def test_fixed_n_doses_stay_in_box(self, target, d_min):
        bounds = DoseBounds(d_min=d_min, d_max=200.0, cumulative_D=5750.0)
        rng = feasible_n_range_curative(bounds)
        for n in range(rng.first, rng.last + 1):
            plan = curative_fixed_n(bounds, n, K2T)
            assert d_min <= plan.dose <= 200.0
        n_min, n_max = palliative_n_bounds(target.t_r_tilde, K2T, bounds)
        for n in range(n_min, n_max):
            plan = palliative_fixed_n(target.t_r_tilde, K2T, n, bounds)
            assert d_min <= plan.dose <= 200.0

    def test_curative_optimum_improves_as_d_min_falls(self):
        plans = []
        for d_min, label in SWEEP:
            bounds = DoseBounds(d_min=d_min, d_max=200.0, cumulative_D=5750.0)
            plans.append(curative_optimal(bounds, K2T, capacity(parse_pattern(label), 210.0)))
        assert [p.n for p in plans] == [38, 57, 76, 115]
        values = [p.objective_log_f1_hat for p in plans]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_palliative_optimum_improves_as_d_min_falls(self, target):
        totals = []
        for d_min, label in SWEEP:
            bounds = DoseBounds(d_min=d_min, d_max=200.0)
            n_cap = capacity(parse_pattern(label), 210.0)
            totals.append(palliative_optimal(target.t_r_tilde, K2T, bounds, n_cap).total)
        assert all(b < a for a, b in zip(totals, totals[1:]))
        # 同一模式下也成立
        same = [
            palliative_optimal(target.t_r_tilde, K2T, DoseBounds(d_min=d, d_max=200.0)).total
            for d in (150.0, 125.0, 100.0, 75.0, 50.0)
        ]
        assert all(b < a for a, b in zip(same, same[1:]))
