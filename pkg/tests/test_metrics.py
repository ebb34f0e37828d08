import numpy as np
import pytest

from storelab import (
    Instance,
    MetricRow,
    Normal,
    StorageSpec,
    bound_violation_probability,
    brute_force_optimal,
    build_value_table,
    competitive_ratio,
    dp_policy,
    generate,
    offline_optimal,
    regret,
    simulate,
    threshold_policy,
)
from storelab.metrics import METRIC_HEADER, write_metric_rows

from conftest import random_aligned_instance


class TestOfflineOptimal:
    def test_constant_price_identity(self):
        inst = Instance.constant(5, 1.0, StorageSpec(2.0, initial_level=1.5))
        traj = offline_optimal(inst, np.full(5, 3.0), grid_size=20)
        assert traj.total_cost == pytest.approx(3.0 * (5.0 - 1.5), rel=1e-9)

    def test_buy_ahead_of_a_price_spike(self):
        inst = Instance(2, np.array([1.0, 1.0]), StorageSpec(1.0))
        traj = offline_optimal(inst, [1.0, 3.0], grid_size=4)
        assert traj.total_cost == pytest.approx(2.0, abs=1e-9)
        assert traj.purchases[0] == pytest.approx(2.0)

    def test_ascending_prices_match_brute_force(self):
        rng = np.random.default_rng(99)
        for _ in range(5):
            inst = random_aligned_instance(rng)
            prices = np.sort(rng.uniform(1.0, 10.0, inst.horizon))
            grid_size = max(2, round(inst.storage.capacity / 0.25))
            off = offline_optimal(inst, prices, grid_size).total_cost
            bf = brute_force_optimal(inst, prices, 0.25)
            assert off == pytest.approx(bf, abs=1e-9)

    def test_oracle_never_beaten_by_policies(self, reference_instance):
        rng = np.random.default_rng(5)
        table = build_value_table(reference_instance, Normal(10.0, 2.0), 100, 21)
        policies = [threshold_policy(8.0), dp_policy(table)]
        for _ in range(20):
            prices = rng.normal(10.0, 2.0, 24)
            opt = offline_optimal(reference_instance, prices, 100).total_cost
            for pol in policies:
                alg = simulate(reference_instance, prices, pol).total_cost
                assert alg >= opt - 1e-9
                assert competitive_ratio(alg, opt) >= 1.0 - 1e-9

    def test_short_price_series_rejected(self):
        inst = Instance.constant(3, 1.0, StorageSpec(1.0))
        with pytest.raises(ValueError):
            offline_optimal(inst, [1.0, 2.0])


class TestBruteForce:
    def test_single_slot(self):
        inst = Instance.constant(1, 1.0, StorageSpec(2.0, initial_level=0.5))
        assert brute_force_optimal(inst, [4.0], 0.25) == pytest.approx(2.0)

    def test_guards(self):
        with pytest.raises(ValueError):
            brute_force_optimal(Instance.constant(7, 1.0, StorageSpec(1.0)), np.ones(7), 0.5)
        with pytest.raises(ValueError):
            # 1 demand + capacity 2 over step 0.1 -> 30 lattice steps per slot
            brute_force_optimal(Instance.constant(2, 1.0, StorageSpec(2.0)), np.ones(2), 0.1)

    def test_agrees_with_offline_on_aligned_instances(self):
        rng = np.random.default_rng(123)
        for _ in range(40):
            inst = random_aligned_instance(rng)
            prices = rng.uniform(1.0, 10.0, inst.horizon)
            grid_size = max(2, round(inst.storage.capacity / 0.25))
            off = offline_optimal(inst, prices, grid_size).total_cost
            bf = brute_force_optimal(inst, prices, 0.25)
            assert off == pytest.approx(bf, abs=1e-7)

    def test_agrees_with_offline_under_rate_limits(self):
        # charge/discharge limits force the windowed candidate scan
        rng = np.random.default_rng(7001)
        step = 0.25
        checked = 0
        while checked < 40:
            T = int(rng.integers(1, 5))
            B = step * int(rng.integers(2, 7))
            s0 = step * int(rng.integers(0, round(B / step) + 1))
            chg = step * int(rng.integers(1, round(B / step) + 1))
            dis = step * int(rng.integers(1, round(B / step) + 1))
            demand = step * rng.integers(0, 5, size=T).astype(float)
            prices = rng.uniform(1.0, 10.0, T)
            if (demand.max() + min(B, chg)) / step > 12:
                continue
            inst = Instance(
                T, demand,
                StorageSpec(B, s0, max_charge_per_slot=chg, max_discharge_per_slot=dis),
            )
            off = offline_optimal(inst, prices, max(2, round(B / step))).total_cost
            bf = brute_force_optimal(inst, prices, step)
            assert off == pytest.approx(bf, abs=1e-7)
            checked += 1


class TestRatioAndRegret:
    def test_competitive_ratio_values(self):
        assert competitive_ratio(10.0, 10.0) == 1.0
        assert competitive_ratio(20.0, 10.0) == 2.0

    def test_zero_optimal_cost_is_an_error(self):
        with pytest.raises(ValueError):
            competitive_ratio(1.0, 0.0)

    def test_regret_identical_vectors(self):
        report = regret([5.0, 7.0], [5.0, 7.0])
        assert report.mean == 0.0

    def test_regret_arithmetic(self):
        report = regret([3.0, 5.0], [2.0, 4.0])
        assert report.mean == 1.0
        assert report.diffs.tolist() == [1.0, 1.0]
        assert report.stderr == 0.0

    def test_regret_length_mismatch(self):
        with pytest.raises(ValueError):
            regret([1.0], [1.0, 2.0])


class TestViolationProbability:
    def test_degenerate_constant_history(self):
        # storage-free instance: every policy must buy exactly the demand,
        # the bound collapses to 1 and nothing can violate it
        instance = Instance.constant(4, 1.0, StorageSpec(0.0))
        history = np.full(50, 7.0)
        report = bound_violation_probability(
            history, 10,
            instance=instance, eval_model=Normal(7.0, 1e-12),
            rounds=5, eval_episodes=2, seed=21,
            clamp_nonpositive_lower=True,
        )
        assert report.p_hat == 0.0
        assert report.failures == 0
        for row in report.rows:
            assert row.cr == pytest.approx(1.0, abs=1e-9)
            assert row.cr_bound == pytest.approx(1.0, abs=1e-9)
            assert row.theta_hat == pytest.approx(7.0)

    def test_bounded_prices_never_violate(self, reference_instance):
        # the guarantee setting: evaluation prices clamped into the round's
        # estimated [lower, upper] never push the ratio past sqrt(upper/lower)
        history = generate(Normal(10.0, 2.0), 5000, seed=31)
        report = bound_violation_probability(
            history, 1000,
            instance=reference_instance, eval_model=Normal(10.0, 2.0),
            rounds=100, eval_episodes=1, seed=32,
            clamp_nonpositive_lower=True, clamp_eval_to_bounds=True,
            verdict="any",
        )
        assert report.violations == 0
        assert report.failures == 0

    def test_fixed_seed_reproduces_violated_round_set(self, reference_instance):
        history = generate(Normal(10.0, 2.0), 2000, seed=41)
        kwargs = dict(
            instance=reference_instance, eval_model=Normal(10.0, 2.0),
            rounds=30, eval_episodes=2, seed=42, clamp_nonpositive_lower=True,
        )
        a = bound_violation_probability(history, 10, **kwargs)
        b = bound_violation_probability(history, 10, **kwargs)
        assert [r.violated for r in a.rows] == [r.violated for r in b.rows]
        assert a.p_hat == b.p_hat

    def test_failures_counted_not_dropped(self, reference_instance):
        # heavy-tailed history around zero makes nonpositive lower bounds common
        history = generate(Normal(0.0, 5.0), 2000, seed=51)
        report = bound_violation_probability(
            history, 5,
            instance=reference_instance, eval_model=Normal(10.0, 2.0),
            rounds=40, eval_episodes=1, seed=52,
            clamp_nonpositive_lower=False,
        )
        assert report.failures > 0
        assert len(report.rows) == report.rounds - report.failures

    def test_held_out_evaluation(self, reference_instance):
        history = generate(Normal(10.0, 2.0), 500, seed=61)
        report = bound_violation_probability(
            history, 100,
            instance=reference_instance, eval_model=Normal(10.0, 2.0),
            rounds=10, eval_episodes=2, seed=62,
            resample_mode="prefix", eval_source="held-out",
            clamp_nonpositive_lower=True,
        )
        assert report.rounds == 10
        # prefix estimation from the first 100 values is round-independent
        thetas = {r.theta_hat for r in report.rows}
        assert len(thetas) == 1

    def test_parameter_validation(self, reference_instance):
        history = np.arange(10.0) + 1.0
        with pytest.raises(ValueError):
            bound_violation_probability(
                history, 1, instance=reference_instance,
                eval_model=Normal(10, 2), rounds=1, eval_episodes=1, seed=0,
            )
        with pytest.raises(ValueError):
            bound_violation_probability(
                history, 5, instance=reference_instance,
                eval_model=Normal(10, 2), rounds=1, eval_episodes=1, seed=0,
                verdict="sometimes",
            )


class TestMetricRows:
    def test_csv_header_and_order(self, tmp_path):
        rows = [
            MetricRow(2, 10, "dp", 3.0, 2.0, 1.5, 2.0, False, 1.0, 8.0, 7),
            MetricRow(1, 10, "dp", 3.0, 2.0, 1.5, 2.0, True, 1.0, 8.0, 7),
        ]
        out = tmp_path / "rows.csv"
        write_metric_rows(out, rows)
        lines = out.read_text().splitlines()
        assert lines[0] == METRIC_HEADER
        assert lines[1].startswith("1,10,dp")
        assert lines[2].startswith("2,10,dp")
        assert ",1," in lines[1]  # violated flag serialized as 0/1
