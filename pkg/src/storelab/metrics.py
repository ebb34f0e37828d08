"""Hindsight oracles, competitive ratio, regret, and bound-violation probability.

The offline oracle reuses the DP machinery with the realized price as a
single atom per slot, so its cost is exact whenever demands, capacity, and
the initial fill are multiples of the grid step.  The brute-force oracle
enumerates purchase lattices on tiny instances and exists only to validate
the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimation import EstimationError, estimate
from .model import Instance, Trajectory, feasible_purchase_range, simulate
from .policies import Policy, argmin_purchase, backward_step, storage_grid, threshold_policy
from .prices import resample
from .seeds import stream

METRIC_HEADER = "round,n,policy_id,alg_cost,opt_cost,cr,cr_bound,violated,regret,theta_hat,seed"


@dataclass(frozen=True)
class MetricRow:
    """One experiment record, matching the documented CSV schema."""

    round: int
    n: int
    policy_id: str
    alg_cost: float
    opt_cost: float
    cr: float
    cr_bound: float
    violated: bool
    regret: float
    theta_hat: float
    seed: int

    def to_csv_line(self) -> str:
        return (
            f"{self.round},{self.n},{self.policy_id},{self.alg_cost!r},"
            f"{self.opt_cost!r},{self.cr!r},{self.cr_bound!r},{int(self.violated)},"
            f"{self.regret!r},{self.theta_hat!r},{self.seed}"
        )


def write_metric_rows(path, rows) -> None:
    rows = sorted(rows, key=lambda r: (r.n, r.round, r.policy_id))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(METRIC_HEADER + "\n")
        for row in rows:
            fh.write(row.to_csv_line() + "\n")


class _HindsightGreedy(Policy):
    """Greedy forward pass against per-slot value tables built from known prices."""

    policy_id = "offline"

    def __init__(self, grid: np.ndarray, values: np.ndarray) -> None:
        self.grid = grid
        self.values = values

    def decide(self, t, level, price, instance):
        return argmin_purchase(
            self.grid, self.values[t + 1], instance.storage, level,
            float(instance.demand[t]), price,
        )


def offline_optimal(instance: Instance, prices, grid_size: int = 100) -> Trajectory:
    """Hindsight-optimal trajectory by deterministic backward DP on a grid."""
    prices = np.asarray(prices, dtype=float)
    T = instance.horizon
    if prices.size < T:
        raise ValueError(f"need at least {T} prices, got {prices.size}")
    spec = instance.storage
    grid = storage_grid(spec.capacity, grid_size)
    values = np.zeros((T + 1, grid.size))
    one = np.ones(1)
    for t in range(T - 1, -1, -1):
        values[t] = backward_step(
            grid, values[t + 1], float(instance.demand[t]), spec,
            np.asarray([float(prices[t])]), one,
        )
    return simulate(instance, prices, _HindsightGreedy(grid, values))


def brute_force_optimal(instance: Instance, prices, q_step: float) -> float:
    """Exact minimum cost over purchase sequences on the q_step lattice.

    Exponential enumeration; guarded to T <= 6 and at most 12 lattice steps
    per slot.  Used solely to validate offline_optimal and dp_policy.
    """
    prices = np.asarray(prices, dtype=float)
    T = instance.horizon
    if T > 6:
        raise ValueError(f"brute force limited to T <= 6, got {T}")
    if q_step <= 0:
        raise ValueError("q_step must be > 0")
    spec = instance.storage
    q_cap = float(np.max(instance.demand)) + min(spec.capacity, spec.charge_limit)
    if q_cap / q_step > 12 + 1e-9:
        raise ValueError(
            f"lattice too fine: q_max/q_step = {q_cap / q_step:.1f} exceeds 12"
        )

    demand = instance.demand
    memo: dict[tuple[int, float], float] = {}

    def best(t: int, level: float) -> float:
        if t == T:
            return 0.0
        key = (t, round(level, 9))
        hit = memo.get(key)
        if hit is not None:
            return hit
        q_lo, q_hi = feasible_purchase_range(spec, level, float(demand[t]))
        k_lo = math.ceil((q_lo - 1e-9) / q_step)
        k_hi = math.floor((q_hi + 1e-9) / q_step)
        out = math.inf
        for k in range(max(k_lo, 0), k_hi + 1):
            q = k * q_step
            cost = prices[t] * q + best(t + 1, level + q - float(demand[t]))
            if cost < out:
                out = cost
        memo[key] = out
        return out

    result = best(0, spec.initial_level)
    if not math.isfinite(result):
        raise ValueError("no feasible purchase sequence on the given lattice")
    return result


def competitive_ratio(alg_cost: float, opt_cost: float) -> float:
    """Online cost divided by hindsight-optimal cost on the same prices."""
    if opt_cost <= 0:
        raise ValueError(f"competitive ratio undefined for opt_cost={opt_cost}")
    return alg_cost / opt_cost


@dataclass(frozen=True)
class RegretReport:
    """Mean paired cost difference with its standard error."""

    mean: float
    stderr: float
    diffs: np.ndarray


def regret(alg_costs, opt_costs) -> RegretReport:
    """Mean(alg) - mean(opt) over cost pairs sharing random seeds."""
    alg = np.asarray(alg_costs, dtype=float)
    opt = np.asarray(opt_costs, dtype=float)
    if alg.shape != opt.shape or alg.ndim != 1 or alg.size < 1:
        raise ValueError("cost vectors must be equal-length, one-dimensional, nonempty")
    diffs = alg - opt
    stderr = float(diffs.std(ddof=1) / math.sqrt(diffs.size)) if diffs.size > 1 else math.nan
    return RegretReport(mean=float(diffs.mean()), stderr=stderr, diffs=diffs)


@dataclass(frozen=True)
class ViolationReport:
    """Bound-violation frequency for one sample size."""

    n: int
    rounds: int
    violations: int
    failures: int
    p_hat: float
    stderr: float
    rows: tuple[MetricRow, ...] = field(repr=False, default=())


def _violation_round(
    history,
    n: int,
    round_idx: int,
    *,
    instance: Instance,
    eval_model,
    eval_episodes: int,
    seed: int,
    resample_mode: str,
    alpha: float,
    conservative: bool,
    clamp_nonpositive_lower: bool,
    verdict: str,
    grid_size: int,
    clamp_eval_to_bounds: bool,
    eval_source: str,
) -> MetricRow:
    # held-out evaluation splits the history: the first n records form the
    # estimation pool, the suffix provides the evaluation windows
    pool = history[:n] if eval_source == "held-out" else history
    sample = resample(pool, n, stream(seed, 0, round_idx), mode=resample_mode)
    report = estimate(
        sample, alpha,
        conservative=conservative,
        clamp_nonpositive_lower=clamp_nonpositive_lower,
    )
    policy = threshold_policy(report.threshold)
    bound = report.ratio_bound
    T = instance.horizon
    alg_costs = np.empty(eval_episodes)
    opt_costs = np.empty(eval_episodes)
    crs = np.empty(eval_episodes)
    held_out = history[n:] if eval_source == "held-out" else None
    for e in range(eval_episodes):
        rng = stream(seed, 1, round_idx, e)
        if held_out is not None:
            if held_out.size < T:
                raise ValueError(
                    f"held-out history too short: {held_out.size} < horizon {T}"
                )
            start = int(rng.integers(0, held_out.size - T + 1))
            prices = np.asarray(held_out[start : start + T], dtype=float)
        else:
            prices = eval_model.draw(rng, T)
        if clamp_eval_to_bounds:
            prices = np.clip(prices, report.lower_bound, report.upper_bound)
        alg = simulate(instance, prices, policy).total_cost
        opt = offline_optimal(instance, prices, grid_size).total_cost
        alg_costs[e] = alg
        opt_costs[e] = opt
        crs[e] = competitive_ratio(alg, opt)
    round_cr = float(crs.max() if verdict == "any" else crs.mean())
    return MetricRow(
        round=round_idx,
        n=n,
        policy_id="threshold",
        alg_cost=float(alg_costs.mean()),
        opt_cost=float(opt_costs.mean()),
        cr=round_cr,
        cr_bound=bound,
        violated=bool(round_cr > bound),
        regret=float((alg_costs - opt_costs).mean()),
        theta_hat=report.threshold,
        seed=seed,
    )


def violation_rounds(history, n: int, round_indices, **kwargs) -> tuple[list[MetricRow], int]:
    """Run a batch of violation rounds; returns (rows, failure count).

    Each round is seeded by its own index, so any partition of the round
    indices across workers reproduces the same rows.
    """
    history = np.asarray(history, dtype=float)
    rows: list[MetricRow] = []
    failures = 0
    for r in round_indices:
        try:
            rows.append(_violation_round(history, n, r, **kwargs))
        except EstimationError:
            failures += 1
    return rows, failures


def bound_violation_probability(
    history,
    n: int,
    *,
    instance: Instance,
    eval_model,
    rounds: int,
    eval_episodes: int,
    seed: int,
    resample_mode: str = "with-replacement",
    alpha: float = 0.05,
    conservative: bool = False,
    clamp_nonpositive_lower: bool = False,
    verdict: str = "mean",
    grid_size: int = 100,
    clamp_eval_to_bounds: bool = False,
    eval_source: str = "model",
) -> ViolationReport:
    """Frequency of rounds whose competitive ratio exceeds its estimated bound.

    Each round draws a size-n sample from the history, estimates the
    threshold and the ratio bound, runs the threshold policy on fresh
    evaluation series (never on the estimation sample), and compares the
    round's competitive ratio (mean over episodes, or worst episode with
    verdict="any") against the bound.  Rounds whose estimation fails are
    counted in ``failures``, not dropped.
    """
    if n < 2:
        raise ValueError(f"sample size must be >= 2, got {n}")
    if rounds < 1 or eval_episodes < 1:
        raise ValueError("rounds and eval_episodes must be >= 1")
    if verdict not in ("mean", "any"):
        raise ValueError(f"verdict must be 'mean' or 'any', got {verdict!r}")
    if eval_source not in ("model", "held-out"):
        raise ValueError(f"eval_source must be 'model' or 'held-out', got {eval_source!r}")
    rows, failures = violation_rounds(
        history, n, range(rounds),
        instance=instance, eval_model=eval_model,
        eval_episodes=eval_episodes, seed=seed,
        resample_mode=resample_mode, alpha=alpha,
        conservative=conservative,
        clamp_nonpositive_lower=clamp_nonpositive_lower,
        verdict=verdict, grid_size=grid_size,
        clamp_eval_to_bounds=clamp_eval_to_bounds,
        eval_source=eval_source,
    )
    return assemble_violation_report(n, rounds, rows, failures)


def assemble_violation_report(
    n: int, rounds: int, rows, failures: int
) -> ViolationReport:
    """Combine per-round rows into a ViolationReport, order-independently."""
    rows = tuple(sorted(rows, key=lambda r: r.round))
    violations = sum(int(r.violated) for r in rows)
    p_hat = violations / rounds
    stderr = math.sqrt(p_hat * (1.0 - p_hat) / rounds)
    return ViolationReport(
        n=n, rounds=rounds, violations=violations, failures=failures,
        p_hat=p_hat, stderr=stderr, rows=rows,
    )
