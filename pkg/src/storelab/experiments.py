"""Experiment runners: estimation, violation curves, policy comparison,
adaptive convergence, and assumption relaxations.

Every Monte Carlo unit derives its RNG stream from (master seed, fixed
index path), so runs are reproducible and byte-identical for any worker
count; output rows are canonically ordered before writing.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    build_instance,
    build_model,
    load_history,
)
from .estimation import EstimateReport, RECORD_FIELDS, estimate, threshold_price
from .metrics import (
    MetricRow,
    ViolationReport,
    assemble_violation_report,
    competitive_ratio,
    offline_optimal,
    regret,
    violation_rounds,
    write_metric_rows,
)
from .model import Instance, simulate
from .policies import (
    AdaptivePolicy,
    DpFamily,
    DpPolicy,
    LinearBudget,
    ThresholdFamily,
    ValueTable,
    budgeted_threshold_policy,
    build_value_table,
    threshold_policy,
)
from .prices import AR1, LogNormal, Normal, generate
from .seeds import stream

VIOLATION_HEADER = "n,p_hat,stderr,violations,failures,rounds"
SUMMARY_HEADER = "policy_id,mean_cost,regret,regret_stderr,cr_p50,cr_p95,cr_max"
RELAX_HEADER = "scenario," + SUMMARY_HEADER
ADAPTIVE_HEADER = (
    "warmup,refresh,mean_cost,regret_vs_dp,stderr_vs_dp,"
    "regret_vs_offline,stderr_vs_offline"
)


def parallel_map(fn, tasks, workers: int = 1) -> list:
    """Order-preserving map, fanned across processes when workers > 1."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _chunk_ranges(count: int, workers: int) -> list[range]:
    parts = max(1, min(workers, count))
    bounds = np.linspace(0, count, parts + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(parts) if bounds[i] < bounds[i + 1]]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# estimate


def run_estimate(config: ExperimentConfig, workers: int = 1) -> EstimateReport:
    """Single-shot estimation from a history file or a synthesized history."""
    history = load_history(config)
    report = estimate(
        history,
        config.alpha,
        conservative=config.conservative,
        clamp_nonpositive_lower=config.clamp_m,
    )
    record = report.to_record()
    _write_csv(config.out, ",".join(RECORD_FIELDS), [tuple(record[k] for k in RECORD_FIELDS)])
    print(f"theta_hat={report.threshold!r} cr_bound={report.ratio_bound!r}")
    return report


# ---------------------------------------------------------------------------
# violation curve


@dataclass(frozen=True)
class _ViolationTask:
    history: np.ndarray
    n: int
    rounds: range
    instance: Instance
    eval_model: object
    eval_episodes: int
    seed: int
    resample_mode: str
    alpha: float
    conservative: bool
    clamp_m: bool
    verdict: str
    grid_size: int
    clamp_eval_to_bounds: bool
    eval_source: str


def _violation_chunk(task: _ViolationTask) -> tuple[list[MetricRow], int]:
    return violation_rounds(
        task.history, task.n, task.rounds,
        instance=task.instance, eval_model=task.eval_model,
        eval_episodes=task.eval_episodes, seed=task.seed,
        resample_mode=task.resample_mode, alpha=task.alpha,
        conservative=task.conservative,
        clamp_nonpositive_lower=task.clamp_m,
        verdict=task.verdict, grid_size=task.grid_size,
        clamp_eval_to_bounds=task.clamp_eval_to_bounds,
        eval_source=task.eval_source,
    )


def run_violation_curve(config: ExperimentConfig, workers: int = 1) -> list[ViolationReport]:
    """Bound-violation probability for every sample size in the n grid."""
    history = load_history(config)
    instance = build_instance(config)
    eval_model = build_model(config)
    reports = []
    for n in sorted(config.n_grid):
        tasks = [
            _ViolationTask(
                history=history, n=n, rounds=chunk, instance=instance,
                eval_model=eval_model, eval_episodes=config.eval_episodes,
                seed=config.seed, resample_mode=config.resample_mode,
                alpha=config.alpha, conservative=config.conservative,
                clamp_m=config.clamp_m, verdict=config.verdict,
                grid_size=config.G,
                clamp_eval_to_bounds=config.clamp_eval_to_bounds,
                eval_source=config.eval_source,
            )
            for chunk in _chunk_ranges(config.rounds, workers)
        ]
        rows: list[MetricRow] = []
        failures = 0
        for chunk_rows, chunk_failures in parallel_map(_violation_chunk, tasks, workers):
            rows.extend(chunk_rows)
            failures += chunk_failures
        reports.append(assemble_violation_report(n, config.rounds, rows, failures))
    _write_csv(
        config.out,
        VIOLATION_HEADER,
        [(r.n, r.p_hat, r.stderr, r.violations, r.failures, r.rounds) for r in reports],
    )
    return reports


# ---------------------------------------------------------------------------
# policy comparison (also the engine behind the relaxation scenarios)


@dataclass(frozen=True)
class PolicySummary:
    scenario: str
    policy_id: str
    mean_cost: float
    regret: float
    regret_stderr: float
    cr_p50: float
    cr_p95: float
    cr_max: float


@dataclass(frozen=True)
class _CompareTask:
    episodes: range
    instance: Instance
    eval_model: object
    policy_model: object
    eta: float
    seed: int
    grid_size: int
    atom_count: int
    clamp_m: bool


def _true_parameter_policies(task: _CompareTask):
    """Threshold, budgeted-threshold, and DP policies from true model parameters."""
    mean = task.policy_model.marginal_mean
    std = task.policy_model.marginal_std
    upper = mean + 3.0 * std
    lower = mean - 3.0 * std
    if lower <= 0.0:
        if not task.clamp_m:
            raise ValueError(
                f"nonpositive lower price bound {lower}; enable clamp_m or adjust the model"
            )
        lower = max(lower, 1e-3 * upper)
    theta = threshold_price(upper, lower)
    table = build_value_table(
        task.instance, task.policy_model, task.grid_size, task.atom_count
    )
    policies = (
        threshold_policy(theta),
        budgeted_threshold_policy(theta, LinearBudget(upper, lower, task.instance.storage.capacity)),
        DpPolicy(table),
    )
    return policies, theta, math.sqrt(upper / lower)


def _compare_chunk(task: _CompareTask) -> list[MetricRow]:
    policies, theta, bound = _true_parameter_policies(task)
    instance = task.instance
    T = instance.horizon
    rows: list[MetricRow] = []
    for e in task.episodes:
        prices = generate(task.eval_model, T, stream(task.seed, 1, e))
        if task.eta > 0.0:
            noise = stream(task.seed, 2, e).uniform(-task.eta, task.eta, T)
            realized = np.asarray(instance.demand) * (1.0 + noise)
            oracle_instance = Instance(T, realized, instance.storage)
        else:
            realized = None
            oracle_instance = instance
        opt = offline_optimal(oracle_instance, prices, task.grid_size).total_cost
        for policy in policies:
            alg = simulate(instance, prices, policy, realized_demand=realized).total_cost
            cr = competitive_ratio(alg, opt)
            rows.append(
                MetricRow(
                    round=e, n=0, policy_id=policy.policy_id,
                    alg_cost=alg, opt_cost=opt, cr=cr, cr_bound=bound,
                    violated=bool(cr > bound), regret=alg - opt,
                    theta_hat=theta, seed=task.seed,
                )
            )
    return rows


def _compare_core(
    config: ExperimentConfig,
    eval_model,
    policy_model,
    eta: float,
    scenario: str,
    workers: int,
) -> tuple[list[MetricRow], list[PolicySummary]]:
    instance = build_instance(config)
    tasks = [
        _CompareTask(
            episodes=chunk, instance=instance, eval_model=eval_model,
            policy_model=policy_model, eta=eta, seed=config.seed,
            grid_size=config.G, atom_count=config.K, clamp_m=config.clamp_m,
        )
        for chunk in _chunk_ranges(config.episodes, workers)
    ]
    rows: list[MetricRow] = []
    for chunk_rows in parallel_map(_compare_chunk, tasks, workers):
        rows.extend(chunk_rows)
    rows.sort(key=lambda r: (r.n, r.round, r.policy_id))
    summaries = []
    for policy_id in ("threshold", "budgeted", "dp"):
        sub = [r for r in rows if r.policy_id == policy_id]
        alg = np.asarray([r.alg_cost for r in sub])
        opt = np.asarray([r.opt_cost for r in sub])
        crs = np.asarray([r.cr for r in sub])
        reg = regret(alg, opt)
        summaries.append(
            PolicySummary(
                scenario=scenario, policy_id=policy_id,
                mean_cost=float(alg.mean()), regret=reg.mean,
                regret_stderr=reg.stderr,
                cr_p50=float(np.quantile(crs, 0.50)),
                cr_p95=float(np.quantile(crs, 0.95)),
                cr_max=float(crs.max()),
            )
        )
    return rows, summaries


def run_policy_compare(
    config: ExperimentConfig, workers: int = 1
) -> tuple[list[MetricRow], list[PolicySummary]]:
    """Threshold, budgeted-threshold, and DP policies against the hindsight oracle."""
    model = build_model(config)
    rows, summaries = _compare_core(config, model, model, 0.0, "baseline", workers)
    write_metric_rows(config.out, rows)
    _write_csv(
        summary_path(config.out),
        SUMMARY_HEADER,
        [
            (s.policy_id, s.mean_cost, s.regret, s.regret_stderr,
             s.cr_p50, s.cr_p95, s.cr_max)
            for s in summaries
        ],
    )
    return rows, summaries


def summary_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".summary.csv")


# ---------------------------------------------------------------------------
# adaptive convergence


@dataclass(frozen=True)
class AdaptiveRow:
    warmup: int
    refresh: float  # slots between re-estimations; inf means never refresh
    mean_cost: float
    regret_vs_dp: float
    stderr_vs_dp: float
    regret_vs_offline: float
    stderr_vs_offline: float


@dataclass(frozen=True)
class _AdaptiveTask:
    rounds: range
    warmup: int
    warmup_index: int
    refresh: float
    instance: Instance
    model: object
    true_table: ValueTable
    episodes: int
    seed: int
    family: str
    alpha: float
    conservative: bool
    clamp_m: bool
    grid_size: int
    atom_count: int


def _adaptive_chunk(task: _AdaptiveTask) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    instance = task.instance
    T = instance.horizon
    true_policy = DpPolicy(task.true_table)
    if task.family == "dp":
        family = DpFamily(instance, task.grid_size, task.atom_count)
    else:
        family = ThresholdFamily(budgeted=False)
    stride = None if math.isinf(task.refresh) else int(task.refresh)
    adaptive_costs, true_costs, offline_costs = [], [], []
    for r in task.rounds:
        warmup = generate(task.model, task.warmup, stream(task.seed, 3, task.warmup_index, r))
        policy = AdaptivePolicy(
            family, warmup, stride,
            alpha=task.alpha, conservative=task.conservative,
            clamp_nonpositive_lower=task.clamp_m,
        )
        for e in range(task.episodes):
            if stride is not None:
                policy.reset()
            prices = generate(task.model, T, stream(task.seed, 4, r, e))
            adaptive_costs.append(simulate(instance, prices, policy).total_cost)
            true_costs.append(simulate(instance, prices, true_policy).total_cost)
            offline_costs.append(offline_optimal(instance, prices, task.grid_size).total_cost)
    return (
        np.asarray(adaptive_costs),
        np.asarray(true_costs),
        np.asarray(offline_costs),
    )


def run_adaptive_convergence(
    config: ExperimentConfig, workers: int = 1
) -> list[AdaptiveRow]:
    """Adaptive-policy regret against the true-parameter DP and the oracle.

    Sweeps warmup sizes and refresh strides; episodes share price streams
    across all grid points and against the true-parameter arm, so regrets
    are paired comparisons.
    """
    instance = build_instance(config)
    model = build_model(config)
    true_table = build_value_table(instance, model, config.G, config.K)
    rows = []
    for wi, warmup in enumerate(sorted(config.warmup_grid)):
        for refresh in config.refresh_grid:
            tasks = [
                _AdaptiveTask(
                    rounds=chunk, warmup=warmup, warmup_index=wi, refresh=refresh,
                    instance=instance, model=model, true_table=true_table,
                    episodes=config.episodes, seed=config.seed, family=config.family,
                    alpha=config.alpha, conservative=config.conservative,
                    clamp_m=config.clamp_m, grid_size=config.G, atom_count=config.K,
                )
                for chunk in _chunk_ranges(config.rounds, workers)
            ]
            parts = parallel_map(_adaptive_chunk, tasks, workers)
            adaptive_costs = np.concatenate([p[0] for p in parts])
            true_costs = np.concatenate([p[1] for p in parts])
            offline_costs = np.concatenate([p[2] for p in parts])
            vs_dp = regret(adaptive_costs, true_costs)
            vs_off = regret(adaptive_costs, offline_costs)
            rows.append(
                AdaptiveRow(
                    warmup=warmup, refresh=refresh,
                    mean_cost=float(adaptive_costs.mean()),
                    regret_vs_dp=vs_dp.mean, stderr_vs_dp=vs_dp.stderr,
                    regret_vs_offline=vs_off.mean, stderr_vs_offline=vs_off.stderr,
                )
            )
    _write_csv(
        config.out,
        ADAPTIVE_HEADER,
        [
            (r.warmup, r.refresh, r.mean_cost, r.regret_vs_dp, r.stderr_vs_dp,
             r.regret_vs_offline, r.stderr_vs_offline)
            for r in rows
        ],
    )
    return rows


# ---------------------------------------------------------------------------
# relaxations


def _scenario_setup(config: ExperimentConfig, scenario: str):
    base = Normal(config.mu, config.sigma)
    if scenario == "baseline":
        return base, base, 0.0
    if scenario == "ar1":
        eval_model = AR1(config.mu, config.sigma, config.phi)
        return eval_model, Normal(config.mu, eval_model.marginal_std), 0.0
    if scenario == "lognormal":
        return LogNormal.from_moments(config.mu, config.sigma), base, 0.0
    if scenario == "demand-noise":
        return base, base, config.eta
    raise ConfigError("scenarios", f"unknown scenario {scenario!r}")


def run_relaxation(
    config: ExperimentConfig, workers: int = 1
) -> tuple[dict[str, list[MetricRow]], list[PolicySummary]]:
    """Re-run the policy comparison under relaxed assumptions.

    Scenarios: serially correlated prices (ar1), a skewed price law while
    policies assume the normal one (lognormal), and multiplicative demand
    noise revealed at decision time (demand-noise).  Episode price streams
    are shared across scenarios.
    """
    if config.model != "normal":
        raise ConfigError("model", "relaxation scenarios are defined for the normal model")
    rows_by_scenario: dict[str, list[MetricRow]] = {}
    summaries: list[PolicySummary] = []
    for scenario in config.scenarios:
        eval_model, policy_model, eta = _scenario_setup(config, scenario)
        rows, scenario_summaries = _compare_core(
            config, eval_model, policy_model, eta, scenario, workers
        )
        rows_by_scenario[scenario] = rows
        summaries.extend(scenario_summaries)
    _write_csv(
        config.out,
        RELAX_HEADER,
        [
            (s.scenario, s.policy_id, s.mean_cost, s.regret, s.regret_stderr,
             s.cr_p50, s.cr_p95, s.cr_max)
            for s in summaries
        ],
    )
    return rows_by_scenario, summaries
