"""Seeded Monte Carlo runs of eps-best arm identification strategies.

Replication ``i`` of an experiment with base seed ``s`` uses the seed
``replication_seed(s, i)``: the first 64-bit word of
``numpy.random.SeedSequence(s, spawn_key=(i,)).generate_state(1, uint64)``.
Its generator is ``numpy.random.default_rng(seed)``. Bernoulli
observations are ``rng.random() < mu``; Gaussian ones are
``mu + sigma * rng.standard_normal()``.

Per-replication CSV columns (schema version 1), in this order::

    index, seed, tau, recommendation, correct, capped, fallback_rounds, p0, ..., p{K-1}

where ``p_a = N_a(tau) / tau``. Capped runs count as errors, keep
``tau = cap`` and recommend the empirical best arm.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .oracle import BanditInstance, characteristic_time, lower_bound_general
from .strategies import Strategy, StrategyState, parse_strategy
from .thresholds import ThresholdSpec

SCHEMA_VERSION = 1
DEFAULT_CAP = 10 ** 6


def replication_seed(base_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class RunResult:
    seed: int
    tau: int
    recommendation: int
    correct: bool
    capped: bool
    proportions: np.ndarray
    fallback_rounds: int = 0
    index: int = 0

    def row(self) -> list:
        return [self.index, self.seed, self.tau, self.recommendation, int(self.correct),
                int(self.capped), self.fallback_rounds] + [repr(float(p)) for p in self.proportions]


def _drawer(instance: BanditInstance, rng: np.random.Generator):
    mu = list(instance.means)
    if instance.family.kind == "bernoulli":
        rand = rng.random
        return lambda arm: 1.0 if rand() < mu[arm] else 0.0
    sd = math.sqrt(instance.family.sigma2)
    normal = rng.standard_normal
    return lambda arm: mu[arm] + sd * normal()


def _as_strategy(strategy) -> Strategy:
    return parse_strategy(strategy) if isinstance(strategy, str) else strategy


def run_replication(instance: BanditInstance, strategy, threshold: ThresholdSpec,
                    seed: int, cap: int = DEFAULT_CAP, index: int = 0) -> RunResult:
    """One run: pull arms 0..K-1 once, then decide/pull until a stop or ``cap`` samples.

    The stopping rule is consulted at every t with K <= t < cap, so a run
    with ``cap <= K`` is always capped.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    strategy = _as_strategy(strategy)
    rng = np.random.default_rng(seed)
    draw = _drawer(instance, rng)
    k = instance.n_arms
    state = StrategyState(instance.family, k, instance.eps)
    strategy.start(state)
    for arm in range(min(k, cap)):
        state.update(arm, draw(arm))

    fallback = 0
    reco = -1
    capped = True
    while k <= state.t < cap:
        dec = strategy.decide(state, threshold(state.t))
        fallback += dec.fallback
        if dec.stop:
            reco, capped = dec.recommendation, False
            break
        for arm in dec.arms:
            if state.t >= cap:
                break
            state.update(arm, draw(arm))

    if capped:
        reco = int(np.nanargmax(state.means()))
    correct = (not capped) and reco in instance.eps_optimal()
    return RunResult(int(seed), state.t, int(reco), bool(correct), capped,
                     state.counts / state.t, fallback, index)


# --- experiments ----------------------------------------------------------------

@dataclass
class ExperimentConfig:
    instance: BanditInstance
    strategy: str = "eps-tas"
    threshold: ThresholdSpec = None
    n_reps: int = 1000
    base_seed: int = 0
    horizon_cap: int = DEFAULT_CAP
    out_dir: str | None = None

    def __post_init__(self):
        if self.threshold is None:
            self.threshold = ThresholdSpec("practical", 0.1, self.instance.n_arms)
        elif self.threshold.n_arms != self.instance.n_arms:
            self.threshold = ThresholdSpec(self.threshold.kind, self.threshold.delta, self.instance.n_arms)
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")
        if self.horizon_cap < 1:
            raise ValueError("horizon_cap must be >= 1")
        parse_strategy(self.strategy)  # validate early

    @property
    def delta(self) -> float:
        return self.threshold.delta

    def to_dict(self) -> dict:
        out = {
            "instance": self.instance.to_dict(),
            "strategy": self.strategy,
            "threshold": self.threshold.to_dict(),
            "n_reps": self.n_reps,
            "base_seed": self.base_seed,
            "horizon_cap": self.horizon_cap,
        }
        if self.out_dir is not None:
            out["output"] = {"dir": self.out_dir}
        return out


@dataclass
class ExperimentReport:
    n_reps: int
    error_rate: float
    mean_tau: float
    std_tau: float
    median_tau: float
    reco_distribution: list
    mean_proportions: list
    capped_count: int
    fallback_rounds: int
    t_star: float | None
    lower_bound: float | None
    config: dict
    results: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n_reps": self.n_reps,
            "error_rate": self.error_rate,
            "mean_tau": self.mean_tau,
            "std_tau": self.std_tau,
            "median_tau": self.median_tau,
            "reco_distribution": self.reco_distribution,
            "mean_proportions": self.mean_proportions,
            "capped_count": self.capped_count,
            "fallback_rounds": self.fallback_rounds,
            "t_star": self.t_star,
            "lower_bound": self.lower_bound,
            "config": self.config,
        }


def _run_chunk(args):
    instance, strategy, threshold, cap, seeds = args
    return [run_replication(instance, strategy, threshold, s, cap, i) for i, s in seeds]


def aggregate(results: Sequence[RunResult], n_arms: int, config: dict,
              t_star: float | None = None, lower_bound: float | None = None) -> ExperimentReport:
    """Summary statistics; results are sorted by index first, so order never matters."""
    results = sorted(results, key=lambda r: r.index)
    n = len(results)
    taus = np.array([r.tau for r in results], dtype=float)
    reco = np.zeros(n_arms)
    for r in results:
        reco[r.recommendation] += 1
    props = np.array([r.proportions for r in results]).mean(axis=0)
    return ExperimentReport(
        n_reps=n,
        error_rate=sum(not r.correct for r in results) / n,
        mean_tau=float(taus.mean()),
        std_tau=float(taus.std(ddof=1)) if n > 1 else 0.0,
        median_tau=float(np.median(taus)),
        reco_distribution=[float(x) for x in reco / n],
        mean_proportions=[float(x) for x in props],
        capped_count=sum(r.capped for r in results),
        fallback_rounds=sum(r.fallback_rounds for r in results),
        t_star=t_star,
        lower_bound=lower_bound,
        config=config,
        results=results,
    )


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """All replications of ``config``; ``threads > 1`` spreads them over processes.

    Seeds depend only on (base_seed, index), so the report is identical for
    any ``threads``.
    """
    seeds = [(i, replication_seed(config.base_seed, i)) for i in range(config.n_reps)]
    inst, strat, thr, cap = config.instance, config.strategy, config.threshold, config.horizon_cap
    if threads > 1 and config.n_reps > 1:
        n_chunks = min(config.n_reps, 4 * threads)
        chunks = [seeds[j::n_chunks] for j in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(_run_chunk, [(inst, strat, thr, cap, c) for c in chunks])
            results = [r for part in parts for r in part]
    else:
        results = _run_chunk((inst, strat, thr, cap, seeds))

    t_star = lb = None
    try:
        sol = characteristic_time(inst)
        if math.isfinite(sol.t_star):
            t_star = sol.t_star
            lb = lower_bound_general(inst, config.delta, t_star)
    except ArithmeticError:
        pass
    return aggregate(results, inst.n_arms, config.to_dict(), t_star, lb)


# --- output ----------------------------------------------------------------------

def csv_header(n_arms: int) -> list:
    return ["index", "seed", "tau", "recommendation", "correct", "capped", "fallback_rounds"] + \
        [f"p{a}" for a in range(n_arms)]


def results_csv(results: Sequence[RunResult], n_arms: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(n_arms))
    for r in sorted(results, key=lambda r: r.index):
        w.writerow(r.row())
    return buf.getvalue()


def report_json(report: ExperimentReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def write_report(report: ExperimentReport, out_dir: str, stem: str = "experiment") -> tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    json_path = os.path.join(out_dir, f"{stem}.json")
    with open(csv_path, "w", newline="") as fh:
        fh.write(results_csv(report.results, len(report.mean_proportions)))
    with open(json_path, "w") as fh:
        fh.write(report_json(report))
    return csv_path, json_path
