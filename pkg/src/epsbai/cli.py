"""Command line entry point: ``epsbai {ctime,weights,onearm,simulate,tables}``.

Exit codes: 0 success, 1 invalid config or arguments, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import onearm
from .config import ConfigError, load_config, load_document, parse_config, parse_instance, preset, presets
from .harness import (ExperimentConfig, replication_seed, report_json, results_csv, run_experiment,
                      write_report)
from .oracle import BanditInstance, brute_force_T, characteristic_time, grid_objective, lower_bound_general
from .thresholds import ThresholdSpec

TABLE_STRATEGIES = ("eps-tas", "kl-lucb", "ugape", "kl-racing", "eps-tas:0")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out_dir: str | None, name: str) -> None:
    sys.stdout.write(text)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text)


def _instance_from_args(args) -> tuple[BanditInstance, float]:
    """Instance and delta from --preset or --config (a full config or a bare instance)."""
    if args.preset and args.config:
        raise ConfigError([("", "give --preset or --config, not both")])
    if args.preset:
        return parse_instance(preset(args.preset)["instance"], "preset"), args.delta or 0.1
    if not args.config:
        raise ConfigError([("", "an instance is required: use --preset NAME or --config PATH")])
    try:
        with open(args.config) as fh:
            doc = load_document(fh.read())
    except OSError as exc:
        raise ConfigError([("", f"cannot read {args.config}: {exc.strerror}")]) from None
    if "family" in doc:
        return parse_instance(doc), args.delta or 0.1
    cfg = parse_config(doc)
    return cfg.instance, args.delta or cfg.delta


def _finite(x):
    return float(x) if math.isfinite(x) else None


# --- subcommands -------------------------------------------------------------------

def cmd_ctime(args) -> int:
    inst, delta = _instance_from_args(args)
    sol = characteristic_time(inst)
    out = {"instance": inst.to_dict(), "delta": delta, **sol.to_dict()}
    t = sol.t_star
    out["t_star_log_inv_delta"] = _finite(t * math.log(1.0 / delta))
    out["lower_bound"] = _finite(lower_bound_general(inst, delta, t)) if math.isfinite(t) else None
    if args.verify and math.isfinite(t):
        check = {"grid_t_at_solver_weights": _finite(1.0 / grid_objective(inst, sol.weights))}
        if inst.n_arms <= 4:
            bf = brute_force_T(inst)
            check.update(brute_force_t_star=_finite(bf.t_star), coarse=bf.coarse,
                         weight_step=bf.weight_step, rel_gap=_finite(abs(bf.t_star - t) / t))
        else:
            check["brute_force"] = "skipped: simplex grid limited to K <= 4"
        out["verify"] = check
    _emit(_dump(out), args.out, "ctime.json")
    return 0


def cmd_weights(args) -> int:
    inst, _ = _instance_from_args(args)
    sol = characteristic_time(inst)
    out = {
        "means": list(inst.means),
        "eps": inst.eps,
        "regular": sol.regular,
        "optimal_arms": sol.optimal_arms,
        "w_star_set": [[round(float(v), 12) for v in w] for w in sol.w_star_set],
    }
    _emit(_dump(out), args.out, "weights.json")
    return 0


def cmd_onearm(args) -> int:
    try:
        spec = ThresholdSpec(args.threshold, args.delta, 1)
        cfg = onearm.OneArmConfig(args.mu, args.eps, args.sigma2, args.delta, spec, args.cap)
    except ValueError as exc:
        raise ConfigError([("", str(exc))]) from None
    if args.reps < 1:
        raise ConfigError([("reps", "must be >= 1")])
    good = onearm.correct_decisions(args.mu, args.eps)
    rows = []
    for i in range(args.reps):
        seed = replication_seed(args.seed, i)
        r = onearm.run_one_arm(cfg, np.random.default_rng(seed))
        rows.append((i, seed, r.tau, r.decision, int(r.capped)))
    taus = np.array([r[2] for r in rows], dtype=float)
    errors = sum(1 for r in rows if r[4] or r[3] not in good)
    bounds = onearm.predicted_bounds(args.mu, args.eps, args.sigma2, args.delta)
    summary = {
        "config": {"mu": args.mu, "eps": args.eps, "sigma2": args.sigma2, "delta": args.delta,
                   "threshold": args.threshold, "cap": args.cap, "seed": args.seed},
        "n_reps": args.reps,
        "error_rate": errors / args.reps,
        "mean_tau": float(taus.mean()),
        "std_tau": float(taus.std(ddof=1)) if args.reps > 1 else 0.0,
        "capped_count": sum(r[4] for r in rows),
        "predicted": {"upper": bounds.upper, "lower": bounds.lower, "t0": bounds.t0},
    }
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "seed", "tau", "decision", "capped"])
    w.writerows(rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "onearm.csv"), "w") as fh:
            fh.write(buf.getvalue())
        _emit(_dump(summary), args.out, "onearm.json")
    else:
        sys.stdout.write(buf.getvalue())
        sys.stderr.write(_dump(summary))
    return 0


def _experiment_from_args(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError([("", "give --preset or --config, not both")])
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = parse_config({"preset": args.preset})
    else:
        raise ConfigError([("", "simulate needs --config PATH or --preset NAME")])
    doc = cfg.to_dict()
    if args.strategy:
        doc["strategy"] = args.strategy
    if args.threshold:
        doc["threshold"]["kind"] = args.threshold
    if args.delta:
        doc["threshold"]["delta"] = args.delta
    if args.seed is not None:
        doc["base_seed"] = args.seed
    if args.reps is not None:
        doc["n_reps"] = args.reps
    if args.cap is not None:
        doc["horizon_cap"] = args.cap
    if args.out:
        doc["output"] = {"dir": args.out}
    return parse_config(doc)


def cmd_simulate(args) -> int:
    cfg = _experiment_from_args(args)
    report = run_experiment(cfg, threads=args.threads)
    if cfg.out_dir:
        write_report(report, cfg.out_dir)
    if args.csv:
        sys.stdout.write(results_csv(report.results, cfg.instance.n_arms))
    else:
        sys.stdout.write(report_json(report))
    return 0


def cmd_tables(args) -> int:
    out_dir = args.out or "tables"
    reps = args.reps if args.reps is not None else 100
    seed = args.seed if args.seed is not None else 0
    table = presets()
    results = {}
    for name in ("mu1", "mu2", "mu3"):
        entry = table[name]
        inst = parse_instance(entry["instance"], "preset")
        sol = characteristic_time(inst)
        results[name] = {"t_star": sol.t_star, "w_star_set": [list(map(float, w)) for w in sol.w_star_set],
                         "regular": sol.regular, "runs": {}}
        for strat in TABLE_STRATEGIES:
            if strat not in entry["reference"]["mean_tau"]:
                continue
            cfg = ExperimentConfig(inst, strat, ThresholdSpec("practical", 0.1, inst.n_arms), reps, seed,
                                   args.cap or 10 ** 6)
            rep = run_experiment(cfg, threads=args.threads)
            results[name]["runs"][strat] = rep.to_dict()
            print(f"{name} {strat}: mean tau {rep.mean_tau:.1f}, error {rep.error_rate:.3f}", file=sys.stderr)

    os.makedirs(out_dir, exist_ok=True)
    lines = [f"# Reproduced tables ({reps} replications per cell, delta = 0.1, practical threshold)", ""]
    t1 = [["instance", "strategy", "source"] + [f"arm{a}" for a in range(6)]]
    lines += ["## Recommendation frequencies (reference in parentheses)", ""]
    for name, res in results.items():
        ref = table[name]["reference"]
        for strat, rep in res["runs"].items():
            ours, theirs = rep["reco_distribution"], ref["recommendation"][strat]
            t1.append([name, strat, "ours"] + ours)
            t1.append([name, strat, "reference"] + theirs)
            cells = " | ".join(f"{o:.3f} ({r})" for o, r in zip(ours, theirs))
            lines.append(f"| {name} | {strat} | {cells} |")
    lines += ["", "## Mean sample size, mean (std); reference in parentheses", ""]
    t2 = [["instance", "t_star_log10", "ref_t_star_log10", "strategy", "mean_tau", "std_tau",
           "ref_mean_tau", "ref_std_tau", "error_rate"]]
    for name, res in results.items():
        ref = table[name]["reference"]
        tl = res["t_star"] * math.log(10)
        lines.append(f"| {name} | T* ln 10 = {tl:.1f} ({ref['t_star_log']}) |")
        for strat, rep in res["runs"].items():
            rm, rs = ref["mean_tau"][strat]
            t2.append([name, tl, ref["t_star_log"], strat, rep["mean_tau"], rep["std_tau"], rm, rs,
                       rep["error_rate"]])
            lines.append(f"|  | {strat} | {rep['mean_tau']:.0f} ({rep['std_tau']:.0f}) vs {rm} ({rs}) |")
    lines += ["", "## Optimal weights and eps-TaS empirical proportions", ""]
    t3 = [["instance", "row", "source"] + [f"arm{a}" for a in range(6)]]
    for name in ("mu2", "mu3"):
        res, ref = results[name], table[name]["reference"]
        for i, (w, wr) in enumerate(zip(res["w_star_set"], ref["optimal_weights"])):
            t3.append([name, f"w_star_{i}", "ours"] + w)
            t3.append([name, f"w_star_{i}", "reference"] + wr)
            lines.append(f"| {name} | w* #{i} | " + " | ".join(f"{a:.3f} ({b})" for a, b in zip(w, wr)) + " |")
        if "eps-tas" in res["runs"]:
            p = res["runs"]["eps-tas"]["mean_proportions"]
            t3.append([name, "proportions", "ours"] + p)
            t3.append([name, "proportions", "reference"] + ref["empirical_proportions"])
            lines.append(f"| {name} | E[N/tau] | " + " | ".join(
                f"{a:.3f} ({b})" for a, b in zip(p, ref["empirical_proportions"])) + " |")

    for fname, rows in (("table1.csv", t1), ("table2.csv", t2), ("table3.csv", t3)):
        with open(os.path.join(out_dir, fname), "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    md = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, "tables.md"), "w") as fh:
        fh.write(md)
    with open(os.path.join(out_dir, "tables.json"), "w") as fh:
        fh.write(_dump(results))
    sys.stdout.write(md)
    return 0


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epsbai", description="eps-best arm identification toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, instance=True):
        if instance:
            sp.add_argument("--config", metavar="PATH")
            sp.add_argument("--preset", metavar="NAME", help="mu1, mu2 or mu3")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--delta", type=float)

    sp = sub.add_parser("ctime", help="characteristic time and optimal weights as JSON")
    common(sp)
    sp.add_argument("--verify", action="store_true", help="cross-check against grid oracles")
    sp.set_defaults(func=cmd_ctime)

    sp = sub.add_parser("weights", help="the set of optimal weight vectors")
    common(sp)
    sp.set_defaults(func=cmd_weights)

    sp = sub.add_parser("onearm", help="one-arm Gaussian overlapping test")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--sigma2", type=float, default=1.0)
    sp.add_argument("--delta", type=float, default=0.1)
    sp.add_argument("--threshold", default="gaussian1", choices=["gaussian1", "practical", "universal", "refined"])
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cap", type=int, default=onearm.DEFAULT_CAP)
    sp.add_argument("--out", metavar="DIR")
    sp.set_defaults(func=cmd_onearm)

    sp = sub.add_parser("simulate", help="Monte Carlo experiment from a config file")
    common(sp)
    sp.add_argument("--strategy")
    sp.add_argument("--threshold", choices=["practical", "universal", "refined", "gaussian1"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--cap", type=int)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--csv", action="store_true", help="print per-replication CSV instead of the JSON report")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("tables", help="rerun the three presets and write comparison tables")
    sp.add_argument("--out", metavar="DIR", help="output directory (default: ./tables)")
    sp.add_argument("--reps", type=int, help="replications per cell (default 100)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cap", type=int)
    sp.add_argument("--threads", type=int, default=1)
    sp.set_defaults(func=cmd_tables)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for path, msg in exc.errors:
            print(f"config error: {path or '<root>'}: {msg}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        print(f"epsbai: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
