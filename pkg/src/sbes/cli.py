"""Command-line entry point ``sbes``.

Subcommands: ``optimize`` (one run), ``benchmark`` (a JSON-configured
batch), ``verify`` (the randomized information checks) and ``stepsize``
(the gradient-ascent suites).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import bench, oracle, stepsize


def _cmd_optimize(args) -> int:
    cfg = bench.ExperimentConfig(
        args.objective, args.policy, args.gamma, budget=args.budget, m=args.m, K=args.K,
        inits=1, reps=1, seed=args.seed,
    )
    obj = bench.make_objective(args.objective)
    if args.dump_posterior and cfg.policy not in ("sbes", "sbes-scale"):
        raise SystemExit("--dump-posterior needs an sbes policy")
    dumps = []

    def hook(state):
        dumps.append({"n": state.iteration, **state.posterior.to_dict()})

    record = bench.run_single(
        cfg, 0, 0, obj=obj, keep_trace=True, on_iteration=hook if args.dump_posterior else None
    )
    print(f"objective={record.objective} policy={record.policy} gamma={record.gamma!r} N={record.N}")
    print(f"recommendation={record.recommendation!r} regret={record.regret!r}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        bench.write_runs_csv(out / "runs.csv", [record])
        if record.trace:
            bench.write_trace_csv(out / "trace.csv", record, obj)
        if dumps:
            (out / "posterior.jsonl").write_text("".join(json.dumps(d) + "\n" for d in dumps))
    elif dumps:
        for d in dumps:
            print(json.dumps(d))
    return 0


def _cmd_benchmark(args) -> int:
    configs = bench.load_configs(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    all_records, summaries = [], []
    offset = 0
    for cfg in configs:
        records, summary = bench.run_experiment(cfg, workers=args.workers, keep_traces=args.traces)
        for r in records:
            r.run_id += offset
        offset += len(records)
        all_records.extend(records)
        summaries.append(summary)
        print(
            f"{cfg.policy:<13} {cfg.objective:<13} gamma={cfg.gamma:<6g} runs={summary['runs']} "
            f"log10(mean regret)={summary['log10_mean_regret']:.3f} "
            f"mean log10 regret={summary['mean_log10_regret']:.3f}"
        )
        if args.traces:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            obj = bench.make_objective(cfg.objective)
            for r in records:
                if r.trace:
                    bench.write_trace_csv(tdir / f"run_{r.run_id:06d}.csv", r, obj)
    bench.write_runs_csv(out / "runs.csv", all_records)
    bench.write_summary_csv(out / "summary.csv", summaries)
    meta = {"configs": [asdict(c) for c in configs], "domains": {
        c.objective: list(bench.make_objective(c.objective).domain) for c in configs
    }}
    (out / "config.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_verify(args) -> int:
    results = oracle.run_suite(args.instances, args.seed)
    print(oracle.format_table(results))
    return 0 if all(p == t for p, t, _ in results.values()) else 1


def _cmd_stepsize(args) -> int:
    rows = stepsize.run_stepsize_suite(args.suite, args.band, args.inits, args.reps, args.seed)
    summary = stepsize.summarize_stepsize(rows, args.suite)
    stepsize.write_stepsize_csvs(args.out, rows, summary)
    rules = stepsize.RULES
    print(f"{'objective':<26}" + "".join(f"{r:>13}" for r in rules))
    for row in summary:
        label = f"{row['objective']}{'' if row['dim'] == '' else '-' + str(row['dim'])}"
        print(f"{label:<26}" + "".join(f"{row[r]:>13.3f}" for r in rules))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbes", description="Sampled-belief entropy search.")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("optimize", help="run one search on a registered objective")
    o.add_argument("--objective", required=True, choices=bench.OBJECTIVES)
    o.add_argument("--gamma", type=float, required=True, help="noise ratio")
    o.add_argument("--budget", type=int, required=True, help="iterations N (N + 1 evaluations)")
    o.add_argument("--m", type=int, default=20)
    o.add_argument("--K", type=int, default=32)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--policy", default="sbes", choices=bench.POLICIES)
    o.add_argument("--out", help="directory for runs.csv, trace.csv and posterior.jsonl")
    o.add_argument("--dump-posterior", action="store_true", help="emit the density after every iteration")
    o.set_defaults(func=_cmd_optimize)

    b = sub.add_parser("benchmark", help="run a JSON-configured batch")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--traces", action="store_true", help="write per-run traces")
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=_cmd_benchmark)

    v = sub.add_parser("verify", help="randomized checks of the information bounds")
    v.add_argument("--instances", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("stepsize", help="gradient ascent with line-search stepsizes")
    s.add_argument("--suite", required=True, choices=tuple(stepsize.SUITES))
    s.add_argument("--band", required=True, choices=tuple(stepsize.BANDS))
    s.add_argument("--out", required=True)
    s.add_argument("--inits", type=int, default=20)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_stepsize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
