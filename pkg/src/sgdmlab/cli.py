"""Command-line interface: plan / run / verify / sweep.

Exit codes: 0 success, 1 check failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from .checks import VerifyContext, default_context, run_checks, theoretical_schedule
from .harness import ConfigError, compare_runs, emit_plotdata, load_config, parse_config, run_experiment
from .schedule import max_stepsize_nonconvex, plan_from_lengths, validate


def _parse_lengths(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _parse_floats(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _cmd_plan(args) -> int:
    try:
        s = plan_from_lengths(args.a1, args.a2, args.lengths)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    L = args.L if args.L is not None else 1.0
    report = validate(s, L=L, mode=args.mode)
    payload = {
        "stages": [{"alpha": st.alpha, "beta": st.beta, "length": st.length} for st in s.stages],
        "A1": s.a1,
        "A2": s.a2,
        "L": L if args.L is not None else None,
        "mode": args.mode,
        "validation": report.to_dict(),
    }
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"{'stage':>5} {'alpha':>12} {'beta':>10} {'length':>8}")
        for i, st in enumerate(s.stages, 1):
            print(f"{i:>5} {st.alpha:>12.6g} {st.beta:>10.6g} {st.length:>8}")
        print(f"A1 = {s.a1:.10g}   A2 = {s.a2:.10g}")
        print(f"{'condition':<22} {'pass':>5} {'margin':>14}")
        for c in report.conditions:
            margin = "n/a" if c.margin is None or not np.isfinite(c.margin) else f"{c.margin:.6g}"
            print(f"{c.name:<22} {str(c.passed):>5} {margin:>14}")
        print(f"practical_ok = {report.practical_ok}   theoretical_ok = {report.theoretical_ok}")
    if args.mode == "theoretical" and not report.theoretical_ok:
        return 1
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        raw = copy.deepcopy(cfg.raw)
        raw["seeds"] = [args.seed]
        cfg = parse_config(raw)
    name = Path(args.config).stem
    records = run_experiment(cfg, out_dir=args.out, name=name)
    diverged = [r.seed for r in records if r.diverged]
    for r in records:
        status = "diverged" if r.diverged else "ok"
        final = r.final.get("loss_epoch_avg")
        final_txt = "n/a" if final is None else f"{final:.6g}"
        print(f"seed {r.seed}: {status}, epochs={len(r.epoch)}, final loss_epoch_avg={final_txt}")
    if diverged:
        print(f"note: diverged seeds flagged in records: {diverged}")
    print(f"outputs under {args.out} (prefix {name})")
    return 0


def _context_from_config(args) -> VerifyContext:
    ctx = default_context(K=args.K, n_mc=args.n_mc)
    if args.config is None:
        return ctx
    cfg = load_config(args.config)
    p = cfg.build_problem()
    nm = cfg.build_noise()
    if nm.kind == "minibatch" and nm.sigma2_certificate is None:
        from .problems import certify_minibatch

        probes = [cfg.initial_point(p.dimension)]
        nm = certify_minibatch(p, nm, probes, n_mc=1000, rng=np.random.default_rng(0))
    alpha, beta = ctx.alpha, ctx.beta
    if cfg.algorithm_cfg["kind"] == "sgdm":
        alpha, beta = cfg.algorithm_cfg["alpha"], cfg.algorithm_cfg["beta"]
    elif cfg.algorithm_cfg["kind"] == "sgd":
        alpha, beta = cfg.algorithm_cfg["alpha"], 0.0
    else:
        beta = 0.9
        alpha = max_stepsize_nonconvex(beta, p.L) / 2.0
    schedule = cfg.build_schedule() if cfg.algorithm_cfg["kind"] == "multistage" else theoretical_schedule(p.L)
    if cfg.algorithm_cfg["kind"] == "multistage":
        report = validate(schedule, L=p.L, mode="theoretical")
        if not report.theoretical_ok:
            schedule = theoretical_schedule(p.L)
    return VerifyContext(
        problem=p,
        noise=nm,
        alpha=alpha,
        beta=beta,
        schedule=schedule,
        K=min(args.K, cfg.iterations) if cfg.iterations else args.K,
        n_mc=args.n_mc,
        x0=cfg.initial_point(p.dimension),
    )


def _cmd_verify(args) -> int:
    names = [tok for chunk in args.check for tok in chunk.split(",") if tok] if args.check else None
    ctx = _context_from_config(args)
    try:
        report = run_checks(names, ctx)
    except KeyError as e:
        print(f"error: {e.args[0]}", file=sys.stderr)
        return 2
    for c in report.checks:
        worst = c.worst_margin
        worst_txt = "n/a" if worst is None else f"{worst:.3e}"
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} (worst margin {worst_txt})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.to_json(out / "diagnostics.json")
        report.rows_to_csv(out / "diagnostics.csv")
        print(f"report written to {out}/diagnostics.json and {out}/diagnostics.csv")
    if not report.passed:
        print(f"FAILED checks: {report.failed_names()}", file=sys.stderr)
        return 1
    return 0


def _set_by_path(raw: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = raw
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(dotted, "no such config path")
        node = node[key]
    leaf = keys[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(dotted, "no such config path")
    old = node[leaf]
    node[leaf] = int(value) if isinstance(old, int) and not isinstance(old, bool) else value


def _cmd_sweep(args) -> int:
    if not args.values:
        print("error: empty sweep values", file=sys.stderr)
        return 2
    base = load_config(args.config)
    groups = {}
    rows = []
    for value in args.values:
        raw = copy.deepcopy(base.raw)
        _set_by_path(raw, args.param, value)
        cfg = parse_config(raw)
        label = f"{args.param}={value:g}"
        records = run_experiment(cfg, out_dir=args.out, name=f"sweep_{args.param.replace('.', '_')}_{value:g}")
        groups[label] = records
        n_epochs = min(len(r.epoch) for r in records)
        initial_epoch = max(1, round(n_epochs / 10))
        initial = float(np.mean([r.loss_epoch_avg[initial_epoch - 1] for r in records]))
        final = float(np.mean([r.loss_epoch_avg[n_epochs - 1] for r in records]))
        rows.append((value, initial_epoch, initial, n_epochs, final))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "sweep_comparison.csv"
    with open(table, "w") as fh:
        fh.write("value,initial_epoch,initial_loss_mean,final_epoch,final_loss_mean\n")
        for value, ie, il, fe, fl in rows:
            fh.write(f"{value:.17g},{ie},{il:.17g},{fe},{fl:.17g}\n")
    emit_plotdata(groups, out)
    print(f"{'value':>10} {'initial':>14} {'final':>14}")
    for value, _, il, _, fl in rows:
        print(f"{value:>10g} {il:>14.6g} {fl:>14.6g}")
    print(f"comparison table at {table}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgdmlab", description="Momentum-SGD laboratory and verifier")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="build and validate a staged parameter schedule")
    p_plan.add_argument("--a1", type=float, required=True)
    p_plan.add_argument("--a2", type=float, required=True)
    p_plan.add_argument("--lengths", type=_parse_lengths, required=True, help="comma-separated stage lengths")
    p_plan.add_argument("--L", type=float, default=None, help="smoothness constant for theoretical checks")
    p_plan.add_argument("--mode", choices=("practical", "theoretical"), default="practical")
    p_plan.add_argument("--format", choices=("json", "table"), default="table")
    p_plan.set_defaults(func=_cmd_plan)

    p_run = sub.add_parser("run", help="run a configured experiment over its seeds")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override the config's seed list")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run verification checks and write a diagnostics report")
    p_verify.add_argument("--config", default=None, help="optional experiment config providing the context")
    p_verify.add_argument("--check", action="append", default=None, help="check name(s), comma-separated; default all")
    p_verify.add_argument("--out", default=None)
    p_verify.add_argument("--n-mc", dest="n_mc", type=int, default=1000)
    p_verify.add_argument("--K", dest="K", type=int, default=150)
    p_verify.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep", help="run a parameter grid and compare phases")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True, help="dotted config path, e.g. algorithm.alpha")
    p_sweep.add_argument("--values", type=_parse_floats, required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
