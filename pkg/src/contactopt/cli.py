"""Command-line driver: configured optimization runs and run comparison.

``contactopt run config.ini`` executes one run (or several with
``--repeats``) and writes a self-contained artifact directory: the
resolved manifest, an iterate or sample log, pressure profiles for the
initial and final designs, a summary, and rendered figures for each
delimited file.  ``contactopt compare ref_dir run_dir...`` aggregates
repeated runs against a reference.  Exit status: 0 when the run ends
feasible (or converged for the analytic problems), 2 when the optimizer
reports nonconvergence or infeasibility, 1 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, bayesopt, config, nlpopt, report, scenarios
from .errors import ConfigError, ContactOptError, InfeasibleExit

OUT_ROOT_ENV = "CONTACTOPT_OUT_ROOT"


def _resolve_out(cfg: config.RunConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg.out_dir)
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def _pressure_artifacts(out: Path, tag: str, scenario, rho, limits) -> None:
    try:
        res = scenario.evaluate(np.asarray(rho, dtype=float), gradient=False)
    except ContactOptError:
        return
    snapshots = res.aux.get("snapshots")
    if not snapshots:
        return
    report.write_pressure_csv(out / f"pressure_{tag}.csv", snapshots)
    report.render_pressure_figure(out / f"pressure_{tag}.png", snapshots, limits)


def _pressure_limits(scenario) -> dict:
    if scenario.name == "wedge":
        return {"floor": scenario.lam_floor, "cap": scenario.lam_cap}
    if scenario.name == "clamp-lite":
        return {"window low": scenario.window[0], "window high": scenario.window[1]}
    return {}


def _run_single(cfg: config.RunConfig, seed: int, out: Path) -> int:
    scenario = scenarios.make_scenario(cfg.scenario, **cfg.scenario_params)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(
        out / "manifest.json", config.manifest_payload(cfg, seed, __version__)
    )
    limits = _pressure_limits(scenario)
    names = list(scenario.variable_names)
    _pressure_artifacts(out, "initial", scenario, scenario.rho0, limits)

    summary = {
        "scenario": scenario.name,
        "method": cfg.method,
        "seed": seed,
        "variables": names,
    }
    if cfg.method == "gradient":
        opts = nlpopt.NlpOptions(
            tol_dual=cfg.tol_dual,
            tol_viol=cfg.tol_viol,
            max_iter=cfg.max_iter,
            seed=seed,
        )
        prob = nlpopt.NlpProblem.from_scenario(scenario)
        try:
            res = nlpopt.solve_nlp(prob, scenario.rho0, opts)
            rho = res.rho
            feasible = bool(res.violation <= cfg.tol_viol)
            summary.update(
                objective=float(res.objective),
                violation=float(res.violation),
                status=res.status,
                converged=bool(res.converged),
                iterations=int(res.iterations),
            )
            rows = res.log.rows
        except InfeasibleExit as exc:
            best = exc.best or {}
            rho = best.get("rho")
            feasible = bool(best.get("feasible", False))
            summary.update(
                objective=float(best.get("objective", np.nan)),
                status="infeasible",
                converged=False,
                iterations=len(best.get("log", ())),
            )
            rows = best["log"].rows if "log" in best else []
        if rows:
            report.write_iterates_csv(out / "iterates.csv", rows, names)
            report.render_iterates_figure(out / "iterates.png", rows)
        status = 0 if feasible else 2
    else:
        opts = bayesopt.CboOptions(n_init=cfg.n_init, xi=cfg.xi)
        res = bayesopt.run_cbo(scenario, budget=cfg.budget, seed=seed, opts=opts)
        rho = res.rho_best
        feasible = bool(res.feasible_found)
        summary.update(
            objective=float(res.objective_best),
            status="feasible" if feasible else "no_feasible_sample",
            budget=int(res.budget),
            samples=len(res.samples),
        )
        report.write_samples_csv(out / "samples.csv", res.samples, names)
        report.render_samples_figure(out / "samples.png", res.samples)
        status = 0 if feasible else 2

    summary["feasible"] = feasible
    summary["rho"] = None if rho is None else [float(v) for v in rho]
    report.write_json(out / "summary.json", summary)
    if rho is not None:
        _pressure_artifacts(out, "final", scenario, rho, limits)
    return status


def _cmd_run(args) -> int:
    try:
        cfg = config.load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg.seed = int(args.seed)
    out_base = _resolve_out(cfg, args.out)
    status = 0
    for k in range(args.repeats):
        seed = cfg.seed + k
        out = out_base if args.repeats == 1 else out_base / f"seed-{seed}"
        try:
            rc = _run_single(cfg, seed, out)
        except ContactOptError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"run seed={seed} -> {out} (exit {rc})")
        status = max(status, rc)
    return status


def _load_summary(run_dir: str) -> dict:
    path = Path(run_dir) / "summary.json"
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def _cmd_compare(args) -> int:
    try:
        ref = _load_summary(args.ref)
        runs = [_load_summary(d) for d in args.runs]
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    names = ref["variables"]
    mismatch = [
        d for d, s in zip(args.runs, runs) if s["scenario"] != ref["scenario"]
    ]
    if mismatch:
        print(
            f"error: scenario mismatch vs reference {ref['scenario']!r}: "
            f"{', '.join(mismatch)}",
            file=sys.stderr,
        )
        return 1
    missing = [d for d, s in zip(args.runs, runs) if s.get("rho") is None]
    if missing or ref.get("rho") is None:
        print("error: compared runs must carry a final design", file=sys.stderr)
        return 1
    designs = np.array([s["rho"] for s in runs], dtype=float)
    ref_rho = np.asarray(ref["rho"], dtype=float)
    mean = designs.mean(axis=0)
    std = designs.std(axis=0)
    rel = np.abs(mean - ref_rho) / np.maximum(np.abs(ref_rho), 1e-12)
    for i, name in enumerate(names):
        print(
            f"{name}: mean {mean[i]:.6g} std {std[i]:.3g} "
            f"ref {ref_rho[i]:.6g} rel_abs_err {rel[i]:.3g}"
        )
    if args.out:
        report.write_compare_csv(args.out, names, mean, std, ref_rho, rel)
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contactopt",
        description="Contact design optimization runs and comparisons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a configured optimization run")
    p_run.add_argument("config", help="path to an ini or JSON run config")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument(
        "--repeats",
        type=int,
        default=1,
        help="repeat the run with seeds seed..seed+N-1 in per-seed subdirectories",
    )
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.set_defaults(func=_cmd_run)
    p_cmp = sub.add_parser("compare", help="aggregate runs against a reference")
    p_cmp.add_argument("ref", help="reference run directory")
    p_cmp.add_argument("runs", nargs="+", help="run directories to aggregate")
    p_cmp.add_argument("--out", default=None, help="write the table as CSV here")
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    if args.command == "run" and args.repeats < 1:
        print("error: --repeats must be >= 1", file=sys.stderr)
        return 1
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
