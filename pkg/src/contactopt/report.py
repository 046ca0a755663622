"""Artifact writers for optimization runs: delimited logs and figures.

Every delimited file is written with a fixed column order, ``%.12g``
number formatting, and LF line endings, so a repeated run with the same
configuration and seed produces byte-identical output.  Figures are
rendered next to the delimited files; they carry the same data and are
purely for inspection.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_FMT = "%.12g"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return _FMT % float(x)


def _write_rows(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_iterates_csv(path, rows, var_names) -> None:
    """One line per outer iteration of the gradient solver."""
    header = ["iteration", "phase"] + list(var_names) + [
        "objective",
        "violation",
        "dual_opt",
    ]
    out = []
    for r in rows:
        out.append(
            [r.iteration, r.step_type]
            + [float(v) for v in r.rho]
            + [r.objective, r.violation, r.dual_opt]
        )
    _write_rows(path, header, out)


def write_samples_csv(path, samples, var_names) -> None:
    """One line per Bayesian sample, in evaluation order."""
    header = ["index"] + list(var_names) + [
        "objective",
        "violation",
        "feasible",
        "acquisition",
        "failed",
    ]
    out = []
    for s in samples:
        c = np.asarray(s.constraints, dtype=float)
        viol = float(np.inf) if s.failed else float(max(0.0, -c.min()) if c.size else 0.0)
        out.append(
            [s.index]
            + [float(v) for v in s.rho]
            + [s.objective, viol, s.feasible, s.acquisition, s.failed]
        )
    _write_rows(path, header, out)


def write_pressure_csv(path, snapshots) -> None:
    """Nodal and segment pressures per snapshot, in long format.

    Nodes shared by two segments appear once per segment, so each row
    fully states its (snapshot, segment, node) context.
    """
    header = [
        "snapshot",
        "segment_index",
        "node_index",
        "nodal_pressure",
        "segment_pressure",
    ]
    out = []
    for snap in snapshots:
        nodes = np.asarray(snap["nodes"])
        lam = np.asarray(snap["nodal_pressure"], dtype=float)
        seg_p = np.asarray(snap["segment_pressure"], dtype=float)
        for i, group in enumerate(snap["groups"]):
            for j in np.asarray(group, dtype=int):
                out.append([snap["label"], i, int(nodes[j]), lam[j], seg_p[i]])
    _write_rows(path, header, out)


def render_iterates_figure(path, rows) -> None:
    it = [r.iteration for r in rows]
    obj = [r.objective for r in rows]
    viol = [max(r.violation, 1e-16) for r in rows]
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax0.plot(it, obj, marker=".", lw=1.0)
    ax0.set_ylabel("objective")
    restored = [r.iteration for r in rows if r.step_type == "restoration"]
    if restored:
        ax0.plot(
            restored,
            [obj[it.index(k)] for k in restored],
            ls="none",
            marker="x",
            ms=4,
            label="restoration",
        )
        ax0.legend(loc="best", fontsize=8)
    ax1.semilogy(it, viol, marker=".", lw=1.0)
    ax1.set_ylabel("constraint violation")
    ax1.set_xlabel("iteration")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_samples_figure(path, samples) -> None:
    idx, best = [], []
    incumbent = np.inf
    for s in samples:
        if s.feasible and s.objective < incumbent:
            incumbent = s.objective
        idx.append(s.index)
        best.append(incumbent)
    fig, ax = plt.subplots(figsize=(7, 4))
    feas = [s for s in samples if s.feasible]
    infeas = [s for s in samples if not s.feasible]
    ax.plot(
        [s.index for s in feas],
        [s.objective for s in feas],
        ls="none",
        marker="o",
        ms=4,
        label="feasible sample",
    )
    ax.plot(
        [s.index for s in infeas],
        [s.objective for s in infeas],
        ls="none",
        marker="x",
        ms=4,
        label="infeasible sample",
    )
    finite = [b for b in best if np.isfinite(b)]
    if finite:
        ax.step(idx, best, where="post", lw=1.2, label="incumbent")
    ax.set_xlabel("sample")
    ax.set_ylabel("objective")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_pressure_figure(path, snapshots, limits: dict | None = None) -> None:
    """Segment pressure profiles with optional constraint-limit lines.

    limits: mapping of label -> pressure level drawn as a horizontal
    guide (e.g. floor and cap values).
    """
    n = len(snapshots)
    fig, axes = plt.subplots(1, n, figsize=(5 * n, 4), squeeze=False)
    for ax, snap in zip(axes[0], snapshots):
        seg_p = np.asarray(snap["segment_pressure"], dtype=float)
        ax.step(np.arange(seg_p.size), seg_p, where="mid", lw=1.4, label="segment")
        lam = np.asarray(snap["nodal_pressure"], dtype=float)
        x_nodes = np.linspace(0, seg_p.size - 1, lam.size)
        ax.plot(x_nodes, lam, ls=":", lw=1.0, label="nodal")
        for name, level in (limits or {}).items():
            ax.axhline(level, ls="--", lw=0.8, color="k")
            ax.annotate(
                name,
                (0.02, level),
                xycoords=("axes fraction", "data"),
                fontsize=7,
                va="bottom",
            )
        ax.set_title(str(snap["label"]))
        ax.set_xlabel("segment")
        ax.set_ylabel("pressure")
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_compare_csv(path, var_names, mean, std, ref, rel_err) -> None:
    header = ["variable", "mean", "std", "reference", "rel_abs_error"]
    rows = [
        [name, mean[i], std[i], ref[i], rel_err[i]]
        for i, name in enumerate(var_names)
    ]
    _write_rows(path, header, rows)
