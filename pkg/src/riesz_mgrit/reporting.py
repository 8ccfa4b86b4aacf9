"""Report emission: delimited tables, JSON manifests and rendered figures.

Every report embeds the fully resolved configuration and seed.  JSON output
is canonical (sorted keys, fixed separators) so that identical configs give
byte-identical files; wall-clock data lives under the single top-level
``"timing"`` key, which is the only part excluded from that contract.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "write_csv",
    "write_json",
    "trace_payload",
    "solve_report",
    "predict_report",
    "table_report",
    "factors_report",
]


def _ext(base, suffix) -> Path:
    """Append a suffix without Path.with_suffix, which mangles dotted names."""
    base = Path(base)
    return base.parent / (base.name + suffix)


def write_csv(path, header, rows) -> Path:
    """RFC-4180-style CSV with minimal quoting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def trace_payload(trace, config: dict) -> dict:
    """JSON payload for an iteration trace; timing is segregated."""
    payload = {
        "config": config,
        "seed": trace.seed,
        "converged": trace.converged,
        "iterations": trace.iterations,
        "residual_norms": [float(r) for r in trace.residual_norms],
        "spatial_solves": list(trace.spatial_solves),
        "cg_iterations": list(trace.cg_iterations),
        "timing": {"wall_times": [float(t) for t in trace.wall_times]},
    }
    if len(trace.residual_norms) >= 6:
        from .mgrit import convergence_factor

        payload["convergence_factor"] = float(convergence_factor(trace))
    return payload


def _savefig(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def solve_report(trace, config: dict, base: Path) -> list[Path]:
    """JSON trace plus a residual-history figure for one iterative run."""
    base = Path(base)
    paths = [write_json(_ext(base, ".json"), trace_payload(trace, config))]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogy(range(len(trace.residual_norms)), trace.residual_norms, "o-")
    ax.set_xlabel("iteration")
    ax.set_ylabel("space-time residual norm")
    ax.grid(True, which="both", alpha=0.3)
    paths.append(_savefig(fig, _ext(base, "_residuals.png")))
    return paths


def predict_report(report, config: dict, base: Path) -> list[Path]:
    """Bound report as JSON plus a CSV row in the factor-table schema."""
    base = Path(base)
    payload = {
        "config": config,
        "bound": float(report.bound),
        "argmax_mode": int(report.argmax_mode),
        "m": report.m,
        "n_coarse": report.n_coarse,
        "lam_dagger_max": float(np.max(report.lam_dagger)),
        "mu_star_max": float(np.max(report.mu_star)),
    }
    paths = [write_json(_ext(base, ".json"), payload)]
    disc = config.get("discretization", {})
    paths.append(
        write_csv(
            _ext(base, ".csv"),
            ["M", "N", "m", "observed", "bound"],
            [[disc.get("mx"), disc.get("nt"), report.m, "", f"{report.bound:.6e}"]],
        )
    )
    return paths


def table_report(rows, config: dict, base: Path) -> list[Path]:
    """Convergence-table CSV (M,N,error,rate), JSON manifest and loglog plot."""
    base = Path(base)
    csv_rows = [
        [r.m_space, r.n_time, f"{r.error:.6e}", "" if r.rate is None else f"{r.rate:.3f}"]
        for r in rows
    ]
    paths = [write_csv(_ext(base, ".csv"), ["M", "N", "error", "rate"], csv_rows)]
    payload = {
        "config": config,
        "rows": [
            {"M": r.m_space, "N": r.n_time, "error": r.error, "rate": r.rate}
            for r in rows
        ],
    }
    paths.append(write_json(_ext(base, ".json"), payload))
    fig, ax = plt.subplots(figsize=(5, 4))
    hs = [1.0 / r.m_space for r in rows]
    errs = [r.error for r in rows]
    ax.loglog(hs, errs, "o-", label="error")
    ax.loglog(hs, [errs[0] * (h / hs[0]) ** 2 for h in hs], "k--", label="order 2")
    ax.set_xlabel("h")
    ax.set_ylabel("final-time L2 error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    paths.append(_savefig(fig, _ext(base, "_convergence.png")))
    return paths


def factors_report(results, config: dict, base: Path) -> list[Path]:
    """Observed-vs-bound CSV (M,N,m,observed,bound), JSON and comparison plot."""
    base = Path(base)
    csv_rows = [
        [
            r.config.m_space,
            r.config.n_time,
            r.config.m_coarsen,
            f"{r.observed:.6e}",
            f"{r.bound:.6e}",
        ]
        for r in results
    ]
    paths = [
        write_csv(_ext(base, ".csv"), ["M", "N", "m", "observed", "bound"], csv_rows)
    ]
    payload = {
        "config": config,
        "rows": [
            {
                "M": r.config.m_space,
                "N": r.config.n_time,
                "m": r.config.m_coarsen,
                "observed": r.observed,
                "bound": r.bound,
                "iterations": r.iterations,
                "within_bound": r.within_bound,
            }
            for r in results
        ],
    }
    paths.append(write_json(_ext(base, ".json"), payload))
    fig, ax = plt.subplots(figsize=(5, 4))
    x = np.arange(len(results))
    ax.plot(x, [r.observed for r in results], "o", label="observed")
    ax.plot(x, [r.bound for r in results], "s--", label="bound")
    ax.set_xticks(x)
    ax.set_xticklabels(
        [f"{r.config.m_space}/{r.config.n_time}/{r.config.m_coarsen}" for r in results],
        rotation=45,
        ha="right",
        fontsize=7,
    )
    ax.set_xlabel("M / N / m")
    ax.set_ylabel("convergence factor")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    paths.append(_savefig(fig, _ext(base, "_factors.png")))
    return paths
