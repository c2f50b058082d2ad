"""
Report service: plain-text verdict tables, plot-data CSVs and optional SVG charts.
"""

from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
from loguru import logger

from blowuplab.core.holder import SeminormSeries
from blowuplab.core.profile import ProfileTable, profile_eval
from blowuplab.core.selfsim import RescaledSnapshot
from blowuplab.schemas import RunManifest, VerifyReport
from blowuplab.services.storage import write_csv

NO_BLOWUP = "no blow-up detected"


def _fmt(value: Optional[float], spec: str = ".4g") -> str:
    return "-" if value is None else format(value, spec)


def _table(headers: Sequence[str], rows: Iterable[Sequence[str]]) -> List[str]:
    rows = [list(r) for r in rows]
    widths = [len(h) for h in headers]
    for row in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    out = [line, "-" * len(line)]
    out.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows)
    return out


def format_report_table(report: VerifyReport) -> str:
    """
    Render a VerifyReport as a fixed-width table.

    Args:
        report: Report to render

    Returns:
        Multi-line string ending with the verdict
    """
    rows = (
        (
            r.check_id,
            r.kind,
            "yes" if r.required else "",
            _fmt(r.worst_margin, ".3e"),
            _fmt(r.worst_location, ".4g"),
            "PASS" if r.passed else "FAIL",
            _fmt(r.first_violation, ".5g"),
            r.notes,
        )
        for r in report.records
    )
    lines = [report.title, ""]
    lines += _table(
        ("check", "kind", "req", "margin", "at", "status", "first", "notes"), rows
    )
    lines += ["", f"verdict: {'PASS' if report.passed else 'FAIL'}"]
    return "\n".join(lines)


def format_run_verdict(manifest: RunManifest) -> str:
    """Text summary of a run's analysis: estimates, rate fits, distances, verify summaries."""
    cfg = manifest.config
    lines = [
        f"Run {cfg.run_label()} ({cfg.model}, eps={cfg.eps:g}, n={cfg.n})",
        f"stop reason: {manifest.stop_reason or '-'}",
        f"measured growth {manifest.peak_growth:.2f}, "
        f"predicted growth {manifest.predicted_growth:.2f}",
    ]
    if not manifest.blowup_flagged:
        lines.append(f"verdict: {NO_BLOWUP}")
        return "\n".join(lines)

    lines += ["", "Blow-up estimates"]
    lines += _table(
        ("method", "valid", "T*", "x*", "residual", "message"),
        (
            (e.method, str(e.valid), _fmt(e.t_star, ".6g"), _fmt(e.x_star), _fmt(e.residual),
             e.message)
            for e in manifest.estimates
        ),
    )

    if manifest.slopes:
        lines += ["", "Hölder rate fits"]
        lines += _table(
            ("alpha", "window", "slope", "expected", "tol", "n", "status"),
            (
                (
                    f"{s.alpha:.3g}",
                    f"[{s.window[0]:.3g}, {s.window[1]:.3g}]",
                    f"{s.slope:.4f}",
                    f"{s.expected:.4f}",
                    f"{s.tolerance:.2f}",
                    str(s.n_samples),
                    "PASS" if s.passed else "FAIL",
                )
                for s in manifest.slopes
            ),
        )

    if manifest.distances:
        last = manifest.distances[-1]
        lines += [
            "",
            f"Profile distance at s={last.s:.4f}: "
            f"sup (1+|y|^(2/5))|W_y - W̄'| = {last.weighted_decay:.4g}, "
            f"constraints max {last.constraint_max:.3e}, ∂y³W(0) = {last.wyyy0:.4g}",
        ]

    if manifest.verify:
        lines += ["", "Verification"]
        lines += _table(
            ("report", "checks", "failed", "status", "failed ids"),
            (
                (v.title, str(v.n_checks), str(v.n_failed), "PASS" if v.passed else "FAIL",
                 ",".join(v.failed_ids))
                for v in manifest.verify
            ),
        )

    passed = all(s.passed for s in manifest.slopes) and all(v.passed for v in manifest.verify)
    lines += ["", f"verdict: {'PASS' if passed else 'FAIL'}"]
    return "\n".join(lines)


def alpha_tag(alpha: float) -> str:
    """File-name tag of a Hölder exponent, e.g. 0.6 -> "0p6"."""
    return f"{alpha:.3g}".replace(".", "p")


def write_rate_csv(run_dir: Path, series: SeminormSeries, t_star: float, tag: str = "") -> str:
    """Write t, T*-t, value rows of a semi-norm series and return the relative path."""
    rows = np.array(series.rows(t_star), dtype=float).reshape(-1, 3)
    suffix = f"_{tag}" if tag else ""
    relative = f"rates_{alpha_tag(series.alpha)}{suffix}.csv"
    write_csv(
        run_dir / relative,
        {"t": rows[:, 0], "T*-t": rows[:, 1], "value": rows[:, 2]},
        comment=f"alpha={series.alpha!r} window={series.window[0]!r},{series.window[1]!r}",
    )
    return relative


def write_profile_overlay(run_dir: Path, rsnap: RescaledSnapshot, profile: ProfileTable) -> str:
    """Write y, W_y, W̄' of a rescaled snapshot for overlay plots."""
    _, wbar_p, _ = profile_eval(profile, rsnap.y)
    relative = "profile_overlay.csv"
    write_csv(
        run_dir / relative,
        {"y": rsnap.y, "W_y": rsnap.W_y, "Wbar_p": wbar_p},
        comment=f"s={rsnap.s!r} t={rsnap.t!r}",
    )
    return relative


def render_svg(
    path: Path,
    x: np.ndarray,
    curves: dict,
    title: str,
    xlabel: str,
    log_x: bool = False,
    log_y: bool = False,
) -> bool:
    """
    Render line charts to an SVG file with matplotlib.

    Returns:
        True if the file was written, False if matplotlib is unavailable
    """
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib is not installed; skipping SVG charts")
        return False

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in curves.items():
        ax.plot(x, values, label=label)
    if log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True
