"""Chart rendering for the report pipeline.

The harness itself only produces tabular data; these helpers turn those
tables into PNG files next to the CSV output. Rendering is deterministic:
a fixed style, a fixed dpi, and stripped metadata, so reruns are
byte-identical.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evalharness import FrontierPoint, SweepPoint

__all__ = ["render_frontier", "render_lottery_mass", "render_reversals", "render_sweep"]

_STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
}

_NO_METADATA = {"Software": None}


def _save(fig, path: str) -> None:
    fig.savefig(path, metadata=_NO_METADATA)
    plt.close(fig)


def render_sweep(points: Sequence[SweepPoint], path: str, split: str = "test") -> None:
    """Win rate versus radius, one line per group plus overall and worst-group."""
    pts = sorted((p for p in points if p.split == split), key=lambda p: p.rho)
    if not pts:
        raise ValueError(f"no sweep points for split {split!r}")
    rhos = [p.rho for p in pts]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for group in sorted(pts[0].per_group):
            means = [p.per_group[group][0] for p in pts]
            errs = [p.per_group[group][1] for p in pts]
            ax.errorbar(rhos, means, yerr=errs, marker="o", ms=3, lw=1, label=group)
        ax.errorbar(rhos, [p.overall_mean for p in pts], yerr=[p.overall_stderr for p in pts],
                    marker="s", ms=4, lw=2, color="black", label="overall")
        ax.errorbar(rhos, [p.worst_group_mean for p in pts], yerr=[p.worst_group_stderr for p in pts],
                    marker="v", ms=4, lw=2, ls="--", color="crimson", label="worst group")
        ax.set_xlabel("radius")
        ax.set_ylabel(f"win rate ({split})")
        ax.legend(loc="best", ncols=2)
        _save(fig, path)


def render_frontier(points: Sequence[FrontierPoint], path: str) -> None:
    """Worst-case win rate against the expected-cost budget."""
    feasible = [p for p in points if p.feasible]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot([p.expected_cost for p in feasible],
                [p.worst_case_win_rate for p in feasible],
                marker="o", ms=4, lw=1.5)
        ax.set_xlabel("expected cost")
        ax.set_ylabel("worst-case win rate")
        _save(fig, path)


def render_reversals(rows: Sequence[tuple[str, str, float]], path: str, top: int = 10) -> None:
    """Horizontal bars for the most-reversed model pairs."""
    rows = list(rows)[:top]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        labels = [f"{a} vs {b}" for a, b, _ in rows][::-1]
        rates = [r for _, _, r in rows][::-1]
        ax.barh(labels, rates, color="steelblue")
        ax.set_xlabel("reversal rate")
        ax.set_xlim(0, 1)
        fig.tight_layout()
        _save(fig, path)


def render_lottery_mass(
    rhos: Sequence[float],
    roster: Sequence[str],
    prob_rows: Sequence[Sequence[float]],
    path: str,
    min_mass: float = 1e-3,
) -> None:
    """Probability assigned to each model as the radius grows."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for j, model in enumerate(roster):
            series = [row[j] for row in prob_rows]
            if max(series) < min_mass:
                continue
            ax.plot(rhos, series, marker="o", ms=3, lw=1, label=model)
        ax.set_xlabel("radius")
        ax.set_ylabel("probability")
        ax.legend(loc="best", ncols=2)
        _save(fig, path)
