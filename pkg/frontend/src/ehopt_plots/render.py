"""Turn ehopt experiment CSVs into static comparison figures.

Consumes the frozen result schema (one row per grid point and method,
with the estimate and its confidence interval) and draws one line per
method with error bars. Output is deterministic: rendering the same CSV
twice produces byte-identical files.

    render --fig fig3 --in results.csv --out fig3.svg
"""
import argparse
import csv
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "ehopt-plots"
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

# The producer's frozen CSV schema; checked column for column.
CSV_COLUMNS = (
    "experiment", "grid_param", "grid_value", "method", "metric", "estimate",
    "sigma_hat", "eps_T", "eps_N", "lo", "hi", "seed", "n_realizations",
)

FIGURES = {
    "fig2": dict(x_label="learning slots", log_x=True,
                 y_label="expected transmitted data (bits)",
                 title="Learning-time sweep"),
    "fig3": dict(x_label="harvest persistence", log_x=False,
                 y_label="expected transmitted data (bits)",
                 title="Harvest persistence sweep"),
    "fig4": dict(x_label="battery capacity (energy units)", log_x=False,
                 y_label="expected transmitted data (bits)",
                 title="Battery capacity sweep"),
    "fig5": dict(x_label="harvest persistence", log_x=False,
                 y_label="throughput (bits/slot)",
                 title="Throughput sweep"),
}

METHOD_ORDER = ("lp", "bab", "pi", "rvi", "qlearn", "rlearn", "greedy", "exhaustive")
METHOD_LABELS = {
    "lp": "offline LP relaxation",
    "bab": "offline branch-and-bound",
    "pi": "policy iteration",
    "rvi": "relative value iteration",
    "qlearn": "Q-learning",
    "rlearn": "R-learning",
    "greedy": "greedy baseline",
    "exhaustive": "exhaustive search",
}


class SchemaMismatch(Exception):
    """The CSV does not carry the frozen result schema."""


@dataclass(frozen=True)
class FigureSpec:
    csv_path: str
    figure: str
    out_path: str
    log_x: bool | None = None  # None: the figure's default

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise SchemaMismatch(
                f"unknown figure id {self.figure!r} (expected one of {sorted(FIGURES)})"
            )


def load_rows(csv_path: str) -> list[dict]:
    with open(csv_path, newline="") as f:
        reader = csv.DictReader(f)
        header = tuple(reader.fieldnames or ())
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise SchemaMismatch(f"missing columns: {missing}")
        rows = list(reader)
    if not rows:
        raise SchemaMismatch("no data rows")
    return rows


def _series(rows: list[dict]):
    methods = {}
    for row in rows:
        try:
            x = float(row["grid_value"])
            est = float(row["estimate"])
            lo = float(row["lo"])
            hi = float(row["hi"])
        except (TypeError, ValueError) as exc:
            raise SchemaMismatch(f"malformed row {row!r}: {exc}") from exc
        if est != est:  # NaN row from a failed method: skip the point
            continue
        methods.setdefault(row["method"], []).append((x, est, lo, hi))
    ordered = [m for m in METHOD_ORDER if m in methods]
    ordered += sorted(set(methods) - set(ordered))
    return {m: sorted(methods[m]) for m in ordered}


def render(spec: FigureSpec) -> str:
    """Draw the figure and write it; returns the output path."""
    rows = load_rows(spec.csv_path)
    series = _series(rows)
    if not series:
        raise SchemaMismatch("every row was empty or failed")
    style = FIGURES[spec.figure]
    log_x = style["log_x"] if spec.log_x is None else spec.log_x

    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    for method, points in series.items():
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        err_lo = [max(p[1] - p[2], 0.0) for p in points]
        err_hi = [max(p[3] - p[1], 0.0) for p in points]
        ax.errorbar(xs, ys, yerr=[err_lo, err_hi], marker="o", markersize=3.5,
                    capsize=2.5, linewidth=1.4, label=METHOD_LABELS.get(method, method))
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(style["x_label"])
    ax.set_ylabel(style["y_label"])
    ax.set_title(style["title"])
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out_path, metadata=_stable_metadata(spec.out_path))
    plt.close(fig)
    return spec.out_path


def _stable_metadata(out_path: str):
    # strip timestamps so re-rendering is byte-identical
    if out_path.endswith(".svg"):
        return {"Date": None}
    if out_path.endswith(".png"):
        return {"Software": "ehopt-plots"}
    return None


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="render", description=__doc__)
    ap.add_argument("--fig", required=True, choices=sorted(FIGURES),
                    help="figure id selecting axes and scales")
    ap.add_argument("--in", dest="csv_path", required=True, help="input CSV")
    ap.add_argument("--out", dest="out_path", required=True,
                    help="output image (.svg preferred, .png supported)")
    ap.add_argument("--linear-x", action="store_true",
                    help="force a linear x axis (fig2 defaults to log)")
    args = ap.parse_args(argv)
    try:
        spec = FigureSpec(args.csv_path, args.fig, args.out_path,
                          log_x=False if args.linear_x else None)
        render(spec)
    except (SchemaMismatch, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(args.out_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
