import csv
import os
import shutil
import subprocess
from pathlib import Path

import pytest

from ehopt_plots import CSV_COLUMNS, FigureSpec, SchemaMismatch, render
from ehopt_plots.render import main

RESULTS_DIR = Path(os.environ.get(
    "EHOPT_RESULTS_DIR", Path(__file__).resolve().parents[2] / "results"))

PRESET_GRID = {
    "fig2": [100, 1000, 200000],
    "fig3": [0.5, 0.7, 0.9],
    "fig4": [5, 7, 9],
    "fig5": [0.5, 0.7, 0.9],
}


def synthetic_csv(path, figure, methods=("lp", "bab", "pi", "qlearn", "greedy")):
    param = {"fig2": "learning_slots", "fig3": "p_h",
             "fig4": "battery_capacity", "fig5": "p_h"}[figure]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
        w.writeheader()
        for gv in PRESET_GRID[figure]:
            for k, method in enumerate(methods):
                est = 1000.0 + 50.0 * k + 10.0 * float(gv if figure != "fig2" else 1)
                w.writerow({
                    "experiment": figure, "grid_param": param, "grid_value": gv,
                    "method": method, "metric": "discounted_bits",
                    "estimate": est, "sigma_hat": 5.0, "eps_T": 2.0,
                    "eps_N": 0.16, "lo": est - 2.0, "hi": est + 2.16,
                    "seed": 1, "n_realizations": 4,
                })
    return path


@pytest.mark.parametrize("figure", sorted(PRESET_GRID))
def test_render_each_figure(tmp_path, figure):
    csv_path = synthetic_csv(tmp_path / f"{figure}.csv", figure)
    out = tmp_path / f"{figure}.svg"
    render(FigureSpec(str(csv_path), figure, str(out)))
    data = out.read_bytes()
    assert data.startswith(b"<?xml") and len(data) > 5000
    render(FigureSpec(str(csv_path), figure, str(out)))
    assert out.read_bytes() == data  # byte-stable re-render


def test_render_single_method(tmp_path):
    csv_path = synthetic_csv(tmp_path / "one.csv", "fig3", methods=("pi",))
    out = tmp_path / "one.svg"
    render(FigureSpec(str(csv_path), "fig3", str(out)))
    assert out.exists()


def test_render_png(tmp_path):
    csv_path = synthetic_csv(tmp_path / "f.csv", "fig4")
    out = tmp_path / "f.png"
    render(FigureSpec(str(csv_path), "fig4", str(out)))
    first = out.read_bytes()
    render(FigureSpec(str(csv_path), "fig4", str(out)))
    assert out.read_bytes() == first


def test_schema_mismatch(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("method,estimate\npi,1.0\n")
    with pytest.raises(SchemaMismatch) as err:
        render(FigureSpec(str(bad), "fig3", str(tmp_path / "x.svg")))
    assert "missing columns" in str(err.value)

    empty = tmp_path / "empty.csv"
    empty.write_text(",".join(CSV_COLUMNS) + "\n")
    with pytest.raises(SchemaMismatch):
        render(FigureSpec(str(empty), "fig3", str(tmp_path / "y.svg")))


def test_unknown_figure(tmp_path):
    csv_path = synthetic_csv(tmp_path / "f.csv", "fig3")
    with pytest.raises(SchemaMismatch):
        FigureSpec(str(csv_path), "fig9", str(tmp_path / "x.svg"))


def test_cli(tmp_path, capsys):
    csv_path = synthetic_csv(tmp_path / "f.csv", "fig2")
    out = tmp_path / "f.svg"
    rc = main(["--fig", "fig2", "--in", str(csv_path), "--out", str(out)])
    assert rc == 0 and out.exists()
    rc = main(["--fig", "fig2", "--in", str(tmp_path / "nope.csv"), "--out", str(out)])
    assert rc == 2


def _ensure_results_dir(tmp_path) -> Path:
    """Use the primary package's full-scale CSVs when present; otherwise
    generate reduced-scale ones through its CLI (the external interface)."""
    if all((RESULTS_DIR / f"{f}.csv").exists() for f in PRESET_GRID):
        return RESULTS_DIR
    if shutil.which("ehopt") is None:
        pytest.skip("no results/ CSVs and the ehopt CLI is not installed")
    gen = tmp_path / "results"
    gen.mkdir()
    for fig in PRESET_GRID:
        cmd = ["ehopt", "experiment", fig, "--seed", "2024",
               "--out", str(gen / f"{fig}.csv"),
               "--n-realizations", "25", "--learn-seeds", "2"]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=1800)
        assert proc.returncode == 0, proc.stderr
    return gen


def test_acceptance_criterion_9(tmp_path):
    """Render the four experiment CSVs; re-rendering must be byte-stable."""
    results = _ensure_results_dir(tmp_path)
    for fig in sorted(PRESET_GRID):
        out = tmp_path / f"{fig}.svg"
        render(FigureSpec(str(results / f"{fig}.csv"), fig, str(out)))
        first = out.read_bytes()
        assert len(first) > 5000
        render(FigureSpec(str(results / f"{fig}.csv"), fig, str(out)))
        assert out.read_bytes() == first
    print("criterion 9: PASS - four figures rendered, re-render byte-stable")
