"""CSV records and gnuplot scripts for simulation output."""
from __future__ import annotations

import csv
import io
from dataclasses import astuple, fields
from pathlib import Path
from typing import Iterable, Sequence

from .simulate import RoundRecord, ScenarioResult, TIMING_FIELDS

RECORD_FIELDS = tuple(f.name for f in fields(RoundRecord))
_INT_FIELDS = {"round", "robot_id", "dataset_size"}


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def records_to_csv(records: Iterable[RoundRecord], exclude: Sequence[str] = ()) -> str:
    cols = [c for c in RECORD_FIELDS if c not in exclude]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        row = dict(zip(RECORD_FIELDS, astuple(r)))
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def export_csv(records: Iterable[RoundRecord], path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(records_to_csv(records), encoding="utf-8", newline="\n")
    except OSError as err:
        raise OSError(f"cannot write records to {path}: {err}") from err
    return path


def parse_csv(text: str) -> list[RoundRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
        raise ValueError(f"unexpected record header {reader.fieldnames}")
    return [RoundRecord(**{k: int(v) if k in _INT_FIELDS else float(v) for k, v in row.items()}) for row in reader]


def read_csv(path: str | Path) -> list[RoundRecord]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


def deterministic_view(path: str | Path) -> str:
    """The record CSV with timing columns dropped, for reproducibility checks."""
    return records_to_csv(read_csv(path), exclude=TIMING_FIELDS)


def export_maps(result: ScenarioResult, path: str | Path) -> Path:
    """Final per-robot local and distributed maps, one row per (robot, grid point)."""
    path = Path(path)
    dim = result.grid.shape[1]
    coords = ["x", "y", "z"][:dim]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["robot_id", "grid_index", *coords, "local_mean", "local_var", "dist_mean", "dist_var",
                    "poe_mean", "poe_var"])
        for rid, (lm, dm) in enumerate(zip(result.local_maps, result.distributed_maps)):
            for g, x in enumerate(result.grid):
                w.writerow([rid, g, *(_fmt(float(v)) for v in x), _fmt(float(lm.mean[g])), _fmt(float(lm.variance[g])),
                            _fmt(float(dm.mean[g])), _fmt(float(dm.variance[g])),
                            _fmt(float(result.poe_map.mean[g])), _fmt(float(result.poe_map.variance[g]))])
    return path


def emit_plot_script(records_csv: str | Path, path: str | Path, local_steps_per_round: int = 1,
                     title: str = "scenario") -> Path:
    """Write a two-panel gnuplot script: RMSE vs round, and per-step time vs cumulative samples."""
    records_csv = Path(records_csv)
    cols = {name: i + 1 for i, name in enumerate(RECORD_FIELDS)}
    script = f"""# generated by coopmap; render with: gnuplot {Path(path).name}
set datafile separator ','
set terminal pngcairo size 900,900
set output '{records_csv.stem}.png'
set key autotitle columnhead
set multiplot layout 2,1 title '{title}'

set title 'RMSE vs round'
set xlabel 'round'
set ylabel 'RMSE'
plot '{records_csv.name}' using {cols['round']}:{cols['rmse_local']} with points pt 7 ps 0.4 title 'local', \\
     '' using {cols['round']}:{cols['rmse_distributed']} with points pt 7 ps 0.4 title 'distributed'

set title 'prediction and compression time vs samples'
set xlabel 'samples per robot'
set ylabel 'time (s)'
set logscale y
plot '{records_csv.name}' using (${cols['round']}*{local_steps_per_round}):{cols['pred_time']} with points pt 7 ps 0.4 title 'prediction', \\
     '' using (${cols['round']}*{local_steps_per_round}):{cols['compress_time']} with points pt 7 ps 0.4 title 'compression'

unset multiplot
"""
    path = Path(path)
    try:
        path.write_text(script, encoding="utf-8", newline="\n")
    except OSError as err:
        raise OSError(f"cannot write plot script to {path}: {err}") from err
    return path
