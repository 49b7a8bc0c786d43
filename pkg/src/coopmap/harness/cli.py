"""Command line entry point: ``coopmap {run,validate,compare,oracle} CONFIG``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..consensus import estimate_observation_bound, theorem1_bounds
from ..field_env import write_trajectory_csv
from ..gp_core import Dataset, NumericalError, Observation, batch_predict, build_state, recursive_predict
from ..network_sim import write_trace
from .config import ConfigError, ScenarioConfig, load_config
from .output import emit_plot_script, export_csv, export_maps
from .simulate import SimulationError, compare_variants, run_scenario

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 64

log = logging.getLogger("coopmap")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="scenario config (.json or .toml)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out-dir", help="override the output directory")
    common.add_argument("--br-sign", choices=("paper", "inverted"), help="sign of the distributed score term")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="coopmap", description="Distributed sparse online GP field mapping simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="simulate a scenario and write CSV/plot output")
    sub.add_parser("validate", parents=[common], help="check assumptions and print bound constants")
    sub.add_parser("compare", parents=[common], help="RMSE/time table for five mapping variants")
    o = sub.add_parser("oracle", parents=[common], help="recursive-vs-batch equivalence sweep")
    o.add_argument("--sizes", default="10,50,100", help="comma-separated dataset sizes")
    return p


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, output_dir=args.out_dir, br_sign=args.br_sign)


def _observation_bounds(cfg: ScenarioConfig) -> tuple[float, float]:
    if cfg.y_bar > 0 and cfg.mu_bar > 0:
        return cfg.y_bar, cfg.mu_bar
    # no configured bounds: scale the largest noise-free field value on the grid
    est = estimate_observation_bound(cfg.scalar_field()(cfg.grid()))
    return cfg.y_bar or est, cfg.mu_bar or est


def cmd_validate(cfg: ScenarioConfig) -> int:
    errors, warns = cfg.validate()
    for e in errors:
        print(f"ERROR: {e}")
    if errors:
        return EXIT_INVALID
    kernel, params = cfg.kernel(), cfg.consensus_params()
    y_bar, mu_bar = _observation_bounds(cfg)
    b = theorem1_bounds(kernel, params, y_bar, mu_bar)
    print(f"robots p = {params.robot_count}, period B = {params.connectivity_period}, "
          f"weight floor phi = {params.weight_floor:g}")
    print(f"y_bar = {y_bar:.12g}, mu_bar = {mu_bar:.12g}")
    for name, value in b.as_dict().items():
        print(f"{name} = {value:.12g}")
    ok = params.satisfies_sigma_rule(kernel)
    print(f"sigma_n^2 = {cfg.correction_variance:g} satisfies bound rule: {'yes' if ok else 'no'}")
    for w in warns:
        print(f"WARNING: {w}")
    return EXIT_OK


def cmd_run(cfg: ScenarioConfig) -> int:
    errors, warns = cfg.validate()
    if errors:
        for e in errors:
            print(f"ERROR: {e}")
        return EXIT_INVALID
    for w in warns:
        log.warning(w)
    res = run_scenario(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rec = export_csv(res.records, out / "rounds.csv")
    export_maps(res, out / "maps.csv")
    emit_plot_script(rec, out / "rounds.gp", cfg.local_steps_per_round, cfg.name)
    write_trace(res.graphs, out / "graphs.trace")
    for rid, traj in enumerate(cfg.trajectories()):
        if traj.positions.shape[1] <= 2:
            write_trajectory_csv(out / f"trajectory_{rid}.csv", traj)
    final = [r for r in res.records if r.round == res.records[-1].round]
    for r in final:
        print(f"robot {r.robot_id}: rmse_local={r.rmse_local:.4f} rmse_distributed={r.rmse_distributed:.4f} "
              f"consensus_err={r.consensus_err_vs_poe:.3g} points={r.dataset_size}")
    print(f"wrote {rec}")
    return EXIT_OK


def cmd_compare(cfg: ScenarioConfig) -> int:
    rows = compare_variants(cfg)
    print(f"{'variant':<26}{'rmse':>10}{'time_s':>12}{'points':>8}")
    for r in rows:
        print(f"{r['variant']:<26}{r['rmse']:>10.4f}{r['time_s']:>12.4f}{r['points_per_robot']:>8d}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return EXIT_OK


def cmd_oracle(cfg: ScenarioConfig, sizes: list[int], tol: float = 1e-8) -> int:
    kernel = cfg.kernel()
    rng = np.random.default_rng(cfg.seed)
    lo, hi = np.asarray(cfg.workspace_min), np.asarray(cfg.workspace_max)
    grid = cfg.grid()
    worst = 0.0
    for n in sizes:
        pts = rng.uniform(lo, hi, size=(n, cfg.dim))
        data = Dataset([Observation(x, float(rng.normal())) for x in pts])
        rec = recursive_predict(build_state(data, kernel), data, kernel, grid)
        ref = batch_predict(data, kernel, grid)
        dm = float(np.abs(rec.mean - ref.mean).max())
        dv = float(np.abs(rec.variance - ref.variance).max())
        worst = max(worst, dm, dv)
        print(json.dumps({"n": n, "max_mean_diff": dm, "max_var_diff": dv, "ok": max(dm, dv) < tol}))
    return EXIT_OK if worst < tol else EXIT_NUMERICAL


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_oracle(cfg, [int(s) for s in args.sizes.split(",")])
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as err:
        print(f"ERROR: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, SimulationError, ArithmeticError) as err:
        print(f"NUMERICAL ERROR: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
