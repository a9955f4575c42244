"""Command-line entry point: ``wecfarm {run,compare,landscape,qfactor,layout-eval}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .farm import LayoutError, PlacementError, read_layout
from .harness import (
    DEFAULT_PTO,
    ConfigError,
    ExperimentConfig,
    landscape,
    load_config,
    penalty_breakdown,
    run_experiment,
    run_method,
    shared_pto_power,
    write_landscape,
    write_run,
)
from .hydro import EvaluationError, farm_power
from .scenario import ScenarioError, load_scenario

# CLI flag -> ExperimentConfig field
_FLAG_FIELDS = {
    "scenario": "scenario",
    "n": "n",
    "method": "methods",
    "methods": "methods",
    "runs": "runs",
    "seed": "seed",
    "budget": "budget",
    "out": "out",
    "workers": "workers",
    "step": "step",
    "layout": "layout",
}


def _common(parser, *flags):
    for flag in flags:
        if flag == "scenario":
            parser.add_argument("--scenario", help="scenario file or bundled name (default perth_like.scn)")
        elif flag == "n":
            parser.add_argument("--n", type=int, help="number of buoys")
        elif flag == "method":
            parser.add_argument("--method", help="registered method name")
        elif flag == "methods":
            parser.add_argument("--methods", help="comma-separated method names (default: all)")
        elif flag == "runs":
            parser.add_argument("--runs", type=int, help="runs per method (seeds seed..seed+runs-1)")
        elif flag == "seed":
            parser.add_argument("--seed", type=int, help="base seed")
        elif flag == "budget":
            parser.add_argument("--budget", type=int, help="evaluations per run (default 6000 for n<=4, else 3000)")
        elif flag == "out":
            parser.add_argument("--out", help="output directory or file")
        elif flag == "workers":
            parser.add_argument("--workers", type=int, help="parallel worker processes")
        elif flag == "step":
            parser.add_argument("--step", type=float, help="PTO lattice step (default 10000)")
        elif flag == "layout":
            parser.add_argument("--layout", help="layout file")
    parser.add_argument("--config", help="flat key=value config file; explicit flags override it")


def build_parser():
    parser = argparse.ArgumentParser(prog="wecfarm", description="Wave-energy farm layout and PTO optimization.")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run one method for one seed"),
            "scenario", "n", "method", "seed", "budget", "out")
    _common(sub.add_parser("compare", help="run a method x seed matrix and tabulate"),
            "scenario", "n", "methods", "runs", "seed", "budget", "out", "workers")
    _common(sub.add_parser("landscape", help="shared-PTO power grid for a layout"),
            "scenario", "layout", "step", "out")
    _common(sub.add_parser("qfactor", help="farm power, per-buoy power and q-factor of a layout"),
            "scenario", "layout")
    _common(sub.add_parser("layout-eval", help="fitness and penalty breakdown of a layout"),
            "scenario", "layout")
    return parser


def _config(args):
    config = ExperimentConfig()
    if args.config:
        config = load_config(args.config, config)
    overrides = {}
    for flag, name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    return replace(config, **overrides) if overrides else config


def _layout(config):
    if not config.layout:
        raise ConfigError("--layout is required")
    layout, _ = read_layout(config.layout)
    return layout


def _cmd_run(config, out):
    if len(config.methods) != 1:
        raise ConfigError("run takes exactly one --method")
    method = config.methods[0]
    record = run_method(config, method, config.seed)
    stem = write_run(record, config.out, config)
    out.write(f"{method} seed={record.seed} evaluations={record.evaluations} "
              f"best_fitness={record.best_fitness!r} wall_seconds={record.wall_seconds:.2f}\n")
    out.write(f"wrote {stem}.*\n")
    return 0


def _cmd_compare(config, out):
    def progress(record):
        out.write(f"{record.method} seed={record.seed} best={record.best_fitness!r}\n")
        out.flush()

    result = run_experiment(config, progress)
    if result.table is not None:
        for m in result.table.methods:
            s = result.table.stats[m]
            out.write(f"{m:>10}  max={s.max:.6g} median={s.median:.6g} mean={s.mean:.6g} std={s.std:.4g}\n")
    out.write(f"wrote {config.out}\n")
    return 130 if result.interrupted else 0


def _cmd_landscape(config, out):
    layout = _layout(config)
    bounds = config.bounds() if config.n == layout.n else replace(config, n=layout.n).bounds()
    model, scenario = config.model(), load_scenario(config.scenario)
    k_axis, d_axis, grid = landscape(model, scenario, layout, bounds, config.step)
    target = Path(config.out)
    if target.suffix.lower() != ".csv":
        target.mkdir(parents=True, exist_ok=True)
        target = target / "landscape.csv"
    write_landscape(target, k_axis, d_axis, grid)
    i, j = np.unravel_index(int(np.argmax(grid)), grid.shape)
    best_k, best_d, best_p = float(k_axis[i]), float(d_axis[j]), float(grid[i, j])
    default = shared_pto_power(model, scenario, layout, *DEFAULT_PTO)
    out.write(f"grid {k_axis.size} x {d_axis.size}; best k={best_k!r} d={best_d!r} power={best_p!r}\n")
    out.write(f"default k={DEFAULT_PTO[0]!r} d={DEFAULT_PTO[1]!r} power={default!r}\n")
    out.write(f"wrote {target}\n")
    return 0


def _cmd_qfactor(config, out):
    layout = _layout(config)
    result = farm_power(config.model(), load_scenario(config.scenario), layout, q_factor=True)
    out.write(f"total_power={result.total_power!r}\n")
    for i, p in enumerate(result.per_buoy_power):
        out.write(f"buoy {i} power={float(p)!r}\n")
    out.write(f"q={result.q_factor!r}\n")
    return 0


def _cmd_layout_eval(config, out):
    layout = _layout(config)
    bounds = replace(config, n=layout.n).bounds()
    result = farm_power(config.model(), load_scenario(config.scenario), layout, q_factor=False)
    info = penalty_breakdown(layout, bounds, config.paper_literal)
    out.write(f"power={result.total_power!r}\n")
    out.write(f"violation={info['violation']!r}\n")
    out.write(f"penalty={info['penalty']!r}\n")
    out.write(f"fitness={result.total_power - info['penalty']!r}\n")
    for i, j, dist in info["close_pairs"]:
        out.write(f"close pair {i}-{j} distance={dist!r}\n")
    for i, short in info["outside"]:
        out.write(f"buoy {i} outside box by {short!r}\n")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "landscape": _cmd_landscape,
    "qfactor": _cmd_qfactor,
    "layout-eval": _cmd_layout_eval,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
        return _COMMANDS[args.command](config, out)
    except (ConfigError, ScenarioError, LayoutError, PlacementError, EvaluationError, FileNotFoundError) as exc:
        print(f"wecfarm: error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("wecfarm: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
