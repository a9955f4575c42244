"""Experiment orchestration: method registry, config files, runs, tables and grids.

Everything written to disk is a deterministic function of the config and
base seed. Wall-clock timings are therefore kept in memory (and printed by
the CLI) but never persisted.
"""

from __future__ import annotations

import csv
import io
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .farm import Evaluator, FarmBounds, _box_shortfall, distance_penalty, write_layout
from .hydro import HydroModel, farm_power
from .optimizers import (
    OptimizerConfig,
    run_cma_es,
    run_de,
    run_nm_mutation,
    run_one_plus_one,
    run_pso,
)
from .scenario import load_scenario
from .stats import summarize
from .strategies import (
    AlternatingConfig,
    LsConfig,
    SlsConfig,
    run_alternating,
    run_dual_de,
    run_ls_nm,
    run_sls_nm,
    run_sls_nm_b,
)

__all__ = [
    "DEFAULT_BUDGETS",
    "METHODS",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "convergence_table",
    "default_budget",
    "landscape",
    "landscape_axes",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_method",
    "penalty_breakdown",
    "shared_pto_power",
    "write_landscape",
    "write_run",
]

DEFAULT_BUDGETS = {4: 6000, 16: 3000}
DEFAULT_PTO = (407510.0, 97412.0)


class ConfigError(ValueError):
    pass


def _baseline(runner, method):
    def run(evaluator, cfg, seed):
        config = OptimizerConfig(
            method=method,
            seed=seed,
            budget=cfg.budget,
            nm_max_eval=cfg.nm_max_eval,
            pso_inertia_floor=cfg.pso_inertia_floor,
            ea_per_buoy_mutation=cfg.ea_per_buoy_mutation,
        )
        return runner(evaluator, config)

    return run


def _alternating(phase, runner=run_alternating):
    def run(evaluator, cfg, seed):
        return runner(evaluator, AlternatingConfig(phase, seed=seed, iterations=cfg.alt_iter))

    return run


def _ls(samples):
    def run(evaluator, cfg, seed):
        return run_ls_nm(evaluator, LsConfig(samples, seed=seed))

    return run


def _sls(start, backtracking="none"):
    def run(evaluator, cfg, seed):
        config = SlsConfig(
            seed=seed,
            start=start,
            radius_band=cfg.sls_radius_band,
            backtracking=backtracking,
            single_pass=cfg.boa_single_pass,
        )
        if backtracking == "none":
            return run_sls_nm(evaluator, config)
        return run_sls_nm_b(evaluator, config)

    return run


METHODS = {
    "cma-es": _baseline(run_cma_es, "cma-es"),
    "de": _baseline(run_de, "de"),
    "pso": _baseline(run_pso, "pso"),
    "1+1ea": _baseline(run_one_plus_one, "1+1ea"),
    "nm-m": _baseline(run_nm_mutation, "nm-m"),
    "cmaes-nm": _alternating("cma-es"),
    "de-nm": _alternating("de"),
    "1+1ea-nm": _alternating("1+1ea"),
    "dual-de": _alternating("de-dual", run_dual_de),
    "ls-nm-16": _ls(16),
    "ls-nm-32": _ls(32),
    "ls-nm-64": _ls(64),
    "sls-nm-c": _sls("C"),
    "sls-nm-br": _sls("BR"),
    "sls-nm-r": _sls("r"),
    "sls-nm-b1": _sls("C", "B1"),
    "sls-nm-b2": _sls("C", "B2"),
}

PLACEMENT_METHODS = tuple(m for m in METHODS if m.startswith(("ls-nm", "sls-nm")))


def default_budget(n):
    return DEFAULT_BUDGETS.get(n, 6000 if n <= 4 else 3000)


@dataclass
class ExperimentConfig:
    """Settings for one experiment; every field has a config-file key.

    Run ``r`` of each method uses seed ``seed + r``. `budget` of ``None``
    uses the desk-scale default for `n`.
    """

    scenario: str = "perth_like.scn"
    n: int = 4
    methods: tuple = tuple(METHODS)
    runs: int = 10
    seed: int = 0
    budget: int | None = None
    wall_seconds: float | None = None
    out: str = "results"
    workers: int = 1
    step: float = 10000.0
    layout: str | None = None
    hydro: dict = field(default_factory=dict)
    paper_literal: bool = False
    ea_per_buoy_mutation: bool = False
    pso_inertia_floor: float = 0.4
    nm_max_eval: int = 500
    alt_iter: int | None = None
    sls_radius_band: float = 100.0
    boa_single_pass: bool = False

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = tuple(m.strip() for m in self.methods.split(",") if m.strip())
        self.methods = tuple(self.methods)
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown method(s): {', '.join(unknown)}")
        if not self.methods:
            raise ConfigError("no methods selected")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.budget is not None and self.budget < 0:
            raise ConfigError("budget must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.step <= 0:
            raise ConfigError("step must be positive")
        bad = set(self.hydro) - _HYDRO_KEYS
        if bad:
            raise ConfigError(f"unknown hydro parameter(s): {', '.join(sorted(bad))}")

    @property
    def effective_budget(self):
        return default_budget(self.n) if self.budget is None else self.budget

    def model(self):
        return HydroModel(**self.hydro)

    def bounds(self):
        return FarmBounds(self.n)


_HYDRO_KEYS = {"mass", "a0", "b0", "omega0", "f0"}


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text):
    return None if text.strip().lower() in ("", "none", "default") else int(text)


def _optional_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


# config-file key -> (ExperimentConfig field, parser)
CONFIG_KEYS = {
    "scenario": ("scenario", str),
    "n": ("n", int),
    "method": ("methods", str),
    "methods": ("methods", str),
    "runs": ("runs", int),
    "seed": ("seed", int),
    "budget": ("budget", _optional_int),
    "budget.wall_seconds": ("wall_seconds", _optional_float),
    "out": ("out", str),
    "workers": ("workers", int),
    "step": ("step", float),
    "layout": ("layout", str),
    "penalty.paper_literal": ("paper_literal", _bool),
    "ea.per_buoy_mutation": ("ea_per_buoy_mutation", _bool),
    "pso.inertia_floor": ("pso_inertia_floor", float),
    "nm.max_eval": ("nm_max_eval", int),
    "alt.iter": ("alt_iter", _optional_int),
    "sls.radius_band": ("sls_radius_band", float),
    "boa.single_pass": ("boa_single_pass", _bool),
}


def parse_config(text, base=None, source="<config>"):
    """Parse flat ``key = value`` text into an `ExperimentConfig`.

    ``#`` starts a comment. ``hydro.<name>`` keys override the hydro model
    parameters (mass, a0, b0, omega0, f0).
    """
    values = {}
    hydro = dict(base.hydro) if base is not None else {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key.startswith("hydro."):
                hydro[key[len("hydro."):]] = float(value)
                continue
            if key not in CONFIG_KEYS:
                raise ConfigError(f"unknown key {key!r}")
            name, parse = CONFIG_KEYS[key]
            values[name] = parse(value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    values["hydro"] = hydro
    if base is None:
        return ExperimentConfig(**values)
    return replace(base, **values)


def load_config(path, base=None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base, str(path))


def run_method(config, method, seed):
    """Run one (method, seed) pair under `config`; returns its RunRecord."""
    scenario = load_scenario(config.scenario)
    evaluator = Evaluator(
        config.model(),
        scenario,
        config.bounds(),
        max_evaluations=config.effective_budget,
        wall_seconds=config.wall_seconds,
        paper_literal=config.paper_literal,
    )
    record = METHODS[method](evaluator, config, seed)
    record.method = method
    record.extras["failures"] = evaluator.failures
    record.extras["best_index"] = evaluator.best_index
    return record


def _job(args):
    config, method, seed = args
    return run_method(config, method, seed)


def _fmt(value):
    return repr(float(value))


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _scalar_extras(extras):
    out = {}
    for key in sorted(extras):
        value = extras[key]
        if isinstance(value, (bool, int, str)):
            out[key] = str(value)
        elif isinstance(value, float):
            out[key] = _fmt(value)
        elif isinstance(value, list) and all(isinstance(v, (int, str)) for v in value):
            out[key] = ",".join(str(v) for v in value)
    return out


def write_run(record, directory, config):
    """Write ``<method>_seed<seed>`` trace CSV, layout and metadata files into `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = directory / f"{record.method}_seed{record.seed}"
    rows = [(i + 1, _fmt(v)) for i, v in enumerate(record.trace)]
    Path(f"{stem}.trace.csv").write_text(_csv_text(["evaluation", "best_fitness"], rows), encoding="utf-8")
    scenario_name = Path(config.scenario).stem
    if record.best_layout is not None:
        write_layout(record.best_layout, f"{stem}.lay", scenario_name)
    meta = {
        "method": record.method,
        "seed": str(record.seed),
        "n": str(config.n),
        "scenario": scenario_name,
        "budget": str(config.effective_budget),
        "evaluations": str(record.evaluations),
        "best_fitness": _fmt(record.best_fitness),
    }
    for key, value in _scalar_extras(record.extras).items():
        meta[f"extra.{key}"] = value
    Path(f"{stem}.meta").write_text("".join(f"{k}={v}\n" for k, v in meta.items()), encoding="utf-8")
    return stem


def convergence_table(traces, length=None):
    """Mean best-so-far across runs at matched evaluation counts.

    Runs that stopped early carry their final value forward. The mean is
    ``nan`` at counts where any run has no finite best yet.
    """
    if not traces:
        return np.zeros(0)
    length = length or max(len(t) for t in traces)
    stacked = np.full((len(traces), length), -math.inf)
    for i, t in enumerate(traces):
        t = np.asarray(t, dtype=float)
        if t.size:
            stacked[i, : t.size] = t
            stacked[i, t.size :] = t[-1]
    finite = np.all(np.isfinite(stacked), axis=0)
    means = np.full(length, math.nan)
    if finite.any():
        means[finite] = stacked[:, finite].mean(axis=0)
    return means


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: dict  # method -> list of RunRecord in seed order
    table: object
    interrupted: bool = False


def _write_tables(config, records, out):
    groups = {m: [r.best_fitness for r in recs] for m, recs in records.items() if recs}
    if not groups:
        return None
    table = summarize(groups)
    rows = []
    for m in table.methods:
        s = table.stats[m]
        rows.append([m, s.runs, _fmt(s.max), _fmt(s.min), _fmt(s.mean), _fmt(s.median), _fmt(s.std)])
    (out / "summary.csv").write_text(
        _csv_text(["method", "runs", "max", "min", "mean", "median", "std"], rows), encoding="utf-8"
    )
    prow = [[a] + ["" if a == b else _fmt(table.pvalues[(a, b)]) for b in table.methods] for a in table.methods]
    (out / "pvalues.csv").write_text(_csv_text(["method", *table.methods], prow), encoding="utf-8")

    curves = {m: convergence_table([r.trace for r in records[m]]) for m in table.methods}
    length = max((c.size for c in curves.values()), default=0)
    crow = []
    for i in range(length):
        row = [i + 1]
        for m in table.methods:
            c = curves[m]
            v = c[i] if i < c.size else (c[-1] if c.size else math.nan)
            row.append("" if math.isnan(v) else _fmt(v))
        crow.append(row)
    (out / "convergence.csv").write_text(_csv_text(["evaluation", *table.methods], crow), encoding="utf-8")
    return table


def run_experiment(config, progress=None):
    """Run every (method, seed) pair and write per-run files plus tables.

    Output directory layout::

        <out>/runs/<method>_seed<seed>.{trace.csv,lay,meta}
        <out>/summary.csv  <out>/pvalues.csv  <out>/convergence.csv

    Runs execute on `config.workers` processes; results are collected and
    written in (method, seed) order so the files do not depend on the
    worker count. On ``KeyboardInterrupt`` the completed runs are still
    tabulated and ``interrupted`` is set.
    """
    out = Path(config.out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    jobs = [(config, m, config.seed + r) for m in config.methods for r in range(config.runs)]
    records = {m: [] for m in config.methods}
    interrupted = False

    def collect(record):
        write_run(record, out / "runs", config)
        records[record.method].append(record)
        if progress is not None:
            progress(record)

    try:
        if config.workers == 1:
            for job in jobs:
                collect(_job(job))
        else:
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=config.workers, mp_context=ctx) as pool:
                futures = [pool.submit(_job, job) for job in jobs]
                try:
                    for fut in futures:
                        collect(fut.result())
                except KeyboardInterrupt:
                    for fut in futures:
                        fut.cancel()
                    raise
    except KeyboardInterrupt:
        interrupted = True
    table = _write_tables(config, records, out)
    return ExperimentResult(config, records, table, interrupted)


def landscape_axes(bounds, step=10000.0):
    """Lattice ``lower + i * step`` (``i = 0 .. floor((upper - lower) / step)``) for k and d."""
    if step <= 0:
        raise ValueError("step must be positive")
    axes = []
    for lo, hi in zip(bounds.pto_lower, bounds.pto_upper):
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        axes.append(lo + step * np.arange(count, dtype=float))
    return axes[0], axes[1]


def landscape(model, scenario, layout, bounds, step=10000.0):
    """Total farm power with one shared (k, d) for every buoy over the PTO lattice.

    Returns ``(k_axis, d_axis, power)`` with ``power[i, j]`` at
    ``(k_axis[i], d_axis[j])``.
    """
    k_axis, d_axis = landscape_axes(bounds, step)
    grid = np.empty((k_axis.size, d_axis.size))
    for i, k in enumerate(k_axis):
        for j, d in enumerate(d_axis):
            grid[i, j] = shared_pto_power(model, scenario, layout, k, d)
    return k_axis, d_axis, grid


def shared_pto_power(model, scenario, layout, k, d):
    """Total power of `layout` with every buoy set to ``(k, d)``."""
    ptos = np.tile([float(k), float(d)], (layout.n, 1))
    return farm_power(model, scenario, layout.with_ptos(ptos), q_factor=False).total_power


def write_landscape(path, k_axis, d_axis, grid):
    """Write the grid as ``k,d,power`` rows, k-outer (row-major)."""
    rows = [(_fmt(k), _fmt(d), _fmt(grid[i, j])) for i, k in enumerate(k_axis) for j, d in enumerate(d_axis)]
    Path(path).write_text(_csv_text(["k", "d", "power"], rows), encoding="utf-8")


def penalty_breakdown(layout, bounds, paper_literal=False):
    """Per-pair distance and per-buoy box shortfalls behind `distance_penalty`."""
    pos = layout.positions
    pairs = []
    for i in range(layout.n):
        for j in range(i + 1, layout.n):
            dist = float(np.hypot(*(pos[i] - pos[j])))
            if dist < bounds.safety:
                pairs.append((i, j, dist))
    outside = [(i, float(s)) for i, s in enumerate(_box_shortfall(pos, bounds)) if s > 0]
    violation, penalty = distance_penalty(pos, bounds, paper_literal)
    return {"violation": violation, "penalty": penalty, "close_pairs": pairs, "outside": outside}
