"""Experiment configs and their CSV outputs, figure data included.

Every output directory holds one CSV per (scenario, quantity) plus a
``manifest.json`` recording the resolved config together with seeds and
tool version. Floats are written in shortest round-trip form, and
the manifest carries no timestamps, so a rerun is byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .dist import (
    DEFAULT_CAPACITY_GRID,
    blocking_probability,
    capacity_cdf,
    capacity_cdf_callable,
    cdf_gamma_i,
    mean_capacity,
    pt_cdf,
)
from .mc import McConfig, ks_distance, run as mc_run
from .model import ScenarioId, SystemParams, db_to_linear, make_params_from_ratios

SCHEMA_VERSION = 1
CSV_COLUMNS = ("scenario", "c1", "c2", "alpha", "rho", "kind", "x", "value", "method", "err", "seed")
MODES = ("analytic", "montecarlo", "both")
QUANTITIES = ("capacity_cdf", "blocking", "mean_capacity", "pt_cdf")
OUTPUT_ENV = "COGCAP_OUTPUT_DIR"
FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")
_PARAM_FIELDS = {f.name for f in dataclasses.fields(SystemParams)}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("invalid experiment config: " + "; ".join(self.problems))


class SchemaMismatch(ValueError):
    pass


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "results"))


def _convert_db(overrides: dict) -> dict:
    """Replace ``<field>_db`` keys by the linear ``<field>`` value."""
    out = {}
    problems = []
    for key, value in overrides.items():
        name = key[:-3] if key.endswith("_db") else key
        if name not in _PARAM_FIELDS or name in ("alpha", "rho"):
            problems.append(f"unknown parameter override {key!r}")
            continue
        if name in out:
            problems.append(f"parameter {name!r} given twice")
            continue
        out[name] = db_to_linear(float(value)) if key.endswith("_db") else float(value)
    if problems:
        raise ConfigError(problems)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    scenarios: tuple
    c1: tuple = (0.1,)
    c2: tuple = (0.1,)
    alpha: float = 0.1
    rho: float = 0.9
    mode: str = "analytic"
    quantities: tuple = ("capacity_cdf", "blocking")
    overrides: dict = field(default_factory=dict)
    output_dir: Optional[str] = None
    mc: McConfig = McConfig()
    capacity_grid: tuple = (0.0, 8.0, 161)  # start, stop, number of points
    append: bool = False

    def __post_init__(self):
        problems = []
        if not self.scenarios:
            problems.append("at least one scenario is required")
        for s in self.scenarios:
            try:
                ScenarioId.parse(s)
            except ValueError as exc:
                problems.append(str(exc))
        if not self.c1 or not self.c2:
            problems.append("c1 and c2 grids must be non-empty")
        if any(not (v > 0) for v in (*self.c1, *self.c2)):
            problems.append("c1 and c2 values must be > 0")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}")
        bad = [q for q in self.quantities if q not in QUANTITIES]
        if bad or not self.quantities:
            problems.append(f"quantities must be a non-empty subset of {QUANTITIES}")
        lo, hi, num = self.capacity_grid
        if not (0 <= lo < hi and int(num) >= 2):
            problems.append("capacity_grid must be (start >= 0, stop > start, num >= 2)")
        if problems:
            raise ConfigError(problems)
        # parameter validation for every grid point, collected in one pass
        for c1 in self.c1:
            for c2 in self.c2:
                self.params_for(c1, c2)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)} | {"scenario"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"unknown config key {k!r}" for k in unknown])
        if "scenario" in data:
            data.setdefault("scenarios", [data.pop("scenario")])
        if "scenarios" not in data:
            raise ConfigError("config needs 'scenarios'")
        kwargs = {}
        try:
            kwargs["scenarios"] = tuple(ScenarioId.parse(s).value for s in _as_list(data.pop("scenarios")))
            for key in ("c1", "c2"):
                if key in data:
                    kwargs[key] = tuple(float(v) for v in _as_list(data.pop(key)))
            for key in ("alpha", "rho"):
                if key in data:
                    kwargs[key] = float(data.pop(key))
            if "quantities" in data:
                kwargs["quantities"] = tuple(_as_list(data.pop("quantities")))
            if "overrides" in data:
                kwargs["overrides"] = _convert_db(dict(data.pop("overrides")))
            if "mc" in data:
                mc = dict(data.pop("mc"))
                mc.pop("scenario", None)
                kwargs["mc"] = McConfig(**mc)
            if "capacity_grid" in data:
                grid = data.pop("capacity_grid")
                if isinstance(grid, dict):
                    grid = (grid["start"], grid["stop"], grid["num"])
                kwargs["capacity_grid"] = (float(grid[0]), float(grid[1]), int(grid[2]))
        except (TypeError, KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
        kwargs.update(data)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        """Fully resolved, JSON-ready form; ``from_dict`` round-trips it."""
        return {
            "scenarios": list(self.scenarios),
            "c1": list(self.c1),
            "c2": list(self.c2),
            "alpha": self.alpha,
            "rho": self.rho,
            "mode": self.mode,
            "quantities": list(self.quantities),
            "overrides": dict(self.overrides),
            "output_dir": self.output_dir,
            "mc": {"n_samples": self.mc.n_samples, "seed": self.mc.seed,
                   "stream_count": self.mc.stream_count},
            "capacity_grid": list(self.capacity_grid),
            "append": self.append,
        }

    def params_for(self, c1: float, c2: float) -> SystemParams:
        return make_params_from_ratios(c1, c2, alpha=self.alpha, rho=self.rho, **self.overrides)

    def grid(self) -> np.ndarray:
        lo, hi, num = self.capacity_grid
        return np.linspace(lo, hi, int(num))


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    c1: float
    c2: float
    alpha: float
    rho: float
    kind: str
    x: float
    value: float
    method: str
    err: float
    seed: Optional[int] = None

    def cells(self) -> list:
        return [self.scenario, _fmt(self.c1), _fmt(self.c2), _fmt(self.alpha), _fmt(self.rho),
                self.kind, _fmt(self.x), _fmt(self.value), self.method, _fmt(self.err),
                "" if self.seed is None else str(self.seed)]


def _fmt(v) -> str:
    return repr(float(v))


class ResultSet:
    """Rows grouped by output file, in insertion order."""

    def __init__(self):
        self.files: dict[str, list[ResultRow]] = {}

    def add(self, name: str, rows: Iterable[ResultRow]):
        self.files.setdefault(name, []).extend(rows)

    def write(self, out_dir: Path, manifest: dict, append: bool = False) -> list[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest_path = out_dir / "manifest.json"
        if append and manifest_path.exists():
            old = json.loads(manifest_path.read_text())
            if old.get("schema_version") != SCHEMA_VERSION:
                raise SchemaMismatch(
                    f"cannot append schema {SCHEMA_VERSION} rows to schema "
                    f"{old.get('schema_version')!r} results in {out_dir}")
        written = []
        for name, rows in self.files.items():
            path = out_dir / f"{name}.csv"
            exists = append and path.exists()
            if exists:
                with path.open(newline="") as fh:
                    header = next(csv.reader(fh), None)
                if tuple(header or ()) != CSV_COLUMNS:
                    raise SchemaMismatch(f"{path} has a different column layout")
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            if not exists:
                w.writerow(CSV_COLUMNS)
            for row in rows:
                w.writerow(row.cells())
            with path.open("a" if exists else "w", newline="") as fh:
                fh.write(buf.getvalue())
            written.append(path)
        manifest = dict(manifest, schema_version=SCHEMA_VERSION, tool_version=__version__,
                        files=sorted(p.name for p in written))
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return written


# ---------------------------------------------------------------------------
# single experiment
# ---------------------------------------------------------------------------


def _rows(scenario, params, kind, xs, values, method, errs, seed=None):
    errs = np.broadcast_to(np.asarray(errs, dtype=float), np.shape(xs))
    c1, c2 = round(params.c1, 12), round(params.c2, 12)  # strip ratio round-off
    return [ResultRow(scenario, c1, c2, params.alpha, params.rho, kind,
                      float(x), float(v), method, float(e), seed)
            for x, v, e in zip(xs, values, errs)]


def _binomial_err(p, n):
    p = np.asarray(p, dtype=float)
    return np.sqrt(p * (1.0 - p) / n)


def _evaluate(cfg: ExperimentConfig, results: ResultSet, scenario: ScenarioId,
              params: SystemParams):
    s = scenario.value
    grid = cfg.grid()
    want_mc = cfg.mode in ("montecarlo", "both") or (
        scenario is ScenarioId.S5 and ("capacity_cdf" in cfg.quantities
                                       or "mean_capacity" in cfg.quantities
                                       or "pt_cdf" in cfg.quantities))
    want_analytic = cfg.mode in ("analytic", "both")
    seed = cfg.mc.seed
    summary = None
    if want_mc:
        mcfg = cfg.mc.replace(scenario=scenario)
        summary = mc_run(params, mcfg, capacity_grid=grid,
                         keep_samples=cfg.mode == "both" and scenario is not ScenarioId.S5)
    n = cfg.mc.n_samples

    if "capacity_cdf" in cfg.quantities:
        rows = []
        if want_analytic and scenario is not ScenarioId.S5:
            curve = capacity_cdf(scenario, params, grid)
            rows += _rows(s, params, "capacity_cdf", grid, curve.values, "analytic", curve.quad_error)
        if summary is not None:
            curve = summary.empirical_capacity_cdf
            rows += _rows(s, params, "capacity_cdf", grid, curve.values, "mc",
                          _binomial_err(curve.values, n), seed)
        results.add(f"{s}_capacity_cdf", rows)
        if cfg.mode == "both" and scenario is not ScenarioId.S5:
            f = capacity_cdf_callable(scenario, params,
                                      y_max=max(12.0, float(summary.capacity_samples[-1]) + 0.1))
            ks = ks_distance(summary.capacity_samples, f, presorted=True)
            results.add(f"{s}_ks_capacity",
                        _rows(s, params, "ks_capacity", [0.0], [ks], "mc", [1.36 / math.sqrt(n)], seed))

    if "blocking" in cfg.quantities:
        rows = []
        if want_analytic or summary is None:
            rows += _rows(s, params, "blocking", [0.0], [blocking_probability(scenario, params)],
                          "analytic", [0.0])
        if summary is not None:
            b = summary.blocking_rate
            rows += _rows(s, params, "blocking", [0.0], [b], "mc", [_binomial_err(b, n)], seed)
        results.add(f"{s}_blocking", rows)

    if "mean_capacity" in cfg.quantities:
        rows = []
        if want_analytic and scenario is not ScenarioId.S5:
            rows += _rows(s, params, "mean_capacity", [0.0], [mean_capacity(scenario, params)],
                          "analytic", [0.0])
        if summary is not None:
            rows += _rows(s, params, "mean_capacity", [0.0], [summary.mean_capacity], "mc",
                          [summary.mean_capacity_se], seed)
        results.add(f"{s}_mean_capacity", rows)

    if "pt_cdf" in cfg.quantities:
        rows = []
        p_grid = np.linspace(0.0, params.Pm, 101)
        if want_analytic and scenario is not ScenarioId.S5:
            rows += _rows(s, params, "pt_cdf", p_grid, pt_cdf(scenario, params, p_grid),
                          "analytic", 0.0)
        if summary is not None:
            v = summary.pt_cdf.values
            rows += _rows(s, params, "pt_cdf", p_grid, v, "mc", _binomial_err(v, n), seed)
        results.add(f"{s}_pt_cdf", rows)


def _manifest(cfg: ExperimentConfig, extra: Optional[dict] = None) -> dict:
    resolved = []
    for c1 in cfg.c1:
        for c2 in cfg.c2:
            resolved.append(cfg.params_for(c1, c2).to_dict())
    out = {"config": cfg.to_dict(), "resolved_params": resolved,
           "seeds": {"mc_seed": cfg.mc.seed, "stream_count": cfg.mc.stream_count}}
    if extra:
        out.update(extra)
    return out


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> list[Path]:
    """Evaluate every (scenario, c1, c2) cell and write the CSV files."""
    out_dir = Path(out_dir or cfg.output_dir or default_output_dir())
    results = ResultSet()
    for scenario in cfg.scenarios:
        sid = ScenarioId.parse(scenario)
        for c1 in cfg.c1:
            for c2 in cfg.c2:
                _evaluate(cfg, results, sid, cfg.params_for(c1, c2))
    return results.write(out_dir, _manifest(cfg), append=cfg.append)


def load_config(path) -> ExperimentConfig:
    """Read a config file, or the manifest of an earlier run."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(data, dict) and "config" in data and "schema_version" in data:
        if data["schema_version"] != SCHEMA_VERSION:
            raise SchemaMismatch(f"manifest schema {data['schema_version']!r} is not {SCHEMA_VERSION}")
        data = data["config"]
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

FIG7_C1 = tuple(np.round(np.geomspace(0.01, 1.0, 21), 12))
FIG8_C2 = tuple(np.round(np.linspace(0.05, 0.95, 19), 12))
OUTAGE_LEVEL = 0.5  # bits/s/Hz threshold of the outage curves


def _capacity_figure(results, params_list, scenarios_analytic, mc_scenarios, n, seed, grid):
    for params in params_list:
        for s in scenarios_analytic:
            sid = ScenarioId.parse(s)
            curve = capacity_cdf(sid, params, grid)
            results.add(f"{s}_capacity_cdf",
                        _rows(s, params, "capacity_cdf", grid, curve.values, "analytic",
                              curve.quad_error))
        for s in mc_scenarios:
            summ = mc_run(params, McConfig(n_samples=n, seed=seed, scenario=s), capacity_grid=grid)
            v = summ.empirical_capacity_cdf.values
            results.add(f"{s}_capacity_cdf",
                        _rows(s, params, "capacity_cdf", grid, v, "mc", _binomial_err(v, n), seed))
            results.add(f"{s}_blocking",
                        _rows(s, params, "blocking", [0.0], [summ.blocking_rate], "mc",
                              [_binomial_err(summ.blocking_rate, n)], seed))


def figure_settings(fig_id: str) -> dict:
    """Parameter settings behind each figure (for the manifest and docs)."""
    table = {
        "fig2": {"c1": [0.1], "c2": [0.1], "analytic": ["S1", "S2", "S3", "S4"], "mc": ["S5"]},
        "fig3": {"c1": [0.01], "c2": [0.1], "analytic": ["S1", "S2", "S3", "S4"], "mc": ["S5"]},
        "fig4": {"c1": [0.9], "c2": [0.1], "analytic": ["S1", "S2", "S3", "S4"], "mc": ["S5"],
                 "alpha_variant": 0.096, "variant_scenarios": ["S3", "S4"]},
        "fig5": {"c1": [0.1, 0.9], "c2": [0.1], "analytic": ["S1", "S2"], "mc": ["S1", "S2"]},
        "fig6": {"c1": [0.01], "c2": [0.5, 0.9], "analytic": ["S1", "S2"], "mc": ["S5"]},
        "fig7": {"c1": list(FIG7_C1), "c2": [0.5, 0.9], "analytic": ["S1", "S2"],
                 "outage_level": OUTAGE_LEVEL},
        "fig8": {"c1": [0.1], "c2": list(FIG8_C2), "analytic": ["S1", "S2", "S5"],
                 "rho": [0.9, 0.99], "alpha": [0.1, 0.3]},
    }
    if fig_id not in table:
        raise ConfigError(f"unknown figure {fig_id!r}; expected one of {FIGURES}")
    return table[fig_id]


def reproduce_figure(fig_id: str, out_dir: Optional[Path] = None, n_samples: int = 1_000_000,
                     seed: int = McConfig().seed) -> list[Path]:
    """Write the data series of one figure to ``out_dir/<fig_id>/``."""
    settings = figure_settings(fig_id)
    out = Path(out_dir or default_output_dir()) / fig_id
    results = ResultSet()
    grid = DEFAULT_CAPACITY_GRID
    n = int(n_samples)

    if fig_id in ("fig2", "fig3", "fig4", "fig6"):
        params_list = [make_params_from_ratios(c1, c2) for c1 in settings["c1"] for c2 in settings["c2"]]
        _capacity_figure(results, params_list, settings["analytic"], settings["mc"], n, seed, grid)
        if fig_id == "fig4":
            variants = [p.replace(alpha=settings["alpha_variant"]) for p in params_list]
            _capacity_figure(results, variants, settings["variant_scenarios"], [], n, seed, grid)
    elif fig_id == "fig5":
        p_grid = np.linspace(0.0, 1.0, 101)
        for c1 in settings["c1"]:
            params = make_params_from_ratios(c1, settings["c2"][0])
            for s in settings["analytic"]:
                results.add(f"{s}_pt_cdf", _rows(s, params, "pt_cdf", p_grid,
                                                 pt_cdf(s, params, p_grid), "analytic", 0.0))
            for s in settings["mc"]:
                summ = mc_run(params, McConfig(n_samples=n, seed=seed, scenario=s),
                              pt_grid=p_grid * params.Pm)
                v = summ.pt_cdf.values
                results.add(f"{s}_pt_cdf", _rows(s, params, "pt_cdf", p_grid, v, "mc",
                                                 _binomial_err(v, n), seed))
                results.add(f"{s}_max_power", _rows(s, params, "max_power_prob", [params.Pm],
                                                    [summ.max_power_rate], "mc",
                                                    [_binomial_err(summ.max_power_rate, n)], seed))
    elif fig_id == "fig7":
        level = np.exp2(settings["outage_level"]) - 1.0
        for c2 in settings["c2"]:
            for s in settings["analytic"]:
                rows = []
                for c1 in settings["c1"]:
                    params = make_params_from_ratios(c1, c2)
                    rows += _rows(s, params, "outage_prob", [settings["outage_level"]],
                                  [cdf_gamma_i(s, params, level)], "analytic", [0.0])
                results.add(f"{s}_outage_prob", rows)
    else:  # fig8
        for rho in settings["rho"]:
            for alpha in settings["alpha"]:
                for s in settings["analytic"]:
                    if s != "S5" and rho != settings["rho"][0]:
                        continue  # S1/S2 blocking does not depend on rho
                    rows = []
                    for c2 in settings["c2"]:
                        params = make_params_from_ratios(settings["c1"][0], c2, alpha=alpha, rho=rho)
                        rows += _rows(s, params, "blocking", [c2],
                                      [blocking_probability(s, params)], "analytic", [0.0])
                    results.add(f"{s}_blocking", rows)

    manifest = {"figure": fig_id, "settings": settings,
                "seeds": {"mc_seed": seed, "stream_count": McConfig().stream_count},
                "n_samples": n, "defaults": make_params_from_ratios(1.0, 1.0).to_dict()}
    return results.write(out, manifest)


def blocking_sweep(scenario, c2_values, c1: float = 0.1, alpha: float = 0.1,
                   rho: float = 0.9) -> list[ResultRow]:
    sid = ScenarioId.parse(scenario)
    rows = []
    for c2 in c2_values:
        params = make_params_from_ratios(c1, float(c2), alpha=alpha, rho=rho)
        rows += _rows(sid.value, params, "blocking", [float(c2)],
                      [blocking_probability(sid, params)], "analytic", [0.0])
    return rows


def parse_grid(text: str) -> np.ndarray:
    """'a:b:n' -> n evenly spaced points from a to b inclusive."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ConfigError(f"grid {text!r} must look like start:stop:count") from None
    if n < 1:
        raise ConfigError("grid count must be >= 1")
    return np.linspace(a, b, n)


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()
