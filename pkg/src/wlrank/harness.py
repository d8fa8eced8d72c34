"""Scenario configuration, seeded sweeps and report emission.

Config files are YAML with flat dotted keys, for example::

    payment_ratio: 100
    reputation.conservatism: 0.5
    behavior.churn_tolerance: [0.2, 0.05]
    sweep.axes.reputation.default_rank: [0.1, 0.5, 0.9]
    sweep.seeds: [1, 2, 3]
    sweep.include_baseline: true

Nested mappings are flattened to the same dotted keys. Any ``sweep.*`` key
turns the file into a :class:`SweepSpec`. Environment variables named
``WLRANK_<KEY>`` override file values, with dots written as ``__``
(``WLRANK_REPUTATION__CONSERVATISM=0.9``); values are parsed as YAML scalars.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .engine import AgentId, RankState, ReputationParams, Transaction, update_ranks
from .market import BehaviorParams, ConfigurationError, ScenarioConfig, SimulationLog, run_simulation
from .metrics import MetricsReport, evaluate

ENV_PREFIX = "WLRANK_"

# axes that only change how ranks are computed or used; a paired baseline
# ignores them
RANKING_AXES = ("strategy", "threshold")

_SECTIONS = {"reputation": ReputationParams, "behavior": BehaviorParams}
_SWEEP_KEYS = ("sweep.seeds", "sweep.n_seeds", "sweep.include_baseline")


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    axes: tuple[tuple[str, tuple], ...] = ()
    seeds: tuple[int, ...] = (0,)
    include_baseline: bool = False

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("sweep.seeds must not be empty")
        for key, values in self.axes:
            if not values:
                raise ConfigurationError(f"sweep.axes.{key}: needs at least one value")
            for v in values:
                apply_overrides(self.base, {key: v})

    @property
    def cells(self) -> list[dict]:
        keys = [k for k, _ in self.axes]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(v for _, v in self.axes))]


# ---------------------------------------------------------------- config


def config_to_flat(config: ScenarioConfig) -> dict:
    """All settings of ``config`` as dotted keys."""
    flat = {}
    for f in fields(ScenarioConfig):
        value = getattr(config, f.name)
        if f.name in _SECTIONS:
            for g in fields(_SECTIONS[f.name]):
                flat[f"{f.name}.{g.name}"] = getattr(value, g.name)
        else:
            flat[f.name] = value
    return flat


_DEFAULTS = config_to_flat(ScenarioConfig())


def _coerce(key: str, value, default):
    """Check ``value`` against the type of ``default``; lists become tuples."""
    def bad(expected):
        return ConfigurationError(f"{key}: expected {expected}, got {value!r}")

    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise bad("true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise bad("a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(default):
            raise bad(f"a list of {len(default)} numbers")
        return tuple(_coerce(key, v, d) for v, d in zip(value, default))
    # only category_price_ranges has no typed default
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or not all(isinstance(p, (list, tuple)) and len(p) == 2 for p in value):
        raise bad("a list of [min, max] pairs")
    return tuple((float(lo), float(hi)) for lo, hi in value)


def config_from_flat(flat: Mapping) -> ScenarioConfig:
    """Build a validated config; missing keys take defaults, unknown keys fail."""
    unknown = sorted(set(flat) - set(_DEFAULTS))
    if unknown:
        raise ConfigurationError(f"unknown config key(s): {', '.join(unknown)}")
    merged = {k: _coerce(k, flat[k], d) if k in flat else d for k, d in _DEFAULTS.items()}
    top, parts = {}, {name: {} for name in _SECTIONS}
    for key, value in merged.items():
        section, _, name = key.partition(".")
        if name:
            parts[section][name] = value
        else:
            top[key] = value
    try:
        for section, cls in _SECTIONS.items():
            top[section] = cls(**parts[section])
        return ScenarioConfig(**top)
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def apply_overrides(config: ScenarioConfig, overrides: Mapping) -> ScenarioConfig:
    flat = config_to_flat(config)
    flat.update(overrides)
    return config_from_flat(flat)


def _flatten(data: Mapping, prefix: str = "") -> dict:
    out = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def env_overrides(environ: Mapping[str, str]) -> dict:
    out = {}
    for name, raw in sorted(environ.items()):
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower().replace("__", ".")
            try:
                out[key] = yaml.safe_load(raw)
            except yaml.YAMLError as exc:
                raise ConfigurationError(f"{name}: cannot parse value: {exc}") from None
    return out


def derive_seed(base_seed: int, index: int) -> int:
    """Stable 32-bit run seed for the ``index``-th seed of a sweep."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def parse_settings(flat: Mapping) -> ScenarioConfig | SweepSpec:
    settings = dict(flat)
    sweep = {k: settings.pop(k) for k in list(settings) if k.startswith("sweep.")}
    base = config_from_flat(settings)
    if not sweep:
        return base

    axes = []
    for key, values in sweep.items():
        if key.startswith("sweep.axes."):
            name = key[len("sweep.axes."):]
            if name not in _DEFAULTS:
                raise ConfigurationError(f"{key}: unknown config key {name!r}")
            if not isinstance(values, list):
                values = [values]
            axes.append((name, tuple(_coerce(key, v, _DEFAULTS[name]) for v in values)))
        elif key not in _SWEEP_KEYS:
            raise ConfigurationError(f"unknown config key: {key}")

    if "sweep.seeds" in sweep:
        seeds = sweep["sweep.seeds"]
        if not isinstance(seeds, list):
            seeds = [seeds]
        seeds = tuple(_coerce("sweep.seeds", s, 0) for s in seeds)
    else:
        n = _coerce("sweep.n_seeds", sweep.get("sweep.n_seeds", 1), 0)
        if n < 1:
            raise ConfigurationError("sweep.n_seeds must be >= 1")
        seeds = (base.seed,) if n == 1 else tuple(derive_seed(base.seed, i) for i in range(n))
    include_baseline = _coerce("sweep.include_baseline", sweep.get("sweep.include_baseline", False), False)
    return SweepSpec(base=base, axes=tuple(axes), seeds=seeds, include_baseline=include_baseline)


def load_config(path: str | Path | None, environ: Mapping[str, str] | None = None,
                overrides: Mapping | None = None) -> ScenarioConfig | SweepSpec:
    """Read a config file (or none) and apply environment and explicit overrides.

    Precedence, lowest first: defaults, file, environment, ``overrides``.
    """
    flat: dict = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: cannot parse: {exc}") from None
        if data is None:
            data = {}
        if not isinstance(data, Mapping):
            raise ConfigurationError(f"{path}: top level must be a mapping of keys to values")
        flat = _flatten(data)
    if environ is not None:
        flat.update(env_overrides(environ))
    if overrides:
        flat.update(overrides)
    return parse_settings(flat)


def dump_config(config: ScenarioConfig) -> str:
    """Flat YAML text that :func:`load_config` reads back to an equal config."""
    def plain(v):
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        return v
    return yaml.safe_dump({k: plain(v) for k, v in config_to_flat(config).items()}, sort_keys=False)


# ---------------------------------------------------------------- sweeps


def _label(overrides: Mapping) -> str:
    return " ".join(f"{k}={v}" for k, v in overrides.items())


def _is_ranking_axis(key: str) -> bool:
    return key.startswith("reputation.") or key in RANKING_AXES


@dataclass(frozen=True)
class _Task:
    config: ScenarioConfig
    cell: str


def _run_task(task: _Task) -> MetricsReport:
    try:
        report = evaluate(run_simulation(task.config))
    except Exception as exc:  # a failed cell must not abort the sweep
        cfg = task.config
        report = MetricsReport(market_tier=cfg.market_tier, reputation_used=cfg.uses_reputation,
                               strategy=cfg.strategy, payment_ratio=cfg.payment_ratio,
                               periodic_surge=cfg.periodic_surge, seed=cfg.seed,
                               status=f"failed: {type(exc).__name__}: {exc}")
    report.cell = task.cell
    return report


def plan_sweep(spec: SweepSpec) -> list[_Task]:
    """Every (cell, seed) run in report order: baselines first, then cells.

    Each cell runs the same seed list, so baselines and treatments are paired.
    """
    baselines: dict[str, dict] = {}
    cells = []
    for overrides in spec.cells:
        cells.append((_label(overrides) or "base", apply_overrides(spec.base, overrides)))
        if spec.include_baseline:
            scenario = {k: v for k, v in overrides.items() if not _is_ranking_axis(k)}
            label = " ".join(filter(None, ("baseline", _label(scenario))))
            baselines.setdefault(label, scenario)
    planned = [(label, apply_overrides(spec.base, {**sc, "strategy": "no_reputation"}))
               for label, sc in baselines.items()]
    planned += cells
    return [_Task(apply_overrides(cfg, {"seed": s}), label) for label, cfg in planned for s in spec.seeds]


def _baseline_key(report: MetricsReport, tasks_by_cell: Mapping[str, ScenarioConfig]) -> tuple:
    cfg = tasks_by_cell[report.cell]
    flat = config_to_flat(cfg)
    return tuple((k, v) for k, v in flat.items()
                 if not _is_ranking_axis(k) and k != "seed"), report.seed


_METRIC_FIELDS = ("precision", "recall", "f1", "pcc_by_category", "pccg_by_category", "pccb_by_category",
                  "loss_to_scam", "profit_from_scam", "utility", "utility_change", "accuracy", "volume_ratio")


def aggregate(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Mean row over the successful runs of one cell."""
    ok = [r for r in reports if r.status == "ok"]
    first = ok[0] if ok else reports[0]
    mean = MetricsReport.from_dict({**first.to_dict(), "seed": None, "kind": "mean",
                                    "status": "ok" if ok else "failed"})
    for name in _METRIC_FIELDS:
        values = [getattr(r, name) for r in ok if getattr(r, name) is not None]
        setattr(mean, name, math.fsum(values) / len(values) if values else None)
    return mean


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[MetricsReport]:
    """Run every cell for every seed; returns runs and per-cell mean rows.

    Output order depends only on ``spec``, never on ``workers``.
    """
    tasks = plan_sweep(spec)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_task, tasks))
    else:
        reports = [_run_task(t) for t in tasks]

    configs = {t.cell: t.config for t in tasks}
    baseline_utility = {
        _baseline_key(r, configs): r.utility
        for r in reports if not r.reputation_used and r.status == "ok"
    }
    for r in reports:
        if r.reputation_used and r.status == "ok" and r.utility is not None:
            base = baseline_utility.get(_baseline_key(r, configs))
            if base:
                r.utility_change = 100.0 * (r.utility - base) / base

    out = []
    for _, group in itertools.groupby(reports, key=lambda r: r.cell):
        group = list(group)
        out.extend(group)
        if len(group) > 1:
            out.append(aggregate(group))
    return out


def failures(reports: Iterable[MetricsReport]) -> list[MetricsReport]:
    return [r for r in reports if r.status != "ok"]


# ---------------------------------------------------------------- reports


REPORT_COLUMNS = tuple(f.name for f in fields(MetricsReport))


def _cell_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dict):
        return json.dumps({str(k): v for k, v in value.items()}, separators=(",", ":"))
    return str(value)


def format_report(reports: Sequence[MetricsReport], fmt: str) -> str:
    if not reports:
        raise ValueError("no reports to emit")
    if fmt == "json":
        return json.dumps([r.to_dict() for r in reports], indent=1) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([_cell_text(getattr(r, c)) for c in REPORT_COLUMNS])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r} (use csv or json)")


def emit_report(reports: Sequence[MetricsReport], fmt: str, path: str | Path | None) -> None:
    """Write reports as CSV or JSON to ``path`` (stdout when ``None`` or "-")."""
    text = format_report(reports, fmt)
    if path is None or str(path) == "-":
        print(text, end="")
        return
    Path(path).write_text(text, encoding="utf-8")


def read_report(path: str | Path) -> list[MetricsReport]:
    """Parse a JSON report file back into reports."""
    return [MetricsReport.from_dict(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


# ---------------------------------------------------------------- replay


def replay_ranks(transactions: Sequence[Transaction], agents: Iterable[AgentId],
                 params: ReputationParams, days: int) -> list[RankState]:
    """Recompute the rank history of a stored log with other parameters.

    Periods and the initial state match :func:`run_simulation`, so replaying
    with the original parameters reproduces its ranks. Supplier choices in the
    log stay as they were: effects of the new ranks on selection need a full
    re-run.
    """
    ranked = sorted(agents)
    state = RankState({a: params.default_rank for a in ranked}, period_end_day=0)
    history = [state]
    by_day: dict[int, list[Transaction]] = {}
    for t in transactions:
        by_day.setdefault(t.day, []).append(t)
    start = 0
    batch: list[Transaction] = []
    for day in range(days):
        batch.extend(by_day.get(day, ()))
        if day + 1 - start >= params.update_period:
            state = update_ranks(batch, state, params, ranked, period_end_day=day + 1)
            history.append(state)
            batch, start = [], day + 1
    return history


def replay(log: SimulationLog, params: ReputationParams) -> SimulationLog:
    """The same log re-ranked with ``params``."""
    config = apply_overrides(log.config, {f"reputation.{f.name}": getattr(params, f.name)
                                          for f in fields(ReputationParams)})
    suppliers = [p.id for p in log.suppliers()]
    history = replay_ranks(log.transactions, suppliers, params, config.days) if config.uses_reputation else []
    return SimulationLog(transactions=log.transactions, profiles=log.profiles,
                         rank_history=history, config=config)


def save_log(log: SimulationLog, directory: str | Path) -> None:
    """Store a run as ``transactions.csv``, ``ground_truth.json``, ``ranks.json`` and ``config.yaml``."""
    from . import io as wio

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    wio.write_transactions(log.transactions, d / "transactions.csv")
    wio.write_ground_truth(log.profiles, d / "ground_truth.json")
    wio.write_ranks(log.rank_history, d / "ranks.json")
    (d / "config.yaml").write_text(dump_config(log.config), encoding="utf-8")


def load_log(directory: str | Path) -> SimulationLog:
    from . import io as wio

    d = Path(directory)
    config = load_config(d / "config.yaml")
    if isinstance(config, SweepSpec):
        raise ConfigurationError(f"{d / 'config.yaml'}: a stored log needs a single-run config")
    ranks_path = d / "ranks.json"
    history = wio.read_ranks(ranks_path) if ranks_path.exists() else []
    return SimulationLog(transactions=wio.read_transactions(d / "transactions.csv"),
                         profiles=wio.read_ground_truth(d / "ground_truth.json"),
                         rank_history=history, config=config)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        return 1
    if workers < 1:
        return os.cpu_count() or 1
    return workers
