"""Scenario files, arrival-rate sweeps and result tables."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import chain as ca
from .chain import SchemePolicy
from .des import SimConfig, simulate
from .errors import CACError, ScenarioError
from .traffic import (
    DEFAULT_CALL_DURATION_S,
    DEFAULT_DWELL_TIME_S,
    CellParameters,
    TrafficClass,
    TrafficMix,
    validate,
)

log = logging.getLogger(__name__)

CSV_HEADER = [
    "scheme", "lambda_new", "lambda_handover", "N", "L", "S",
    "p_block", "p_drop", "utilization", "source", "ci_block", "ci_drop", "ci_util",
]
VARY_CHOICES = ("new", "handover", "both_fixed_ratio")
MODES = ("analytic", "sim", "both")


@dataclass(frozen=True)
class Sweep:
    vary: str
    values: tuple[float, ...]
    handover_ratio: float = 0.5
    lambda_new: float = 0.0  # held fixed when vary == "handover"
    lambda_handover: float = 0.0  # held fixed when vary == "new"

    def rates(self, value: float) -> tuple[float, float]:
        if self.vary == "new":
            return value, self.lambda_handover
        if self.vary == "handover":
            return self.lambda_new, value
        return value, self.handover_ratio * value


@dataclass(frozen=True)
class SimSettings:
    horizon: float
    warmup: float | None = None
    replications: int = 20
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    name: str
    mix: TrafficMix
    capacity: float
    mean_call_duration: float
    mean_dwell_time: float | None
    policies: tuple[SchemePolicy, ...]
    sweep: Sweep
    sim: SimSettings | None = None
    outputs: dict[str, str] = field(default_factory=dict)
    reference_points: dict[str, float] = field(default_factory=dict)

    def cell_at(self, value: float) -> CellParameters:
        lam_n, lam_h = self.sweep.rates(value)
        return CellParameters.from_durations(
            self.capacity, lam_n, lam_h, self.mean_call_duration, self.mean_dwell_time)


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    lambda_new: float
    lambda_handover: float
    N: int
    L: int
    S: int
    p_block: float | None
    p_drop: float | None
    utilization: float | None
    source: str
    ci_block: float | None = None
    ci_drop: float | None = None
    ci_util: float | None = None
    error: str | None = None  # set on failed rows, never written to CSV

    @property
    def failed(self) -> bool:
        return self.error is not None


def _require(doc: dict, key: str, where: str) -> Any:
    if key not in doc:
        raise ScenarioError(f"{where}: missing field {key!r}")
    return doc[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    return float(value)


def parse_scenario(doc: dict, source: str = "<scenario>") -> Scenario:
    """Build a validated Scenario from an already-decoded JSON document."""
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: top level must be a JSON object")
    capacity = _number(_require(doc, "capacity_kbps", source), f"{source}: capacity_kbps")

    raw_classes = _require(doc, "classes", source)
    if not isinstance(raw_classes, list) or not raw_classes:
        raise ScenarioError(f"{source}: 'classes' must be a nonempty list")
    classes = []
    for idx, entry in enumerate(raw_classes, start=1):
        where = f"{source}: classes[{idx}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{where}: expected an object")
        classes.append(TrafficClass(
            name=str(entry.get("name", f"class{idx}")),
            weight=_number(entry.get("ratio", 1.0), f"{where}.ratio"),
            bandwidth_req=_number(_require(entry, "bandwidth_kbps", where), f"{where}.bandwidth_kbps"),
            gamma_new=_number(entry.get("gamma_new", 0.0), f"{where}.gamma_new"),
            gamma_handover=_number(entry.get("gamma_handover", 0.0), f"{where}.gamma_handover"),
        ))
    mix = TrafficMix.from_ratios(classes)

    duration = _number(doc.get("mean_call_duration_s", DEFAULT_CALL_DURATION_S), f"{source}: mean_call_duration_s")
    dwell = doc.get("mean_dwell_time_s", DEFAULT_DWELL_TIME_S)
    dwell = None if dwell is None else _number(dwell, f"{source}: mean_dwell_time_s")

    raw_policies = doc.get("policies", ["proposed", "non_prioritized", "hard", "hard_guard:0.05"])
    if not isinstance(raw_policies, list) or not raw_policies:
        raise ScenarioError(f"{source}: 'policies' must be a nonempty list")
    try:
        policies = tuple(SchemePolicy.parse(str(p)) for p in raw_policies)
    except ValueError as exc:
        raise ScenarioError(f"{source}: policies: {exc}") from None

    raw_sweep = _require(doc, "sweep", source)
    vary = raw_sweep.get("vary", "both_fixed_ratio")
    if vary not in VARY_CHOICES:
        raise ScenarioError(f"{source}: sweep.vary must be one of {VARY_CHOICES}, got {vary!r}")
    values = _require(raw_sweep, "values", f"{source}: sweep")
    if not isinstance(values, list) or not values:
        raise ScenarioError(f"{source}: sweep.values must be a nonempty list")
    sweep = Sweep(
        vary=vary,
        values=tuple(_number(v, f"{source}: sweep.values") for v in values),
        handover_ratio=_number(raw_sweep.get("handover_ratio", 0.5), f"{source}: sweep.handover_ratio"),
        lambda_new=_number(raw_sweep.get("lambda_new", 0.0), f"{source}: sweep.lambda_new"),
        lambda_handover=_number(raw_sweep.get("lambda_handover", 0.0), f"{source}: sweep.lambda_handover"),
    )

    sim = None
    if doc.get("sim") is not None:
        raw_sim = doc["sim"]
        horizon = _number(_require(raw_sim, "horizon_s", f"{source}: sim"), f"{source}: sim.horizon_s")
        warmup = raw_sim.get("warmup_s")
        sim = SimSettings(
            horizon=horizon,
            warmup=None if warmup is None else _number(warmup, f"{source}: sim.warmup_s"),
            replications=int(raw_sim.get("replications", 20)),
            seed=int(raw_sim.get("seed", 0)),
        )
        if sim.replications < 1:
            raise ScenarioError(f"{source}: sim.replications must be >= 1")
        if not 0 <= (sim.warmup if sim.warmup is not None else 0.1 * horizon) < horizon:
            raise ScenarioError(f"{source}: sim.warmup_s must lie in [0, horizon_s)")

    scenario = Scenario(
        name=str(doc.get("name", Path(source).stem)),
        mix=mix,
        capacity=capacity,
        mean_call_duration=duration,
        mean_dwell_time=dwell,
        policies=policies,
        sweep=sweep,
        sim=sim,
        outputs={str(k): str(v) for k, v in doc.get("outputs", {}).items()},
        reference_points={str(k): float(v) for k, v in doc.get("reference_points", {}).items()},
    )
    for value in sweep.values:
        validate(mix, scenario.cell_at(value)).raise_if_invalid()
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_scenario(doc, str(path))


def bundled_scenario_path(name: str = "table1.json") -> Path:
    return Path(str(resources.files("adaptive_cac") / "data" / name))


def _counts(scenario: Scenario, policy: SchemePolicy, cell: CellParameters) -> tuple[int, int, int]:
    model = ca.build_chain(scenario.mix, cell, policy)
    return model.n_hard, model.extra_new, model.extra_handover


def _analytic_row(scenario: Scenario, policy: SchemePolicy, cell: CellParameters) -> ResultRow:
    model, res = ca.evaluate(scenario.mix, cell, policy)
    return ResultRow(
        policy.label, cell.lambda_new, cell.lambda_handover,
        model.n_hard, model.extra_new, model.extra_handover,
        res.p_block, res.p_drop, res.utilization, "analytic",
    )


def _sim_row(scenario: Scenario, policy: SchemePolicy, cell: CellParameters, workers: int) -> ResultRow:
    if scenario.sim is None:
        raise ScenarioError("scenario has no 'sim' section")
    n, l, s = _counts(scenario, policy, cell)
    cfg = SimConfig(
        scenario.mix, cell, policy,
        horizon=scenario.sim.horizon,
        warmup=scenario.sim.warmup,
        replications=scenario.sim.replications,
        seed=scenario.sim.seed,
    )
    st = simulate(cfg, workers=workers)
    return ResultRow(
        policy.label, cell.lambda_new, cell.lambda_handover, n, l, s,
        st.p_block, st.p_drop, st.utilization, "sim", st.ci_block, st.ci_drop, st.ci_util,
    )


def _check_row(row: ResultRow) -> ResultRow:
    for name in ("p_block", "p_drop", "utilization"):
        value = getattr(row, name)
        if value is None or not 0.0 <= value <= 1.0:
            raise CACError(f"{name}={value!r} outside [0, 1]")
    return row


def run_sweep(scenario: Scenario, mode: str = "analytic", workers: int = 1) -> list[ResultRow]:
    """Evaluate every policy at every grid point.

    Rows come out ordered by policy, then grid value, then source. A failure
    at one point yields a row with ``error`` set instead of stopping the sweep.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    sources = ["analytic", "sim"] if mode == "both" else [mode]
    rows: list[ResultRow] = []
    for policy in scenario.policies:
        for value in scenario.sweep.values:
            cell = scenario.cell_at(value)
            for source in sources:
                try:
                    if source == "analytic":
                        row = _analytic_row(scenario, policy, cell)
                    else:
                        row = _sim_row(scenario, policy, cell, workers)
                    rows.append(_check_row(row))
                except CACError as exc:
                    log.warning("%s at %s=%g (%s) failed: %s", policy.label, scenario.sweep.vary, value, source, exc)
                    rows.append(ResultRow(
                        policy.label, cell.lambda_new, cell.lambda_handover, 0, 0, 0,
                        None, None, None, source, error=str(exc)))
    return rows


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: Iterable[ResultRow], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(getattr(row, col)) for col in CSV_HEADER])
    return path


def read_csv(path: str | Path) -> list[ResultRow]:
    ints = {"N", "L", "S"}
    text_cols = {"scheme", "source"}
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ScenarioError(f"{path}: unexpected header {reader.fieldnames}")
        for rec in reader:
            kw: dict[str, Any] = {}
            for col in CSV_HEADER:
                raw = rec[col]
                if col in text_cols:
                    kw[col] = raw
                elif col in ints:
                    kw[col] = int(raw)
                else:
                    kw[col] = float(raw) if raw != "" else None
            out.append(ResultRow(**kw))
    return out


def plot_series(rows: Sequence[ResultRow], metric: str, x_axis: str = "lambda_new") -> dict:
    """Group rows into one (x, y, ci) series per (scheme, source) for a single metric."""
    ci_col = {"p_block": "ci_block", "p_drop": "ci_drop", "utilization": "ci_util"}[metric]
    series: dict[tuple[str, str], dict] = {}
    for row in rows:
        s = series.setdefault((row.scheme, row.source), {
            "scheme": row.scheme, "source": row.source, "x": [], "y": [], "ci": []})
        s["x"].append(getattr(row, x_axis))
        s["y"].append(getattr(row, metric))
        s["ci"].append(getattr(row, ci_col))
    return {
        "x": x_axis,
        "y": metric,
        "yscale": "log" if metric == "p_drop" else "linear",
        "series": list(series.values()),
    }


def emit(rows: Sequence[ResultRow], out_dir: str | Path, fmt: str = "csv", stem: str = "results") -> list[Path]:
    """Write good rows as CSV, or as two plot-data JSON files (dropping, utilization)."""
    good = [r for r in rows if not r.failed]
    if not good:
        raise ScenarioError("no successful rows to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        return [write_csv(good, out_dir / f"{stem}.csv")]
    if fmt != "plot":
        raise ValueError(f"format must be 'csv' or 'plot', got {fmt!r}")
    x_axis = "lambda_new"
    if all(r.lambda_new == good[0].lambda_new for r in good):
        x_axis = "lambda_handover"
    paths = []
    for metric, name in (("p_drop", "dropping"), ("utilization", "utilization")):
        path = out_dir / f"{stem}_{name}.json"
        path.write_text(json.dumps(plot_series(good, metric, x_axis), indent=2) + "\n", encoding="utf-8")
        paths.append(path)
    return paths

