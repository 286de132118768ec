"""Traffic classes, class mixes and cell parameters.

Bandwidths are in kbit/s, rates in 1/s. A class is real-time exactly when its
handover degradation cap is zero; there is no separate flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ValidationError

WEIGHT_TOL = 1e-9

# Table 1 durations: 120 s mean call at full bandwidth, 240 s mean dwell.
DEFAULT_CALL_DURATION_S = 120.0
DEFAULT_DWELL_TIME_S = 240.0


@dataclass(frozen=True)
class TrafficClass:
    name: str
    weight: float
    bandwidth_req: float
    gamma_new: float = 0.0
    gamma_handover: float = 0.0

    @property
    def is_real_time(self) -> bool:
        return self.gamma_handover == 0.0

    @property
    def min_bw_new(self) -> float:
        """Smallest per-call allocation tolerated when admitting a new call."""
        return (1.0 - self.gamma_new) * self.bandwidth_req

    @property
    def min_bw_handover(self) -> float:
        """Smallest per-call allocation tolerated when admitting a handover."""
        return (1.0 - self.gamma_handover) * self.bandwidth_req


@dataclass(frozen=True)
class TrafficMix:
    classes: tuple[TrafficClass, ...]

    def __init__(self, classes: Iterable[TrafficClass]):
        object.__setattr__(self, "classes", tuple(classes))

    @classmethod
    def from_ratios(cls, classes: Sequence[TrafficClass]) -> "TrafficMix":
        """Build a mix whose class weights are unnormalized ratios a_1 : ... : a_M."""
        total = sum(c.weight for c in classes)
        if not total > 0:
            raise ValidationError([Violation(None, "normalization", f"class ratios sum to {total}, need > 0")])
        return cls(
            TrafficClass(c.name, c.weight / total, c.bandwidth_req, c.gamma_new, c.gamma_handover)
            for c in classes
        )

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    @property
    def weights(self) -> list[float]:
        return [c.weight for c in self.classes]

    def with_gamma_new_as_handover(self) -> "TrafficMix":
        """The same mix with every new-call cap raised to the handover cap."""
        return TrafficMix(
            TrafficClass(c.name, c.weight, c.bandwidth_req, c.gamma_handover, c.gamma_handover)
            for c in self.classes
        )


@dataclass(frozen=True)
class CellParameters:
    capacity: float
    lambda_new: float
    lambda_handover: float
    completion_rate: float = 1.0 / DEFAULT_CALL_DURATION_S
    dwell_rate: float = 1.0 / DEFAULT_DWELL_TIME_S

    @classmethod
    def from_durations(
        cls,
        capacity: float,
        lambda_new: float,
        lambda_handover: float,
        mean_call_duration: float = DEFAULT_CALL_DURATION_S,
        mean_dwell_time: float | None = DEFAULT_DWELL_TIME_S,
    ) -> "CellParameters":
        dwell_rate = 0.0 if mean_dwell_time is None or math.isinf(mean_dwell_time) else 1.0 / mean_dwell_time
        return cls(capacity, lambda_new, lambda_handover, 1.0 / mean_call_duration, dwell_rate)

    @property
    def lambda_total(self) -> float:
        return self.lambda_new + self.lambda_handover

    @property
    def release_rate_full(self) -> float:
        """Channel release rate of an undegraded call (completion or dwell expiry)."""
        return self.completion_rate + self.dwell_rate

    def replace(self, **changes) -> "CellParameters":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return CellParameters(**values)


@dataclass(frozen=True)
class MixAggregates:
    mean_demand: float
    degradable_handover: float
    degradable_new: float
    mean_gamma_handover: float


@dataclass(frozen=True)
class Violation:
    class_index: int | None  # 1-based, None for mix- or cell-level problems
    rule: str
    message: str

    def __str__(self) -> str:
        where = f"class {self.class_index}" if self.class_index is not None else "scenario"
        return f"{where}: [{self.rule}] {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self) -> bool:
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> None:
        if self.violations:
            raise ValidationError(self.violations)


def _check_mix(mix: TrafficMix) -> list[Violation]:
    out: list[Violation] = []
    if len(mix) < 1:
        out.append(Violation(None, "nonempty", "mix must contain at least one class"))
        return out
    for m, c in enumerate(mix, start=1):
        label = f"{c.name!r}"
        if not c.bandwidth_req > 0:
            out.append(Violation(m, "bandwidth", f"{label} requested bandwidth must be > 0, got {c.bandwidth_req}"))
        if not c.weight >= 0:
            out.append(Violation(m, "weight", f"{label} weight must be >= 0, got {c.weight}"))
        if not 0.0 <= c.gamma_new:
            out.append(Violation(m, "gamma_range", f"{label} gamma_new must be >= 0, got {c.gamma_new}"))
        if not c.gamma_handover < 1.0:
            out.append(Violation(m, "gamma_range", f"{label} gamma_handover must be < 1, got {c.gamma_handover}"))
        if not c.gamma_new <= c.gamma_handover:
            out.append(Violation(
                m, "gamma_order",
                f"{label} needs gamma_new <= gamma_handover, got {c.gamma_new} > {c.gamma_handover}",
            ))
    total = sum(mix.weights)
    if not abs(total - 1.0) <= WEIGHT_TOL:
        out.append(Violation(None, "normalization", f"class weights must sum to 1 (Σ a_m = 1), got {total!r}"))
    return out


def _check_cell(cell: CellParameters) -> list[Violation]:
    out: list[Violation] = []
    if not cell.capacity > 0:
        out.append(Violation(None, "capacity", f"capacity must be > 0, got {cell.capacity}"))
    for name in ("lambda_new", "lambda_handover", "completion_rate", "dwell_rate"):
        value = getattr(cell, name)
        if not value >= 0:
            out.append(Violation(None, "rate", f"{name} must be >= 0, got {value}"))
    if not (cell.completion_rate > 0 or cell.dwell_rate > 0):
        out.append(Violation(None, "rate", "completion_rate or dwell_rate must be > 0"))
    return out


def validate(mix: TrafficMix, cell: CellParameters | None = None) -> ValidationReport:
    """Collect every violated invariant of the mix (and cell, if given)."""
    violations = _check_mix(mix)
    if cell is not None:
        violations += _check_cell(cell)
    return ValidationReport(violations)


def aggregates(mix: TrafficMix) -> MixAggregates:
    validate(mix).raise_if_invalid()
    mean_demand = math.fsum(c.weight * c.bandwidth_req for c in mix)
    deg_h = math.fsum(c.weight * c.gamma_handover * c.bandwidth_req for c in mix)
    deg_n = math.fsum(c.weight * c.gamma_new * c.bandwidth_req for c in mix)
    g = math.fsum(c.weight * c.gamma_handover for c in mix)
    return MixAggregates(mean_demand, deg_h, deg_n, g)


def table1_classes() -> list[TrafficClass]:
    """The seven service classes of the reference scenario, equal ratios."""
    rows = [
        ("conversational_voice", 25.0, 0.0, 0.0),
        ("conversational_video", 128.0, 0.0, 0.0),
        ("real_time_gaming", 56.0, 0.0, 0.0),
        ("buffered_streaming_video", 128.0, 0.2, 0.6),
        ("voice_messaging", 13.0, 0.2, 0.3),
        ("web_browsing", 56.0, 0.2, 0.5),
        ("background", 56.0, 0.5, 0.9),
    ]
    return [TrafficClass(name, 1.0, bw, gn, gh) for name, bw, gn, gh in rows]


def table1_mix() -> TrafficMix:
    return TrafficMix.from_ratios(table1_classes())
