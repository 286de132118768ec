"""Closed-form birth-death model of a single cell under adaptive CAC.

State i is the number of calls in the cell. Up to N calls fit at full
bandwidth; beyond N the elastic calls are squeezed (common degradation level
theta(i)) so that up to N+S calls fit. New calls are refused from state
``new_cutoff`` upward, handovers only at the top state.

The stationary distribution is evaluated as a product form in the log domain,
so chains with several hundred states do not overflow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChainError, GuardTooLargeError, InfeasibleStateError
from .traffic import CellParameters, MixAggregates, TrafficMix, aggregates

_FLOOR_EPS = 1e-9


def _floor(x: float) -> int:
    # absorbs rounding in weighted sums, e.g. 0.9 * 100 stored as 90.00000000000001
    return math.floor(x + _FLOOR_EPS)


def _ceil(x: float) -> int:
    return math.ceil(x - _FLOOR_EPS)


class Variant(enum.Enum):
    PROPOSED = "proposed"
    NON_PRIORITIZED = "non_prioritized"
    HARD = "hard"
    HARD_GUARD = "hard_guard"


@dataclass(frozen=True)
class SchemePolicy:
    variant: Variant
    guard_fraction: float | None = None

    def __post_init__(self):
        if self.variant is Variant.HARD_GUARD:
            if self.guard_fraction is None or not 0.0 <= self.guard_fraction < 1.0:
                raise ValueError(f"guard fraction must lie in [0, 1), got {self.guard_fraction}")
        elif self.guard_fraction is not None:
            raise ValueError(f"{self.variant.value} takes no guard fraction")

    @classmethod
    def proposed(cls) -> "SchemePolicy":
        return cls(Variant.PROPOSED)

    @classmethod
    def non_prioritized(cls) -> "SchemePolicy":
        return cls(Variant.NON_PRIORITIZED)

    @classmethod
    def hard(cls) -> "SchemePolicy":
        return cls(Variant.HARD)

    @classmethod
    def hard_guard(cls, guard_fraction: float) -> "SchemePolicy":
        return cls(Variant.HARD_GUARD, float(guard_fraction))

    @classmethod
    def parse(cls, text: str) -> "SchemePolicy":
        """Parse ``proposed``, ``non_prioritized``, ``hard`` or ``hard_guard:0.05``."""
        name, _, arg = text.strip().partition(":")
        try:
            variant = Variant(name)
        except ValueError:
            raise ValueError(f"unknown scheme {text!r}") from None
        if variant is Variant.HARD_GUARD:
            if not arg:
                raise ValueError("hard_guard needs a fraction, e.g. hard_guard:0.05")
            return cls.hard_guard(float(arg))
        if arg:
            raise ValueError(f"{name} takes no argument")
        return cls(variant)

    @property
    def label(self) -> str:
        if self.variant is Variant.HARD_GUARD:
            return f"hard_guard:{self.guard_fraction:g}"
        return self.variant.value

    @property
    def adaptive(self) -> bool:
        return self.variant in (Variant.PROPOSED, Variant.NON_PRIORITIZED)

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class ChainModel:
    policy: SchemePolicy
    n_hard: int
    extra_new: int
    extra_handover: int
    max_state: int
    new_cutoff: int
    birth_rates: np.ndarray  # birth_rates[i]: rate i -> i+1, i = 0..K-1
    death_rates: np.ndarray  # death_rates[i-1]: rate i -> i-1, i = 1..K
    log_stationary: np.ndarray

    @property
    def stationary(self) -> np.ndarray:
        return np.exp(self.log_stationary)


@dataclass(frozen=True)
class ChainResults:
    p_block: float
    p_drop: float
    utilization: float
    mean_occupancy: float


def hard_capacity(agg: MixAggregates, cell: CellParameters) -> int:
    """Calls that fit at full requested bandwidth: floor(C / mean demand)."""
    return _floor(cell.capacity / agg.mean_demand)


def _extra_states(degradable: float, agg: MixAggregates, cell: CellParameters) -> int:
    if degradable == 0.0:
        return 0
    beta = agg.mean_demand
    return _floor(cell.capacity * degradable / ((beta - degradable) * beta))


def extra_states_handover(agg: MixAggregates, cell: CellParameters) -> int:
    """S: additional calls admitted by squeezing elastic calls to their handover caps."""
    return _extra_states(agg.degradable_handover, agg, cell)


def extra_states_new(agg: MixAggregates, cell: CellParameters) -> int:
    """L: additional states in which new calls are still accepted."""
    return _extra_states(agg.degradable_new, agg, cell)


def _theta_raw(i: int, agg: MixAggregates, cell: CellParameters) -> float:
    return (i * agg.mean_demand - cell.capacity) / (i * agg.degradable_handover)


def degradation_level(i: int, agg: MixAggregates, cell: CellParameters) -> float:
    """Common fraction of each class's handover cap withheld in state i."""
    n = hard_capacity(agg, cell)
    s = extra_states_handover(agg, cell)
    if not 0 <= i <= n + s:
        raise ValueError(f"state {i} outside 0..{n + s}")
    if i <= n:
        return 0.0
    if agg.degradable_handover == 0.0:
        raise InfeasibleStateError(f"state {i} exceeds N={n} but the mix has no degradable bandwidth")
    return min(max(_theta_raw(i, agg, cell), 0.0), 1.0)


def release_rate(i: int, agg: MixAggregates, cell: CellParameters) -> float:
    """Per-call channel release rate in state i (dwell expiry plus stretched completion)."""
    if i < 1:
        raise ValueError(f"release rate defined for i >= 1, got {i}")
    theta = degradation_level(i, agg, cell)
    return cell.dwell_rate + cell.completion_rate * (1.0 - theta * agg.mean_gamma_handover)


def build_chain(mix: TrafficMix, cell: CellParameters, policy: SchemePolicy) -> ChainModel:
    agg = aggregates(mix)
    n = hard_capacity(agg, cell)
    lam_all = cell.lambda_total
    lam_h = cell.lambda_handover

    if policy.adaptive:
        s = extra_states_handover(agg, cell)
        l = extra_states_new(agg, cell) if policy.variant is Variant.PROPOSED else s
        k = n + s
        cutoff = n + l
        deaths = [i * release_rate(i, agg, cell) for i in range(1, k + 1)]
    else:
        s = l = 0
        k = n
        if policy.variant is Variant.HARD_GUARD:
            reserved = _ceil(policy.guard_fraction * cell.capacity / agg.mean_demand)
            cutoff = n - reserved
            if cutoff < 0:
                raise GuardTooLargeError(
                    f"guard fraction {policy.guard_fraction} reserves {reserved} slots but N={n}")
        else:
            cutoff = n
        mu1 = cell.release_rate_full
        deaths = [i * mu1 for i in range(1, k + 1)]

    if k == 0:
        raise DegenerateChainError("capacity admits no calls (N + S = 0)")

    births = np.array([lam_all if i < cutoff else lam_h for i in range(k)], dtype=float)
    deaths = np.array(deaths, dtype=float)
    if np.any(deaths <= 0):
        raise DegenerateChainError("release rates must be strictly positive")

    with np.errstate(divide="ignore"):
        steps = np.log(births) - np.log(deaths)
    log_p = np.concatenate(([0.0], np.cumsum(steps)))
    top = log_p.max()
    log_z = top + math.log(math.fsum(np.exp(log_p - top)))

    return ChainModel(
        policy=policy,
        n_hard=n,
        extra_new=l,
        extra_handover=s,
        max_state=k,
        new_cutoff=cutoff,
        birth_rates=births,
        death_rates=deaths,
        log_stationary=log_p - log_z,
    )


def blocking_probability(chain: ChainModel) -> float:
    """Probability that an arriving new call finds the cell at or above its cutoff."""
    return min(1.0, math.fsum(chain.stationary[chain.new_cutoff:]))


def dropping_probability(chain: ChainModel) -> float:
    return float(chain.stationary[chain.max_state])


def utilization(chain: ChainModel, agg: MixAggregates, cell: CellParameters) -> float:
    """Expected carried bandwidth as a fraction of capacity."""
    states = np.arange(chain.max_state + 1)
    carried = np.minimum(states * agg.mean_demand, cell.capacity) / cell.capacity
    return min(1.0, math.fsum(chain.stationary * carried))


def evaluate(mix: TrafficMix, cell: CellParameters, policy: SchemePolicy) -> tuple[ChainModel, ChainResults]:
    chain = build_chain(mix, cell, policy)
    agg = aggregates(mix)
    p = chain.stationary
    results = ChainResults(
        p_block=blocking_probability(chain),
        p_drop=dropping_probability(chain),
        utilization=utilization(chain, agg, cell),
        mean_occupancy=math.fsum(np.arange(chain.max_state + 1) * p),
    )
    return chain, results
