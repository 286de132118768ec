"""Independent reference solvers used to check the closed-form chain.

Nothing here may import from ``adaptive_cac.chain``; the two routes must stay
separate for the cross-check to mean anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath

_DPS = 60


@dataclass(frozen=True)
class BirthDeathSpec:
    birth: tuple[float, ...]
    death: tuple[float, ...]  # death[i] is the rate from state i+1 down to i

    def __init__(self, birth: Sequence[float], death: Sequence[float]):
        birth = tuple(float(b) for b in birth)
        death = tuple(float(d) for d in death)
        if len(birth) != len(death):
            raise ValueError(f"birth/death lengths differ: {len(birth)} vs {len(death)}")
        if any(not d > 0 for d in death):
            raise ValueError("death rates must be strictly positive")
        if any(not b >= 0 for b in birth):
            raise ValueError("birth rates must be nonnegative")
        object.__setattr__(self, "birth", birth)
        object.__setattr__(self, "death", death)

    @property
    def max_state(self) -> int:
        return len(self.birth)


def _solve_mp(spec: BirthDeathSpec) -> list:
    with mpmath.workdps(_DPS):
        weights = [mpmath.mpf(1)]
        for b, d in zip(spec.birth, spec.death):
            weights.append(weights[-1] * mpmath.mpf(b) / mpmath.mpf(d))
        total = mpmath.fsum(weights)
        return [w / total for w in weights]


def solve_stationary(spec: BirthDeathSpec) -> list[float]:
    """Stationary distribution by detailed balance, accumulated in 60-digit arithmetic."""
    return [float(p) for p in _solve_mp(spec)]


def log_stationary(spec: BirthDeathSpec) -> list[float]:
    """Natural logs of the stationary probabilities; -inf for unreachable states.

    Useful where probabilities underflow double precision.
    """
    with mpmath.workdps(_DPS):
        return [float(mpmath.log(p)) if p > 0 else -math.inf for p in _solve_mp(spec)]


def erlang_b(servers: int, offered_load: float) -> float:
    """Erlang-B loss probability via B(n) = A B(n-1) / (n + A B(n-1))."""
    if servers < 0 or offered_load < 0:
        raise ValueError("servers and offered_load must be nonnegative")
    b = 1.0
    for n in range(1, servers + 1):
        b = offered_load * b / (n + offered_load * b)
    return b
