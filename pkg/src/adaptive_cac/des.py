"""Discrete-event simulation of one cell with elastic traffic and adaptive CAC.

Calls carry an exponential amount of work (mean ``bandwidth_req / mu`` kbit)
and are served at their current allocation, so a call squeezed below its
requested rate lasts longer. Every event rebalances the cell to a single
common degradation level theta: class m calls get ``(1 - theta*gamma_h[m])``
of their requested bandwidth. Real-time classes have ``gamma_h = 0`` and are
therefore never squeezed, which makes their duration exponential with mean
``1/mu`` regardless of load.

Since all calls of one class share an allocation, each class keeps a virtual
clock of work delivered per call. A call finishes when its class clock passes
its finish mark, so a rebalance never has to touch individual calls.
"""

from __future__ import annotations

import bisect
import csv
import heapq
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
from scipy import stats as sps

from .chain import SchemePolicy, Variant
from .errors import CACError
from .traffic import CellParameters, TrafficMix, validate

NEW = "new"
HANDOVER = "handover"

_TOL = 1e-9
_BLOCK = 4096


class InvariantViolation(CACError, AssertionError):
    pass


@dataclass
class CallRecord:
    call_id: int
    cls: int  # 0-based class index
    origin: str
    work: float  # kbit requested in total
    finish_vtime: float  # class virtual clock reading at which the call completes
    dwell_deadline: float
    admitted_at: float

    def remaining_work(self, class_clock: float) -> float:
        return max(self.finish_vtime - class_clock, 0.0)


class CellState:
    """Active calls of one cell plus the common degradation level."""

    def __init__(self, mix: TrafficMix, capacity: float):
        self.capacity = float(capacity)
        self.bw = [c.bandwidth_req for c in mix]
        self.gamma_h = [c.gamma_handover for c in mix]
        self.gamma_n = [c.gamma_new for c in mix]
        self.counts = [0] * len(self.bw)
        self.calls: dict[int, CallRecord] = {}
        self.theta = 0.0

    def __len__(self) -> int:
        return len(self.calls)

    def add(self, call: CallRecord) -> None:
        self.calls[call.call_id] = call
        self.counts[call.cls] += 1

    def remove(self, call_id: int) -> CallRecord:
        call = self.calls.pop(call_id)
        self.counts[call.cls] -= 1
        return call

    def demand(self) -> float:
        return math.fsum(n * b for n, b in zip(self.counts, self.bw))

    def floor_demand(self, caps: Sequence[float]) -> float:
        """Bandwidth the active calls would hold if each were squeezed to ``caps``."""
        return math.fsum(n * (1.0 - g) * b for n, g, b in zip(self.counts, caps, self.bw))

    def degradable(self) -> float:
        return math.fsum(n * g * b for n, g, b in zip(self.counts, self.gamma_h, self.bw))

    def current_gamma(self, m: int) -> float:
        return self.theta * self.gamma_h[m]

    def allocation(self, m: int) -> float:
        return (1.0 - self.theta * self.gamma_h[m]) * self.bw[m]

    def total_allocated(self) -> float:
        return math.fsum(n * self.allocation(m) for m, n in enumerate(self.counts))


def admission_decision(state: CellState, m: int, origin: str, policy: SchemePolicy) -> bool:
    """Would the cell accept an arriving class-``m`` call of the given origin?"""
    cap = state.capacity
    variant = policy.variant
    if variant is Variant.PROPOSED:
        caps = state.gamma_n if origin == NEW else state.gamma_h
    elif variant is Variant.NON_PRIORITIZED:
        caps = state.gamma_h
    else:
        need = state.demand() + state.bw[m]
        if variant is Variant.HARD_GUARD and origin == NEW:
            cap = (1.0 - policy.guard_fraction) * cap
        return need <= cap * (1.0 + _TOL)
    need = state.floor_demand(caps) + (1.0 - caps[m]) * state.bw[m]
    return need <= cap * (1.0 + _TOL)


def rebalance(state: CellState) -> float:
    """Set the common degradation level so the calls exactly fill the cell when overloaded."""
    total = state.demand()
    if total <= state.capacity:
        state.theta = 0.0
        return 0.0
    pool = state.degradable()
    if pool <= 0.0:
        raise InvariantViolation(f"demand {total} exceeds capacity {state.capacity} with nothing degradable")
    theta = (total - state.capacity) / pool
    if theta > 1.0 + _TOL:
        raise InvariantViolation(f"degradation level {theta} > 1: admission let too many calls in")
    state.theta = min(theta, 1.0)
    return state.theta


def check_invariants(state: CellState) -> None:
    c = state.capacity
    allocated = state.total_allocated()
    if allocated > c * (1.0 + _TOL):
        raise InvariantViolation(f"allocated {allocated} exceeds capacity {c}")
    total = state.demand()
    if total > c and abs(allocated - c) > c * _TOL:
        raise InvariantViolation(f"overloaded cell carries {allocated}, expected {c}")
    for m, n in enumerate(state.counts):
        if n and not 0.0 <= state.current_gamma(m) <= state.gamma_h[m] * (1.0 + _TOL):
            raise InvariantViolation(f"class {m} degraded to {state.current_gamma(m)} beyond its cap")


@dataclass(frozen=True)
class SimConfig:
    mix: TrafficMix
    cell: CellParameters
    policy: SchemePolicy
    horizon: float
    warmup: float | None = None  # defaults to 10% of horizon
    replications: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.warmup is None:
            object.__setattr__(self, "warmup", 0.1 * self.horizon)
        if not 0 <= self.warmup < self.horizon:
            raise ValueError(f"need 0 <= warmup < horizon, got {self.warmup} / {self.horizon}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        validate(self.mix, self.cell).raise_if_invalid()


@dataclass(frozen=True)
class SimStats:
    p_block: float
    p_drop: float
    utilization: float
    mean_call_duration: float
    handover_out_fraction: float
    offered_new: int
    blocked_new: int
    offered_handover: int
    dropped_handover: int
    replications: int = 1
    ci_block: float | None = None
    ci_drop: float | None = None
    ci_util: float | None = None
    ci_duration: float | None = None


class _Stream:
    """Block-buffered draws from one numpy generator."""

    def __init__(self, seed_seq: np.random.SeedSequence):
        self._rng = np.random.default_rng(seed_seq)
        self._exp = iter(())
        self._unif = iter(())

    def exponential(self, mean: float) -> float:
        try:
            return mean * next(self._exp)
        except StopIteration:
            self._exp = iter(self._rng.standard_exponential(_BLOCK).tolist())
            return mean * next(self._exp)

    def uniform(self) -> float:
        try:
            return next(self._unif)
        except StopIteration:
            self._unif = iter(self._rng.random(_BLOCK).tolist())
            return next(self._unif)


def _streams(seed: int, replication: int) -> tuple[_Stream, _Stream, _Stream, _Stream]:
    arrivals, class_choice, work, dwell = np.random.SeedSequence([seed, replication]).spawn(4)
    return _Stream(arrivals), _Stream(class_choice), _Stream(work), _Stream(dwell)


def run_replication(
    config: SimConfig,
    replication: int = 0,
    *,
    trace: IO[str] | None = None,
    check: bool = False,
) -> SimStats:
    """Simulate one replication; deterministic in (config.seed, replication).

    ``trace`` receives one CSV line per processed event. With ``check`` the
    capacity, work-conservation and cap invariants are asserted after every
    rebalance.
    """
    mix, cell, policy = config.mix, config.cell, config.policy
    horizon, warmup = config.horizon, config.warmup
    arr_rng, cls_rng, work_rng, dwell_rng = _streams(config.seed, replication)

    n_cls = len(mix)
    cum = np.cumsum(mix.weights).tolist()
    cum[-1] = 1.0
    state = CellState(mix, cell.capacity)
    bw = state.bw
    mu, eta = cell.completion_rate, cell.dwell_rate

    vclock = [0.0] * n_cls
    rate = list(bw)
    finish_heaps: list[list[tuple[float, int]]] = [[] for _ in range(n_cls)]
    dwell_heap: list[tuple[float, int]] = []
    calls = state.calls

    writer = csv.writer(trace, lineterminator="\n") if trace is not None else None
    if writer is not None:
        writer.writerow(["time", "kind", "class", "state_size", "total_allocated"])

    inf = math.inf
    t_new = arr_rng.exponential(1.0 / cell.lambda_new) if cell.lambda_new > 0 else inf
    t_ho = arr_rng.exponential(1.0 / cell.lambda_handover) if cell.lambda_handover > 0 else inf

    now = 0.0
    carried = 0.0  # kbit carried since warmup
    allocated = 0.0
    next_id = 0
    offered = {NEW: 0, HANDOVER: 0}
    rejected = {NEW: 0, HANDOVER: 0}
    departures = completions = 0
    sojourn_sum = 0.0

    while True:
        t_next, kind, who = t_new, 0, -1
        if t_ho < t_next:
            t_next, kind = t_ho, 1
        while dwell_heap and dwell_heap[0][1] not in calls:
            heapq.heappop(dwell_heap)
        if dwell_heap and dwell_heap[0][0] < t_next:
            t_next, kind, who = dwell_heap[0][0], 2, dwell_heap[0][1]
        for m in range(n_cls):
            heap = finish_heaps[m]
            while heap and heap[0][1] not in calls:
                heapq.heappop(heap)
            if heap:
                t = now + max(heap[0][0] - vclock[m], 0.0) / rate[m]
                if t < t_next:
                    t_next, kind, who = t, 3, m

        t_stop = min(t_next, horizon)
        if t_stop > warmup:
            carried += allocated * (t_stop - max(now, warmup))
        dt = t_stop - now
        for m in range(n_cls):
            vclock[m] += rate[m] * dt
        now = t_stop
        if t_next > horizon:
            break

        counted = now >= warmup
        m = -1
        if kind <= 1:
            origin = NEW if kind == 0 else HANDOVER
            if kind == 0:
                t_new = now + arr_rng.exponential(1.0 / cell.lambda_new)
            else:
                t_ho = now + arr_rng.exponential(1.0 / cell.lambda_handover)
            m = min(bisect.bisect_right(cum, cls_rng.uniform()), n_cls - 1)
            if counted:
                offered[origin] += 1
            if admission_decision(state, m, origin, policy):
                work = work_rng.exponential(bw[m] / mu) if mu > 0 else inf
                deadline = now + dwell_rng.exponential(1.0 / eta) if eta > 0 else inf
                call = CallRecord(next_id, m, origin, work, vclock[m] + work, deadline, now)
                next_id += 1
                state.add(call)
                if work < inf:
                    heapq.heappush(finish_heaps[m], (call.finish_vtime, call.call_id))
                if deadline < inf:
                    heapq.heappush(dwell_heap, (deadline, call.call_id))
            elif counted:
                rejected[origin] += 1
            event = origin
        else:
            if kind == 2:
                heapq.heappop(dwell_heap)
                event = "dwell_expiry"
            else:
                who = heapq.heappop(finish_heaps[who])[1]
                event = "completion"
            call = state.remove(who)
            m = call.cls
            if counted:
                departures += 1
                completions += kind == 3
                sojourn_sum += now - call.admitted_at

        rebalance(state)
        for c in range(n_cls):
            rate[c] = state.allocation(c)
        allocated = min(state.total_allocated(), cell.capacity)
        if check:
            check_invariants(state)
        if writer is not None:
            writer.writerow([repr(now), event, m, len(state), repr(allocated)])

    span = horizon - warmup
    return SimStats(
        p_block=rejected[NEW] / offered[NEW] if offered[NEW] else 0.0,
        p_drop=rejected[HANDOVER] / offered[HANDOVER] if offered[HANDOVER] else 0.0,
        utilization=min(carried / (cell.capacity * span), 1.0),
        mean_call_duration=sojourn_sum / departures if departures else 0.0,
        handover_out_fraction=(departures - completions) / departures if departures else 0.0,
        offered_new=offered[NEW],
        blocked_new=rejected[NEW],
        offered_handover=offered[HANDOVER],
        dropped_handover=rejected[HANDOVER],
    )


def _halfwidth(values: Sequence[float]) -> float | None:
    n = len(values)
    if n < 2:
        return None
    return float(sps.t.ppf(0.975, n - 1)) * statistics.stdev(values) / math.sqrt(n)


def aggregate(reps: Sequence[SimStats]) -> SimStats:
    """Average replications and attach 95% Student-t confidence halfwidths."""
    if not reps:
        raise ValueError("need at least one replication")
    cols = {
        name: [getattr(r, name) for r in reps]
        for name in ("p_block", "p_drop", "utilization", "mean_call_duration", "handover_out_fraction")
    }
    return SimStats(
        p_block=statistics.fmean(cols["p_block"]),
        p_drop=statistics.fmean(cols["p_drop"]),
        utilization=statistics.fmean(cols["utilization"]),
        mean_call_duration=statistics.fmean(cols["mean_call_duration"]),
        handover_out_fraction=statistics.fmean(cols["handover_out_fraction"]),
        offered_new=sum(r.offered_new for r in reps),
        blocked_new=sum(r.blocked_new for r in reps),
        offered_handover=sum(r.offered_handover for r in reps),
        dropped_handover=sum(r.dropped_handover for r in reps),
        replications=len(reps),
        ci_block=_halfwidth(cols["p_block"]),
        ci_drop=_halfwidth(cols["p_drop"]),
        ci_util=_halfwidth(cols["utilization"]),
        ci_duration=_halfwidth(cols["mean_call_duration"]),
    )


def _run_one(args: tuple[SimConfig, int]) -> SimStats:
    return run_replication(*args)


def simulate(config: SimConfig, workers: int = 1) -> SimStats:
    """Run all replications of ``config`` (optionally in worker processes) and aggregate."""
    jobs = [(config, r) for r in range(config.replications)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(_run_one, jobs))
    else:
        reps = [_run_one(j) for j in jobs]
    return aggregate(reps)

