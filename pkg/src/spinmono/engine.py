"""Truncated-window simulation: uniformized event streams and Gillespie.

Both backends hold every spin outside the window frozen at its tail value.
The uniformized backend rings a rate-``c_max`` Poisson clock at each site;
on a ring the spin is set to 1 iff its uniform mark falls below the
occupation probability ``p1`` of the current local pattern.  Driving several
initial conditions with one event stream gives the monotone coupling.

Replica ``r`` of a run seeded with ``seed`` draws its site-``x`` clock from
the SplitMix64 stream keyed by ``(seed, r, x)``; Gillespie replicas use a
single stream keyed by ``(seed, r)``.  Results therefore do not depend on how
replicas are spread over workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .lattice import Configuration, dominates_pointwise
from .rates import RateSpec, check_attractive, check_coupling_monotone, uniformization_bound

WORKERS_ENV = "SPINMONO_WORKERS"
BLOCK = 2048


class CouplingViolation(RuntimeError):
    """Coupled trajectories lost their pointwise order."""


@dataclass(frozen=True)
class WindowPlan:
    lo: int
    hi: int
    margin: int
    epsilon_trunc: float

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1


@dataclass(frozen=True, eq=False)
class EventStream:
    lo: int
    hi: int
    horizon: float
    times: np.ndarray
    sites: np.ndarray
    marks: np.ndarray
    seed: int
    c_max: float
    replica: int = 0

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return zip(self.times.tolist(), self.sites.tolist(), self.marks.tolist())

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (self.window == other.window and self.horizon == other.horizon
                and self.c_max == other.c_max
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.sites, other.sites)
                and np.array_equal(self.marks, other.marks))

    def shift(self, k: int) -> "EventStream":
        """Relabel site ``x`` as ``x - k``, matching ``Configuration.shift``."""
        return EventStream(self.lo - k, self.hi - k, self.horizon, self.times,
                           self.sites - k, self.marks, self.seed, self.c_max, self.replica)

    def restrict(self, lo: int, hi: int) -> "EventStream":
        keep = (self.sites >= lo) & (self.sites <= hi)
        return EventStream(lo, hi, self.horizon, self.times[keep], self.sites[keep],
                           self.marks[keep], self.seed, self.c_max, self.replica)

    @classmethod
    def from_events(cls, lo: int, hi: int, events, c_max: float, horizon: float | None = None):
        """Hand-built stream from ``(time, site, mark)`` triples."""
        events = sorted(events, key=lambda e: (e[0], e[1]))
        times = np.array([e[0] for e in events], dtype=np.float64)
        sites = np.array([e[1] for e in events], dtype=np.int64)
        marks = np.array([e[2] for e in events], dtype=np.float64)
        if len(sites) and (sites.min() < lo or sites.max() > hi):
            raise ValueError("event site outside window")
        if horizon is None:
            horizon = float(times.max()) if len(times) else 0.0
        return cls(lo, hi, horizon, times, sites, marks, -1, float(c_max))


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def safe_bound(spec: RateSpec) -> float:
    """``uniformization_bound`` or 0.0 for a table with no events at all."""
    return uniformization_bound(spec) if np.any(spec.rates > 0) else 0.0


def plan_window(spec: RateSpec, t: float, z_min: int, z_max: int,
                epsilon_trunc: float = 1e-3) -> WindowPlan:
    """Pad the sites of interest by a light-cone margin.

    ``M = R * ceil(e * c_max * t + ln(1/eps)) + R``; ``M = R`` when nothing can
    move (``t = 0`` or no positive rate).
    """
    if t < 0:
        raise ValueError("horizon must be >= 0")
    if z_min > z_max:
        raise ValueError("z_min must be <= z_max")
    if not 0 < epsilon_trunc < 1:
        raise ValueError("epsilon_trunc must lie in (0, 1)")
    r = spec.radius
    c_max = safe_bound(spec)
    if t == 0 or c_max == 0:
        margin = r
    else:
        margin = r * math.ceil(math.e * c_max * t + math.log(1 / epsilon_trunc)) + r
    return WindowPlan(z_min - margin, z_max + margin, margin, epsilon_trunc)


def sample_events(spec: RateSpec, plan: WindowPlan | tuple[int, int], t: float, seed: int,
                  replica: int = 0, c_max: float | None = None) -> EventStream:
    if t < 0:
        raise ValueError("horizon must be >= 0")
    lo, hi = plan.window if isinstance(plan, WindowPlan) else plan
    c_max = safe_bound(spec) if c_max is None else float(c_max)
    times, sites, marks = _kernels.generate_events(seed, replica, lo, hi - lo + 1, c_max, float(t))
    return EventStream(lo, hi, float(t), times, sites, marks, seed, c_max, replica)


def _table(spec: RateSpec) -> np.ndarray:
    return np.ascontiguousarray(spec.rates, dtype=np.float64)


def _from_core(template: Configuration, lo: int, core: np.ndarray) -> Configuration:
    return Configuration.from_core(template.left_tail, lo, core.tolist(), template.right_tail)


def evolve_uniformized(spec: RateSpec, init: Configuration, events: EventStream) -> Configuration:
    if init.window != events.window:
        raise ValueError(f"configuration window {init.window} != event window {events.window}")
    if len(events) == 0:
        return init
    needed = safe_bound(spec)
    if events.c_max < needed * (1 - 1e-12):
        raise ValueError(f"event stream c_max={events.c_max} below the rate bound {needed}")
    core = init.core()
    _kernels.evolve(core, init.left_tail, init.right_tail, init.lo, _table(spec), spec.radius,
                    events.c_max, events.sites, events.marks)
    return _from_core(init, init.lo, core)


def simulate_gillespie(spec: RateSpec, init: Configuration, t: float, seed: int,
                       replica: int = 0) -> Configuration:
    if t < 0:
        raise ValueError("horizon must be >= 0")
    core = init.core()
    _kernels.gillespie(core, init.left_tail, init.right_tail, _table(spec), spec.radius,
                       float(t), np.uint64(_kernels.gillespie_key(seed, replica)))
    return _from_core(init, init.lo, core)


def couple_translates(spec: RateSpec, inits: list[Configuration],
                      events: EventStream) -> list[Configuration]:
    """Evolve pointwise-decreasing initial conditions under one event stream."""
    if not check_attractive(spec).attractive:
        raise ValueError(f"{spec.name!r} is not attractive; the coupling is not monotone")
    if len(events):
        if not check_coupling_monotone(spec, events.c_max).monotone:
            raise ValueError("update rule is not monotone for this c_max")
    for a, b in zip(inits, inits[1:]):
        if not dominates_pointwise(a, b):
            raise ValueError("initial conditions must be pointwise decreasing")
    outs = [evolve_uniformized(spec, init, events) for init in inits]
    for i, (a, b) in enumerate(zip(outs, outs[1:])):
        if not dominates_pointwise(a, b):
            raise CouplingViolation(f"trajectories {i} and {i + 1} out of order: {a} vs {b}")
    return outs


# ---------------------------------------------------------------------------
# replica batches


def _blocks(replicas: int):
    return [(start, min(BLOCK, replicas - start)) for start in range(0, replicas, BLOCK)]


def _fan_out(fn, replicas: int, workers: int | None):
    blocks = _blocks(replicas)
    workers = resolve_workers(workers)
    if workers == 1 or len(blocks) == 1:
        return [fn(start, count) for start, count in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def run_replicas(spec: RateSpec, init: Configuration, t: float, seed: int, replicas: int,
                 backend: str = "uniformized", workers: int | None = None,
                 replica_offset: int = 0) -> np.ndarray:
    """Final cores of ``replicas`` independent runs, shape ``(replicas, window size)``.

    Row ``k`` equals the single-run backend called with ``replica=replica_offset+k``.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if t < 0:
        raise ValueError("horizon must be >= 0")
    core = init.core()
    table = _table(spec)
    if backend == "uniformized":
        c_max = safe_bound(spec)

        def fn(start, count):
            return _kernels.batch_uniformized(seed, replica_offset + start, count, init.lo, core,
                                              init.left_tail, init.right_tail, table,
                                              spec.radius, c_max, float(t))
    elif backend == "gillespie":
        def fn(start, count):
            return _kernels.batch_gillespie(seed, replica_offset + start, count, core,
                                            init.left_tail, init.right_tail, table,
                                            spec.radius, float(t))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return np.concatenate(_fan_out(fn, replicas, workers))


def run_coupled(spec: RateSpec, upper: Configuration, lower: Configuration,
                translated: Configuration, t: float, seed: int, replicas: int,
                workers: int | None = None):
    """Shared-event runs of ``upper`` and ``lower`` plus a translated companion.

    ``translated`` must sit on ``lower``'s window shifted by ``shift`` sites;
    it is driven by the same events relabelled accordingly.  Returns three
    ``(replicas, n)`` arrays.
    """
    if upper.window != lower.window:
        raise ValueError("coupled configurations must share a window")
    if (upper.left_tail, upper.right_tail) != (lower.left_tail, lower.right_tail):
        raise ValueError("coupled configurations must share tails")
    if translated.size != lower.size:
        raise ValueError("translated configuration must have the same window size")
    if (translated.left_tail, translated.right_tail) != (lower.left_tail, lower.right_tail):
        raise ValueError("translated configuration must share tails")
    shift = translated.lo - lower.lo
    table = _table(spec)
    c_max = safe_bound(spec)
    a, b, c = upper.core(), lower.core(), translated.core()

    def fn(start, count):
        return _kernels.batch_coupled(seed, start, count, upper.lo, a, b, c, shift,
                                      upper.left_tail, upper.right_tail, table, spec.radius,
                                      c_max, float(t))

    parts = _fan_out(fn, replicas, workers)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))
