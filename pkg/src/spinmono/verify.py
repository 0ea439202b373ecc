"""Monotonicity of suffix laws in the distance from the origin.

Three kinds of evidence, each with its own failure semantics:

``coupled``
    pathwise.  The step at 0 and the step at -1 are driven by one event
    stream; the second must stay below the first at every site, and must
    coincide with a translated run of the step.  Any violation is a bug.
``exact``
    truncated exact law.  Suffix laws at ``z`` and ``z+1`` are compared with
    the up-set oracle on a frozen-tail window.
``independent``
    Monte Carlo sanity net.  Up-set frequencies at adjacent ``z`` are
    estimated from independent replica batches and a significant increase is
    flagged.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm
from statsmodels.stats.proportion import proportion_confint

from .engine import plan_window, run_coupled, run_replicas
from .exact import (
    DOMINANCE_TOL,
    MAX_EXACT_SITES,
    UpSet,
    build_generator,
    enumerate_upsets,
    site_profile,
    stochastic_dominates,
    suffix_marginal,
    transient_distribution,
    upward_closure,
)
from .lattice import Configuration, make_initial
from .rates import RateSpec, check_attractive

MODES = ("coupled", "exact", "independent")
EVIDENCE = {
    "coupled": "pathwise coupling",
    "exact": "exact truncated law",
    "independent": "independent Monte Carlo",
}
CONFIDENCE = 0.99
EXACT_DEFAULT_SITES = 12


@dataclass(frozen=True)
class ProfileRow:
    z: int
    p_hat: float
    ci_low: float
    ci_high: float
    n: int


@dataclass(frozen=True)
class OccupancyProfile:
    rows: tuple[ProfileRow, ...]
    window: tuple[int, int]

    def p_hat(self) -> np.ndarray:
        return np.array([r.p_hat for r in self.rows])

    def stderr(self) -> np.ndarray:
        p = self.p_hat()
        n = np.array([r.n for r in self.rows])
        return np.sqrt(p * (1 - p) / n)


def wilson_interval(successes, trials, confidence: float = CONFIDENCE):
    low, high = proportion_confint(successes, trials, alpha=1 - confidence, method="wilson")
    p = np.asarray(successes) / trials
    return np.minimum(low, p).clip(0, 1), np.maximum(high, p).clip(0, 1)


def _mc_window(init: Configuration, lo: int, hi: int) -> Configuration:
    return init.embed(min(lo, init.lo), max(hi, init.hi))


def _warn_if_not_attractive(spec: RateSpec):
    if not check_attractive(spec).attractive:
        warnings.warn(f"{spec.name!r} is not attractive; monotonicity is not guaranteed",
                      stacklevel=3)


def estimate_occupation_profile(spec: RateSpec, init: Configuration, t: float, z_min: int,
                                z_max: int, replicas: int, seed: int, *,
                                epsilon_trunc: float = 1e-3, margin: int | None = None,
                                backend: str = "uniformized",
                                workers: int | None = None) -> OccupancyProfile:
    """Per-site occupation frequencies with 99% Wilson intervals."""
    _warn_if_not_attractive(spec)
    plan = plan_window(spec, t, z_min, z_max, epsilon_trunc)
    lo, hi = plan.window if margin is None else (z_min - margin, z_max + margin)
    config = _mc_window(init, lo, hi)
    finals = run_replicas(spec, config, t, seed, replicas, backend=backend, workers=workers)
    counts = finals[:, z_min - config.lo: z_max - config.lo + 1].sum(axis=0, dtype=np.int64)
    low, high = wilson_interval(counts, replicas)
    rows = tuple(
        ProfileRow(z, counts[i] / replicas, float(low[i]), float(high[i]), replicas)
        for i, z in enumerate(range(z_min, z_max + 1))
    )
    return OccupancyProfile(rows, config.window)


def truncated_initial(kind: str, lo: int, hi: int, N: int | None = None) -> Configuration:
    """Initial condition clipped to ``[lo, hi]`` with frozen tails.

    The step keeps tails (1, 0); an interval keeps tails (0, 0) and loses any
    occupied sites outside the window.
    """
    if kind == "step":
        return make_initial("step").embed(lo, hi)
    if kind == "interval":
        if N is None or N < 0:
            raise ValueError("interval needs N >= 0")
        core = [1 if -N <= x <= 0 else 0 for x in range(lo, hi + 1)]
        return Configuration.from_core(0, lo, core, 0)
    raise ValueError(f"unknown initial condition {kind!r}")


def exact_occupation_profile(spec: RateSpec, t: float, window: tuple[int, int],
                             kind: str = "step", N: int | None = None,
                             tol: float = 1e-12) -> np.ndarray:
    init = truncated_initial(kind, *window, N=N)
    gen = build_generator(spec, window, init.left_tail, init.right_tail)
    return site_profile(transient_distribution(gen, init.bits, t, tol), window)


# ---------------------------------------------------------------------------
# reports


@dataclass
class ZVerdict:
    z: int
    verdict: str
    witness: str = ""
    margin: float = 0.0
    details: dict = field(default_factory=dict)


@dataclass
class MonotonicityReport:
    mode: str
    z_range: tuple[int, int]
    per_z: list[ZVerdict]
    overall: str
    params: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def evidence(self) -> str:
        return EVIDENCE[self.mode]

    @property
    def passed(self) -> bool:
        return self.overall == "pass"

    def verdict_at(self, z: int) -> ZVerdict:
        return next(v for v in self.per_z if v.z == z)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "evidence": self.evidence,
            "zRange": list(self.z_range),
            "overall": self.overall,
            "params": self.params,
            "summary": self.summary,
            "perZ": [
                {"z": v.z, "verdict": v.verdict, "witness": v.witness, "margin": v.margin,
                 **v.details}
                for v in self.per_z
            ],
        }


def _overall(verdicts) -> str:
    if any(v == "fail" for v in verdicts):
        return "fail"
    if any(v == "inconclusive" for v in verdicts):
        return "inconclusive"
    return "pass"


def _check_common(spec, t, z_min, z_max, m, mode):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    if t < 0:
        raise ValueError("horizon must be >= 0")
    if z_min > z_max:
        raise ValueError("z_min must be <= z_max")
    if m < 1:
        raise ValueError("suffix width m must be >= 1")


def _initial(kind: str, N: int | None) -> Configuration:
    return make_initial("step") if kind == "step" else make_initial("interval", N)


def verify_theorem(spec: RateSpec, t: float, z_min: int = 0, z_max: int = 4, m: int = 3,
                   replicas: int = 1000, seed: int = 0, mode: str = "coupled", *,
                   epsilon_trunc: float = 1e-3, window: tuple[int, int] | None = None,
                   exact_sites: int = EXACT_DEFAULT_SITES,
                   workers: int | None = None) -> MonotonicityReport:
    """Check that suffix laws from the step initial condition decrease in ``z >= 0``."""
    if z_min < 0:
        raise ValueError("z_min must be >= 0")
    return _verify(spec, "step", None, t, z_min, z_max, m, replicas, seed, mode,
                   epsilon_trunc, window, exact_sites, workers)


def verify_remark2(spec: RateSpec, N: int, t: float, z_min: int = 0, z_max: int = 4, m: int = 3,
                   replicas: int = 1000, seed: int = 0, mode: str = "exact", *,
                   epsilon_trunc: float = 1e-3, window: tuple[int, int] | None = None,
                   exact_sites: int = EXACT_DEFAULT_SITES,
                   workers: int | None = None) -> MonotonicityReport:
    """Same checks started from the interval ``1_[-N, 0]``."""
    if N < 0:
        raise ValueError("N must be >= 0")
    report = _verify(spec, "interval", N, t, z_min, z_max, m, replicas, seed, mode,
                     epsilon_trunc, window, exact_sites, workers)
    report.params["N"] = N
    return report


@dataclass
class Remark2Sweep:
    reports: dict[int, MonotonicityReport]

    @property
    def smallest_passing_N(self) -> int | None:
        passing = [n for n, r in sorted(self.reports.items()) if r.passed]
        return passing[0] if passing else None


def sweep_remark2(spec: RateSpec, Ns, t: float, **kw) -> Remark2Sweep:
    return Remark2Sweep({int(n): verify_remark2(spec, int(n), t, **kw) for n in sorted(set(Ns))})


def _verify(spec, kind, N, t, z_min, z_max, m, replicas, seed, mode, epsilon_trunc,
            window, exact_sites, workers) -> MonotonicityReport:
    _check_common(spec, t, z_min, z_max, m, mode)
    params = {"model": spec.name, "t": t, "m": m, "init": kind, "seed": seed,
              "epsilonTrunc": epsilon_trunc}
    if mode == "coupled":
        report = _verify_coupled(spec, kind, N, t, z_min, z_max, m, replicas, seed,
                                 epsilon_trunc, workers)
        params["replicas"] = replicas
    elif mode == "exact":
        report = _verify_exact(spec, kind, N, t, z_min, z_max, m, epsilon_trunc, window,
                               exact_sites)
    else:
        _warn_if_not_attractive(spec)
        report = _verify_independent(spec, kind, N, t, z_min, z_max, m, replicas, seed,
                                     epsilon_trunc, workers)
        params["replicas"] = replicas
    report.params = {**params, **report.params}
    return report


def _verify_coupled(spec, kind, N, t, z_min, z_max, m, replicas, seed, epsilon_trunc, workers):
    if not check_attractive(spec).attractive:
        raise ValueError(f"coupled mode needs an attractive spec; {spec.name!r} is not")
    plan = plan_window(spec, t, z_min, z_max + m - 1, epsilon_trunc)
    base = _initial(kind, N)
    upper = _mc_window(base, *plan.window)
    lo, hi = upper.window
    lower = base.shift(1).embed(lo, hi)
    translated = base.embed(lo + 1, hi + 1)
    a, b, c = run_coupled(spec, upper, lower, translated, t, seed, replicas, workers)

    # whole-window order only holds when the initial pair is itself ordered
    below = b > a
    order_bad = np.flatnonzero(below.any(axis=1))
    translation_bad = np.flatnonzero((b != c).any(axis=1))
    per_z = []
    for z in range(z_min, z_max + 1):
        sl = slice(z - lo, z - lo + m)
        bad = np.flatnonzero(below[:, sl].any(axis=1))
        details = {"violations": int(bad.size), "translationFailures": int(translation_bad.size)}
        witness = ""
        if bad.size:
            rep = int(bad[0])
            site = z + int(np.flatnonzero(below[rep, sl])[0])
            details.update(firstReplica=rep, firstSite=site)
            witness = f"replica={rep};site={site}"
        ok = bad.size == 0 and translation_bad.size == 0
        per_z.append(ZVerdict(z, "pass" if ok else "fail", witness, float(bad.size), details))
    summary = {
        "orderViolations": int(order_bad.size),
        "translationFailures": int(translation_bad.size),
        "window": [lo, hi],
    }
    overall = _overall(v.verdict for v in per_z)
    if kind == "step" and order_bad.size:
        overall = "fail"
    return MonotonicityReport("coupled", (z_min, z_max), per_z, overall, {"window": [lo, hi]},
                              summary)


def exact_window(spec: RateSpec, z_min: int, z_max: int, m: int,
                 sites: int = EXACT_DEFAULT_SITES) -> tuple[int, int]:
    """Window of ``sites`` sites holding ``[z_min, z_max + m]`` with padding split evenly."""
    needed = z_max + m - z_min + 1
    extra = sites - needed
    if extra < 2 * spec.radius:
        raise ValueError(f"{sites} sites cannot hold [{z_min}, {z_max + m}] plus padding")
    right = extra // 2
    return (z_min - (extra - right), z_max + m + right)


def _verify_exact(spec, kind, N, t, z_min, z_max, m, epsilon_trunc, window, exact_sites):
    if window is None:
        window = exact_window(spec, z_min, z_max, m, exact_sites)
    lo, hi = window
    if z_min < lo or z_max + m > hi:
        raise ValueError(f"window {window} does not hold sites [{z_min}, {z_max + m}]")
    if hi - lo + 1 > MAX_EXACT_SITES:
        raise ValueError(f"exact mode supports at most {MAX_EXACT_SITES} sites")
    init = truncated_initial(kind, lo, hi, N)
    gen = build_generator(spec, window, init.left_tail, init.right_tail)
    dist = transient_distribution(gen, init.bits, t)
    tilde = None
    if kind == "step":
        shifted = make_initial("step").shift(1).embed(lo, hi)
        tilde = transient_distribution(gen, shifted.bits, t)
    tol = DOMINANCE_TOL + epsilon_trunc
    per_z = []
    for z in range(z_min, z_max + 1):
        here = suffix_marginal(dist, window, z, m)
        verdict = stochastic_dominates(here, suffix_marginal(dist, window, z + 1, m), tol)
        details = {}
        if tilde is not None:
            proof = stochastic_dominates(here, suffix_marginal(tilde, window, z, m), tol)
            details["proofStepMargin"] = proof.margin
        per_z.append(ZVerdict(z, "pass" if verdict else "fail",
                              str(verdict.witness) if verdict.witness else "", verdict.margin,
                              details))
    summary = {"tolerance": tol, "minMargin": min(v.margin for v in per_z), "window": list(window)}
    return MonotonicityReport("exact", (z_min, z_max), per_z, _overall(v.verdict for v in per_z),
                              {"window": list(window)}, summary)


def upset_battery(m: int) -> list[UpSet]:
    """All non-trivial up-sets for m <= 4; otherwise counting events plus "first site occupied"."""
    if m <= 4:
        full = (1 << (1 << m)) - 1
        return [u for u in enumerate_upsets(m) if 0 < u.mask < full]
    battery = []
    for k in range(1, m + 1):
        mask = sum(1 << c for c in range(1 << m) if bin(c).count("1") >= k)
        battery.append(UpSet(m, mask))
    battery.append(upward_closure([(1,) + (0,) * (m - 1)], m))
    return battery


def _suffix_codes(finals: np.ndarray, lo: int, z: int, m: int) -> np.ndarray:
    block = finals[:, z - lo: z - lo + m].astype(np.int64)
    return (block << np.arange(m)).sum(axis=1)


def _verify_independent(spec, kind, N, t, z_min, z_max, m, replicas, seed, epsilon_trunc,
                        workers):
    plan = plan_window(spec, t, z_min, z_max + m, epsilon_trunc)
    config = _mc_window(_initial(kind, N), *plan.window)
    # even z read batch 0, odd z batch 1, so adjacent estimates are independent
    batches = [
        run_replicas(spec, config, t, seed, replicas, workers=workers, replica_offset=k * replicas)
        for k in (0, 1)
    ]
    battery = upset_battery(m)
    members = np.array([u.indicator() for u in battery])

    def estimates(z):
        codes = _suffix_codes(batches[z % 2], config.lo, z, m)
        freq = np.bincount(codes, minlength=1 << m) / replicas
        return members @ freq

    zq = norm.ppf(1 - (1 - CONFIDENCE) / 2)
    per_z = []
    for z in range(z_min, z_max + 1):
        p0, p1 = estimates(z), estimates(z + 1)
        radius = zq * np.sqrt((p0 * (1 - p0) + p1 * (1 - p1)) / replicas)
        increase = p1 - p0
        violated = increase > radius
        decreased = -increase > radius
        tied = (increase == 0) & (radius == 0)
        worst = int(np.argmax(increase - radius))
        if violated.any():
            verdict = "fail"
        elif decreased.any() or tied.all():
            verdict = "pass"
        else:
            verdict = "inconclusive"
        details = {"significantIncreases": int(violated.sum()),
                   "significantDecreases": int(decreased.sum()),
                   "pHatZ": float(p0[worst]), "pHatZ1": float(p1[worst]),
                   "radius": float(radius[worst])}
        per_z.append(ZVerdict(z, verdict, str(battery[worst]), float((-increase).min()), details))
    return MonotonicityReport("independent", (z_min, z_max), per_z,
                              _overall(v.verdict for v in per_z),
                              {"window": list(config.window), "battery": len(battery)},
                              {"confidence": CONFIDENCE})


# ---------------------------------------------------------------------------
# truncation self-check


@dataclass
class SelfCheckRow:
    z: int
    p_default: float
    p_doubled: float
    diff: float
    se: float


@dataclass
class SelfCheckReport:
    margin: int
    doubled_margin: int
    rows: list[SelfCheckRow]

    @property
    def max_abs_diff(self) -> float:
        return max(r.diff for r in self.rows)

    @property
    def within(self) -> bool:
        return all(r.diff <= 3 * r.se for r in self.rows)

    def to_dict(self) -> dict:
        return {"margin": self.margin, "doubledMargin": self.doubled_margin,
                "maxAbsDiff": self.max_abs_diff, "within3SE": self.within}


def window_self_check(spec: RateSpec, t: float, z_min: int, z_max: int, replicas: int,
                      seed: int, *, epsilon_trunc: float = 1e-3, init: Configuration | None = None,
                      workers: int | None = None) -> SelfCheckReport:
    """Compare occupancy profiles at the planned margin and at twice that margin.

    Both runs share ``seed``, so overlapping sites see the same clocks.
    """
    init = make_initial("step") if init is None else init
    margin = plan_window(spec, t, z_min, z_max, epsilon_trunc).margin
    kw = dict(epsilon_trunc=epsilon_trunc, workers=workers)
    base = estimate_occupation_profile(spec, init, t, z_min, z_max, replicas, seed, margin=margin, **kw)
    wide = estimate_occupation_profile(spec, init, t, z_min, z_max, replicas, seed,
                                       margin=2 * margin, **kw)
    se = np.sqrt(base.stderr() ** 2 + wide.stderr() ** 2)
    rows = [
        SelfCheckRow(a.z, a.p_hat, b.p_hat, abs(a.p_hat - b.p_hat), float(s))
        for a, b, s in zip(base.rows, wide.rows, se)
    ]
    return SelfCheckReport(margin, 2 * margin, rows)

