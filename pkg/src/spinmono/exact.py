"""Exact transient laws of the truncated system and stochastic order on {0,1}^m.

States of an ``n``-site window ``[lo, hi]`` are integers with bit ``i`` the
spin at ``lo + i``; suffix patterns use bit ``j`` for site ``z + j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson

from .lattice import Configuration
from .rates import RateSpec

MAX_EXACT_SITES = 14
MAX_UPSET_WIDTH = 5
DOMINANCE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    lo: int
    hi: int
    left_tail: int
    right_tail: int
    matrix: sp.csr_matrix
    exit_rates: np.ndarray

    @property
    def n(self) -> int:
        return self.hi - self.lo + 1

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    def rate(self, src: int, dst: int) -> float:
        return float(self.matrix[src, dst])


def build_generator(spec: RateSpec, window: tuple[int, int], left_tail: int, right_tail: int,
                    max_sites: int = MAX_EXACT_SITES) -> GeneratorMatrix:
    lo, hi = window
    n = hi - lo + 1
    if n < 1:
        raise ValueError(f"empty window {window}")
    if n > max_sites:
        raise ValueError(f"window of {n} sites exceeds the exact-solver cap of {max_sites}")
    states = np.arange(1 << n, dtype=np.int64)
    r = spec.radius
    rows, cols, vals = [], [], []
    for i in range(n):
        code = np.zeros_like(states)
        for d in range(-r, r + 1):
            j = i + d
            if j < 0:
                spin = np.full_like(states, left_tail)
            elif j >= n:
                spin = np.full_like(states, right_tail)
            else:
                spin = (states >> j) & 1
            code |= spin << (d + r)
        rate = spec.rates[code]
        keep = rate > 0
        rows.append(states[keep])
        cols.append(states[keep] ^ (1 << i))
        vals.append(rate[keep])
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    exit_rates = np.bincount(rows, weights=vals, minlength=1 << n)
    diag = np.arange(1 << n)
    q = sp.csr_matrix(
        (np.concatenate([vals, -exit_rates]), (np.concatenate([rows, diag]), np.concatenate([cols, diag]))),
        shape=(1 << n, 1 << n),
    )
    return GeneratorMatrix(lo, hi, left_tail, right_tail, q, exit_rates)


def generator_for(spec: RateSpec, config: Configuration, **kw) -> tuple[GeneratorMatrix, int]:
    """Generator on ``config``'s window and tails, with ``config`` as a state index."""
    return build_generator(spec, config.window, config.left_tail, config.right_tail, **kw), config.bits


def transient_distribution(gen: GeneratorMatrix, init, t: float, tol: float = 1e-12) -> np.ndarray:
    """Law at time ``t`` started from a point mass (state index) or a probability vector.

    Uniformization: ``p_t = sum_k Poisson(k; L t) p_0 P^k`` with
    ``P = I + Q / L``, truncated once the remaining Poisson mass is below ``tol``.
    """
    if t < 0:
        raise ValueError("horizon must be >= 0")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    size = 1 << gen.n
    if np.isscalar(init):
        p = np.zeros(size)
        p[int(init)] = 1.0
    else:
        p = np.array(init, dtype=np.float64)
        if p.shape != (size,):
            raise ValueError(f"initial law must have {size} entries")
    lam = float(gen.exit_rates.max())
    if t == 0 or lam == 0:
        return p
    mean = lam * t
    k_max = int(poisson.isf(tol, mean)) + 1
    while poisson.sf(k_max, mean) >= tol:
        k_max += 1
    weights = poisson.pmf(np.arange(k_max + 1), mean)
    qt = gen.matrix.T.tocsr()
    out = weights[0] * p
    for k in range(1, k_max + 1):
        p = p + (qt @ p) / lam
        out += weights[k] * p
    return np.clip(out, 0.0, None)


# ---------------------------------------------------------------------------
# suffix laws


@dataclass(frozen=True, eq=False)
class SuffixDistribution:
    m: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (1 << self.m,):
            raise ValueError(f"width {self.m} needs {1 << self.m} weights")
        if np.any(w < -1e-15):
            raise ValueError("negative weight")
        object.__setattr__(self, "weights", w)

    @classmethod
    def point_mass(cls, bits) -> "SuffixDistribution":
        bits = tuple(bits)
        w = np.zeros(1 << len(bits))
        w[pattern_index(bits)] = 1.0
        return cls(len(bits), w)

    @classmethod
    def from_dict(cls, m: int, table: dict) -> "SuffixDistribution":
        w = np.zeros(1 << m)
        for bits, p in table.items():
            if isinstance(bits, str):
                bits = tuple(int(c) for c in bits)
            if len(bits) != m:
                raise ValueError(f"pattern {bits} has the wrong width")
            w[pattern_index(bits)] += p
        return cls(m, w)

    @classmethod
    def product(cls, probs) -> "SuffixDistribution":
        """Independent Bernoulli coordinates."""
        probs = list(probs)
        m = len(probs)
        codes = np.arange(1 << m)
        w = np.ones(1 << m)
        for j, q in enumerate(probs):
            w *= np.where((codes >> j) & 1, q, 1 - q)
        return cls(m, w)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {pattern_bits(c, self.m): float(p) for c, p in enumerate(self.weights)}

    def marginal(self, j: int) -> float:
        codes = np.arange(1 << self.m)
        return float(self.weights[((codes >> j) & 1) == 1].sum())


def pattern_index(bits) -> int:
    return sum(int(b) << j for j, b in enumerate(bits))


def pattern_bits(code: int, m: int) -> tuple[int, ...]:
    return tuple((code >> j) & 1 for j in range(m))


def suffix_marginal(dist: np.ndarray, window: tuple[int, int], z: int, m: int) -> SuffixDistribution:
    lo, hi = window
    if m < 1:
        raise ValueError("suffix width must be >= 1")
    if z < lo or z + m - 1 > hi:
        raise ValueError(f"suffix [{z}, {z + m - 1}] not inside window [{lo}, {hi}]")
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (1 << (hi - lo + 1),):
        raise ValueError("distribution size does not match window")
    codes = (np.arange(dist.size) >> (z - lo)) & ((1 << m) - 1)
    return SuffixDistribution(m, np.bincount(codes, weights=dist, minlength=1 << m))


def site_profile(dist: np.ndarray, window: tuple[int, int]) -> np.ndarray:
    """Occupation probability of each window site."""
    lo, hi = window
    states = np.arange(len(dist))
    return np.array([dist[((states >> i) & 1) == 1].sum() for i in range(hi - lo + 1)])


# ---------------------------------------------------------------------------
# up-sets and stochastic order


@dataclass(frozen=True)
class UpSet:
    """Upward-closed subset of {0,1}^m; bit ``c`` of ``mask`` marks pattern ``c``."""

    m: int
    mask: int

    def __contains__(self, bits) -> bool:
        return bool((self.mask >> pattern_index(bits)) & 1)

    @property
    def members(self) -> frozenset[tuple[int, ...]]:
        return frozenset(pattern_bits(c, self.m) for c in range(1 << self.m) if (self.mask >> c) & 1)

    def indicator(self) -> np.ndarray:
        return np.array([(self.mask >> c) & 1 for c in range(1 << self.m)], dtype=bool)

    def minimal_elements(self) -> list[tuple[int, ...]]:
        codes = [c for c in range(1 << self.m) if (self.mask >> c) & 1]
        minimal = [c for c in codes if not any(d != c and d & c == d for d in codes)]
        return [pattern_bits(c, self.m) for c in minimal]

    def __str__(self) -> str:
        gens = ["".join(map(str, b)) for b in self.minimal_elements()]
        return "up{" + ",".join(sorted(gens)) + "}"


def is_upward_closed(mask: int, m: int) -> bool:
    for c in range(1 << m):
        if (mask >> c) & 1:
            for j in range(m):
                if not (mask >> (c | (1 << j))) & 1:
                    return False
    return True


def upward_closure(patterns, m: int) -> UpSet:
    mask = 0
    for bits in patterns:
        c = pattern_index(bits)
        for d in range(1 << m):
            if d & c == c:
                mask |= 1 << d
    return UpSet(m, mask)


@lru_cache(maxsize=None)
def _upset_masks(m: int) -> tuple[int, ...]:
    # Splitting on the last coordinate, an up-set is a pair (lower, upper) of
    # up-sets of {0,1}^(m-1) with lower contained in upper.
    if m == 0:
        return (0, 1)
    half = 1 << (m - 1)
    prev = _upset_masks(m - 1)
    return tuple(lower | (upper << half) for upper in prev for lower in prev if lower & ~upper == 0)


def enumerate_upsets(m: int) -> list[UpSet]:
    """Every up-set of {0,1}^m, empty and full included (m <= 5)."""
    if not 1 <= m <= MAX_UPSET_WIDTH:
        raise ValueError(f"up-set enumeration supports 1 <= m <= {MAX_UPSET_WIDTH}, got {m}")
    return [UpSet(m, mask) for mask in _upset_masks(m)]


@lru_cache(maxsize=None)
def _membership(m: int) -> np.ndarray:
    masks = _upset_masks(m)
    codes = np.arange(1 << m)
    return np.array([(mask >> codes) & 1 for mask in masks], dtype=np.float64)


@dataclass(frozen=True)
class DominanceVerdict:
    dominates: bool
    margin: float
    witness: UpSet | None

    def __bool__(self):
        return self.dominates


def stochastic_dominates(mu: SuffixDistribution, nu: SuffixDistribution,
                         tol: float = DOMINANCE_TOL) -> DominanceVerdict:
    """Whether ``mu(U) >= nu(U) - tol`` for every up-set ``U``.

    ``margin`` is ``min_U mu(U) - nu(U)`` over non-trivial up-sets; on failure
    ``witness`` is the smallest minimizing up-set.
    """
    if mu.m != nu.m:
        raise ValueError(f"width mismatch: {mu.m} vs {nu.m}")
    if mu.m > MAX_UPSET_WIDTH:
        raise ValueError(f"width {mu.m} exceeds {MAX_UPSET_WIDTH}")
    member = _membership(mu.m)
    diffs = member @ (mu.weights - nu.weights)
    lowest = float(diffs.min())
    ok = lowest >= -tol
    # empty and full up-sets always differ by ~0; report the margin without them
    sizes = member.sum(axis=1)
    nontrivial = (sizes > 0) & (sizes < member.shape[1])
    margin = float(diffs[nontrivial].min()) if ok and nontrivial.any() else lowest
    if ok:
        return DominanceVerdict(True, margin, None)
    # among (near-)tied minimizers report the smallest up-set
    tied = np.flatnonzero(diffs <= lowest + 1e-15)
    k = int(tied[np.argmin(sizes[tied])])
    return DominanceVerdict(False, margin, UpSet(mu.m, _upset_masks(mu.m)[k]))
