"""Finite-range, translation-invariant flip-rate tables.

A rate table of radius ``R`` assigns a non-negative rate to each of the
``2**(2R+1)`` local patterns around a site.  Patterns are encoded as integers
with bit ``i`` holding the spin at offset ``i - R`` from the center, so the
least-significant bit is the leftmost site.  Bit strings such as ``"101"`` are
always written left to right.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

MAX_RADIUS = 3

BUILTIN_MODELS = ("contact", "voter", "glauber_ising", "pure_death")
MODEL_NAMES = BUILTIN_MODELS + ("custom",)


@dataclass(frozen=True)
class LocalPattern:
    """Spins at sites ``x-R .. x+R``, listed left to right."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) % 2 != 1:
            raise ValueError(f"pattern width must be odd, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"pattern spins must be 0/1, got {self.bits}")

    @property
    def radius(self) -> int:
        return len(self.bits) // 2

    @property
    def width(self) -> int:
        return len(self.bits)

    @property
    def center(self) -> int:
        return self.bits[self.radius]

    @property
    def code(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    @classmethod
    def from_code(cls, code: int, radius: int) -> "LocalPattern":
        width = 2 * radius + 1
        if not 0 <= code < 1 << width:
            raise ValueError(f"code {code} out of range for radius {radius}")
        return cls(tuple((code >> i) & 1 for i in range(width)))

    @classmethod
    def from_str(cls, text: str) -> "LocalPattern":
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"pattern must be a non-empty 0/1 string, got {text!r}")
        return cls(tuple(int(c) for c in text))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def pattern_str(code: int, radius: int) -> str:
    return "".join(str((code >> i) & 1) for i in range(2 * radius + 1))


def pattern_code(text: str) -> int:
    return LocalPattern.from_str(text).code


def center_bit(code: int, radius: int) -> int:
    return (code >> radius) & 1


@dataclass(frozen=True, eq=False)
class RateSpec:
    """Flip-rate table ``c(x, eta)`` of radius ``radius``.

    ``rates[code]`` is the rate at which the center spin of pattern ``code``
    flips.  Instances are immutable; ``rates`` is a read-only float array.
    """

    radius: int
    rates: np.ndarray
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.radius, (int, np.integer)) or self.radius < 0:
            raise ValueError(f"radius must be a non-negative integer, got {self.radius!r}")
        rates = np.array(self.rates, dtype=np.float64)
        if rates.shape != (1 << (2 * self.radius + 1),):
            raise ValueError(
                f"rate table for radius {self.radius} needs {1 << (2 * self.radius + 1)} "
                f"entries, got {rates.size}"
            )
        if not np.all(np.isfinite(rates)):
            raise ValueError("rates must be finite")
        if np.any(rates < 0):
            raise ValueError("rates must be non-negative")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def width(self) -> int:
        return 2 * self.radius + 1

    def rate(self, pattern: LocalPattern | str | int) -> float:
        if isinstance(pattern, str):
            pattern = LocalPattern.from_str(pattern)
        if isinstance(pattern, LocalPattern):
            if pattern.radius != self.radius:
                raise ValueError(f"pattern radius {pattern.radius} != spec radius {self.radius}")
            pattern = pattern.code
        return float(self.rates[pattern])

    def patterns(self) -> Iterator[LocalPattern]:
        for code in range(len(self.rates)):
            yield LocalPattern.from_code(code, self.radius)

    def table(self) -> dict[str, float]:
        """Rate table keyed by left-to-right bit strings."""
        return {pattern_str(c, self.radius): float(r) for c, r in enumerate(self.rates)}

    def birth_rates(self) -> np.ndarray:
        return self.rates[self._center_mask(0)]

    def death_rates(self) -> np.ndarray:
        return self.rates[self._center_mask(1)]

    def _center_mask(self, spin: int) -> np.ndarray:
        codes = np.arange(len(self.rates))
        return ((codes >> self.radius) & 1) == spin

    def same_table(self, other: "RateSpec") -> bool:
        return self.radius == other.radius and np.array_equal(self.rates, other.rates)

    def __eq__(self, other):
        if not isinstance(other, RateSpec):
            return NotImplemented
        return self.same_table(other) and self.name == other.name

    def __hash__(self):
        return hash((self.radius, self.rates.tobytes(), self.name))

    def __repr__(self):
        return f"RateSpec(name={self.name!r}, radius={self.radius}, params={self.params})"


def _tabulate(radius: int, fn) -> np.ndarray:
    width = 2 * radius + 1
    return np.array(
        [fn(tuple((code >> i) & 1 for i in range(width))) for code in range(1 << width)],
        dtype=np.float64,
    )


def _require(params: Mapping[str, float], key: str, model: str) -> float:
    if key not in params:
        raise ValueError(f"model {model!r} requires parameter {key!r}")
    value = float(params[key])
    if not math.isfinite(value):
        raise ValueError(f"parameter {key!r} must be finite")
    return value


def build_model(name: str, **params) -> RateSpec:
    """Construct a rate table from the model catalog.

    Built-ins and their parameters:

    * ``contact(birth, death)``: vacant sites fill at ``birth`` times the
      number of occupied nearest neighbours; occupied sites empty at ``death``.
    * ``voter(speed)``: a site adopts a neighbour's opinion at
      ``speed * (#disagreeing neighbours) / 2``.
    * ``glauber_ising(beta)``: flip rate
      ``exp(-beta * s(x) * (s(x-1) + s(x+1)))`` with ``s = 2*eta - 1``.
    * ``pure_death()``: radius 0, occupied sites die at rate 1.
    * ``custom(radius, rates)``: ``rates`` maps every bit string of width
      ``2*radius+1`` to a rate.

    >>> build_model("contact", birth=2.0, death=1.0).rate("101")
    4.0
    """
    allowed = {
        "contact": {"birth", "death"},
        "voter": {"speed"},
        "glauber_ising": {"beta", "allow_negative"},
        "pure_death": set(),
        "custom": {"radius", "rates", "label"},
    }
    if name in allowed and set(params) - allowed[name]:
        extra = ", ".join(sorted(set(params) - allowed[name]))
        raise ValueError(f"unknown parameter(s) for {name!r}: {extra}")

    if name == "contact":
        birth = _require(params, "birth", name)
        death = _require(params, "death", name)
        if birth < 0:
            raise ValueError("contact birth rate must be >= 0")
        if death <= 0:
            raise ValueError("contact death rate must be > 0")
        rates = _tabulate(1, lambda b: death if b[1] else birth * (b[0] + b[2]))
        return RateSpec(1, rates, name, {"birth": birth, "death": death})

    if name == "voter":
        speed = _require(params, "speed", name)
        if speed <= 0:
            raise ValueError("voter speed must be > 0")
        rates = _tabulate(1, lambda b: speed * ((b[0] != b[1]) + (b[2] != b[1])) / 2)
        return RateSpec(1, rates, name, {"speed": speed})

    if name == "glauber_ising":
        beta = _require(params, "beta", name)
        if beta < 0 and not params.get("allow_negative", False):
            raise ValueError("glauber_ising beta must be >= 0")

        def glauber(b):
            s = [2 * v - 1 for v in b]
            return math.exp(-beta * s[1] * (s[0] + s[2]))

        return RateSpec(1, _tabulate(1, glauber), name, {"beta": beta})

    if name == "pure_death":
        return RateSpec(0, np.array([0.0, 1.0]), name, {})

    if name == "custom":
        if "radius" not in params or "rates" not in params:
            raise ValueError("custom model requires 'radius' and 'rates'")
        return custom_spec(int(params["radius"]), params["rates"], params.get("label", "custom"))

    raise ValueError(f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")


def custom_spec(radius: int, table: Mapping[str, float], label: str = "custom") -> RateSpec:
    """Build a spec from a ``{bit string: rate}`` mapping that covers every pattern."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius > MAX_RADIUS:
        raise ValueError(f"radius {radius} exceeds the supported maximum {MAX_RADIUS}")
    width = 2 * radius + 1
    rates = np.full(1 << width, np.nan)
    for key, value in table.items():
        pattern = LocalPattern.from_str(key)
        if pattern.width != width:
            raise ValueError(f"pattern {key!r} has width {pattern.width}, expected {width}")
        value = float(value)
        if not math.isfinite(value) or value < 0:
            raise ValueError(f"rate for {key!r} must be finite and >= 0, got {value}")
        rates[pattern.code] = value
    missing = [pattern_str(c, radius) for c in np.flatnonzero(np.isnan(rates))]
    if missing:
        raise ValueError(f"custom table missing entries: {', '.join(missing)}")
    return RateSpec(radius, rates, label, {})


def spin_flipped(spec: RateSpec) -> RateSpec:
    """Relabel 0 <-> 1 everywhere; births become deaths and vice versa."""
    mask = (1 << spec.width) - 1
    codes = np.arange(len(spec.rates))
    return RateSpec(spec.radius, spec.rates[codes ^ mask], f"{spec.name}~flipped", spec.params)


# ---------------------------------------------------------------------------
# attractiveness


@dataclass(frozen=True)
class Violation:
    low: str
    high: str
    rate_low: float
    rate_high: float

    def as_tuple(self) -> tuple[str, str, float, float]:
        return (self.low, self.high, self.rate_low, self.rate_high)


@dataclass(frozen=True)
class AttractivenessReport:
    violations: tuple[Violation, ...]

    @property
    def attractive(self) -> bool:
        return not self.violations


def comparable_pairs(radius: int, same_center: bool = False) -> Iterator[tuple[int, int]]:
    """Yield every ``(low, high)`` code pair with ``low <= high`` coordinatewise.

    Submasks of each ``high`` are enumerated directly, so the cost is
    ``3**width`` pairs (``3**(2R)`` when the center must agree).
    """
    width = 2 * radius + 1
    for high in range(1 << width):
        low = high
        while True:
            if not same_center or (low >> radius) & 1 == (high >> radius) & 1:
                yield low, high
            if low == 0:
                break
            low = (low - 1) & high


def _check_radius(spec: RateSpec, max_radius: int):
    if spec.radius > max_radius:
        raise ValueError(
            f"radius {spec.radius} exceeds max_radius={max_radius} for exhaustive enumeration"
        )


def check_attractive(spec: RateSpec, max_radius: int = MAX_RADIUS) -> AttractivenessReport:
    """Exhaustively test births increasing and deaths decreasing in the configuration."""
    _check_radius(spec, max_radius)
    r = spec.radius
    violations = []
    for low, high in comparable_pairs(r, same_center=True):
        a, b = spec.rates[low], spec.rates[high]
        bad = a > b if center_bit(low, r) == 0 else a < b
        if bad:
            violations.append(Violation(pattern_str(low, r), pattern_str(high, r), float(a), float(b)))
    return AttractivenessReport(tuple(violations))


def uniformization_bound(spec: RateSpec) -> float:
    """Clock rate ``B + D``: max birth rate plus max death rate."""
    if not np.any(spec.rates > 0):
        raise ValueError(f"rate table of {spec.name!r} is identically zero; no events ever occur")
    births, deaths = spec.birth_rates(), spec.death_rates()
    b, d = float(births.max()), float(deaths.max())
    c = b + d
    # round up until (c - d) / c >= b / c holds in floating point as well
    while c - d < b:
        c = math.nextafter(c, math.inf)
    return c


def flip_to_one_probability(rate: float, center: int, c_max: float) -> float:
    """Probability that a clock ring leaves the center spin at 1."""
    return rate / c_max if center == 0 else (c_max - rate) / c_max


@dataclass(frozen=True)
class CouplingReport:
    c_max: float
    violations: tuple[Violation, ...]

    @property
    def monotone(self) -> bool:
        return not self.violations


def check_coupling_monotone(
    spec: RateSpec, c_max: float, max_radius: int = MAX_RADIUS
) -> CouplingReport:
    """Certify that the uniformized update rule preserves coordinatewise order.

    For every comparable pattern pair ``low <= high`` (centers may differ) the
    post-ring occupation probability must satisfy ``p1(low) <= p1(high)``.
    ``Violation.rate_low/rate_high`` carry the two ``p1`` values here.
    """
    _check_radius(spec, max_radius)
    births, deaths = spec.birth_rates(), spec.death_rates()
    needed = float(births.max() + deaths.max())
    if not c_max > 0 or c_max < needed:
        raise ValueError(
            f"c_max={c_max} is below max birth + max death = {needed}; "
            "not a valid uniformization constant"
        )
    r = spec.radius
    p1 = np.array(
        [flip_to_one_probability(rate, center_bit(c, r), c_max) for c, rate in enumerate(spec.rates)]
    )
    violations = tuple(
        Violation(pattern_str(low, r), pattern_str(high, r), float(p1[low]), float(p1[high]))
        for low, high in comparable_pairs(r)
        if p1[low] > p1[high]
    )
    return CouplingReport(c_max, violations)
