"""Two-sided infinite spin configurations with eventually constant tails."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import LocalPattern


@dataclass(frozen=True)
class Configuration:
    """Spins on the integers: ``left_tail`` below ``lo``, ``right_tail`` above ``hi``.

    The core is bit-packed into a Python integer, bit ``i`` holding the spin
    at site ``lo + i``.
    """

    left_tail: int
    lo: int
    hi: int
    bits: int
    right_tail: int

    def __post_init__(self):
        if self.left_tail not in (0, 1) or self.right_tail not in (0, 1):
            raise ValueError("tails must be 0 or 1")
        if self.lo > self.hi:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")
        if self.bits < 0 or self.bits >> self.size:
            raise ValueError("core bits exceed the window")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    def value(self, x: int) -> int:
        if x < self.lo:
            return self.left_tail
        if x > self.hi:
            return self.right_tail
        return (self.bits >> (x - self.lo)) & 1

    __getitem__ = value

    def core(self) -> np.ndarray:
        """Core spins as an ``int8`` array indexed from ``lo``."""
        idx = np.arange(self.size)
        if self.size <= 62:
            return ((self.bits >> idx) & 1).astype(np.int8)
        return np.array([(self.bits >> int(i)) & 1 for i in idx], dtype=np.int8)

    def core_str(self) -> str:
        return "".join(str(b) for b in self.core())

    @classmethod
    def from_core(cls, left_tail: int, lo: int, core, right_tail: int) -> "Configuration":
        if isinstance(core, str):
            if set(core) - {"0", "1"}:
                raise ValueError(f"core must be a 0/1 string, got {core!r}")
            core = [int(c) for c in core]
        core = [int(b) for b in core]
        if not core:
            raise ValueError("core must not be empty")
        if any(b not in (0, 1) for b in core):
            raise ValueError("core spins must be 0/1")
        bits = sum(b << i for i, b in enumerate(core))
        return cls(int(left_tail), lo, lo + len(core) - 1, bits, int(right_tail))

    def embed(self, lo: int, hi: int) -> "Configuration":
        """Same configuration over the window ``[lo, hi]``.

        Sites dropped from the core must already equal the tail they fall into.
        """
        if lo > hi:
            raise ValueError(f"empty window [{lo}, {hi}]")
        for x in range(self.lo, min(lo, self.hi + 1)):
            if self.value(x) != self.left_tail:
                raise ValueError(f"cannot drop site {x}: differs from left tail")
        for x in range(max(hi + 1, self.lo), self.hi + 1):
            if self.value(x) != self.right_tail:
                raise ValueError(f"cannot drop site {x}: differs from right tail")
        bits = sum(self.value(x) << (x - lo) for x in range(lo, hi + 1))
        return Configuration(self.left_tail, lo, hi, bits, self.right_tail)

    def shift(self, k: int) -> "Configuration":
        """Translate left by ``k``: the result at ``x`` is this configuration at ``x + k``."""
        return Configuration(self.left_tail, self.lo - k, self.hi - k, self.bits, self.right_tail)

    def __str__(self) -> str:
        return f"...{self.left_tail}[{self.lo}:{self.core_str()}:{self.hi}]{self.right_tail}..."


def make_initial(kind: str, N: int | None = None, *, window: tuple[int, int] | None = None,
                 left_tail: int | None = None, right_tail: int | None = None,
                 lo: int | None = None, core=None) -> Configuration:
    """Initial conditions.

    ``step`` is occupied exactly on ``(-inf, 0]``, ``interval`` exactly on
    ``[-N, 0]``; ``custom`` takes explicit tails, ``lo`` and ``core``.  If
    ``window`` is given the result is re-embedded there.
    """
    if kind == "step":
        config = Configuration.from_core(1, 0, [1, 0], 0)
    elif kind == "interval":
        if N is None or N < 0:
            raise ValueError(f"interval initial condition needs N >= 0, got {N}")
        config = Configuration.from_core(0, -N, [1] * (N + 1), 0)
    elif kind == "custom":
        if left_tail is None or right_tail is None or core is None:
            raise ValueError("custom initial condition needs left_tail, right_tail and core")
        if len(core) == 0:
            raise ValueError("custom core must not be empty")
        config = Configuration.from_core(left_tail, 0 if lo is None else lo, core, right_tail)
    else:
        raise ValueError(f"unknown initial condition {kind!r}")
    if window is not None:
        config = config.embed(*window)
    return config


def suffix(config: Configuration, z: int, m: int) -> tuple[int, ...]:
    """Spins at ``z, z+1, ..., z+m-1``."""
    if m < 1:
        raise ValueError(f"suffix width must be >= 1, got {m}")
    return tuple(config.value(x) for x in range(z, z + m))


def flip(config: Configuration, x: int) -> Configuration:
    if not config.lo <= x <= config.hi:
        raise IndexError(f"site {x} outside window [{config.lo}, {config.hi}]; tails are frozen")
    return Configuration(config.left_tail, config.lo, config.hi,
                         config.bits ^ (1 << (x - config.lo)), config.right_tail)


def local_pattern(config: Configuration, x: int, radius: int) -> LocalPattern:
    return LocalPattern(tuple(config.value(y) for y in range(x - radius, x + radius + 1)))


def dominates_pointwise(a: Configuration, b: Configuration) -> bool:
    """True iff ``a(x) >= b(x)`` at every site of the integers."""
    tails_ok = a.left_tail >= b.left_tail and a.right_tail >= b.right_tail
    if not tails_ok and a.window != b.window:
        raise ValueError("incomparable tails with mismatched windows")
    if not tails_ok:
        return False
    lo, hi = min(a.lo, b.lo), max(a.hi, b.hi)
    a_bits, b_bits = a.embed(lo, hi).bits, b.embed(lo, hi).bits
    return b_bits & ~a_bits == 0
