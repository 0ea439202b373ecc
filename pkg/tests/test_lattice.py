import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinmono.lattice import (
    Configuration,
    dominates_pointwise,
    flip,
    local_pattern,
    make_initial,
    suffix,
)

step = make_initial("step")
step_minus_one = make_initial("custom", left_tail=1, right_tail=0, lo=-1, core="10")


def test_step_values():
    assert step.value(0) == 1
    assert step.value(1) == 0
    assert step.value(-10**6) == 1
    assert step.value(10**6) == 0


def test_interval_values():
    c = make_initial("interval", 3)
    assert [c.value(x) for x in (-4, -3, 0, 1)] == [0, 1, 1, 0]


def test_custom_equals_step():
    assert make_initial("custom", left_tail=1, right_tail=0, lo=0, core="10") == step


@pytest.mark.parametrize("kwargs", [
    {"kind": "interval", "N": -1},
    {"kind": "custom", "left_tail": 1, "right_tail": 0, "core": ""},
    {"kind": "bogus"},
])
def test_make_initial_errors(kwargs):
    with pytest.raises(ValueError):
        make_initial(**kwargs)


def test_embed_keeps_values():
    wide = step.embed(-5, 7)
    assert wide.window == (-5, 7)
    assert all(wide.value(x) == step.value(x) for x in range(-10, 10))
    with pytest.raises(ValueError):
        step.embed(2, 5)


@pytest.mark.parametrize("z, m, expected", [
    (0, 3, (1, 0, 0)),
    (1, 3, (0, 0, 0)),
    (-2, 3, (1, 1, 1)),
])
def test_step_suffix(z, m, expected):
    assert suffix(step, z, m) == expected


def test_interval_suffix():
    assert suffix(make_initial("interval", 2), -2, 4) == (1, 1, 1, 0)


def test_suffix_width_positive():
    with pytest.raises(ValueError):
        suffix(step, 0, 0)


@given(st.integers(-20, 20), st.integers(1, 8))
def test_step_suffix_shape(z, m):
    got = suffix(step, z, m)
    if z > 0:
        assert got == (0,) * m
    elif z + m - 1 <= 0:
        assert got == (1,) * m
    else:
        assert got == (1,) * (-z + 1) + (0,) * (m + z - 1)


def test_flip():
    flipped = flip(step, 0)
    assert flipped.value(0) == 0
    assert all(flipped.value(x) == step.value(x) for x in range(-5, 6) if x != 0)
    assert flip(step, 1).value(1) == 1
    assert step.value(0) == 1  # input untouched


def test_flip_outside_window():
    with pytest.raises(IndexError):
        flip(step, 5)


configs = st.builds(
    lambda lt, rt, lo, core: Configuration.from_core(lt, lo, core, rt),
    st.integers(0, 1), st.integers(0, 1), st.integers(-10, 10),
    st.lists(st.integers(0, 1), min_size=1, max_size=20),
)


@given(configs, st.data())
def test_flip_involution(c, data):
    x = data.draw(st.integers(c.lo, c.hi))
    assert flip(flip(c, x), x) == c


@given(configs, st.integers(-30, 30), st.integers(1, 6))
def test_shift_reads_one_site_further(c, z, m):
    assert suffix(c, z + 1, m) == suffix(c.shift(1), z, m)


@pytest.mark.parametrize("x, expected", [(0, "110"), (5, "000"), (-5, "111"), (1, "100")])
def test_local_pattern(x, expected):
    assert str(local_pattern(step, x, 1)) == expected


def test_dominates_examples():
    assert dominates_pointwise(step, step_minus_one)
    assert dominates_pointwise(step, step)
    assert not dominates_pointwise(step_minus_one, step)


def test_dominates_incomparable_tails_mismatched_windows():
    ones_left = make_initial("step")
    zeros_left = make_initial("interval", 4)
    with pytest.raises(ValueError):
        dominates_pointwise(zeros_left, ones_left)


def _same_window(lo, n):
    return st.builds(
        lambda lt, rt, core: Configuration.from_core(lt, lo, core, rt),
        st.integers(0, 1), st.integers(0, 1), st.lists(st.integers(0, 1), min_size=n, max_size=n),
    )


@given(st.data())
def test_dominance_is_a_partial_order(data):
    n = data.draw(st.integers(1, 10))
    a, b, c = (data.draw(_same_window(0, n)) for _ in range(3))
    assert dominates_pointwise(a, a)
    if dominates_pointwise(a, b) and dominates_pointwise(b, a):
        assert a == b
    if dominates_pointwise(a, b) and dominates_pointwise(b, c):
        assert dominates_pointwise(a, c)


def test_wide_core_roundtrip():
    core = [i % 3 == 0 for i in range(150)]
    c = Configuration.from_core(0, -70, [int(b) for b in core], 1)
    assert list(c.core()) == [int(b) for b in core]
