import pytest

from spinmono.rates import build_model

VIOLATING_TABLE = {
    "000": 0.5, "100": 0.2, "001": 0.5, "101": 1.0,
    "010": 1.0, "110": 1.0, "011": 1.0, "111": 1.0,
}


@pytest.fixture
def contact():
    return build_model("contact", birth=2.0, death=1.0)


@pytest.fixture
def pure_death():
    return build_model("pure_death")


@pytest.fixture
def violating():
    return build_model("custom", radius=1, rates=VIOLATING_TABLE)


def single_site(birth, death):
    """Radius-0 two-state chain: 0 -> 1 at ``birth``, 1 -> 0 at ``death``."""
    return build_model("custom", radius=0, rates={"0": birth, "1": death})


def attractive_builtins():
    specs = [build_model("contact", birth=lam, death=1.0) for lam in (0.5, 1.0, 2.0)]
    specs.append(build_model("voter", speed=1.0))
    specs += [build_model("glauber_ising", beta=b) for b in (0.0, 0.5, 1.0)]
    specs.append(build_model("pure_death"))
    return specs
