import numpy as np
import pytest

from ultraheat import build_tower

U23 = {"p": 2, "precision": 24, "steps": [{"type": "unramified", "degree": 2},
                                          {"type": "unramified", "degree": 3}]}
TAME3 = {"p": 2, "precision": 24, "steps": [{"type": "tame_eisenstein", "degree": 3}]}
U23_P3 = {"p": 3, "precision": 24, "steps": [{"type": "unramified", "degree": 2},
                                             {"type": "unramified", "degree": 3}]}
TAME2_P3 = {"p": 3, "precision": 24, "steps": [{"type": "tame_eisenstein", "degree": 2}]}
MIXED = {"p": 2, "precision": 24, "steps": [{"type": "tame_eisenstein", "degree": 3},
                                            {"type": "unramified", "degree": 2}]}

ALL_SPECS = {"u23": U23, "tame3": TAME3, "u23_p3": U23_P3, "tame2_p3": TAME2_P3, "mixed": MIXED}

_CACHE = {}


def get_tower(name):
    if name not in _CACHE:
        _CACHE[name] = build_tower(ALL_SPECS[name])
    return _CACHE[name]


@pytest.fixture(scope="session")
def t2():
    return get_tower("u23")


@pytest.fixture(scope="session")
def tame():
    return get_tower("tame3")


@pytest.fixture(params=sorted(ALL_SPECS), scope="session")
def any_tower(request):
    return get_tower(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def small_levels(tower, max_q=100):
    """Levels whose residue field is small enough for pairwise enumeration."""
    return [lv for lv in tower.levels if lv.q <= max_q]


def congruent(a, b, p, digits):
    """a == b modulo p**digits for p-integral-ish rationals."""
    from fractions import Fraction

    d = Fraction(a) - Fraction(b)
    if d == 0:
        return True
    d /= Fraction(p) ** digits
    return d.denominator % p != 0
