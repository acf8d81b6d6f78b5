from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ultraheat.lattice import BallGrid
from ultraheat.lcfunc import (LocallyConstantFunction, ball_integral_character, character,
                              character_function, fourier_level, haar_integral,
                              inverse_fourier_level, omega, padic_fractional_part)
from ultraheat.tower import TowerError

from conftest import ALL_SPECS, get_tower, small_levels


def direct_fourier(phi, sign=1):
    """Coset sum with field multiplication and the scalar character (slow oracle)."""
    lv = phi.level
    q, d = lv.q, lv.d
    out = BallGrid(lv, d - phi.B, d - phi.A)
    xs = phi.grid.elements()
    vals = []
    for xi in out.elements():
        acc = sum(character((x * xi).scale(sign)) * v for x, v in zip(xs, phi.values))
        vals.append(acc * float(q) ** (phi.B - d / 2))
    return LocallyConstantFunction.from_grid(out, vals)


def random_phi(lv, rng):
    """Two digits of resolution on small residue fields, one on large ones."""
    return LocallyConstantFunction.random(lv, 1, -1 if lv.q <= 10 else 0, rng)


def direct_character_integral(a, nu, sphere=False):
    lv = a.level
    B = nu - 3
    g = BallGrid(lv, nu, B)
    total = 0j
    for x, s in zip(g.elements(), g.shells()):
        if sphere and s < nu:
            continue
        total += character(a * x)
    return total * float(lv.q) ** B


# -- grids ----------------------------------------------------------------------

def test_grid_sizes(any_tower):
    for lv in any_tower.levels:
        g = BallGrid(lv, 1, -1)
        assert g.size == lv.q ** 2
        assert BallGrid(lv, 2, 2).size == 1
    with pytest.raises(TowerError):
        BallGrid(any_tower.level(1), 0, 1)


def test_locate_inverts_elements(any_tower):
    for lv in small_levels(any_tower, 10):
        g = BallGrid(lv, 1, -1)
        assert list(g.locate_elements(g.elements())) == list(range(g.size))


def test_shells(t2):
    lv = t2.level(1)
    g = BallGrid(lv, 2, -1)
    for x, s in zip(g.elements(), g.shells()):
        if x.is_zero():
            assert s == -1
        else:
            assert s == -x.ord()


def test_ball_sums_brute_force(tame, rng):
    lv = tame.level(2)
    g = BallGrid(lv, 2, -2)
    vals = rng.normal(size=g.size)
    xs = g.elements()
    for s in (-1, 0, 2):
        sums = g.ball_sums(vals, s)
        for i in range(0, g.size, 5):
            want = sum(v for y, v in zip(xs, vals) if (y - xs[i]).in_ball(s))
            assert sums[i] == pytest.approx(want)


# -- tables -----------------------------------------------------------------------

def test_constant_on_cosets(any_tower, rng):
    for lv in small_levels(any_tower):
        phi = LocallyConstantFunction.random(lv, 1, -1, rng)
        for _ in range(20):
            x = any_tower.sample_ball(lv.n, 1, rng)
            y = x + any_tower.sample_ball(lv.n, -1, rng)
            assert phi(x) == phi(y)


def test_refine_keeps_values(any_tower, rng):
    for lv in small_levels(any_tower):
        phi = LocallyConstantFunction.random(lv, 1, 0, rng)
        fine = phi.refine(-1)
        assert fine.grid.size == phi.grid.size * lv.q
        xs = [any_tower.sample_ball(lv.n, 2, rng) for _ in range(20)]
        assert np.array_equal(phi.evaluate_many(xs), fine.evaluate_many(xs))


def test_outside_support_is_zero(t2):
    phi = LocallyConstantFunction.constant(t2.level(2), 0, 3.0)
    assert phi(t2.level(2).from_rational(Fraction(1, 2))) == 0
    assert phi(t2.level(2).from_rational(2)) == 3.0


def test_simplify(t2, rng):
    lv = t2.level(2)
    phi = LocallyConstantFunction.random(lv, 0, -1, rng).reshape(3, -3)
    s = phi.simplify()
    assert (s.A, s.B) == (0, -1)
    assert s.max_abs_diff(phi) == 0


def test_length_mismatch(t2):
    with pytest.raises(ValueError):
        LocallyConstantFunction(t2.level(2), 1, 0, [1, 2, 3])


def test_dict_round_trip(any_tower, rng):
    for lv in small_levels(any_tower):
        phi = LocallyConstantFunction.random(lv, 1, -1, rng)
        back = LocallyConstantFunction.from_dict(any_tower, phi.to_dict())
        assert back.max_abs_diff(phi) == 0 and (back.A, back.B) == (phi.A, phi.B)


# -- Haar integral -------------------------------------------------------------------

def test_haar_examples(t2, rng):
    assert haar_integral(omega(t2.level(1))) == pytest.approx(1.0)
    assert haar_integral(LocallyConstantFunction.constant(t2.level(1), 1)) == pytest.approx(2.0)
    phi = LocallyConstantFunction.random(t2.level(2), 1, -1, rng)
    assert haar_integral(2 * phi) == pytest.approx(2 * haar_integral(phi))


def test_haar_ball_volumes(any_tower):
    for lv in any_tower.levels:
        for nu in (-2, 0, 3):
            assert haar_integral(LocallyConstantFunction.constant(lv, nu)) == pytest.approx(
                float(lv.q) ** nu)


def test_haar_translation_invariant(any_tower, rng):
    for lv in small_levels(any_tower):
        phi = LocallyConstantFunction.random(lv, 1, -1, rng)
        y = any_tower.sample_ball(lv.n, 1, rng)
        g = phi.grid
        shifted = LocallyConstantFunction.from_grid(
            g, phi.evaluate_many([x + y for x in g.elements()]))
        assert haar_integral(shifted) == pytest.approx(haar_integral(phi))


# -- characters -----------------------------------------------------------------------

def test_character_examples(t2):
    assert character(t2.level(1).from_rational(Fraction(1, 2))) == pytest.approx(-1)
    zeta = t2.level(2).zeta()
    assert character(zeta.scale(Fraction(1, 2))) == pytest.approx(-1)
    assert character(t2.level(1).from_rational(Fraction(1, 4))) == pytest.approx(1j)


def test_character_trivial_on_integers(any_tower, rng):
    for lv in any_tower.levels:
        for _ in range(20):
            y = any_tower.sample_ball(lv.n, lv.d, rng)
            # Tr of ball(d) lands in Z_p
            assert character(y) == pytest.approx(1)


def test_character_nontrivial_just_outside(any_tower):
    for lv in any_tower.levels:
        vals = [character(x) for x in BallGrid(lv, lv.d + 1, lv.d).elements()]
        assert abs(sum(vals)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(-10**6, 10**6), st.integers(1, 10**6), st.sampled_from([2, 3, 5]))
def test_fractional_part(num, den, p):
    t = Fraction(num, den)
    frac = padic_fractional_part(t, p)
    assert 0 <= frac < 1
    rest = t - frac
    assert rest.denominator % p != 0
    den = frac.denominator
    while den % p == 0:
        den //= p
    assert den == 1


def test_character_function_matches_character(any_tower, rng):
    for lv in small_levels(any_tower, 10):
        a = any_tower.sample_sphere(lv.n, 2, rng)
        phi = character_function(a, 1)
        xs = phi.grid.elements()
        want = np.array([character(a * x) for x in xs])
        assert np.max(np.abs(phi.values - want)) < 1e-12


@pytest.mark.parametrize("name", sorted(ALL_SPECS))
def test_ball_and_sphere_integrals(name, rng):
    tower = get_tower(name)
    for lv in small_levels(tower, 10):
        for nu in (0, 1):
            for N in range(lv.d - nu - 1, lv.d - nu + 3):
                a = tower.sample_sphere(lv.n, N, rng)
                for sphere in (False, True):
                    want = direct_character_integral(a, nu, sphere)
                    assert ball_integral_character(a, nu, sphere) == pytest.approx(want.real, abs=1e-9)
                    assert abs(want.imag) < 1e-9


def test_sphere_integral_cases(t2):
    lv = t2.level(1)
    q, d, nu = lv.q, lv.d, 1
    small = lv.from_rational(Fraction(2) ** (nu - d))
    edge = lv.from_rational(Fraction(2) ** (nu - d - 1))
    far = lv.from_rational(Fraction(2) ** (nu - d - 2))
    assert ball_integral_character(small, nu) == q**nu
    assert ball_integral_character(edge, nu, sphere=True) == -q ** (nu - 1)
    assert ball_integral_character(far, nu, sphere=True) == 0


# -- level Fourier transform --------------------------------------------------------------

def test_transform_of_unit_ball(any_tower):
    for lv in any_tower.levels[:2]:
        F = fourier_level(omega(lv))
        assert (F.A, F.B) == (lv.d, lv.d)
        assert np.max(np.abs(F.values - float(lv.q) ** (-lv.d / 2))) < 1e-12


@pytest.mark.parametrize("name", ["u23", "tame3", "tame2_p3"])
def test_fourier_against_direct_sum(name, rng):
    tower = get_tower(name)
    for lv in small_levels(tower, 10):
        phi = LocallyConstantFunction.random(lv, 1, -1, rng)
        assert fourier_level(phi).max_abs_diff(direct_fourier(phi)) < 1e-10


def test_round_trip(any_tower, rng):
    for lv in small_levels(any_tower):
        for _ in range(5):
            phi = random_phi(lv, rng)
            assert inverse_fourier_level(fourier_level(phi)).max_abs_diff(phi) < 1e-9


def test_plancherel_level(any_tower, rng):
    for lv in small_levels(any_tower):
        for _ in range(10):
            phi = random_phi(lv, rng)
            F = fourier_level(phi)
            assert haar_integral(F * F.conj()).real == pytest.approx(
                haar_integral(phi * phi.conj()).real, rel=1e-12)


def test_double_transform_reflects(any_tower, rng):
    for lv in small_levels(any_tower):
        phi = random_phi(lv, rng)
        FF = fourier_level(fourier_level(phi))
        g = phi.grid
        reflected = phi.evaluate_many([-x for x in g.elements()])
        assert np.max(np.abs(FF.reshape(g.A, g.B).values - reflected)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(-2, 2), st.integers(1, 2),
       st.sampled_from(sorted(ALL_SPECS)))
def test_round_trip_property(seed, A, K, name):
    tower = get_tower(name)
    rng = np.random.default_rng(seed)
    lv = small_levels(tower, 10)[-1]
    phi = LocallyConstantFunction.random(lv, A, A - K, rng)
    assert inverse_fourier_level(fourier_level(phi)).max_abs_diff(phi) < 1e-9
