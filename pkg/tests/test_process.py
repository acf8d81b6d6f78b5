import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from ultraheat.lattice import BallGrid, ord_rows
from ultraheat.lcfunc import LocallyConstantFunction
from ultraheat.measure import CylindricalFunction, TruncatedPoint, in_S
from ultraheat.heat import heat_apply, pi_sphere_probs
from ultraheat.process import (PathSample, galois_transition_check, in_S_rows, increment_shells,
                               invariance_check, parse_grid, path_rng, sample_increment,
                               sample_increments, sample_mu, simulate_path, simulate_paths,
                               tail_probability, thread_count)
from ultraheat.tower import TowerError

from conftest import get_tower, small_levels


def vp(m, p):
    k = 0
    while m % p == 0:
        m //= p
        k += 1
    return k


def shells_of(level, rows, shift, floor):
    """Shell index -ord of each row, with everything below ``floor`` lumped into it."""
    o = ord_rows(level, rows, shift)
    return np.maximum(-o, floor)


def binned_counts(labels, support):
    return np.array([np.sum(labels == s) for s in support])


def merge_small(expected, observed, minimum=5.0):
    """Pool neighbouring bins until every expected count reaches ``minimum``."""
    e_out, o_out, e_acc, o_acc = [], [], 0.0, 0
    for e, o in zip(expected, observed):
        e_acc += e
        o_acc += o
        if e_acc >= minimum:
            e_out.append(e_acc)
            o_out.append(o_acc)
            e_acc, o_acc = 0.0, 0
    if e_acc > 0 or o_acc > 0:
        e_out[-1] += e_acc
        o_out[-1] += o_acc
    return np.array(e_out), np.array(o_out)


def two_sample_p(a, b):
    support = np.union1d(a, b)
    table = np.vstack([binned_counts(a, support), binned_counts(b, support)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return stats.chi2_contingency(table)[1]


# -- helpers ------------------------------------------------------------------------------------

def test_parse_grid():
    assert np.allclose(parse_grid("0:0.25:1"), [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(parse_grid("0:0.01:1")[-1], 1.0) and parse_grid("0:0.01:1").size == 101
    assert np.allclose(parse_grid("0,0.5,2"), [0, 0.5, 2])
    with pytest.raises(ValueError):
        parse_grid("0:0:1")


def test_thread_count(monkeypatch):
    monkeypatch.setenv("ULTRAHEAT_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("ULTRAHEAT_THREADS", "zero")
    assert thread_count() == 1
    monkeypatch.delenv("ULTRAHEAT_THREADS")
    assert thread_count() == 1


def test_path_rng_streams_differ():
    a = path_rng(5, 0).integers(0, 2**62, 4)
    assert np.array_equal(a, path_rng(5, 0).integers(0, 2**62, 4))
    assert not np.array_equal(a, path_rng(5, 1).integers(0, 2**62, 4))


# -- the measure --------------------------------------------------------------------------------

def test_sample_mu_in_ball_and_S(any_tower, rng):
    for lv in any_tower.levels:
        for _ in range(30):
            x = sample_mu(lv, rng)
            assert x.is_zero() or x.in_ball(lv.support_exponent)
            assert all(in_S(TruncatedPoint.from_top(x))[: lv.n])
        rows, shift = sample_mu(lv, rng, 200)
        assert np.all(in_S_rows(lv, rows, shift))


def test_sample_mu_shells_uniform(any_tower, rng):
    for lv in any_tower.levels:
        R = lv.support_exponent
        rows, shift = sample_mu(lv, rng, 20000)
        sh = shells_of(lv, rows, shift, R - 4)
        for s in range(R - 3, R + 1):
            p = (1 - 1 / lv.q) * float(lv.q) ** (s - R)
            emp = np.mean(sh == s)
            assert abs(emp - p) <= 4 * math.sqrt(p * (1 - p) / 20000) + 1e-12


def test_projection_of_mu_samples(t2, rng):
    for n in (2, 3):
        hi, lo = t2.level(n), t2.level(n - 1)
        R = lo.support_exponent
        projected = [t2.project(sample_mu(hi, rng), n - 1) for _ in range(2000)]
        direct = [sample_mu(lo, rng) for _ in range(2000)]

        def shell(x):
            return R - 4 if x.is_zero() else max(-x.ord(), R - 4)

        a = np.array([shell(x) for x in projected])
        b = np.array([shell(x) for x in direct])
        assert a.max() <= R
        for s in range(R - 3, R + 1):
            pa, pb = np.mean(a == s), np.mean(b == s)
            p = (1 - 1 / lo.q) * float(lo.q) ** (s - R)
            sigma = math.sqrt(p * (1 - p) / 2000)
            assert abs(pa - p) <= 4 * sigma and abs(pb - p) <= 4 * sigma


# -- increments ---------------------------------------------------------------------------------

def test_increment_support(any_tower, rng):
    for lv in any_tower.levels:
        R = lv.support_exponent
        rows, shift = sample_increments(lv, 0.5, 1.0, 2000, rng)
        o = ord_rows(lv, rows, shift)
        assert np.all(-o <= R)
        z = sample_increment(lv, 0.5, 1.0, rng)
        assert z.is_zero() or z.in_ball(R)


def test_increment_shells_follow_labels(tame, rng):
    lv = tame.level(2)
    rows, shift, labels = sample_increments(lv, 1.0, 1.0, 3000, rng, return_shells=True)
    prof = pi_sphere_probs(lv, 1.0, 1.0)
    offset = lv.e * vp(lv.m, lv.p)
    above = labels > prof.n_min
    o = ord_rows(lv, rows[above], shift)
    assert np.array_equal(-o, labels[above] - offset)


@pytest.mark.parametrize("name", ["u23", "tame3", "tame2_p3", "mixed"])
def test_increment_chi_square(name, rng):
    tower = get_tower(name)
    for lv in tower.levels[:2]:
        for t, alpha in ((1.0, 1.0), (0.1, 0.5)):
            n = 20000
            labels = increment_shells(lv, t, alpha, n, rng)
            prof = pi_sphere_probs(lv, t, alpha)
            support, probs = prof.as_arrays()
            exp, obs = merge_small(n * probs, binned_counts(labels, support))
            assert stats.chisquare(obs, exp).pvalue > 0.001


def test_sum_of_half_steps(t2, rng):
    lv = t2.level(2)
    n = 6000
    r1, s1 = sample_increments(lv, 0.5, 1.0, n, rng)
    r2, s2 = sample_increments(lv, 0.5, 1.0, n, rng)
    r3, s3 = sample_increments(lv, 1.0, 1.0, n, rng)
    mod = lv.p ** (s1 + t2.M)
    floor = lv.support_exponent - 12
    a = shells_of(lv, (r1 + r2) % mod, s1, floor)
    b = shells_of(lv, r3, s3, floor)
    assert two_sample_p(a, b) > 0.001


def test_increments_reject_bad_time(t2, rng):
    with pytest.raises(ValueError):
        sample_increments(t2.level(1), 0.0, 1.0, 5, rng)


# -- paths --------------------------------------------------------------------------------------

def test_path_starts_at_x0(t2, rng):
    lv = t2.level(2)
    x0 = sample_mu(lv, rng)
    path = simulate_path(lv, [0, 0.5, 1.0], x0, 1.0, rng)
    assert path.positions[0] == x0
    assert len(path.positions) == 3


def test_paths_deterministic_and_thread_independent(t2):
    lv = t2.level(2)
    grid = parse_grid("0:0.1:1")
    a = simulate_paths(lv, grid, lv.zero(), 1.0, 12, seed=7, threads=1)
    b = simulate_paths(lv, grid, lv.zero(), 1.0, 12, seed=7, threads=4)
    c = simulate_paths(lv, grid, lv.zero(), 1.0, 12, seed=8, threads=1)
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.rows, pb.rows)
        assert json.dumps(pa.to_dict()) == json.dumps(pb.to_dict())
    assert any(not np.array_equal(pa.rows, pc.rows) for pa, pc in zip(a, c))


def test_increments_independent_of_start(t2, rng):
    lv = t2.level(2)
    grid = np.linspace(0, 1, 11)
    floor = lv.support_exponent - 10
    x1 = lv.zero()
    x2 = lv.from_rational(Fraction(1, 8))

    def step_shells(x0, seed):
        out = []
        for p in simulate_paths(lv, grid, x0, 1.0, 300, seed, threads=1, check_S=False):
            diffs = np.diff(p.rows.astype(object), axis=0) % (lv.p ** (p.shift + t2.M))
            out.append(shells_of(lv, diffs, p.shift, floor))
        return np.concatenate(out)

    assert two_sample_p(step_shells(x1, 1), step_shells(x2, 2)) > 0.001


def test_paths_stay_in_S(any_tower):
    for lv in any_tower.levels:
        grid = np.linspace(0, 2, 21)
        rng = np.random.default_rng(3)
        x0 = sample_mu(lv, rng)
        for path in simulate_paths(lv, grid, x0, 1.0, 10, seed=11, threads=1):
            assert np.all(path.in_S())


def test_path_outside_S_is_not_checked(t2):
    lv = t2.level(2)
    far = lv.from_rational(Fraction(1, 8))
    path = simulate_path(lv, [0, 1], far, 1.0, np.random.default_rng(0))
    assert not path.in_S()[0]


def test_path_grid_validation(t2, rng):
    lv = t2.level(1)
    with pytest.raises(ValueError):
        simulate_path(lv, [0, 1, 1], None, 1.0, rng)
    with pytest.raises(ValueError):
        simulate_path(lv, [0.5, 1], None, 1.0, rng)
    with pytest.raises(TowerError):
        simulate_path(lv, [0, 1], t2.level(2).one(), 1.0, rng)


def test_path_dict_format(t2):
    lv = t2.level(1)
    path = simulate_path(lv, [0, 0.5], None, 1.0, path_rng(4, 2), seed=4, index=2)
    d = path.to_dict()
    assert d["seed_path"] == {"seed": 4, "path": 2}
    assert d["times"] == [0.0, 0.5]
    assert len(d["positions"]) == 2 and d["positions"][0]["level"] == 1
    assert isinstance(path, PathSample)


# -- exact checks --------------------------------------------------------------------------------

def test_invariance(any_tower, rng):
    for lv in small_levels(any_tower):
        a = any_tower.sample_sphere(lv.n, lv.e, rng)
        lhs, rhs = invariance_check(CylindricalFunction.fa(a), 1.0, 1.0)
        assert abs(lhs) < 1e-12 and abs(rhs) < 1e-12
        lhs, rhs = invariance_check(CylindricalFunction.constant(lv), 1.0, 1.0)
        assert lhs == pytest.approx(1) and rhs == pytest.approx(1)
        for _ in range(5):
            f = CylindricalFunction.random(lv, 1, rng)
            lhs, rhs = invariance_check(f, 0.3, 0.5)
            assert abs(lhs - rhs) < 1e-10


def test_tail_probability(t2, tame):
    assert tail_probability(1, 0, 1e-6, 1.0, t2) < 1e-3
    assert tail_probability(3, 10, 1.0, 1.0, t2) == 0
    assert tail_probability(2, 10, 1.0, 1.0, tame) == 0
    for tower, levels in ((t2, 3), (tame, 2)):
        vals = [tail_probability(levels, 0, t, 1.0, tower) for t in (1, 0.1, 0.01, 0.001)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        assert tail_probability(levels, 0, 1e-9, 1.0, tower) < 1e-6


def test_tail_probability_matches_samples(t2, rng):
    lv = t2.level(1)
    rows, shift = sample_increments(lv, 1.0, 1.0, 20000, rng)
    o = ord_rows(lv, rows, shift)
    emp = np.mean(o <= 0)  # ||z|| >= 1
    p = tail_probability(1, 0, 1.0, 1.0, t2)
    assert abs(emp - p) <= 4 * math.sqrt(p * (1 - p) / 20000)


def test_galois_transition(t2, rng):
    lv = t2.level(2)
    f = CylindricalFunction.random(lv, 1, rng)
    lhs, rhs = galois_transition_check(f, 1.0, 1.0, 0)
    assert np.array_equal(lhs, rhs)
    for _ in range(5):
        f = CylindricalFunction.random(lv, 2, rng)
        lhs, rhs = galois_transition_check(f, 0.7, 1.5, 1)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_galois_transition_radial(t2):
    lv = t2.level(2)
    R = lv.support_exponent
    g = BallGrid(lv, R, R - 3)
    f = CylindricalFunction(LocallyConstantFunction.from_grid(
        g, [1.0 / (1 + s - g.B) for s in g.shells()]))
    lhs, rhs = galois_transition_check(f, 0.5, 1.0, 1)
    u = heat_apply(f, 0.5, 1.0)
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    assert np.max(np.abs(lhs - u.values)) < 1e-12


def test_galois_requires_unramified(tame, rng):
    f = CylindricalFunction.random(tame.level(2), 1, rng)
    with pytest.raises(TowerError):
        galois_transition_check(f, 1.0, 1.0, 1)
