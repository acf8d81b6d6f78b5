"""Monte Carlo for the measure and the projected process on one level.

Samples are kept as integer coordinate arrays: ``rows / p**shift`` with every
coordinate known modulo ``p**M`` (the tower precision).  The increment over a
time step ``dt`` is ``m_n * W`` where the shell of ``W`` is drawn from the exact
profile of the heat kernel and ``W`` is uniform on that shell.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .heat import ball_mass, heat_apply, pi_sphere_probs
from .lattice import apply_matrix_scaled, ord_rows
from .measure import CylindricalFunction, frobenius_pullback, integrate_mu
from .tower import FieldElement, TowerError, TowerLevel

__all__ = [
    "PathSample", "sample_mu", "sample_ball_rows", "sample_sphere_rows", "sample_increments",
    "sample_increment", "increment_shells", "simulate_path", "simulate_paths", "path_rng",
    "in_S_rows", "invariance_check", "tail_probability", "galois_transition_check",
    "thread_count", "parse_grid",
]


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("ULTRAHEAT_THREADS", "1")))
    except ValueError:
        return 1


def path_rng(seed: int, index: int) -> np.random.Generator:
    """RNG of path ``index``: the master seed with the index as spawn key."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def parse_grid(spec: str) -> np.ndarray:
    """``"start:step:stop"`` (stop inclusive) or a comma separated list."""
    if ":" in spec:
        start, step, stop = (float(v) for v in spec.split(":"))
        if step <= 0:
            raise ValueError("grid step must be positive")
        k = int(round((stop - start) / step))
        return np.round(start + step * np.arange(k + 1), 12)
    return np.array([float(v) for v in spec.split(",")])


# ---------------------------------------------------------------------------
# Coordinate-array samplers
# ---------------------------------------------------------------------------

def _row_shift(level: TowerLevel, A: int) -> int:
    return max(0, -min(level.ball_low(A)))


def _modulus(level: TowerLevel, shift: int) -> int:
    return level.p ** (shift + level.tower.M)


def _rand_below(rng, bound: int, size: int) -> np.ndarray:
    if bound < 2**62:
        return rng.integers(0, bound, size=size, dtype=np.int64)
    out = np.zeros(size, dtype=object)
    chunk = 2**30
    k = 1
    while k < bound:
        out = out * chunk + rng.integers(0, chunk, size=size).astype(object)
        k *= chunk
    return out % bound


def sample_ball_rows(level: TowerLevel, A: int, size: int, rng, shift: int) -> np.ndarray:
    """Uniform samples of ``|x|_n <= q**A`` as rows scaled by ``p**shift``."""
    p, M = level.p, level.tower.M
    mod = _modulus(level, shift)
    dtype = np.int64 if mod < 2**62 else object
    rows = np.zeros((size, level.m), dtype=dtype)
    for a, lo in enumerate(level.ball_low(A)):
        width = M - lo
        if width <= 0:
            continue
        r = _rand_below(rng, p**width, size)
        rows[:, a] = (r * p ** (lo + shift)) % mod
    return rows


def sample_sphere_rows(level: TowerLevel, s: int, size: int, rng, shift: int) -> np.ndarray:
    """Uniform samples of ``|x|_n = q**s``; rows of zeros if the shell is below precision."""
    p, f, M = level.p, level.f, level.tower.M
    t = -s
    i = t % level.e
    k = (t - i) // level.e
    if k >= M:
        return np.zeros((size, level.m), dtype=np.int64)
    rows = sample_ball_rows(level, s, size, rng, shift)
    lead = rng.integers(1, level.q, size=size)
    w = p ** (k + shift)
    mod = _modulus(level, shift)
    for j in range(f):
        a = level.index(i, j)
        col = rows[:, a]
        old = (col // w) % p
        new = (lead // p**j) % p
        rows[:, a] = (col + (new - old) * w) % mod
    return rows


def sample_mu(level: TowerLevel, rng, size: int | None = None):
    """Uniform sample(s) of the support ball: the level-n projection of the measure."""
    R = level.support_exponent
    shift = _row_shift(level, R)
    rows = sample_ball_rows(level, R, 1 if size is None else size, rng, shift)
    if size is None:
        return _to_element(level, rows[0], shift)
    return rows, shift


def _to_element(level: TowerLevel, row, shift: int) -> FieldElement:
    return FieldElement(level, [int(v) for v in row], shift, level.tower.M)


@lru_cache(maxsize=256)
def _profile_arrays(level: TowerLevel, t: float, alpha: float):
    prof = pi_sphere_probs(level, t, alpha)
    labels, probs = prof.as_arrays()
    probs = np.clip(probs, 0.0, None)
    return prof, labels, probs / probs.sum()


def increment_shells(level: TowerLevel, t: float, alpha: float, size: int, rng) -> np.ndarray:
    """Shell labels of W (``n_min`` stands for the floor ball)."""
    _, labels, probs = _profile_arrays(level, float(t), float(alpha))
    return rng.choice(labels, size=size, p=probs)


def sample_increments(level: TowerLevel, t: float, alpha: float, size: int, rng,
                      return_shells: bool = False):
    """``size`` increments ``m_n * W`` as scaled rows; returns (rows, shift[, shells])."""
    if not t > 0:
        raise ValueError("t must be positive")
    prof, _, _ = _profile_arrays(level, float(t), float(alpha))
    shift = _row_shift(level, level.d)
    mod = _modulus(level, shift)
    shells = increment_shells(level, t, alpha, size, rng)
    rows = np.zeros((size, level.m), dtype=np.int64 if mod < 2**62 else object)
    for s in np.unique(shells):
        idx = np.nonzero(shells == s)[0]
        if s == prof.n_min:
            part = sample_ball_rows(level, int(s), idx.size, rng, shift)
        else:
            part = sample_sphere_rows(level, int(s), idx.size, rng, shift)
        rows[idx] = part
    rows = (rows * level.m) % mod
    if return_shells:
        return rows, shift, shells
    return rows, shift


def sample_increment(level: TowerLevel, t: float, alpha: float, rng) -> FieldElement:
    rows, shift = sample_increments(level, t, alpha, 1, rng)
    return _to_element(level, rows[0], shift)


def in_S_rows(level: TowerLevel, rows: np.ndarray, shift: int) -> np.ndarray:
    """Membership of each row (a level-n point) in S, checked on levels 1..n."""
    tower = level.tower
    ok = np.ones(rows.shape[0], dtype=bool)
    for j in range(1, level.n + 1):
        lv = tower.level(j)
        if j == level.n:
            r, s = rows, shift
        else:
            r, s = apply_matrix_scaled(tower.projection_matrix(level.n, j), rows, shift, tower.M)
        o = ord_rows(lv, r, s)
        ok &= o >= -lv.support_exponent
    return ok


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

@dataclass
class PathSample:
    level: TowerLevel
    times: np.ndarray
    rows: np.ndarray
    shift: int
    seed: int
    index: int = 0

    @property
    def positions(self) -> list[FieldElement]:
        return [_to_element(self.level, r, self.shift) for r in self.rows]

    def in_S(self) -> np.ndarray:
        return in_S_rows(self.level, self.rows, self.shift)

    def to_dict(self) -> dict:
        return {"seed_path": {"seed": self.seed, "path": self.index},
                "times": [float(t) for t in self.times],
                "positions": [x.to_dict() for x in self.positions]}


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or grid[0] != 0:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return grid


def simulate_path(level: TowerLevel, grid, x0: FieldElement | None, alpha: float, rng,
                  seed: int = 0, index: int = 0, check_S: bool = True) -> PathSample:
    grid = _check_grid(grid)
    if x0 is not None and x0.level is not level:
        raise TowerError("starting point must live on the simulation level")
    shift = _row_shift(level, level.d)
    if x0 is not None and x0.prec is not None:
        shift = max(shift, x0.shift)
    mod = _modulus(level, shift)
    start = np.zeros(level.m, dtype=object)
    if x0 is not None and x0.prec is not None:
        start = np.array(x0.scaled(shift, mod), dtype=object)
    dts = np.diff(grid)
    steps = np.zeros((dts.size, level.m), dtype=object)
    for dt in np.unique(dts):
        idx = np.nonzero(dts == dt)[0]
        inc, s_inc = sample_increments(level, float(dt), alpha, idx.size, rng)
        steps[idx] = np.asarray(inc, dtype=object) * level.p ** (shift - s_inc)
    rows = np.vstack([start[None, :], np.cumsum(steps, axis=0) + start[None, :]]) % mod
    if mod < 2**62:
        rows = rows.astype(np.int64)
    path = PathSample(level, grid, rows, shift, seed, index)
    if check_S and x0 is not None and bool(in_S_rows(level, rows[:1], shift)[0]):
        inside = path.in_S()
        if not np.all(inside):
            raise AssertionError(f"path left S at step {int(np.argmin(inside))}")
    return path


def simulate_paths(level: TowerLevel, grid, x0, alpha: float, n_paths: int, seed: int,
                   threads: int | None = None, check_S: bool = True) -> list[PathSample]:
    """Independent paths; path i uses :func:`path_rng` (seed, i), results in index order."""
    threads = thread_count() if threads is None else threads

    def run(i):
        return simulate_path(level, grid, x0, alpha, path_rng(seed, i), seed, i, check_S)

    if threads <= 1:
        return [run(i) for i in range(n_paths)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(run, range(n_paths)))


# ---------------------------------------------------------------------------
# Exact checks
# ---------------------------------------------------------------------------

def invariance_check(f: CylindricalFunction, t: float, alpha: float) -> tuple[complex, complex]:
    """(int U_t f dmu, int f dmu)."""
    return integrate_mu(heat_apply(f, t, alpha)), integrate_mu(f)


def _vp(m: int, p: int) -> int:
    k = 0
    while m % p == 0:
        m //= p
        k += 1
    return k


def tail_probability(levels: int, eps_exp: int, t: float, alpha: float, tower) -> float:
    """Union bound for P(max_{n <= levels} ||T_n(X(t) - x)|| >= p**eps_exp)."""
    total = 0.0
    for n in range(1, levels + 1):
        lv = tower.level(n)
        # ||z|| < p**s  <=>  |z|_n <= q**(e s - 1); z = m w
        K = lv.e * (eps_exp + _vp(lv.m, lv.p)) - 1
        total += 1.0 - ball_mass(lv, K, t, alpha)
    return min(1.0, max(0.0, total))


def galois_transition_check(f: CylindricalFunction, t: float, alpha: float, power: int):
    """(U_t(f o Frob^j), (U_t f) o Frob^j) as value tables on the canonical grid."""
    if f.level.e != 1:
        raise TowerError("Galois action is only provided on unramified towers")
    lhs = heat_apply(frobenius_pullback(f, power), t, alpha)
    rhs = frobenius_pullback(heat_apply(f, t, alpha), power)
    return lhs.values, rhs.values
