"""Cylindrical functions and the Gaussian measure on the projective limit.

A cylindrical function ``f(x) = phi(T_n(x))`` is stored canonically: ``phi`` is
restricted to the ball ``|z|_n <= q_n**R_n`` on which the level-n projection of
the measure lives (``R_n = d_n - e_n v_p(m_n)``, i.e. ``||z|| <=
q_n**(d_n/m_n) ||m_n||``).  Integration against the measure is the normalized
average of ``phi`` over that ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import BallGrid, apply_matrix_scaled
from .lcfunc import LocallyConstantFunction, character_function
from .padic import vp
from .tower import FieldElement, Tower, TowerError, TowerLevel

__all__ = [
    "CylindricalFunction", "TruncatedPoint", "pairing", "integrate_mu", "in_S",
    "ess_sup_pairing", "ess_sup_closed_form", "ess_sup_enumerated", "pairing_pushforward",
    "shift_integral", "galois_integral", "coords_ord", "lift_constancy", "support_exponent",
    "Pushforward", "frobenius_pullback",
]


def support_exponent(level: TowerLevel) -> int:
    return level.support_exponent


def coords_ord(level: TowerLevel, coords) -> float:
    """Uniformizer valuation of an element given by rational coordinates."""
    best = math.inf
    for a, c in enumerate(coords):
        c = Fraction(c)
        if c != 0:
            best = min(best, level.e * vp(c, level.p) + a // level.f)
    return best


def lift_constancy(tower: Tower, n: int, nu: int, B: int) -> int:
    """Largest B' <= R_nu with T_n(ball_nu(B')) inside ball_n(B)."""
    lo_lv, hi_lv = tower.level(n), tower.level(nu)
    if nu == n:
        return min(B, hi_lv.support_exponent)
    cols = list(zip(*tower.projection_matrix(nu, n).fractions()))
    Bp = hi_lv.support_exponent
    while True:
        lows = hi_lv.ball_low(Bp)
        ok = all(coords_ord(lo_lv, col) + lo_lv.e * low >= -B
                 for col, low in zip(cols, lows))
        if ok:
            return Bp
        Bp -= 1


class CylindricalFunction:
    """``f(x) = phi(T_n(x))`` with ``phi`` canonical on the support ball."""

    def __init__(self, phi: LocallyConstantFunction):
        lv = phi.level
        R = lv.support_exponent
        self.phi = phi.reshape(R, min(phi.B, R))

    @classmethod
    def constant(cls, level: TowerLevel, value=1.0) -> "CylindricalFunction":
        R = level.support_exponent
        return cls(LocallyConstantFunction.constant(level, R, value))

    @classmethod
    def random(cls, level: TowerLevel, depth: int, rng) -> "CylindricalFunction":
        R = level.support_exponent
        return cls(LocallyConstantFunction.random(level, R, R - depth, rng))

    @classmethod
    def fa(cls, a: FieldElement) -> "CylindricalFunction":
        """``f_a(x) = chi(<a, x>)`` on the level of ``a``."""
        lv = a.level
        return cls(character_function(a.scale(Fraction(1, lv.m)), lv.support_exponent))

    @property
    def level(self) -> TowerLevel:
        return self.phi.level

    @property
    def n(self) -> int:
        return self.phi.n

    @property
    def tower(self) -> Tower:
        return self.phi.level.tower

    @property
    def grid(self) -> BallGrid:
        return self.phi.grid

    @property
    def values(self) -> np.ndarray:
        return self.phi.values

    def __repr__(self):
        return f"CylindricalFunction(n={self.n}, B={self.phi.B})"

    def with_values(self, values) -> "CylindricalFunction":
        return CylindricalFunction(LocallyConstantFunction.from_grid(self.grid, values))

    def evaluate(self, x: "TruncatedPoint") -> complex:
        return self.phi.evaluate(x.coord(self.n))

    __call__ = evaluate

    def lift(self, nu: int) -> "CylindricalFunction":
        """The same function written through T_nu (nu >= n)."""
        if nu < self.n:
            raise TowerError("lift to a lower level")
        if nu == self.n:
            return self
        tower = self.tower
        Bp = lift_constancy(tower, self.n, nu, self.phi.B)
        g = BallGrid(tower.level(nu), tower.level(nu).support_exponent, Bp)
        rows, shift = apply_matrix_scaled(tower.projection_matrix(nu, self.n),
                                          g.reps_scaled(), g.shift, self.grid.top)
        return CylindricalFunction(LocallyConstantFunction.from_grid(
            g, self.phi.evaluate_scaled(rows, shift)))

    def align(self, other: "CylindricalFunction"):
        nu = max(self.n, other.n)
        a, b = self.lift(nu), other.lift(nu)
        B = min(a.phi.B, b.phi.B)
        return (CylindricalFunction(a.phi.refine(B)), CylindricalFunction(b.phi.refine(B)))

    def __add__(self, other):
        a, b = self.align(other)
        return a.with_values(a.values + b.values)

    def __sub__(self, other):
        a, b = self.align(other)
        return a.with_values(a.values - b.values)

    def __mul__(self, other):
        if isinstance(other, CylindricalFunction):
            a, b = self.align(other)
            return a.with_values(a.values * b.values)
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def conj(self):
        return self.with_values(np.conj(self.values))

    def max_abs_diff(self, other) -> float:
        a, b = self.align(other)
        return float(np.max(np.abs(a.values - b.values)))

    def to_dict(self) -> dict:
        return {"level": self.n, "phi": self.phi.to_dict()}

    @classmethod
    def from_dict(cls, tower: Tower, data: dict) -> "CylindricalFunction":
        phi = LocallyConstantFunction.from_dict(tower, data["phi"])
        if int(data["level"]) != phi.n:
            raise ValueError("level mismatch between function and table")
        return cls(phi)


class TruncatedPoint:
    """A point of the projective limit known through its first ``depth`` coordinates."""

    def __init__(self, coords: list[FieldElement], check: bool = True):
        self.coords = list(coords)
        for j, x in enumerate(self.coords, start=1):
            if x.n != j:
                raise TowerError(f"coordinate {j} lives at level {x.n}")
        if check and self.coords:
            tower = self.coords[0].tower
            top = self.coords[-1]
            for j, x in enumerate(self.coords[:-1], start=1):
                if tower.project(top, j) != x:
                    raise ValueError(f"coordinate {j} is not T_{j} of the last coordinate")

    @classmethod
    def from_top(cls, x: FieldElement) -> "TruncatedPoint":
        tower = x.tower
        return cls([tower.project(x, j) for j in range(1, x.n + 1)], check=False)

    @classmethod
    def zero(cls, tower: Tower, depth: int = 3) -> "TruncatedPoint":
        return cls([tower.level(j).zero() for j in range(1, depth + 1)], check=False)

    @property
    def depth(self) -> int:
        return len(self.coords)

    def coord(self, n: int) -> FieldElement:
        if n > self.depth:
            raise TowerError(f"point has depth {self.depth} < {n}")
        return self.coords[n - 1]

    def __add__(self, other: "TruncatedPoint") -> "TruncatedPoint":
        k = min(self.depth, other.depth)
        return TruncatedPoint([a + b for a, b in zip(self.coords[:k], other.coords[:k])],
                              check=False)

    def __neg__(self):
        return TruncatedPoint([-a for a in self.coords], check=False)

    def __sub__(self, other):
        return self + (-other)

    def to_dict(self) -> dict:
        return {"depth": self.depth, "coords": [c.to_dict() for c in self.coords]}

    @classmethod
    def from_dict(cls, tower: Tower, data: dict) -> "TruncatedPoint":
        pts = [FieldElement.from_dict(tower, c) for c in data["coords"]]
        if len(pts) != int(data["depth"]):
            raise ValueError("depth does not match number of coordinates")
        return cls(pts)


def pairing(a: FieldElement, x: TruncatedPoint) -> FieldElement:
    """<a, x> = T(a x_n), an element of Q_p (level 1)."""
    xn = x.coord(a.n)
    return a.tower.project(a * xn, 1)


def integrate_mu(f: CylindricalFunction) -> complex:
    lv = f.level
    vol = float(lv.q) ** f.phi.B * f.values.size
    # q^-d ||m||^-m times the Haar integral over the support ball
    return complex(np.sum(f.values) * float(lv.q) ** f.phi.B / vol)


def in_S(x: TruncatedPoint) -> list[bool]:
    return [c.in_ball(c.level.support_exponent) for c in x.coords]


def ess_sup_closed_form(a: FieldElement) -> Fraction:
    if a.exact_zero or a.is_zero():
        raise ValueError("essential supremum of the zero functional")
    lv = a.level
    N = -a.ord()
    return Fraction(lv.p) ** (-math.floor(Fraction(-N, lv.e)))


def ess_sup_enumerated(a: FieldElement, resolution: int = 6) -> Fraction:
    """max |<a, x>|_1 over coset representatives of the level support ball."""
    lv = a.level
    p = lv.p
    R = lv.support_exponent
    grid = BallGrid(lv, R, R - resolution)
    # linear functional z -> Tr(a z) / m in coordinates
    acoords = a.coords()
    w = [sum((acoords[c] * lv.gram[c][b] for c in range(lv.m)), Fraction(0)) / lv.m
         for b in range(lv.m)]
    Lw = max([0] + [-vp(v, p) for v in w if v != 0])
    L = grid.shift + Lw
    mod = p ** (L + lv.tower.M)
    W = np.array([int((v * Fraction(p) ** Lw).numerator
                      * pow((v * Fraction(p) ** Lw).denominator, -1, mod) % mod)
                  if v != 0 else 0 for v in w], dtype=object)
    Z = grid.reps_scaled().astype(object)
    vals = np.mod(Z.dot(W), mod)
    best = None
    for t in vals:
        t = int(t)
        if t == 0:
            continue
        v = 0
        while t % p == 0:
            t //= p
            v += 1
        v -= L
        best = v if best is None else min(best, v)
    if best is None:
        return Fraction(0)
    return Fraction(p) ** (-best)


def ess_sup_pairing(a: FieldElement, resolution: int = 6) -> Fraction:
    closed = ess_sup_closed_form(a)
    enumerated = ess_sup_enumerated(a, resolution)
    if closed != enumerated:
        raise AssertionError(f"closed form {closed} != enumerated maximum {enumerated}")
    return closed


@dataclass(frozen=True)
class Pushforward:
    """Law of <a, x>: normalized Haar measure on ``|z|_1 <= p**(-m)``."""
    p: int
    m: int

    @property
    def radius(self) -> Fraction:
        return Fraction(self.p) ** (-self.m)

    @property
    def density(self) -> Fraction:
        """Density with respect to Haar measure on Q_p (unit ball of volume 1)."""
        return Fraction(self.p) ** self.m

    def ball_mass(self, k: int) -> Fraction:
        """P(|<a, x>|_1 <= p**k)."""
        if k >= -self.m:
            return Fraction(1)
        return Fraction(self.p) ** (k + self.m)


def pairing_pushforward(a: FieldElement) -> Pushforward:
    if a.exact_zero or a.is_zero():
        raise ValueError("pushforward under the zero functional")
    N = -a.ord()
    return Pushforward(a.level.p, math.floor(Fraction(-N, a.level.e)))


def shift_integral(f: CylindricalFunction, y: TruncatedPoint) -> complex:
    """Integral of x -> f(x + y) against the measure."""
    yn = y.coord(f.n)
    g = f.grid
    if yn.prec is None:
        return integrate_mu(f)
    shift = max(g.shift, yn.shift)
    mod = f.level.p ** max(1, shift + g.top)
    rows = np.mod(g.reps_scaled(shift=shift).astype(object)
                  + np.array(yn.scaled(shift, mod), dtype=object), mod)
    vals = f.phi.evaluate_scaled(rows, shift)
    return complex(np.mean(vals))


def frobenius_pullback(f: CylindricalFunction, power: int) -> CylindricalFunction:
    """x -> f(Frob^power x) (unramified levels)."""
    lv = f.level
    if lv.e != 1:
        raise TowerError("Galois action is only provided on unramified towers")
    g = f.grid
    rows = g.reps_scaled()
    for _ in range(power % lv.f):
        rows, _ = apply_matrix_scaled(lv.frobenius_matrix, rows, g.shift, g.top)
    return f.with_values(f.phi.evaluate_scaled(rows, g.shift))


def galois_integral(f: CylindricalFunction, power: int) -> complex:
    """Integral of x -> f(Frob^power x) against the measure (unramified levels)."""
    return integrate_mu(frobenius_pullback(f, power))
