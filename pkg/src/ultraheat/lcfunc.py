"""Locally constant, compactly supported functions on a single level ``K_n``.

Exponents are in the normalized scale: a function with exponents ``(A, B)`` is
supported in ``|x|_n <= q**A`` and constant on cosets of ``|x|_n <= q**B``.
Haar measure is normalized by ``vol(|x|_n <= 1) = 1``.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .lattice import BallGrid, phase_matvec, trace_phases
from .padic import PrecisionError
from .tower import FieldElement, Tower, TowerLevel

__all__ = [
    "LocallyConstantFunction", "haar_integral", "character", "fourier_level",
    "inverse_fourier_level", "ball_integral_character", "character_function",
    "character_integral_direct", "omega", "padic_fractional_part",
]


class LocallyConstantFunction:
    """Complex values on the cosets of ``ball(A)/ball(B)`` at level ``n``."""

    def __init__(self, level: TowerLevel, A: int, B: int, values):
        self.grid = BallGrid(level, A, B)
        values = np.asarray(values, dtype=complex).ravel()
        if values.shape[0] != self.grid.size:
            raise ValueError(f"table length {values.shape[0]} != {self.grid.size}")
        self.values = values

    @classmethod
    def from_grid(cls, grid: BallGrid, values) -> "LocallyConstantFunction":
        return cls(grid.level, grid.A, grid.B, values)

    @classmethod
    def from_callable(cls, level: TowerLevel, A: int, B: int, fn):
        grid = BallGrid(level, A, B)
        return cls(level, A, B, [fn(x) for x in grid.elements()])

    @classmethod
    def random(cls, level: TowerLevel, A: int, B: int, rng: np.random.Generator):
        size = level.q ** (A - B)
        vals = rng.normal(size=size) + 1j * rng.normal(size=size)
        return cls(level, A, B, vals)

    @classmethod
    def constant(cls, level: TowerLevel, A: int, value=1.0):
        return cls(level, A, A, [value])

    # -- basic properties ----------------------------------------------------
    @property
    def level(self) -> TowerLevel:
        return self.grid.level

    @property
    def n(self) -> int:
        return self.grid.level.n

    @property
    def A(self) -> int:
        return self.grid.A

    @property
    def B(self) -> int:
        return self.grid.B

    def __repr__(self):
        return f"LocallyConstantFunction(n={self.n}, A={self.A}, B={self.B})"

    def evaluate(self, x: FieldElement) -> complex:
        return complex(self.evaluate_many([x])[0])

    __call__ = evaluate

    def evaluate_many(self, xs) -> np.ndarray:
        idx = self.grid.locate_elements(list(xs))
        out = np.zeros(len(idx), dtype=complex)
        ok = idx >= 0
        out[ok] = self.values[idx[ok]]
        return out

    def evaluate_scaled(self, rows, shift) -> np.ndarray:
        idx = self.grid.locate(rows, shift)
        out = np.zeros(len(idx), dtype=complex)
        ok = idx >= 0
        out[ok] = self.values[idx[ok]]
        return out

    def reshape(self, A: int, B: int) -> "LocallyConstantFunction":
        g, v = self.grid.reshape_to(self.values, A, B)
        return LocallyConstantFunction.from_grid(g, v)

    def refine(self, B: int) -> "LocallyConstantFunction":
        return self.reshape(self.A, min(B, self.B))

    def simplify(self, atol: float = 1e-12) -> "LocallyConstantFunction":
        """Coarsest equivalent table (smallest support, largest constancy)."""
        g, v = self.grid, self.values
        while g.A > g.B:
            r = g.level.q
            blk = v.reshape(g.size // r, r)
            if np.all(np.abs(blk[:, 1:]) <= atol):
                g, v = g.restrict(v, g.A - 1)
            else:
                break
        while g.B < g.A:
            res = g.coarsen(v, g.B + 1, atol)
            if res is None:
                break
            g, v = res
        return LocallyConstantFunction.from_grid(g, v)

    # -- algebra ------------------------------------------------------------------
    def _align(self, other: "LocallyConstantFunction"):
        if other.level is not self.level:
            raise ValueError("functions live on different levels")
        A, B = max(self.A, other.A), min(self.B, other.B)
        return self.reshape(A, B), other.reshape(A, B)

    def __add__(self, other):
        a, b = self._align(other)
        return LocallyConstantFunction.from_grid(a.grid, a.values + b.values)

    def __sub__(self, other):
        a, b = self._align(other)
        return LocallyConstantFunction.from_grid(a.grid, a.values - b.values)

    def __mul__(self, other):
        if isinstance(other, LocallyConstantFunction):
            a, b = self._align(other)
            return LocallyConstantFunction.from_grid(a.grid, a.values * b.values)
        return LocallyConstantFunction.from_grid(self.grid, self.values * other)

    __rmul__ = __mul__

    def conj(self) -> "LocallyConstantFunction":
        return LocallyConstantFunction.from_grid(self.grid, np.conj(self.values))

    def allclose(self, other, atol=1e-9) -> bool:
        a, b = self._align(other)
        return bool(np.allclose(a.values, b.values, rtol=0, atol=atol))

    def max_abs_diff(self, other) -> float:
        a, b = self._align(other)
        return float(np.max(np.abs(a.values - b.values))) if a.values.size else 0.0

    # -- serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {"level": self.n, "A": self.A, "B": self.B,
                "values": [[float(v.real), float(v.imag)] for v in self.values]}

    @classmethod
    def from_dict(cls, tower: Tower, data: dict) -> "LocallyConstantFunction":
        vals = [complex(re, im) for re, im in data["values"]]
        return cls(tower.level(int(data["level"])), int(data["A"]), int(data["B"]), vals)


def omega(level: TowerLevel) -> LocallyConstantFunction:
    """Indicator of the unit ball ``||x|| <= 1``."""
    return LocallyConstantFunction.constant(level, 0, 1.0)


def haar_integral(phi: LocallyConstantFunction) -> complex:
    return complex(np.sum(phi.values) * float(phi.level.q) ** phi.B)


def padic_fractional_part(t: Fraction, p: int) -> Fraction:
    """{t}: the part of the p-adic expansion with negative exponents, in [0, 1)."""
    t = Fraction(t)
    den = t.denominator
    k = 0
    while den % p == 0:
        den //= p
        k += 1
    if k == 0:
        return Fraction(0)
    pk = p**k
    return Fraction(t.numerator * pow(den, -1, pk) % pk, pk)


def character(y: FieldElement) -> complex:
    """chi(Tr_{K_n/Q_p}(y)) with chi(t) = exp(2 pi i {t})."""
    if y.prec is None:
        return 1.0 + 0j
    if y.prec <= 0:
        raise PrecisionError("trace fractional part is not determined at this precision")
    tr = y.tower.trace_abs(y)
    frac = padic_fractional_part(tr, y.level.p)
    return complex(np.exp(2j * np.pi * float(frac)))


def fourier_level(phi: LocallyConstantFunction, sign: int = 1) -> LocallyConstantFunction:
    """``q**(-d/2) * int chi(sign * Tr(x xi)) phi(x) dx`` as an exact coset sum."""
    lv = phi.level
    d, q = lv.d, lv.q
    out_grid = BallGrid(lv, d - phi.B, d - phi.A)
    X = phi.grid.reps_scaled()
    Xi = out_grid.reps_scaled()
    vals = phase_matvec(lv, Xi, out_grid.shift, X, phi.grid.shift, phi.values, scalar=sign)
    vals = vals * float(q) ** (phi.B - d / 2)
    return LocallyConstantFunction.from_grid(out_grid, vals)


def inverse_fourier_level(F: LocallyConstantFunction) -> LocallyConstantFunction:
    return fourier_level(F, sign=-1)


def ball_integral_character(a: FieldElement, nu: int, sphere: bool = False) -> float:
    """Closed form of the ball / sphere integral of ``x -> chi(Tr(a x))``."""
    lv = a.level
    q, d = lv.q, lv.d
    if a.exact_zero or a.is_zero():
        N = -math.inf
    else:
        N = -a.ord()
    if not sphere:
        return float(q) ** nu if N <= d - nu else 0.0
    if N <= d - nu:
        return (1 - 1 / q) * float(q) ** nu
    if N == d - nu + 1:
        return -float(q) ** (nu - 1)
    return 0.0


def character_function(a: FieldElement, A: int, B: int | None = None) -> LocallyConstantFunction:
    """Table of ``x -> chi(Tr(a x))`` on ball(A) (constancy chosen from |a|)."""
    lv = a.level
    if a.exact_zero or a.is_zero():
        Bmax = A
    else:
        Bmax = lv.d + a.ord()  # chi(Tr(a .)) is trivial on ball(d - N)
    B = min(A, Bmax) if B is None else B
    if B > Bmax:
        raise ValueError("resolution too coarse for this character")
    grid = BallGrid(lv, A, B)
    X = grid.reps_scaled()
    shift = max(a.shift, 0)
    mod = lv.p ** (shift + lv.tower.M)
    arow = np.array([a.scaled(shift, mod) if a.prec is not None else [0] * lv.m],
                    dtype=object)
    vals = trace_phases(lv, X, grid.shift, arow, shift)[:, 0]
    return LocallyConstantFunction.from_grid(grid, vals)


def character_integral_direct(a: FieldElement, nu: int, sphere: bool = False) -> complex:
    """Direct coset-sum evaluation of the ball / sphere character integrals."""
    lv = a.level
    bmax = nu if (a.exact_zero or a.is_zero()) else lv.d + a.ord()
    phi = character_function(a, nu, min(bmax, nu - 1 if sphere else nu))
    vals = phi.values.copy()
    if sphere:
        vals[phi.grid.shells() < nu] = 0.0
    return complex(np.sum(vals) * float(a.level.q) ** phi.B)
