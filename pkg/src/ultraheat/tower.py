"""Towers of finite extensions of Q_p and fixed-precision arithmetic in them.

A level ``K_n`` is ``U_f (x) Q_p(pi)`` where ``U_f`` is the unramified extension
of degree ``f`` generated by the Teichmueller lift ``zeta`` of a Conway root and
``pi`` (present only at and above a tamely ramified step) satisfies
``pi**e = p*u``.  Elements are stored by their coordinates in the basis
``pi**i * zeta**j`` (flattened index ``i*f + j``); each coordinate lives in
``Q_p`` at a fixed absolute precision.

Absolute values: ``norm_exponent`` conventions follow the normalized scale,
``|x|_n = q_n ** (-ord_pi(x))``, and ``||x|| = |x|_n ** (1/m_n)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .padic import (PrecisionError, conway_polynomial, det_fraction, inverse_fraction,
                    inverse_mod, is_prime, rational_to_scaled, vp, vp_int)

__all__ = [
    "Unramified", "TameEisenstein", "TowerSpec", "Tower", "TowerLevel", "FieldElement",
    "PadicMatrix", "TowerError", "EnumerationCapError", "PrecisionError", "build_tower",
    "DEFAULT_ENUM_CAP",
]

DEFAULT_ENUM_CAP = 10**6
MIN_SIGNIFICANT_DIGITS = 4


class TowerError(ValueError):
    pass


class EnumerationCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class Unramified:
    degree: int


@dataclass(frozen=True)
class TameEisenstein:
    degree: int
    unit: int = 1


Step = Union[Unramified, TameEisenstein]


@dataclass(frozen=True)
class TowerSpec:
    p: int
    precision: int = 24
    steps: tuple = ()

    @classmethod
    def from_dict(cls, data: dict) -> "TowerSpec":
        unknown = set(data) - {"p", "precision", "steps"}
        if unknown:
            raise TowerError(f"unknown tower keys: {sorted(unknown)}")
        steps = []
        for s in data.get("steps", []):
            kind = s.get("type")
            if kind == "unramified":
                steps.append(Unramified(int(s["degree"])))
            elif kind in ("tame_eisenstein", "eisenstein"):
                steps.append(TameEisenstein(int(s["degree"]), int(s.get("unit", 1))))
            else:
                raise TowerError(f"unknown step type {kind!r}")
        return cls(int(data["p"]), int(data.get("precision", 24)), tuple(steps))

    @classmethod
    def from_json(cls, text: str) -> "TowerSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        steps = []
        for s in self.steps:
            if isinstance(s, Unramified):
                steps.append({"type": "unramified", "degree": s.degree})
            else:
                steps.append({"type": "tame_eisenstein", "degree": s.degree, "unit": s.unit})
        return {"p": self.p, "precision": self.precision, "steps": steps}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# ---------------------------------------------------------------------------
# Fixed-precision linear maps between levels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PadicMatrix:
    """Matrix with entries ``num / p**shift`` (entries known mod ``p**work``)."""
    num: tuple  # tuple of row tuples of ints
    shift: int
    p: int
    work: int

    @classmethod
    def from_fractions(cls, rows, p: int, work: int) -> "PadicMatrix":
        vals = [Fraction(v) for row in rows for v in row if Fraction(v) != 0]
        shift = max([0] + [-vp(v, p) for v in vals])
        mod = p ** (shift + work)
        num = tuple(tuple(rational_to_scaled(v, p, shift, mod) if v != 0 else 0 for v in row)
                    for row in rows)
        return cls(num, shift, p, work)

    def fractions(self) -> list[list[Fraction]]:
        s = Fraction(self.p) ** self.shift
        return [[Fraction(v) / s for v in row] for row in self.num]

    @property
    def shape(self):
        return len(self.num), len(self.num[0]) if self.num else 0

    def array(self) -> np.ndarray:
        return np.array(self.num, dtype=object)

    def __matmul__(self, other: "PadicMatrix") -> "PadicMatrix":
        a, b = self.fractions(), other.fractions()
        rows = [[sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0))
                 for j in range(len(b[0]))] for i in range(len(a))]
        return PadicMatrix.from_fractions(rows, self.p, min(self.work, other.work))

    def scale(self, c) -> "PadicMatrix":
        return PadicMatrix.from_fractions([[v * Fraction(c) for v in row]
                                           for row in self.fractions()], self.p, self.work)


# ---------------------------------------------------------------------------
# Levels
# ---------------------------------------------------------------------------

class TowerLevel:
    """Arithmetic invariants and structure constants of one level ``K_n``."""

    def __init__(self, tower: "Tower", n: int, m: int, e: int, f: int, unit: int):
        self.tower = tower
        self.n = n
        self.m = m
        self.e = e
        self.f = f
        self.unit = unit
        p = tower.p
        self.p = p
        self.q = p**f
        self.d = e - 1  # tame: different exponent e-1; unramified: 0
        # support ball of the level-n projection of mu, normalized scale
        self.support_exponent = self.d - e * vp_int(m, p)
        self.teich = _teichmueller_poly(p, f, tower.work)
        self._mult = self._mult_table()
        self.trace_vector = tuple(sum(self._mult[a][b][b] for b in range(m)) % tower.mod
                                  for a in range(m))
        self.gram = tuple(tuple(sum(self._mult[a][b][c] * self.trace_vector[c]
                                    for c in range(m)) % tower.mod for b in range(m))
                          for a in range(m))

    def __repr__(self):
        return (f"TowerLevel(n={self.n}, m={self.m}, e={self.e}, f={self.f}, "
                f"q={self.q}, d={self.d})")

    @property
    def unramified(self) -> bool:
        return self.e == 1

    @property
    def zeta_order(self) -> int:
        return self.q - 1

    def index(self, i: int, j: int) -> int:
        return i * self.f + j

    # -- raw coordinate arithmetic (ints modulo ``modulus``) ----------------
    def _mul_unr(self, a, b, modulus):
        f = self.f
        prod = [0] * (2 * f - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    prod[i + j] += x * y
        g = self.teich  # monic, little-endian, degree f
        for k in range(2 * f - 2, f - 1, -1):
            c = prod[k]
            if c:
                for i in range(f):
                    prod[k - f + i] -= c * g[i]
        return [v % modulus for v in prod[:f]]

    def mul_coords(self, x, y, modulus):
        e, f = self.e, self.f
        out = [[0] * f for _ in range(e)]
        xs = [x[i * f:(i + 1) * f] for i in range(e)]
        ys = [y[i * f:(i + 1) * f] for i in range(e)]
        pu = self.p * self.unit
        for i in range(e):
            if not any(xs[i]):
                continue
            for k in range(e):
                if not any(ys[k]):
                    continue
                prod = self._mul_unr(xs[i], ys[k], modulus)
                s = i + k
                if s >= e:
                    s -= e
                    prod = [v * pu for v in prod]
                out[s] = [(a + b) % modulus for a, b in zip(out[s], prod)]
        return [v for row in out for v in row]

    def _mult_table(self):
        m, mod = self.m, self.tower.mod
        basis = [[int(a == b) for b in range(m)] for a in range(m)]
        return [[self.mul_coords(basis[a], basis[b], mod) for b in range(m)]
                for a in range(m)]

    def zeta_power_coords(self, k: int, modulus: int | None = None) -> list[int]:
        """Coordinates of ``zeta**k`` (an element of the unramified part)."""
        modulus = modulus or self.tower.mod
        k %= self.zeta_order
        result = [1] + [0] * (self.f - 1)
        base = [0, 1] + [0] * (self.f - 2) if self.f > 1 else [
            (-self.teich[0]) % modulus]
        while k:
            if k & 1:
                result = self._mul_unr(result, base, modulus)
            base = self._mul_unr(base, base, modulus)
            k >>= 1
        return result + [0] * (self.m - self.f)

    def ball_low(self, A: int) -> list[int]:
        """Per-coordinate p-adic valuation floor of the ball ``|x|_n <= q**A``."""
        e, f = self.e, self.f
        return [-((A + i) // e) for i in range(e) for _ in range(f)]

    # -- element constructors ---------------------------------------------
    def element(self, coords: Sequence, prec: int | None = None) -> "FieldElement":
        return FieldElement.from_fractions(self, coords, prec)

    def zero(self) -> "FieldElement":
        return FieldElement(self, (0,) * self.m, 0, None)

    def one(self) -> "FieldElement":
        return self.element([1] + [0] * (self.m - 1))

    def from_rational(self, r) -> "FieldElement":
        return self.element([r] + [0] * (self.m - 1))

    def zeta(self) -> "FieldElement":
        if self.f == 1:
            c = self.zeta_power_coords(1)
            return FieldElement(self, tuple(c), 0, self.tower.M)
        return self.element([0, 1] + [0] * (self.m - 2))

    def uniformizer(self) -> "FieldElement":
        if self.e == 1:
            return self.from_rational(self.p)
        return self.element([0] * self.f + [1] + [0] * (self.m - self.f - 1))

    @cached_property
    def frobenius_matrix(self) -> PadicMatrix:
        if self.e != 1:
            raise TowerError("Frobenius is only provided on unramified levels")
        cols = [self.zeta_power_coords(j * self.p) for j in range(self.f)]
        rows = [[cols[j][i] for j in range(self.f)] for i in range(self.f)]
        return PadicMatrix(tuple(tuple(r) for r in rows), 0, self.p, self.tower.work)

    @cached_property
    def gram_inverse(self) -> PadicMatrix:
        inv = inverse_fraction([[Fraction(v) for v in row] for row in self.gram])
        return PadicMatrix.from_fractions(inv, self.p, self.tower.work)


def _teichmueller_poly(p: int, f: int, work: int) -> tuple[int, ...]:
    """Minimal polynomial (mod p**work) of the Teichmueller lift of a Conway root."""
    mod = p**work
    conway = list(conway_polynomial(p, f))
    if f == 1:
        # root: Teichmueller lift of -conway[0]
        r = (-conway[0]) % p
        for _ in range(work + 1):
            r = pow(r, p, mod)
        return ((-r) % mod, 1)

    def mulmod(a, b):
        prod = [0] * (2 * f - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                prod[i + j] += x * y
        for k in range(2 * f - 2, f - 1, -1):
            c = prod[k]
            if c:
                for i in range(f):
                    prod[k - f + i] -= c * conway[i]
        return [v % mod for v in prod[:f]]

    def power(a, k):
        r = [1] + [0] * (f - 1)
        while k:
            if k & 1:
                r = mulmod(r, a)
            a = mulmod(a, a)
            k >>= 1
        return r

    q = p**f
    zeta = [0, 1] + [0] * (f - 2)
    for _ in range(work + 1):  # x -> x**q converges to the Teichmueller lift
        zeta = power(zeta, q)
    powers = [[1] + [0] * (f - 1)]
    for _ in range(f):
        powers.append(mulmod(powers[-1], zeta))
    # solve sum_j a_j zeta^j = zeta^f
    vmat = [[powers[j][i] for j in range(f)] for i in range(f)]
    vinv = inverse_mod(vmat, mod, p)
    a = [sum(vinv[i][k] * powers[f][k] for k in range(f)) % mod for i in range(f)]
    return tuple([(-v) % mod for v in a] + [1])


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------

class FieldElement:
    """An element of ``K_n`` at fixed absolute precision.

    Coordinates are ``num[a] / p**shift``; ``prec`` is the absolute precision
    in the p-adic coordinate scale (digits of valuation >= prec are unknown),
    ``None`` for the exact zero.
    """

    __slots__ = ("level", "num", "shift", "prec")

    def __init__(self, level: TowerLevel, num, shift: int, prec: int | None):
        self.level = level
        p = level.p
        if prec is None:
            self.num, self.shift, self.prec = tuple(num), 0, None
            return
        mod = p ** (shift + prec) if shift + prec > 0 else 1
        num = [v % mod for v in num]
        while shift > 0 and all(v % p == 0 for v in num):
            num = [v // p for v in num]
            shift -= 1
        self.num = tuple(num)
        self.shift = shift
        self.prec = prec

    @classmethod
    def from_fractions(cls, level: TowerLevel, coords, prec: int | None = None):
        coords = [Fraction(c) for c in coords]
        if len(coords) != level.m:
            raise TowerError(f"expected {level.m} coordinates, got {len(coords)}")
        prec = level.tower.M if prec is None else prec
        p = level.p
        nz = [c for c in coords if c != 0]
        shift = max([0] + [-vp(c, p) for c in nz])
        mod = p ** (shift + prec)
        num = [rational_to_scaled(c, p, shift, mod) if c != 0 else 0 for c in coords]
        return cls(level, num, shift, prec)

    # -- basic views -----------------------------------------------------------
    @property
    def tower(self) -> "Tower":
        return self.level.tower

    @property
    def n(self) -> int:
        return self.level.n

    @property
    def exact_zero(self) -> bool:
        return self.prec is None

    def is_zero(self) -> bool:
        return not any(self.num)

    def coords(self) -> list[Fraction]:
        s = Fraction(self.level.p) ** self.shift
        return [Fraction(v) / s for v in self.num]

    def scaled(self, shift: int, modulus: int) -> list[int]:
        """Coordinates multiplied by ``p**shift`` and reduced (needs shift >= self.shift)."""
        k = shift - self.shift
        if k < 0:
            raise ValueError("shift too small for this element")
        return [v * self.level.p**k % modulus for v in self.num]

    def coord_valuation(self) -> int:
        """min_a v_p(coordinate a); the precision if indistinguishable from zero."""
        if self.prec is None:
            return math.inf
        vals = [vp_int(v, self.level.p) for v in self.num if v]
        if not vals:
            return self.prec
        return min(vals) - self.shift

    def ord(self) -> int:
        """Valuation in the uniformizer scale: |x|_n = q**(-ord)."""
        if self.prec is None:
            return math.inf
        lv = self.level
        best = None
        for a, v in enumerate(self.num):
            if v:
                i = a // lv.f
                o = lv.e * (vp_int(v, lv.p) - self.shift) + i
                best = o if best is None else min(best, o)
        if best is None:
            raise PrecisionError("element is indistinguishable from zero at this precision")
        return best

    def valuation(self) -> Fraction:
        """p-adic valuation normalized so that v(p) = 1."""
        return Fraction(self.ord(), self.level.e)

    def abs_normalized(self) -> Fraction:
        """|x|_n as an exact rational power of q_n."""
        if self.prec is None:
            return Fraction(0)
        return Fraction(self.level.q) ** (-self.ord())

    def abs_uniform(self) -> float:
        """||x|| = |x|_n ** (1/m_n) = p ** (-v(x))."""
        if self.prec is None:
            return 0.0
        return float(self.level.p) ** (-float(self.valuation()))

    def in_ball(self, A: int) -> bool:
        """Whether |x|_n <= q_n**A, decided from the known digits."""
        if self.prec is None:
            return True
        if self.is_zero():
            if self.level.e * self.prec >= -A:
                return True
            raise PrecisionError("ball membership undecidable at this precision")
        return self.ord() >= -A

    # -- arithmetic ------------------------------------------------------------
    def _check(self, other):
        if not isinstance(other, FieldElement):
            other = self.level.from_rational(Fraction(other))
        if other.level is not self.level:
            raise TowerError("elements live in different levels; embed first")
        return other

    def __add__(self, other):
        other = self._check(other)
        if self.prec is None:
            return other
        if other.prec is None:
            return self
        p = self.level.p
        shift = max(self.shift, other.shift)
        prec = min(self.prec, other.prec)
        num = [a * p ** (shift - self.shift) + b * p ** (shift - other.shift)
               for a, b in zip(self.num, other.num)]
        return FieldElement(self.level, num, shift, prec)

    __radd__ = __add__

    def __neg__(self):
        if self.prec is None:
            return self
        return FieldElement(self.level, [-v for v in self.num], self.shift, self.prec)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        other = self._check(other)
        if self.prec is None or other.prec is None:
            return self.level.zero()
        lv = self.level
        prec = min(lv.tower.M, self.prec + other.coord_valuation(),
                   other.prec + self.coord_valuation())
        shift = self.shift + other.shift
        mod = lv.p ** max(1, shift + prec)
        num = lv.mul_coords(self.num, other.num, mod)
        return FieldElement(lv, num, shift, prec)

    def __rmul__(self, other):
        return self * other

    def scale(self, c) -> "FieldElement":
        """Multiply by a rational scalar (exact)."""
        c = Fraction(c)
        if self.prec is None:
            return self
        if c == 0:
            return self.level.zero()
        p = self.level.p
        v = vp(c, p)
        unit = c / Fraction(p) ** v
        shift = self.shift - v if v < 0 else self.shift
        mult = p**v if v > 0 else 1
        prec = min(self.level.tower.M, self.prec + v)
        mod = p ** max(1, shift + prec)
        u = rational_to_scaled(unit, p, 0, mod)
        return FieldElement(self.level, [a * mult * u for a in self.num], shift, prec)

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result = self.level.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def mult_matrix(self) -> list[list[Fraction]]:
        """Matrix (over Q_p representatives) of y -> x*y in the level basis."""
        lv = self.level
        cols = []
        s = Fraction(lv.p) ** self.shift
        for b in range(lv.m):
            e_b = [int(a == b) for a in range(lv.m)]
            col = lv.mul_coords(list(self.num), e_b, lv.tower.mod * lv.p**self.shift)
            cols.append([Fraction(v) / s for v in col])
        return [[cols[b][a] for b in range(lv.m)] for a in range(lv.m)]

    def norm(self) -> Fraction:
        """N_{K_n/Q_p}(x) on the stored representative."""
        return det_fraction(self.mult_matrix())

    def inverse(self) -> "FieldElement":
        if self.prec is None or self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        lv = self.level
        v = self.valuation()
        sig = self.prec - self.coord_valuation()
        if sig < MIN_SIGNIFICANT_DIGITS:
            raise PrecisionError(f"only {sig} significant digits; refusing to invert")
        inv = inverse_fraction(self.mult_matrix())
        coords = [inv[a][0] for a in range(lv.m)]
        prec = min(lv.tower.M, self.prec - math.ceil(2 * v) - 1)
        out = FieldElement.from_fractions(lv, coords, prec)
        if prec - out.coord_valuation() < MIN_SIGNIFICANT_DIGITS:
            raise PrecisionError("inversion leaves fewer than 4 significant digits")
        return out

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(1 / Fraction(other))
        return self * self._check(other).inverse()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.level.from_rational(other)
        if not isinstance(other, FieldElement) or other.level is not self.level:
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def __repr__(self):
        cs = ", ".join(str(c) for c in self.coords())
        pr = "exact" if self.prec is None else f"O(p^{self.prec})"
        return f"FieldElement(n={self.n}, [{cs}], {pr})"

    # -- serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        p = self.level.p
        prec = self.tower.M if self.prec is None else self.prec
        coeffs = []
        for c in self.coords():
            if c == 0:
                coeffs.append({"val": None, "mantissa_digits": []})
                continue
            v = vp(c, p)
            ndig = max(prec - v, 0)
            mant = rational_to_scaled(c / Fraction(p) ** v, p, 0, p**ndig) if ndig else 0
            digs = []
            for _ in range(ndig):
                mant, r = divmod(mant, p)
                digs.append(r)
            coeffs.append({"val": v, "mantissa_digits": digs})
        out = {"level": self.n, "coeffs": coeffs}
        if self.prec is not None:
            out["prec"] = self.prec
        return out

    @classmethod
    def from_dict(cls, tower: "Tower", data: dict) -> "FieldElement":
        lv = tower.level(int(data["level"]))
        p = tower.p
        coords = []
        for c in data["coeffs"]:
            if c["val"] is None:
                coords.append(Fraction(0))
                continue
            mant = sum(d * p**k for k, d in enumerate(c["mantissa_digits"]))
            coords.append(Fraction(mant) * Fraction(p) ** int(c["val"]))
        if "prec" not in data and not any(coords):
            return lv.zero()
        return cls.from_fractions(lv, coords, data.get("prec"))


# ---------------------------------------------------------------------------
# Tower
# ---------------------------------------------------------------------------

class Tower:
    """The chain ``Q_p = K_1 < K_2 < ...`` with maps between levels."""

    def __init__(self, spec: TowerSpec, enum_cap: int = DEFAULT_ENUM_CAP,
                 allow_large: bool = False):
        self.spec = spec
        self.p = spec.p
        self.M = spec.precision
        self.work = 2 * spec.precision + 16
        self.mod = self.p**self.work
        self.enum_cap = enum_cap
        self.allow_large = allow_large
        self.levels: list[TowerLevel] = []
        m, e, f, unit = 1, 1, 1, 1
        self.levels.append(TowerLevel(self, 1, 1, 1, 1, 1))
        for step in spec.steps:
            if isinstance(step, Unramified):
                f *= step.degree
            else:
                e, unit = step.degree, step.unit
            m = e * f
            self.levels.append(TowerLevel(self, len(self.levels) + 1, m, e, f, unit))
        self._maps: dict = {}

    def __repr__(self):
        return f"Tower(p={self.p}, M={self.M}, m={[lv.m for lv in self.levels]})"

    @property
    def depth(self) -> int:
        return len(self.levels)

    def level(self, n: int) -> TowerLevel:
        if not 1 <= n <= len(self.levels):
            raise TowerError(f"level {n} outside 1..{len(self.levels)}")
        return self.levels[n - 1]

    def table(self) -> list[dict]:
        return [dict(n=lv.n, m=lv.m, e=lv.e, f=lv.f, q=lv.q, d=lv.d,
                     support_exponent=lv.support_exponent) for lv in self.levels]

    def check_count(self, count: int):
        if count > self.enum_cap and not self.allow_large:
            raise EnumerationCapError(
                f"{count} cosets exceed the enumeration cap {self.enum_cap}; "
                "construct the tower with allow_large=True to proceed")

    # -- maps between levels -----------------------------------------------
    def embedding_matrix(self, n: int, nu: int) -> PadicMatrix:
        key = ("emb", n, nu)
        if key not in self._maps:
            src, dst = self.level(n), self.level(nu)
            if nu < n:
                raise TowerError("cannot embed into a lower level")
            k = (dst.q - 1) // (src.q - 1)
            cols = []
            for i in range(src.e):
                for j in range(src.f):
                    z = dst.zeta_power_coords(j * k)[:dst.f]
                    col = [0] * dst.m
                    col[dst.index(i, 0):dst.index(i, 0) + dst.f] = z
                    cols.append(col)
            rows = tuple(tuple(cols[b][a] for b in range(src.m)) for a in range(dst.m))
            self._maps[key] = PadicMatrix(rows, 0, self.p, self.work)
        return self._maps[key]

    def trace_matrix(self, nu: int, n: int) -> PadicMatrix:
        """Matrix of Tr_{K_nu/K_n}: solves Tr_n(t y) = Tr_nu(x y) for y in K_n."""
        key = ("tr", nu, n)
        if key not in self._maps:
            if n > nu:
                raise TowerError("trace to a higher level")
            lo, hi = self.level(n), self.level(nu)
            emb = self.embedding_matrix(n, nu)
            gram_hi = PadicMatrix(hi.gram, 0, self.p, self.work)
            emb_t = PadicMatrix(tuple(zip(*emb.num)), 0, self.p, self.work)
            self._maps[key] = lo.gram_inverse @ (emb_t @ gram_hi)
        return self._maps[key]

    def projection_matrix(self, nu: int, n: int) -> PadicMatrix:
        """Matrix of T_n restricted to K_nu."""
        key = ("proj", nu, n)
        if key not in self._maps:
            lo, hi = self.level(n), self.level(nu)
            self._maps[key] = self.trace_matrix(nu, n).scale(Fraction(lo.m, hi.m))
        return self._maps[key]

    def apply(self, mat: PadicMatrix, x: FieldElement, target: TowerLevel) -> FieldElement:
        if x.prec is None:
            return target.zero()
        p = self.p
        shift = mat.shift + x.shift
        prec = min(self.M, x.prec - mat.shift)
        mod = p ** max(1, shift + prec)
        num = [sum(r * v for r, v in zip(row, x.num)) % mod for row in mat.num]
        return FieldElement(target, num, shift, prec)

    def embed(self, x: FieldElement, nu: int) -> FieldElement:
        if nu < x.n:
            raise TowerError(f"cannot embed level {x.n} into lower level {nu}")
        if nu == x.n:
            return x
        return self.apply(self.embedding_matrix(x.n, nu), x, self.level(nu))

    def trace_rel(self, x: FieldElement, n: int) -> FieldElement:
        if n > x.n:
            raise TowerError(f"trace from level {x.n} to higher level {n}")
        if n == x.n:
            return x
        return self.apply(self.trace_matrix(x.n, n), x, self.level(n))

    def trace_abs(self, x: FieldElement) -> Fraction:
        """Tr_{K_n/Q_p}(x) as a rational representative (exact on representatives)."""
        lv = x.level
        s = Fraction(lv.p) ** x.shift
        return sum((Fraction(a * t) for a, t in zip(x.num, lv.trace_vector)),
                   Fraction(0)) / s

    def project(self, x: FieldElement, n: int) -> FieldElement:
        if n > x.n:
            raise TowerError(f"cannot project level {x.n} onto higher level {n}")
        if n == x.n:
            return x
        return self.apply(self.projection_matrix(x.n, n), x, self.level(n))

    def frobenius(self, x: FieldElement, power: int = 1) -> FieldElement:
        lv = x.level
        if lv.e != 1:
            raise TowerError("Frobenius requires an unramified level")
        power %= lv.f
        for _ in range(power):
            x = self.apply(lv.frobenius_matrix, x, lv)
        return x

    # -- ball geometry -------------------------------------------------------
    def enumerate_cosets(self, n: int, A: int, B: int) -> list[FieldElement]:
        """Canonical representatives of ``{|x|_n <= q**A} / {|x|_n <= q**B}``."""
        from .lattice import BallGrid
        grid = BallGrid(self.level(n), A, B)
        return [grid.element(i) for i in range(grid.size)]

    def sample_ball(self, n: int, A: int, rng: np.random.Generator) -> FieldElement:
        lv = self.level(n)
        coords = _random_ball_coords(lv, A, rng, self.M)
        return lv.element(coords)

    def sample_sphere(self, n: int, A: int, rng: np.random.Generator) -> FieldElement:
        lv = self.level(n)
        coords = _random_ball_coords(lv, A, rng, self.M)
        t = -A
        i = t % lv.e
        k = (t - i) // lv.e
        if k >= self.M:
            raise PrecisionError("sphere lies below the working precision")
        lead = int(rng.integers(1, lv.q))
        p = lv.p
        for j in range(lv.f):
            a = lv.index(i, j)
            c = coords[a] / Fraction(p) ** k
            digit = int((c.numerator * pow(c.denominator, -1, p)) % p) if c != 0 else 0
            coords[a] += (((lead // p**j) % p) - digit) * Fraction(p) ** k
        return lv.element(coords)


def _random_ball_coords(lv: TowerLevel, A: int, rng, prec: int) -> list[Fraction]:
    p = lv.p
    out = []
    for lo in lv.ball_low(A):
        width = prec - lo
        if width <= 0:
            out.append(Fraction(0))
            continue
        r = sum(int(rng.integers(0, p)) * p**k for k in range(width))
        out.append(Fraction(r) * Fraction(p) ** lo)
    return out


def build_tower(spec: TowerSpec | dict | str, **kwargs) -> Tower:
    """Validate a tower description and build all per-level tables."""
    if isinstance(spec, str):
        spec = TowerSpec.from_json(spec)
    elif isinstance(spec, dict):
        spec = TowerSpec.from_dict(spec)
    if not is_prime(spec.p):
        raise TowerError(f"p={spec.p} is not prime")
    if spec.precision < 8:
        raise TowerError("precision below 8 digits is not supported")
    ramified = 0
    for step in spec.steps:
        if step.degree < 2:
            raise TowerError(f"step degree must be >= 2, got {step.degree}")
        if isinstance(step, TameEisenstein):
            ramified += 1
            if math.gcd(step.degree, spec.p) != 1:
                raise TowerError(f"Eisenstein degree {step.degree} is not prime to p={spec.p}")
            if step.unit % spec.p == 0:
                raise TowerError("Eisenstein unit must be a p-adic unit")
        elif not isinstance(step, Unramified):
            raise TowerError(f"unknown step {step!r}")
    if ramified > 1:
        raise TowerError("at most one tamely ramified step is supported")
    return Tower(spec, **kwargs)
