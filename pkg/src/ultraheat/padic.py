"""Low-level p-adic helpers: valuations, rational reduction, modular linear
algebra and Conway polynomials over prime fields.

Everything here works on plain Python integers and ``fractions.Fraction``;
the field layer in :mod:`ultraheat.tower` is built on top of it.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np


class PrecisionError(ArithmeticError):
    """Raised when a result cannot be trusted at the working precision."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    k = 3
    while k * k <= n:
        if n % k == 0:
            return False
        k += 2
    return True


def vp_int(n: int, p: int) -> int:
    """Valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of zero")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp(x, p: int) -> int:
    """Valuation of a nonzero rational number."""
    x = Fraction(x)
    return vp_int(x.numerator, p) - vp_int(x.denominator, p)


def rational_to_scaled(x, p: int, shift: int, modulus: int) -> int:
    """Return the integer ``X mod modulus`` with ``x = X / p**shift`` p-adically.

    ``x * p**shift`` must be p-integral.
    """
    x = Fraction(x) * Fraction(p) ** shift
    num, den = int(x.numerator), int(x.denominator)
    if den % p == 0:
        raise ValueError(f"{x} / p^{shift} is not p-integral")
    return num * pow(den, -1, modulus) % modulus


def factor_out_p(x, p: int) -> tuple[int, Fraction]:
    """Split a nonzero rational as ``p**v * u`` with u a p-adic unit."""
    x = Fraction(x)
    v = vp(x, p)
    return v, x / Fraction(p) ** v


def digits(n: int, p: int, count: int) -> list[int]:
    """Little-endian base-p digits of a nonnegative integer."""
    out = []
    for _ in range(count):
        n, r = divmod(n, p)
        out.append(r)
    return out


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def inverse_mod(mat: list[list[int]], modulus: int, p: int) -> list[list[int]]:
    """Invert an integer matrix modulo ``p**k`` (its determinant must be a unit)."""
    n = len(mat)
    a = [[mat[i][j] % modulus for j in range(n)] + [int(i == j) for j in range(n)]
         for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] % p), None)
        if piv is None:
            raise ZeroDivisionError("matrix is singular modulo p")
        a[col], a[piv] = a[piv], a[col]
        inv = pow(a[col][col], -1, modulus)
        a[col] = [v * inv % modulus for v in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [(vr - f * vc) % modulus for vr, vc in zip(a[r], a[col])]
    return [row[n:] for row in a]


def inverse_fraction(mat: list[list[Fraction]]) -> list[list[Fraction]]:
    """Exact Gauss-Jordan inverse over the rationals."""
    n = len(mat)
    a = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [vr - f * vc for vr, vc in zip(a[r], a[col])]
    return [row[n:] for row in a]


def det_fraction(mat) -> Fraction:
    n = len(mat)
    a = [[Fraction(v) for v in row] for row in mat]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            if a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [vr - f * vc for vr, vc in zip(a[r], a[col])]
    return det


def matmul_mod(a: np.ndarray, b: np.ndarray, modulus: int) -> np.ndarray:
    """``(a @ b) % modulus`` for nonnegative integer arrays, overflow-safe.

    Uses int64 when every partial sum fits, Python integers otherwise.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    inner = a.shape[-1]
    if inner * (modulus - 1) ** 2 < 2**62:
        a64 = np.mod(a, modulus).astype(np.int64)
        b64 = np.mod(b, modulus).astype(np.int64)
        return (a64 @ b64) % modulus
    ao = np.mod(a.astype(object), modulus)
    bo = np.mod(b.astype(object), modulus)
    return np.mod(ao.dot(bo), modulus)


# ---------------------------------------------------------------------------
# Polynomials over F_p (coefficient lists, little-endian)
# ---------------------------------------------------------------------------

def _trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_mulmod(a, b, mod, p):
    prod = [0] * (len(a) + len(b) - 1) if a and b else []
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                prod[i + j] = (prod[i + j] + x * y) % p
    return poly_rem(prod, mod, p)


def poly_rem(a, mod, p):
    a = _trim([x % p for x in a])
    mod = _trim([x % p for x in mod])
    dm = len(mod) - 1
    inv = pow(mod[-1], -1, p)
    while len(a) - 1 >= dm and a:
        c = a[-1] * inv % p
        shift = len(a) - 1 - dm
        for i, y in enumerate(mod):
            a[shift + i] = (a[shift + i] - c * y) % p
        _trim(a)
    return a


def poly_powmod(base, e, mod, p):
    result = [1]
    base = poly_rem(base, mod, p)
    while e:
        if e & 1:
            result = poly_mulmod(result, base, mod, p)
        base = poly_mulmod(base, base, mod, p)
        e >>= 1
    return result


def poly_gcd(a, b, p):
    a = _trim([x % p for x in a])
    b = _trim([x % p for x in b])
    while b:
        a, b = b, poly_rem(a, b, p)
    return a


def _is_irreducible(f, p):
    n = len(f) - 1
    x = [0, 1]
    xp = [0, 1]
    for k in range(1, n // 2 + 1):
        xp = poly_powmod(xp, p, f, p)
        diff = list(xp) + [0] * max(0, 2 - len(xp))
        diff[1] = (diff[1] - 1) % p
        if len(poly_gcd(f, _trim(diff), p)) > 1:
            return False
    return True


def _prime_factors(n):
    out, k = [], 2
    while k * k <= n:
        if n % k == 0:
            out.append(k)
            while n % k == 0:
                n //= k
        k += 1
    if n > 1:
        out.append(n)
    return out


def _is_primitive(f, p):
    n = len(f) - 1
    order = p**n - 1
    if poly_powmod([0, 1], order, f, p) != [1]:
        return False
    return all(poly_powmod([0, 1], order // r, f, p) != [1]
               for r in _prime_factors(order))


def _compose_root_power(g, power, f, p):
    """Evaluate g(x**power) modulo f."""
    xp = poly_powmod([0, 1], power, f, p)
    acc = []
    for c in reversed(g):
        acc = poly_mulmod(acc, xp, f, p) if acc else []
        if c:
            acc = list(acc) + [0] * max(0, 1 - len(acc))
            acc[0] = (acc[0] + c) % p
            acc = _trim(acc)
    return acc


@lru_cache(maxsize=None)
def conway_polynomial(p: int, n: int) -> tuple[int, ...]:
    """Conway polynomial of degree n over F_p, little-endian coefficients.

    Found by search in Conway order; practical for p**n up to ~10**6.
    """
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    subs = [(d, conway_polynomial(p, d)) for d in range(1, n) if n % d == 0]
    # Conway order: x^n - a1 x^(n-1) + a2 x^(n-2) - ... lexicographic in (a1..an)
    for code in range(p**n):
        alphas = [(code // p ** (n - 1 - i)) % p for i in range(n)]
        if alphas[-1] == 0:
            continue
        coeffs = [0] * (n + 1)
        coeffs[n] = 1
        for i, a in enumerate(alphas, start=1):
            coeffs[n - i] = ((-1) ** i * a) % p
        if not _is_irreducible(coeffs, p) or not _is_primitive(coeffs, p):
            continue
        ok = all(not _compose_root_power(list(g), (p**n - 1) // (p**d - 1), coeffs, p)
                 for d, g in subs)
        if ok:
            return tuple(coeffs)
    raise RuntimeError(f"no Conway polynomial found for p={p}, n={n}")
