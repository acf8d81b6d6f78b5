"""Finite quotients ``{|x|_n <= q**A} / {|x|_n <= q**B}`` as indexed grids.

Index layout (used by every value table in the package): a coset is given by
its uniformizer-adic digits at levels ``t = -A, ..., -B-1``; the digit at level
``t`` is an element of the residue field encoded as ``sum_j c_j p**j`` where
``c_j`` is the p-digit of coordinate ``(t mod e, j)`` at exponent
``(t - t mod e) / e``.  The table index is ``sum_t digit_t * q**(t + A)``: the
coarsest level is the least significant digit.  Consequently the cosets of a
larger ball ``{|x| <= q**s}`` are contiguous residue classes modulo
``q**(A - s)`` and ball sums are plain reshapes.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .padic import matmul_mod, rational_to_scaled, vp
from .tower import FieldElement, TowerError, TowerLevel

_INT64_SAFE = 2**62


def _asint(arr, modulus):
    if modulus < _INT64_SAFE:
        return np.asarray(arr).astype(np.int64)
    return np.asarray(arr).astype(object)


class BallGrid:
    """Coset representatives of ``ball(A)/ball(B)`` at one level."""

    def __init__(self, level: TowerLevel, A: int, B: int):
        if B > A:
            raise TowerError(f"constancy exponent {B} exceeds support exponent {A}")
        self.level = level
        self.A = int(A)
        self.B = int(B)
        self.K = self.A - self.B
        self.size = level.q**self.K
        level.tower.check_count(self.size)
        e = level.e
        self.levels = [(t % e, (t - t % e) // e) for t in range(-self.A, -self.B)]
        self.lo = level.ball_low(self.A)
        self.hi = level.ball_low(self.B)
        self.shift = max(0, -min(self.lo))
        self.top = max(self.hi)

    def __repr__(self):
        return f"BallGrid(n={self.level.n}, A={self.A}, B={self.B}, size={self.size})"

    def same_shape(self, other: "BallGrid") -> bool:
        return (self.level is other.level and self.A == other.A and self.B == other.B)

    @property
    def modulus(self) -> int:
        """Modulus under which scaled representatives determine the coset."""
        return self.level.p ** max(1, self.shift + self.top)

    # -- digits and representatives ----------------------------------------
    def digits(self, idx=None) -> np.ndarray:
        q = self.level.q
        idx = np.arange(self.size, dtype=np.int64) if idx is None else np.asarray(idx)
        out = np.empty((idx.shape[0], self.K), dtype=np.int64)
        rest = idx.astype(np.int64)
        for s in range(self.K):
            out[:, s] = rest % q
            rest = rest // q
        return out

    def reps_scaled(self, idx=None, shift: int | None = None) -> np.ndarray:
        """Integer matrix ``N x m``: representatives times ``p**shift``."""
        lv = self.level
        p, f = lv.p, lv.f
        shift = self.shift if shift is None else shift
        if shift < self.shift:
            raise ValueError("shift too small for this grid")
        dig = self.digits(idx)
        mod_bound = p ** (shift + self.top)
        dtype = np.int64 if mod_bound < _INT64_SAFE else object
        out = np.zeros((dig.shape[0], lv.m), dtype=dtype)
        for s, (i, k) in enumerate(self.levels):
            d = dig[:, s]
            w = p ** (k + shift)
            for j in range(f):
                cj = (d // p**j) % p
                out[:, lv.index(i, j)] += (cj * w).astype(dtype)
        return out

    def element(self, index: int) -> FieldElement:
        lv = self.level
        row = self.reps_scaled(np.array([index]))[0]
        coords = [Fraction(int(v), lv.p**self.shift) for v in row]
        return lv.element(coords)

    def elements(self) -> list[FieldElement]:
        return [self.element(i) for i in range(self.size)]

    def locate(self, scaled: np.ndarray, shift: int) -> np.ndarray:
        """Grid index of each row of coordinates ``scaled / p**shift``; -1 outside ball(A).

        Rows must be nonnegative and reduced modulo a multiple of
        ``p**(shift + top)``.
        """
        lv = self.level
        p, f, q = lv.p, lv.f, lv.q
        scaled = np.asarray(scaled)
        n = scaled.shape[0]
        if self.K == 0:
            idx = np.zeros(n, dtype=np.int64)
        else:
            idx = np.zeros(n, dtype=np.int64)
            for s, (i, k) in enumerate(self.levels):
                e_k = shift + k
                dig = np.zeros(n, dtype=np.int64)
                if e_k >= 0:
                    for j in range(f):
                        col = scaled[:, lv.index(i, j)]
                        dig += (np.asarray((col // p**e_k) % p).astype(np.int64)) * p**j
                idx += dig * q**s
        inside = np.ones(n, dtype=bool)
        for a, lo in enumerate(self.lo):
            if shift + lo > 0:
                inside &= np.asarray(scaled[:, a] % p ** (shift + lo) == 0, dtype=bool)
        idx[~inside] = -1
        return idx

    def locate_elements(self, xs) -> np.ndarray:
        shift = max([self.shift] + [x.shift for x in xs])
        mod = self.level.p ** max(1, shift + self.top)
        rows = [x.scaled(shift, mod) if x.prec is not None else [0] * self.level.m
                for x in xs]
        arr = np.array(rows, dtype=object)
        return self.locate(_asint(arr, mod), shift)

    # -- radial structure ----------------------------------------------------
    def shells(self) -> np.ndarray:
        """Shell exponent s with |x|_n = q**s for each coset; B for the zero coset."""
        q = self.level.q
        out = np.full(self.size, self.B, dtype=np.int64)
        idx = np.arange(self.size, dtype=np.int64)
        pos = np.zeros(self.size, dtype=np.int64)
        rest = idx.copy()
        found = np.zeros(self.size, dtype=bool)
        for s in range(self.K):
            digit = rest % q
            newly = (~found) & (digit != 0)
            out[newly] = self.A - s
            found |= newly
            rest //= q
        return out

    def ball_sums(self, values: np.ndarray, s: int) -> np.ndarray:
        """For each coset x, the sum of values over x + ball(s) (B <= s <= A)."""
        q = self.level.q
        if not self.B <= s <= self.A:
            raise ValueError("ball radius outside grid range")
        v = np.asarray(values).reshape(q ** (s - self.B), q ** (self.A - s))
        return np.tile(v.sum(axis=0), q ** (s - self.B))

    def radial_convolve(self, values: np.ndarray, kernel) -> np.ndarray:
        """``sum_y k(|y|) values(x + y)`` over the grid; ``kernel(s)`` gives the
        weight per coset on shell s, ``kernel(B)`` the weight of the zero coset."""
        values = np.asarray(values)
        out = kernel(self.B) * values
        prev = values
        for s in range(self.B + 1, self.A + 1):
            cur = self.ball_sums(values, s)
            w = kernel(s)
            if w != 0:
                out = out + w * (cur - prev)
            prev = cur
        return out

    # -- table reshaping -------------------------------------------------------
    def refine(self, values, B_new: int) -> tuple["BallGrid", np.ndarray]:
        if B_new > self.B:
            raise ValueError("refine only to a smaller constancy exponent")
        g = BallGrid(self.level, self.A, B_new)
        return g, np.tile(np.asarray(values), self.level.q ** (self.B - B_new))

    def extend(self, values, A_new: int) -> tuple["BallGrid", np.ndarray]:
        if A_new < self.A:
            raise ValueError("extend only to a larger support exponent")
        g = BallGrid(self.level, A_new, self.B)
        r = self.level.q ** (A_new - self.A)
        arr = np.zeros((self.size, r), dtype=np.asarray(values).dtype)
        arr[:, 0] = values
        return g, arr.ravel()

    def restrict(self, values, A_new: int) -> tuple["BallGrid", np.ndarray]:
        """Keep only cosets inside ball(A_new); A_new >= B."""
        if A_new > self.A:
            return self.extend(values, A_new)
        g = BallGrid(self.level, A_new, self.B)
        r = self.level.q ** (self.A - A_new)
        return g, np.asarray(values).reshape(g.size, r)[:, 0].copy()

    def coarsen(self, values, B_new: int, atol: float = 0.0):
        """Merge cosets into ball(B_new) cosets; returns None if values vary."""
        if B_new < self.B:
            raise ValueError("coarsen only to a larger constancy exponent")
        if B_new > self.A:
            g, ext = self.extend(values, B_new)
            return g.coarsen(ext, B_new, atol)
        q = self.level.q
        v = np.asarray(values).reshape(q ** (B_new - self.B), q ** (self.A - B_new))
        if not np.all(np.abs(v - v[0]) <= atol):
            return None
        return BallGrid(self.level, self.A, B_new), v[0].copy()

    def reshape_to(self, values, A_new: int, B_new: int):
        """Re-express a table on ball(A_new)/ball(B_new); values outside are dropped,
        coarsening requires constancy."""
        g, v = self, np.asarray(values)
        if B_new < g.B:
            g, v = g.refine(v, B_new)
        if A_new != g.A:
            if A_new < B_new:
                raise ValueError("support below constancy")
            g, v = g.restrict(v, A_new) if A_new < g.A else g.extend(v, A_new)
        if B_new > g.B:
            res = g.coarsen(v, B_new)
            if res is None:
                raise ValueError("table is not constant at the requested resolution")
            g, v = res
        return g, v


# ---------------------------------------------------------------------------
# Characters on coordinate arrays
# ---------------------------------------------------------------------------

def scalar_unit(scalar, p: int, modulus: int) -> tuple[int, int]:
    """Split a rational scalar as p**(-k) * w and return (k, w mod modulus) with
    k >= 0 possibly absorbing positive powers into w."""
    scalar = Fraction(scalar)
    if scalar == 0:
        return 0, 0
    v = vp(scalar, p)
    k = max(0, -v)
    w = rational_to_scaled(scalar, p, k, modulus)
    return k, w


def trace_phases(level: TowerLevel, X: np.ndarray, Lx: int, Y: np.ndarray, Ly: int,
                 scalar=1, chunk: int = 1 << 22) -> np.ndarray:
    """Matrix of ``exp(2 pi i {scalar * Tr(x y)})`` for rows x of X, y of Y.

    Rows are coordinates scaled by ``p**Lx`` resp. ``p**Ly``.
    """
    p = level.p
    scalar = Fraction(scalar)
    k = max(0, -vp(scalar, p)) if scalar != 0 else 0
    L = Lx + Ly + k
    P = p**L if L > 0 else 1
    _, w = scalar_unit(scalar, p, P)
    G = np.array(level.gram, dtype=object)
    Gw = np.mod(G * w, P)
    H = matmul_mod(np.asarray(X), Gw, P)
    Yt = np.asarray(Y).T
    nx = H.shape[0]
    ny = Yt.shape[1]
    out = np.empty((nx, ny), dtype=complex)
    rows = max(1, chunk // max(ny, 1))
    for start in range(0, nx, rows):
        ph = matmul_mod(H[start:start + rows], Yt, P)
        frac = np.asarray(ph, dtype=float) / P
        out[start:start + rows] = np.exp(2j * np.pi * frac)
    return out


def apply_matrix_scaled(mat, X: np.ndarray, Lx: int, modulus_digits: int):
    """Apply a :class:`PadicMatrix` to scaled rows; returns (rows, shift).

    Result rows are reduced modulo ``p**(shift + modulus_digits)``.
    """
    p = mat.p
    shift = mat.shift + Lx
    P = p ** max(1, shift + modulus_digits)
    M = np.array(mat.num, dtype=object).T  # m_src x m_dst
    return matmul_mod(np.asarray(X), M, P), shift


def phase_matvec(level: TowerLevel, X: np.ndarray, Lx: int, Y: np.ndarray, Ly: int,
                 vec: np.ndarray, scalar=1, chunk: int = 1 << 22) -> np.ndarray:
    """``trace_phases(X, Y) @ vec`` without holding the full phase matrix."""
    X = np.asarray(X)
    ny = np.asarray(Y).shape[0]
    rows = max(1, chunk // max(ny, 1))
    out = np.empty(X.shape[0], dtype=complex)
    for start in range(0, X.shape[0], rows):
        E = trace_phases(level, X[start:start + rows], Lx, Y, Ly, scalar=scalar)
        out[start:start + rows] = E @ vec
    return out


def vp_array(values: np.ndarray, p: int, cap: int) -> np.ndarray:
    """Elementwise p-adic valuation of integers, ``cap`` for zero entries."""
    values = np.asarray(values)
    out = np.zeros(values.shape, dtype=np.int64)
    alive = values != 0
    rest = values.copy()
    for _ in range(cap):
        div = alive & (rest % p == 0)
        if not np.any(div):
            break
        out += div
        rest = np.where(div, rest // p, rest)
    out[~alive] = cap
    return out


def ord_rows(level: TowerLevel, rows: np.ndarray, shift: int, cap: int = 10**6) -> np.ndarray:
    """Uniformizer valuation of each scaled coordinate row; ``cap`` for zero rows."""
    rows = np.asarray(rows)
    e, f = level.e, level.f
    digits = level.tower.M + shift + 2
    best = np.full(rows.shape[0], cap, dtype=np.int64)
    for a in range(level.m):
        v = vp_array(rows[:, a], level.p, digits)
        o = np.where(v >= digits, cap, e * (v - shift) + a // f)
        best = np.minimum(best, o)
    return best
