"""Fourier transform of cylindrical functions with respect to the measure.

``fhat(f, nu)(xi) = int chi(<xi, x>) f(x) dmu(x)`` for ``xi`` in ``K_nu``.  On
level ``nu`` the measure is uniform on the support ball, so the transform is a
normalized coset sum; the result is constant on ``|xi|_nu <= 1`` cosets and
supported in ``|xi|_nu <= q**(R_nu - B)`` where ``B`` is the constancy exponent
of the lifted table.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import BallGrid, apply_matrix_scaled, ord_rows, phase_matvec
from .lcfunc import LocallyConstantFunction, haar_integral
from .measure import CylindricalFunction, integrate_mu
from .padic import inverse_fraction
from .tower import FieldElement, PadicMatrix, Tower, TowerError

__all__ = [
    "SpectralFunction", "fhat", "finv", "image_check", "ImageCheck", "plancherel",
    "distance_to_level", "nearest_point", "spectral_norm_sq",
]


# ---------------------------------------------------------------------------
# Distance from K_nu to a subfield K_n
# ---------------------------------------------------------------------------

def _relative_basis(tower: Tower, n: int, nu: int):
    """Basis ``pi**i zeta**j`` of K_nu over K_n and the coordinate change into it.

    Returns ``(blocks, inv)``: blocks[k] = i (uniformizer power of b_k) and
    ``inv`` maps level-nu coordinates to the stacked K_n-coordinates of the
    components c_k (block-major).
    """
    key = ("relbasis", n, nu)
    cache = tower._maps
    if key in cache:
        return cache[key]
    lo, hi = tower.level(n), tower.level(nu)
    r_e, r_f = hi.e // lo.e, hi.f // lo.f
    zeta, pi = hi.zeta(), hi.uniformizer()
    basis_lo = [lo.element([int(a == b) for b in range(lo.m)]) for a in range(lo.m)]
    emb = [tower.embed(b, nu) for b in basis_lo]
    blocks, cols = [], []
    for i in range(r_e):
        for j in range(r_f):
            bk = (pi**i if hi.e > 1 else hi.one()) * zeta**j
            blocks.append(i)
            cols.extend((bk * c).coords() for c in emb)
    mat = [[cols[c][a] for c in range(hi.m)] for a in range(hi.m)]
    inv = inverse_fraction(mat)
    res = (blocks, PadicMatrix.from_fractions(inv, tower.p, tower.work))
    cache[key] = res
    return res


def distance_ords(tower: Tower, n: int, nu: int, rows: np.ndarray, shift: int,
                  cap: int = 64) -> np.ndarray:
    """``min_{k>0} ord_nu(c_k b_k)`` for scaled level-nu rows; dist = ||.|| of that order."""
    hi, lo = tower.level(nu), tower.level(n)
    if n == nu:
        return np.full(np.asarray(rows).shape[0], cap, dtype=np.int64)
    blocks, inv = _relative_basis(tower, n, nu)
    comp, cshift = apply_matrix_scaled(inv, rows, shift, tower.M)
    comp = np.asarray(comp, dtype=object)
    ratio = hi.e // lo.e
    best = np.full(comp.shape[0], cap, dtype=np.int64)
    for k in range(1, len(blocks)):
        part = comp[:, k * lo.m:(k + 1) * lo.m]
        o = ord_rows(lo, part, cshift, cap)
        o = np.where(o >= cap, cap, o * ratio + blocks[k])
        best = np.minimum(best, o)
    return best


def nearest_point(xi: FieldElement, n: int) -> tuple[FieldElement, float]:
    """Nearest point of K_n to ``xi`` (component along 1) and the distance ||xi - eta||."""
    tower = xi.tower
    nu = xi.n
    if n > nu:
        raise TowerError("target level above the element's level")
    if n == nu:
        return xi, 0.0
    lo, hi = tower.level(n), tower.level(nu)
    blocks, inv = _relative_basis(tower, n, nu)
    coords = [sum((row[a] * c for a, c in enumerate(xi.coords())), Fraction(0))
              for row in inv.fractions()]
    eta = lo.element(coords[:lo.m], prec=xi.prec)
    rows = np.array([xi.scaled(xi.shift, hi.tower.p ** (xi.shift + tower.M))], dtype=object)
    o = int(distance_ords(tower, n, nu, rows, xi.shift)[0])
    dist = 0.0 if o >= 64 else float(tower.p) ** (-o / hi.e)
    return eta, dist


def distance_to_level(xi: FieldElement, n: int) -> float:
    """dist(xi, K_n) in the uniform norm ||.||."""
    return nearest_point(xi, n)[1]


# ---------------------------------------------------------------------------
# Spectral functions
# ---------------------------------------------------------------------------

class SpectralFunction:
    """Restriction of a transform to ``K_nu``, remembering the base level ``n``."""

    def __init__(self, phi: LocallyConstantFunction, base_level: int):
        if base_level > phi.n:
            raise TowerError("base level above the evaluation level")
        self.phi = phi
        self.base_level = int(base_level)

    @property
    def level(self):
        return self.phi.level

    @property
    def nu(self) -> int:
        return self.phi.n

    @property
    def tower(self) -> Tower:
        return self.phi.level.tower

    @property
    def values(self) -> np.ndarray:
        return self.phi.values

    def __repr__(self):
        return f"SpectralFunction(n={self.base_level}, nu={self.nu}, A={self.phi.A})"

    def with_values(self, values) -> "SpectralFunction":
        return SpectralFunction(LocallyConstantFunction.from_grid(self.phi.grid, values),
                                self.base_level)

    def evaluate(self, xi: FieldElement) -> complex:
        """F(xi) for xi at any level; above nu the reproducing identity is used."""
        tower = self.tower
        if xi.n <= self.nu:
            return self.phi.evaluate(tower.embed(xi, self.nu))
        eta, dist = nearest_point(xi, self.base_level)
        if dist > 1:
            return 0j
        return self.phi.evaluate(tower.embed(eta, self.nu))

    __call__ = evaluate

    def to_dict(self) -> dict:
        d = self.phi.to_dict()
        d["base_level"] = self.base_level
        return d

    @classmethod
    def from_dict(cls, tower: Tower, data: dict) -> "SpectralFunction":
        return cls(LocallyConstantFunction.from_dict(tower, data), int(data["base_level"]))


def fhat(f: CylindricalFunction, nu: int | None = None) -> SpectralFunction:
    nu = f.n if nu is None else nu
    if nu < f.n:
        raise TowerError("evaluation level below the level of the function")
    lv = f.tower.level(nu)
    psi = f.lift(nu)
    g = psi.grid
    out = BallGrid(lv, lv.support_exponent - g.B, 0)
    vals = phase_matvec(lv, out.reps_scaled(), out.shift, g.reps_scaled(), g.shift,
                        psi.values, scalar=Fraction(1, lv.m)) / g.size
    return SpectralFunction(LocallyConstantFunction.from_grid(out, vals), f.n)


def _restrict_to_base(F: SpectralFunction) -> LocallyConstantFunction:
    """F on K_n (n = base level) as a table on ball(A_n)/ball(0)."""
    tower = F.tower
    n, nu = F.base_level, F.nu
    phi = F.phi.reshape(max(F.phi.A, 0), 0) if F.phi.B != 0 else F.phi
    if n == nu:
        return phi
    lo, hi = tower.level(n), tower.level(nu)
    A_n = max(0, (phi.A * lo.e) // hi.e)
    g = BallGrid(lo, A_n, 0)
    rows, shift = apply_matrix_scaled(tower.embedding_matrix(n, nu), g.reps_scaled(),
                                      g.shift, phi.grid.top)
    return LocallyConstantFunction.from_grid(g, phi.evaluate_scaled(rows, shift))


def finv(F: SpectralFunction, check: bool = True) -> CylindricalFunction:
    if check:
        rep = image_check(F)
        if not rep.ok:
            raise ValueError(f"not the transform of a cylindrical function: {rep.reason}")
    Fn = _restrict_to_base(F)
    lv = Fn.level
    R = lv.support_exponent
    g = BallGrid(lv, R, R - Fn.A)
    vals = phase_matvec(lv, g.reps_scaled(), g.shift, Fn.grid.reps_scaled(), Fn.grid.shift,
                        Fn.values, scalar=Fraction(-1, lv.m))
    return CylindricalFunction(LocallyConstantFunction.from_grid(g, vals))


@dataclass
class ImageCheck:
    ok: bool
    in_D: bool
    unit_constancy: bool
    vanishing: bool
    max_outside: float = 0.0
    reason: str = ""
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def image_check(F: SpectralFunction, atol: float = 1e-9) -> ImageCheck:
    phi = F.phi
    in_D = bool(np.all(np.isfinite(phi.values)))
    unit = phi.B >= 0 or phi.grid.coarsen(phi.values, 0, atol) is not None
    reasons = []
    if not in_D:
        reasons.append("non-finite values")
    if not unit:
        reasons.append("not constant on unit-ball cosets")
    max_out = 0.0
    if in_D and unit:
        tab = phi if phi.B >= 0 else phi.reshape(phi.A, 0)
        g = tab.grid
        o = distance_ords(F.tower, F.base_level, F.nu, g.reps_scaled(), g.shift)
        outside = o < 0  # dist > 1
        if np.any(outside):
            max_out = float(np.max(np.abs(tab.values[outside])))
    vanishing = max_out <= atol
    if not vanishing:
        reasons.append(f"nonzero ({max_out:.3g}) at distance > 1 from the base level")
    ok = in_D and unit and vanishing
    return ImageCheck(ok, in_D, unit, vanishing, max_out, "; ".join(reasons),
                      {"base_level": F.base_level, "nu": F.nu, "A": phi.A, "B": phi.B})


def spectral_norm_sq(F: SpectralFunction) -> float:
    return float(haar_integral(F.phi * F.phi.conj()).real)


def plancherel(f: CylindricalFunction, g: CylindricalFunction, nu: int | None = None):
    """(int f conj(g) dmu, int_{K_nu} fhat conj(ghat) dxi)."""
    nu = max(f.n, g.n) if nu is None else nu
    lhs = integrate_mu(f * g.conj())
    F, G = fhat(f, nu), fhat(g, nu)
    rhs = haar_integral(F.phi * G.phi.conj())
    return complex(lhs), complex(rhs)
