"""The operator D^alpha = F^-1 Delta^alpha F and its hyper-singular forms.

Norms: ``||xi|| = |xi|_n ** (1/m_n)``; a coset on shell ``s`` (``|xi|_n = q**s``)
has ``||xi||**alpha = q**(s alpha / m)``.  All kernels below are radial and are
applied by :meth:`BallGrid.radial_convolve`.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .lattice import BallGrid
from .lcfunc import LocallyConstantFunction, fourier_level, inverse_fourier_level
from .measure import CylindricalFunction, integrate_mu
from .spectral import SpectralFunction, fhat, finv

__all__ = [
    "Multiplier", "dalpha_spectral", "dalpha_hypersingular", "dlambda_convolution",
    "partial_alpha_level", "partial_alpha_level_spectral", "delta_lambda_transform",
    "RadialFunction", "solve_poisson", "PoissonSolution", "hypersingular_constants",
]


def _qpow(q: int, x) -> complex | float:
    """q**x for real or complex x."""
    if isinstance(x, complex):
        return cmath.exp(x * cmath.log(q))
    return float(q) ** x


@dataclass(frozen=True)
class Multiplier:
    """Delta^alpha(xi) = ||xi||**alpha on ||xi|| > 1, and 0 on the unit ball."""
    alpha: complex | float

    def shell_value(self, q: int, m: int, s: int):
        if s <= 0:
            return 0.0
        return _qpow(q, s * self.alpha / m)

    def on_grid(self, grid: BallGrid) -> np.ndarray:
        lv = grid.level
        shells = grid.shells()
        cache = {s: self.shell_value(lv.q, lv.m, int(s)) for s in np.unique(shells)}
        return np.array([cache[int(s)] for s in shells], dtype=complex)

    def __call__(self, xi) -> complex:
        if xi.exact_zero or xi.is_zero():
            return 0.0
        lv = xi.level
        return self.shell_value(lv.q, lv.m, -xi.ord())

    def __mul__(self, other: "Multiplier") -> "Multiplier":
        return Multiplier(self.alpha + other.alpha)

    def apply(self, F: SpectralFunction) -> SpectralFunction:
        phi = F.phi if F.phi.B >= 0 else F.phi.reshape(F.phi.A, 0)
        return SpectralFunction(
            LocallyConstantFunction.from_grid(phi.grid, phi.values * self.on_grid(phi.grid)),
            F.base_level)


def dalpha_spectral(f: CylindricalFunction, alpha) -> CylindricalFunction:
    """D^alpha f by the spectral definition (alpha may be complex)."""
    F = fhat(f, f.n)
    return finv(Multiplier(alpha).apply(F), check=False)


def hypersingular_constants(q: int, m: int, d: int, lam):
    """(C, K) with kernel C * (|x|**(-1 - lam/m) + K) for the level operator."""
    r = _qpow(q, lam / m)
    C = _qpow(q, d * lam / m) * (1 - r) / (1 - _qpow(q, -1 - lam / m))
    K = _qpow(q, -d * (1 + lam / m)) * (1 - 1 / q) / (r - 1)
    return C, K


def _difference_convolve(grid: BallGrid, values: np.ndarray, A_int: int, weight) -> np.ndarray:
    """sum over cosets y != 0 of |y| <= q**A_int of vol * weight(s) * (v(x - y) - v(x)).

    ``weight(s)`` is the kernel density on shell s; cosets have volume q**B.
    """
    q, B = grid.level.q, grid.B
    vol = float(q) ** B
    w = {s: vol * weight(s) if B < s <= A_int else 0.0 for s in range(B, grid.A + 1)}
    conv = grid.radial_convolve(values, lambda s: w.get(s, 0.0))
    total = sum(w[s] * (1 - 1 / q) * float(q) ** (s - B) for s in range(B + 1, grid.A + 1))
    return conv - total * values


def _level_operator(phi: LocallyConstantFunction, lam, support: int, scale_exp: int):
    """Hyper-singular difference sum on phi's grid.

    Integrates over ``|x|_n <= q**support`` with the kernel of the level operator
    evaluated at ``x / m`` where ``|m|_n = q**(-scale_exp)``.
    """
    lv = phi.level
    q, m, d = lv.q, lv.m, lv.d
    if abs(1 - _qpow(q, -1 - lam / m)) < 1e-9:
        # removable singularity at lam = -m: symmetric average around it
        h = 1e-5
        return 0.5 * (_level_operator(phi, lam + h, support, scale_exp)
                      + _level_operator(phi, lam - h, support, scale_exp))
    C, K = hypersingular_constants(q, m, d, lam)
    sm = float(q) ** (-scale_exp)  # |m|_n

    def weight(s):
        # |x / m|^(-1 - lam/m) + K, times the Jacobian |m|^-1
        return C * (_qpow(q, (s + scale_exp) * (-1 - lam / m)) + K) / sm

    return _difference_convolve(phi.grid, phi.values, support, weight)


def dlambda_convolution(f: CylindricalFunction, lam, extra_digits: int = 2,
                        check_refinement: bool = True) -> CylindricalFunction:
    """D^lam f through the difference-kernel integral over the support ball.

    Valid for lam > 0 (hyper-singular form) and for Re lam < -1, where the same
    expression is the convolution with the transform of Delta^lam.
    """
    lv = f.level
    R = lv.support_exponent
    scale_exp = lv.e * _vp_m(lv)
    phi = f.phi.refine(f.phi.B - extra_digits)
    vals = _level_operator(phi, lam, R, scale_exp)
    if check_refinement:
        finer = f.phi.refine(f.phi.B - extra_digits - 1)
        v2 = _level_operator(finer, lam, R, scale_exp)
        res = finer.grid.coarsen(v2, phi.B, atol=1e-10)
        if res is None or np.max(np.abs(res[1] - vals)) > 1e-10:
            raise ArithmeticError("hyper-singular sum changed under refinement")
    return CylindricalFunction(LocallyConstantFunction.from_grid(phi.grid, vals)
                               .reshape(R, f.phi.B))


def _vp_m(lv) -> int:
    m, p, k = lv.m, lv.p, 0
    while m % p == 0:
        m //= p
        k += 1
    return k


def dalpha_hypersingular(f: CylindricalFunction, alpha: float, extra_digits: int = 2,
                         check_refinement: bool = True) -> CylindricalFunction:
    """D^alpha f for real alpha > 0 without any Fourier transform."""
    if isinstance(alpha, complex) or not alpha > 0:
        raise ValueError("the hyper-singular representation needs real alpha > 0")
    return dlambda_convolution(f, float(alpha), extra_digits, check_refinement)


def _level_grid(phi: LocallyConstantFunction) -> LocallyConstantFunction:
    lv = phi.level
    return phi.reshape(max(phi.A, lv.d), phi.B)


def partial_alpha_level(phi: LocallyConstantFunction, alpha: float) -> LocallyConstantFunction:
    """The level-n operator as a difference-kernel sum over ``|y|_n <= q**d``."""
    if isinstance(alpha, complex) or not alpha > 0:
        raise ValueError("alpha must be real and positive")
    phi = _level_grid(phi)
    return LocallyConstantFunction.from_grid(
        phi.grid, _level_operator(phi, float(alpha), phi.level.d, 0))


def partial_alpha_level_spectral(phi: LocallyConstantFunction, alpha) -> LocallyConstantFunction:
    """The level-n operator as inverse transform of Delta^alpha times the transform."""
    phi = _level_grid(phi)
    F = fourier_level(phi)
    F = LocallyConstantFunction.from_grid(F.grid, F.values * Multiplier(alpha).on_grid(F.grid))
    return inverse_fourier_level(F)


@dataclass(frozen=True)
class RadialFunction:
    """A radial function on K_n given shell by shell (|x|_n = q**N), zero above ``top``.

    ``origin`` is the value at 0 (may be infinite)."""
    level: object
    top: int
    shell: object  # callable N -> complex
    origin: complex
    ball_integral_fn: object = None

    def __call__(self, N: int):
        return self.shell(N) if N <= self.top else 0.0

    def ball_integral(self, A: int | None = None):
        A = self.top if A is None else min(A, self.top)
        return self.ball_integral_fn(A)

    def table(self, B: int) -> LocallyConstantFunction:
        """Shell values on ball(top)/ball(B); the inner coset carries its ball average."""
        lv = self.level
        g = BallGrid(lv, self.top, B)
        q = lv.q
        inner = self.ball_integral(B) / float(q) ** B
        vals = np.array([self.shell(int(s)) if s > B else inner for s in g.shells()],
                        dtype=complex)
        return LocallyConstantFunction.from_grid(g, vals)


def delta_lambda_transform(lam: complex, level) -> RadialFunction:
    """Level-n transform of x -> Delta^lam(x) for Re lam < -1, as a radial function."""
    lam = complex(lam)
    if not lam.real < -1:
        raise ValueError("the closed form needs Re lam < -1")
    q, m, d = level.q, level.m, level.d
    if abs(1 - _qpow(q, -1 - lam / m)) < 1e-9:
        # removable singularity at lam = -m (the shells then carry a log |x| term)
        lo, hi = delta_lambda_transform(lam - 1e-5, level), delta_lambda_transform(lam + 1e-5, level)
        return RadialFunction(level, d, lambda N: 0.5 * (lo.shell(N) + hi.shell(N)),
                              complex("inf"),
                              lambda A: 0.5 * (lo.ball_integral(A) + hi.ball_integral(A)))
    C, K = hypersingular_constants(q, m, d, lam)
    C = C * _qpow(q, complex(d / 2))
    expo = -1 - lam / m

    def shell(N):
        return C * (_qpow(q, N * expo) + K)

    r = _qpow(q, -lam / m)  # q**(N expo) * q**N = r**N

    def ball_integral(A):
        # sum_{N <= A} (1 - 1/q) q**N (q**(N expo) + K)
        return C * ((1 - 1 / q) * r**A / (1 - 1 / r) + K * float(q) ** A)

    origin = C * K if expo.real > 0 else complex("inf")
    return RadialFunction(level, d, shell, origin, ball_integral)


@dataclass
class PoissonSolution:
    u: CylindricalFunction
    mean_f: complex
    kernel: CylindricalFunction  # spans the solutions of D^alpha v = 0 (constants)


def solve_poisson(f: CylindricalFunction, alpha: float, tol: float = 1e-10) -> PoissonSolution:
    """u = D^-alpha f for mean-zero f; every solution is u + C."""
    mean = integrate_mu(f)
    if abs(mean) > tol:
        raise ValueError(f"right-hand side has nonzero mean {mean:.6g}")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    u = dalpha_spectral(f, -alpha)
    return PoissonSolution(u, mean, CylindricalFunction.constant(f.level, 1.0))
