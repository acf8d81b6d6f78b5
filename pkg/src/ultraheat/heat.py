"""Heat kernel of the level operator and the transition semigroup.

On level n the kernel is radial: ``Gamma_N`` denotes its value on the shell
``|x|_n = q**N``.  It vanishes for ``N > d``.  A transform shell ``|xi|_n = q**j``
has ``||xi|| = q**(j/m)``, which is the argument fed to ``rho``.

The level-n transition law of the process is that of ``m_n * W`` with ``W``
distributed according to the kernel, so increments live in ``|z|_n <= q**R_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lcfunc import LocallyConstantFunction, ball_integral_character
from .measure import CylindricalFunction
from .tower import TowerLevel

__all__ = [
    "rho", "rho_dt", "gamma_radial", "gamma_fourier_oracle", "ball_mass", "RadialProfile",
    "pi_sphere_probs", "convolve_profiles", "heat_apply", "heat_apply_dt", "heat_residual",
    "transition_kernel", "decay_bounds", "DEFAULT_FLOOR_DEPTH",
]

DEFAULT_FLOOR_DEPTH = 40


def rho(s, t: float, alpha: float):
    """exp(-t s**alpha) for s > 1, and 1 otherwise."""
    s = np.asarray(s, dtype=float)
    out = np.where(s > 1, np.exp(-t * np.power(np.maximum(s, 1.0), alpha)), 1.0)
    return float(out) if out.ndim == 0 else out


def rho_dt(s, t: float, alpha: float):
    """Time derivative of :func:`rho`."""
    s = np.asarray(s, dtype=float)
    sa = np.power(np.maximum(s, 1.0), alpha)
    out = np.where(s > 1, -sa * np.exp(-t * sa), 0.0)
    return float(out) if out.ndim == 0 else out


def _rho_fn(deriv: bool):
    return rho_dt if deriv else rho


def _shell_rho(level: TowerLevel, j: int, t: float, alpha: float, deriv=False) -> float:
    return _rho_fn(deriv)(float(level.q) ** (j / level.m), t, alpha)


def gamma_radial(level: TowerLevel, N: int, t: float, alpha: float, deriv: bool = False) -> float:
    """Kernel value on the shell |x|_n = q**N (its t-derivative if ``deriv``)."""
    q, d = level.q, level.d
    if N > d:
        return 0.0
    const = 0.0 if deriv else 1.0
    acc = sum(float(q) ** j * _shell_rho(level, j, t, alpha, deriv) for j in range(1, d - N + 1))
    last = float(q) ** (d - N) * _shell_rho(level, d - N + 1, t, alpha, deriv)
    return float(q) ** (-d) * (const + (1 - 1 / q) * acc - last)


def ball_mass(level: TowerLevel, K: int, t: float, alpha: float, deriv: bool = False) -> float:
    """Kernel mass of |x|_n <= q**K (its t-derivative if ``deriv``)."""
    q, d = level.q, level.d
    if K >= d:
        return 0.0 if deriv else 1.0
    const = 0.0 if deriv else 1.0
    acc = sum(float(q) ** j * _shell_rho(level, j, t, alpha, deriv) for j in range(1, d - K + 1))
    return float(q) ** (K - d) * (const + (1 - 1 / q) * acc)


def gamma_fourier_oracle(level: TowerLevel, N: int, t: float, alpha: float,
                         shells: int = 60) -> tuple[float, float]:
    """Kernel value from the transform integral, summed shell by shell.

    Returns ``(value, tail_bound)``; the ball and sphere character integrals are
    evaluated at the concrete point ``x = pi**(-N)``.
    """
    q, d = level.q, level.d
    if level.e > 1:
        x = level.uniformizer() ** (-N)
    else:
        x = level.from_rational(Fraction(level.p) ** (-N))
    neg = -x
    total = ball_integral_character(neg, 0).real  # rho = 1 on the unit ball
    for j in range(1, shells + 1):
        total += _shell_rho(level, j, t, alpha) * ball_integral_character(neg, j, sphere=True)
    tail = sum(float(q) ** j * _shell_rho(level, j, t, alpha)
               for j in range(shells + 1, shells + 40))
    return float(q) ** (-d) * total, float(q) ** (-d) * tail


@dataclass
class RadialProfile:
    """Shell probabilities of the kernel on level n above a floor ball."""
    level: TowerLevel
    t: float
    alpha: float
    n_min: int
    probs: dict[int, float] = field(default_factory=dict)
    floor_mass: float = 0.0
    gamma: dict[int, float] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.level.d

    def shells(self) -> list[int]:
        return sorted(self.probs)

    def total(self) -> float:
        return self.floor_mass + math.fsum(self.probs.values())

    def cdf(self, N: int) -> float:
        """P(|w|_n <= q**N) for N >= n_min."""
        if N < self.n_min:
            raise ValueError("below the floor of the profile")
        return self.floor_mass + math.fsum(p for s, p in self.probs.items() if s <= N)

    def as_arrays(self):
        """(labels, probabilities) with the floor ball first (label n_min)."""
        labels = [self.n_min] + self.shells()
        return np.array(labels), np.array([self.floor_mass] + [self.probs[s] for s in labels[1:]])


def pi_sphere_probs(level: TowerLevel, t: float, alpha: float,
                    n_min: int | None = None) -> RadialProfile:
    d, q = level.d, level.q
    n_min = d - DEFAULT_FLOOR_DEPTH if n_min is None else n_min
    if n_min > d:
        raise ValueError("floor above the kernel support")
    prof = RadialProfile(level, t, alpha, n_min)
    for N in range(n_min + 1, d + 1):
        g = gamma_radial(level, N, t, alpha)
        prof.gamma[N] = g
        prof.probs[N] = (1 - 1 / q) * float(q) ** N * g
    prof.floor_mass = ball_mass(level, n_min, t, alpha)
    return prof


def convolve_profiles(p1: RadialProfile, p2: RadialProfile) -> RadialProfile:
    """Shell law of W1 + W2 for independent radial W1, W2 (same level and floor).

    Both summands are in ball(N) or they lie on a common shell s > N and their
    difference falls in ball(N), which for uniform points happens with
    probability q**N / vol(shell s).
    """
    if p1.level is not p2.level or p1.n_min != p2.n_min:
        raise ValueError("profiles must share level and floor")
    lv = p1.level
    q, d, lo = lv.q, lv.d, p1.n_min

    def cdf(N):
        same = math.fsum(p1.probs[s] * p2.probs[s] / ((1 - 1 / q) * float(q) ** (s - N))
                         for s in range(N + 1, d + 1))
        return p1.cdf(N) * p2.cdf(N) + same

    out = RadialProfile(lv, p1.t + p2.t, p1.alpha if p1.alpha == p2.alpha else math.nan, lo)
    prev = cdf(lo)
    out.floor_mass = prev
    for N in range(lo + 1, d + 1):
        cur = cdf(N)
        out.probs[N] = cur - prev
        prev = cur
    return out


def decay_bounds(level: TowerLevel, t: float, alpha: float, n_lo: int = -12) -> dict:
    """Check |Gamma_N| against 2 q**(d/2) |x|**-1 and 2 q**d |x|**-1."""
    q, d = level.q, level.d
    worst_half, worst_full = 0.0, 0.0
    for N in range(n_lo, d + 1):
        g = abs(gamma_radial(level, N, t, alpha))
        inv_abs = float(q) ** (-N)
        worst_half = max(worst_half, g / (2 * float(q) ** (d / 2) * inv_abs))
        worst_full = max(worst_full, g / (2 * float(q) ** d * inv_abs))
    return {"half_exponent_ok": worst_half <= 1 + 1e-12, "full_exponent_ok": worst_full <= 1 + 1e-12,
            "ratio_half": worst_half, "ratio_full": worst_full}


# ---------------------------------------------------------------------------
# Semigroup on cylindrical functions
# ---------------------------------------------------------------------------

def _vp_m(level: TowerLevel) -> int:
    m, k = level.m, 0
    while m % level.p == 0:
        m //= level.p
        k += 1
    return k


def transition_kernel(level: TowerLevel, B: int, t: float, alpha: float, deriv: bool = False):
    """Per-coset weights of the level-n transition law on a grid with constancy B.

    Returns a function of the shell index for :meth:`BallGrid.radial_convolve`.
    """
    shift = level.e * _vp_m(level)  # |z / m_n|_n = |z|_n q**shift
    Bw = B + shift
    scale = float(level.q) ** Bw
    cache: dict[int, float] = {}

    def kernel(s: int) -> float:
        if s not in cache:
            if s <= B:
                cache[s] = ball_mass(level, Bw, t, alpha, deriv)
            else:
                cache[s] = scale * gamma_radial(level, s + shift, t, alpha, deriv)
        return cache[s]

    return kernel


def _apply(f: CylindricalFunction, t: float, alpha: float, deriv: bool) -> CylindricalFunction:
    if not t > 0:
        raise ValueError("t must be positive")
    g = f.grid
    vals = g.radial_convolve(f.values, transition_kernel(f.level, g.B, t, alpha, deriv))
    return f.with_values(vals)


def heat_apply(f: CylindricalFunction, t: float, alpha: float) -> CylindricalFunction:
    """(U_t f)(x) = int f(x + y) pi(t, dy)."""
    return _apply(f, t, alpha, False)


def heat_apply_dt(f: CylindricalFunction, t: float, alpha: float) -> CylindricalFunction:
    """d/dt (U_t f), differentiating the rho factors of the kernel."""
    return _apply(f, t, alpha, True)


def heat_residual(f: CylindricalFunction, t: float, alpha: float) -> float:
    """sup over cosets of |d/dt U_t f + D^alpha U_t f|."""
    from .fractional import dalpha_spectral

    u = heat_apply(f, t, alpha)
    du = heat_apply_dt(f, t, alpha)
    Du = dalpha_spectral(u, alpha)
    return float(np.max(np.abs(du.values + Du.values)))


def kernel_table(level: TowerLevel, t: float, alpha: float, B: int) -> LocallyConstantFunction:
    """The kernel on ball(d)/ball(B) with the inner coset holding its ball average."""
    from .lattice import BallGrid

    g = BallGrid(level, level.d, B)
    inner = ball_mass(level, B, t, alpha) / float(level.q) ** B
    vals = [gamma_radial(level, int(s), t, alpha) if s > B else inner for s in g.shells()]
    return LocallyConstantFunction.from_grid(g, vals)
