"""Property checks runnable from the command line (``ultraheat verify``).

Each check yields records ``{suite, case, status, lhs, rhs, tol}``; a case
passes when ``|lhs - rhs| <= tol``.  Sizes are kept small so the whole suite
finishes in well under a minute on the reference tower.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .fractional import dalpha_hypersingular, dalpha_spectral, partial_alpha_level, \
    partial_alpha_level_spectral, solve_poisson
from .heat import convolve_profiles, gamma_fourier_oracle, gamma_radial, heat_apply, \
    heat_residual, pi_sphere_probs
from .lcfunc import LocallyConstantFunction, fourier_level, inverse_fourier_level, omega
from .measure import CylindricalFunction, ess_sup_closed_form, ess_sup_enumerated, \
    galois_integral, integrate_mu, pairing_pushforward
from .process import in_S_rows, invariance_check, sample_increments, simulate_paths, \
    tail_probability
from .spectral import fhat, finv, plancherel
from .tower import Tower

SUITES = ("tower", "lcfunc", "measure", "spectral", "fractional", "heat", "process")


def _num(x):
    if isinstance(x, (complex, np.complexfloating)):
        return [float(f"{x.real:.15g}"), float(f"{x.imag:.15g}")]
    if isinstance(x, Fraction):
        return str(x)
    return float(f"{float(x):.15g}")


class _Recorder:
    def __init__(self):
        self.records = []

    def check(self, suite, case, lhs, rhs, tol):
        err = abs(complex(lhs) - complex(rhs)) if not isinstance(lhs, Fraction) else abs(lhs - rhs)
        ok = bool(err <= tol)
        self.records.append({"suite": suite, "case": case, "status": "pass" if ok else "fail",
                             "lhs": _num(lhs), "rhs": _num(rhs), "tol": tol})


def _levels(tower: Tower, top: int = 2):
    return [tower.level(n) for n in range(1, min(tower.depth, top) + 1)]


def _depth(lv) -> int:
    return 2 if lv.q < 10 else 1


def _tower_suite(rec, tower, rng, alpha, t):
    for lv in tower.levels:
        x, y, z = (tower.sample_ball(lv.n, 2, rng) for _ in range(3))
        rec.check("tower", f"n={lv.n} associativity", float((x * y) * z == x * (y * z)), 1.0, 0)
        rec.check("tower", f"n={lv.n} distributivity", float(x * (y + z) == x * y + x * z), 1.0, 0)
        top = tower.embed(x, tower.depth)
        rec.check("tower", f"n={lv.n} T_n of the embedding", float(tower.project(top, lv.n) == x),
                  1.0, 0)
        if lv.e == 1 and lv.f > 1:
            rec.check("tower", f"n={lv.n} Frobenius of zeta", float(
                tower.frobenius(lv.zeta()) == lv.zeta() ** lv.p), 1.0, 0)


def _lcfunc_suite(rec, tower, rng, alpha, t):
    for lv in _levels(tower):
        worst = 0.0
        for _ in range(5):
            phi = LocallyConstantFunction.random(lv, 1, -1, rng)
            worst = max(worst, inverse_fourier_level(fourier_level(phi)).max_abs_diff(phi))
        rec.check("lcfunc", f"n={lv.n} Fourier round trip", worst, 0.0, 1e-9)
        F = fourier_level(omega(lv))
        expected = float(lv.q) ** (-lv.d / 2)
        rec.check("lcfunc", f"n={lv.n} transform of the unit-ball indicator",
                  float(np.max(np.abs(F.values - expected))) + abs(F.A - lv.d) + abs(F.B - lv.d),
                  0.0, 1e-12)


def _measure_suite(rec, tower, rng, alpha, t):
    for lv in _levels(tower):
        for k in (-2, 0, 2):
            a = lv.uniformizer() ** (-k) if lv.e > 1 else lv.from_rational(Fraction(lv.p) ** (-k))
            val = integrate_mu(CylindricalFunction.fa(a))
            expected = 1.0 if pairing_pushforward(a).m >= 0 else 0.0
            rec.check("measure", f"n={lv.n} characteristic functional ord={a.ord()}", val,
                      expected, 1e-10)
            rec.check("measure", f"n={lv.n} ess sup ord={a.ord()}", ess_sup_enumerated(a, 4),
                      ess_sup_closed_form(a), 0)
        f = CylindricalFunction.random(lv, _depth(lv), rng)
        if lv.n < tower.depth:
            rec.check("measure", f"n={lv.n} lift consistency", integrate_mu(f.lift(lv.n + 1)),
                      integrate_mu(f), 1e-12)
        if lv.e == 1 and lv.f > 1:
            rec.check("measure", f"n={lv.n} Frobenius invariance", galois_integral(f, 1),
                      integrate_mu(f), 1e-10)


def _spectral_suite(rec, tower, rng, alpha, t):
    for lv in _levels(tower):
        f = CylindricalFunction.random(lv, _depth(lv), rng)
        g = CylindricalFunction.random(lv, _depth(lv), rng)
        rec.check("spectral", f"n={lv.n} inverse of forward", finv(fhat(f)).max_abs_diff(f), 0.0,
                  1e-9)
        lhs, rhs = plancherel(f, g)
        rec.check("spectral", f"n={lv.n} Plancherel", lhs, rhs, 1e-9)


def _fractional_suite(rec, tower, rng, alpha, t):
    for lv in _levels(tower):
        f = CylindricalFunction.random(lv, _depth(lv), rng)
        rec.check("fractional", f"n={lv.n} hyper-singular vs spectral",
                  dalpha_hypersingular(f, alpha).max_abs_diff(dalpha_spectral(f, alpha)), 0.0, 1e-9)
        phi = LocallyConstantFunction.random(lv, 1, -1, rng)
        rec.check("fractional", f"n={lv.n} level operator two routes",
                  partial_alpha_level(phi, alpha).max_abs_diff(
                      partial_alpha_level_spectral(phi, alpha)), 0.0, 1e-9)
        f0 = f - CylindricalFunction.constant(lv, integrate_mu(f))
        u = solve_poisson(f0, alpha).u
        rec.check("fractional", f"n={lv.n} Poisson round trip",
                  dalpha_spectral(u, alpha).max_abs_diff(f0), 0.0, 1e-9)
        rec.check("fractional", f"n={lv.n} harmonic measure", integrate_mu(dalpha_spectral(f, alpha)),
                  0.0, 1e-10)


def _heat_suite(rec, tower, rng, alpha, t):
    for lv in _levels(tower):
        worst = 0.0
        for N in range(lv.d - 6, lv.d + 1):
            v, _ = gamma_fourier_oracle(lv, N, t, alpha)
            g = gamma_radial(lv, N, t, alpha)
            worst = max(worst, abs(v - g) / max(1.0, abs(g)))
        rec.check("heat", f"n={lv.n} radial form vs Fourier sum", worst, 0.0, 1e-9)
        prof = pi_sphere_probs(lv, t, alpha)
        rec.check("heat", f"n={lv.n} normalization", prof.total(), 1.0, 1e-10)
        p1 = pi_sphere_probs(lv, t / 2, alpha)
        conv = convolve_profiles(p1, p1)
        rec.check("heat", f"n={lv.n} profile convolution",
                  max(abs(conv.probs[k] - prof.probs[k]) for k in prof.probs), 0.0, 1e-9)
        f = CylindricalFunction.random(lv, _depth(lv), rng)
        rec.check("heat", f"n={lv.n} semigroup",
                  heat_apply(heat_apply(f, t / 3, alpha), 2 * t / 3, alpha).max_abs_diff(
                      heat_apply(f, t, alpha)), 0.0, 1e-8)
        rec.check("heat", f"n={lv.n} generator residual", heat_residual(f, t, alpha), 0.0, 1e-8)


def _process_suite(rec, tower, rng, alpha, t):
    for lv in _levels(tower):
        f = CylindricalFunction.random(lv, _depth(lv), rng)
        lhs, rhs = invariance_check(f, t, alpha)
        rec.check("process", f"n={lv.n} invariance", lhs, rhs, 1e-10)
        rows, shift, shells = sample_increments(lv, t, alpha, 20000, rng, return_shells=True)
        prof = pi_sphere_probs(lv, t, alpha)
        top = lv.d
        emp = float(np.mean(shells == top))
        p = prof.probs[top]
        rec.check("process", f"n={lv.n} top-shell frequency (4 sigma)", emp, p,
                  4 * math.sqrt(p * (1 - p) / 20000) + 1e-12)
        paths = simulate_paths(lv, np.linspace(0, 1, 21), lv.zero(), alpha, 20, 1, threads=1,
                               check_S=False)
        inside = all(bool(np.all(in_S_rows(lv, pth.rows, pth.shift))) for pth in paths)
        rec.check("process", f"n={lv.n} S-absorption", float(inside), 1.0, 0)
    tails = [tail_probability(1, 0, s, alpha, tower) for s in (1, 0.1, 0.01, 0.001)]
    rec.check("process", "tail probability decreasing", float(all(
        a >= b for a, b in zip(tails, tails[1:]))), 1.0, 0)


_RUNNERS = {
    "tower": _tower_suite, "lcfunc": _lcfunc_suite, "measure": _measure_suite,
    "spectral": _spectral_suite, "fractional": _fractional_suite, "heat": _heat_suite,
    "process": _process_suite,
}


def run_suites(tower: Tower, suites=None, alpha: float = 1.0, t: float = 1.0,
               seed: int = 0) -> list[dict]:
    suites = list(SUITES) if not suites else list(suites)
    unknown = [s for s in suites if s not in _RUNNERS]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    rec = _Recorder()
    for name in suites:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(SUITES.index(name),)))
        _RUNNERS[name](rec, tower, rng, alpha, t)
    return rec.records
