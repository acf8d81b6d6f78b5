"""Radial heat kernel on the first levels of the U(2)U(3) tower over Q_2.

Prints Gamma_N(t) and the sphere probabilities of the process at a few times,
then checks that the probabilities add up to one.
"""
import numpy as np

from ultraheat import build_tower, gamma_radial, pi_sphere_probs

spec = {"p": 2, "precision": 24, "steps": [{"type": "unramified", "degree": 2},
                                           {"type": "unramified", "degree": 3}]}
tower = build_tower(spec)
alpha = 1.0

for lv in tower.levels[:2]:
    print(f"level {lv.n}: q={lv.q} m={lv.m} d={lv.d}")
    for t in (0.1, 1.0, 10.0):
        prof = pi_sphere_probs(lv, t, alpha)
        row = [gamma_radial(lv, N, t, alpha) for N in range(lv.d - 3, lv.d + 1)]
        print(f"  t={t:<5} gamma[d-3..d] =", np.array2string(np.array(row), precision=6))
        print(f"          total probability = {prof.total():.15f}")
