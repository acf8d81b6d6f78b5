"""Monte Carlo for the process on level 2 of the U(2)U(3) tower.

Simulates paths from the origin and compares the empirical shell frequencies of
the endpoint with the exact radial probabilities. Positions are m * W, so the
shell of W sits e * v_p(m) above the shell of the position.
"""
from collections import Counter

import numpy as np

from ultraheat import build_tower, pi_sphere_probs, simulate_paths
from ultraheat.lattice import ord_rows

spec = {"p": 2, "precision": 24, "steps": [{"type": "unramified", "degree": 2},
                                           {"type": "unramified", "degree": 3}]}
tower = build_tower(spec)
lv = tower.level(2)
alpha = 1.0
grid = np.linspace(0.0, 1.0, 11)

paths = simulate_paths(lv, grid, lv.zero(), alpha, n_paths=2000, seed=11)
prof = pi_sphere_probs(lv, 1.0, alpha)
vpm, mm = 0, lv.m
while mm % lv.p == 0:
    mm //= lv.p
    vpm += 1
end_shells = Counter()
for path in paths:
    rows, shift = path.rows[-1:], path.shift
    end_shells[int(-ord_rows(lv, rows, shift)[0]) + lv.e * vpm] += 1

print(" N   empirical   exact")
for N, exact in sorted(prof.probs.items(), reverse=True)[:8]:
    print(f"{N:2d}   {end_shells.get(N, 0) / len(paths):.4f}     {exact:.4f}")
