"""
Solving the inner subproblem
============================

The 1-D solver scans a grid centred at the anchor, refines every basin
that could hold the global minimum, and reports ties.  Problems with a
known proximal map skip the grid.
"""

import dataclasses

import numpy as np

from hifbe import CompositeProblem, EnvelopeConfig, NonsmoothOracle, problem_catalog_get
from hifbe.errors import ProxUnboundedError
from hifbe.inner import solve_subproblem

P = problem_catalog_get("quad-l1")

# p = 2 uses soft thresholding; hide the prox to force the grid
grid_only = CompositeProblem(P.f, dataclasses.replace(P.g, analytic_prox=None))
cfg = EnvelopeConfig(p=2.0, gamma=0.5)
for x in (-1.0, 0.4, 2.5):
    a = solve_subproblem(P, [x], cfg)
    b = solve_subproblem(grid_only, [x], cfg)
    print(f"x={x}: {a.method} {a.representative[0]:.10f}  {b.method} {b.representative[0]:.10f}")

# ties: g = -|y| with f == 0 has two minimizers at x = 0
zero_f = problem_catalog_get("zero").f
tie = CompositeProblem(zero_f, NonsmoothOracle(1, lambda y: -np.abs(y[..., 0]), vectorized=True))
sol = solve_subproblem(tie, [0.0], cfg)
print("tie:", sol.minimizers[:, 0], "representative", sol.representative, "single", sol.single_valued)

# a g that is not prox-bounded is reported, not silently minimised
bad = CompositeProblem(zero_f, NonsmoothOracle(1, lambda y: -y[..., 0] ** 4, vectorized=True))
try:
    solve_subproblem(bad, [0.0], cfg)
except ProxUnboundedError as exc:
    print("unbounded:", exc)

# n-D problems without a prox fall back to multistart local search, never certified
Q = problem_catalog_get("quad-free")
l1 = NonsmoothOracle(2, lambda y: np.abs(y).sum(axis=-1), vectorized=True)
sol = solve_subproblem(CompositeProblem(Q.f, l1), [1.0, -1.0], EnvelopeConfig(p=1.5, gamma=0.3))
print("2-D:", sol.method, sol.representative, "certified", sol.certified)
