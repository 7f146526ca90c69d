"""
The forward-backward iteration
==============================

Run the iteration x_{k+1} in T(x_k) and watch phi decrease.  Each record
carries the envelope value, the residual and the step taken.
"""

from hifbe import EnvelopeConfig, hifba_run, problem_catalog_get
from hifbe.algo import scaled_gradient_check

P = problem_catalog_get("oscillatory")
cfg = EnvelopeConfig(p=1.5, gamma=0.2)

tr = hifba_run(P, [-2.45], cfg, max_iters=200, res_tol=1e-6)
print(f"stop: {tr.stop_reason} after {len(tr)} records")
for r in tr.records if len(tr) <= 8 else tr.records[:5] + tr.records[-3:]:
    ident = scaled_gradient_check(P, r, cfg)
    print(f"k={r.k:3d} x={r.x[0]: .8f} phi={r.phi:.8f} env={r.env:.8f} res={r.res_norm:.2e} identity={ident}")

# the trace is also available as CSV
print(tr.to_csv().splitlines()[0])

# a gradient step on a quadratic halves the iterate each time
Q = problem_catalog_get("quad-free1d")
print([float(r.x[0]) for r in hifba_run(Q, [2.0], EnvelopeConfig(p=2.0, gamma=0.5)).records[:6]])
