"""
Constants and property checks
=============================

Estimate the constants behind the envelope bounds and run the sampled
checks that confirm them.  Every check returns a report with a status,
the worst violation and a witness.
"""

import json

from hifbe import EnvelopeConfig, problem_catalog_get
from hifbe.analysis import (check_envelope_regularity, check_p_calm, check_tau_containment,
                            check_uniform_shrinkage, envelope_constants, estimate_calm_constant,
                            estimate_kappa_p)

# strong monotonicity constant of |a|^(p-2) a on a ball
for p in (2.0, 1.75, 1.5, 1.25):
    print(f"kappa_hat(p={p}) = {estimate_kappa_p(p, 1.0):.4f}")

P = problem_catalog_get("oscillatory")
cfg = EnvelopeConfig(p=1.5, gamma=0.2)
c = envelope_constants(P, cfg, r=2.0)
print({k: round(v, 4) for k, v in c.as_dict().items()})

print("tau containment:", check_tau_containment(P, cfg, 2.0, n_samples=200, constants=c).status)
reg = check_envelope_regularity(P, cfg, n_pairs=1000, constants=c)
for s in reg.sub_reports:
    print(f"  {s.check_id}: {s.status}")

# x = 0 is a p-calm point of power-q; a small enough gamma makes it a fixed point
Q = problem_catalog_get("power-q")
M = estimate_calm_constant(Q, [0.0], 1.5)
rep = check_p_calm(Q, [0.0], M, 1.5)
print("p-calm:", rep.status, [s.status for s in rep.sub_reports])

shr = check_uniform_shrinkage(Q, cfg, [0.0], eps=0.1)
print("shrinkage theta:", shr.constants_used["theta"])
print(json.dumps(rep.to_dict())[:160], "...")
