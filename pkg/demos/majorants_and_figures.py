"""
Majorants and figure data
=========================

A Hölder-type majorant of phi at an anchor only works with the exponent
that matches the smoothness of f.  The command line writes the same data
as CSV and SVG.
"""

import os
import tempfile

import numpy as np

from hifbe import problem_catalog_get
from hifbe.analysis import check_majorant, majorant_constant, majorant_values
from hifbe.cli import main

P = problem_catalog_get("majorant-demo")
ys = np.linspace(-2.0, 3.0, 5001)
L = majorant_constant(P, 0.5, ys)
phi = P.phis(ys[:, None])
for mu in (0.5, 1.0, 0.2):
    gap = phi - majorant_values(P, mu, L, 0.5, ys)
    print(f"mu={mu}: max(phi - M) = {gap.max(): .4f} at y = {ys[gap.argmax()]:.3f}")

rep = check_majorant(P)
print([(s.check_id, s.status) for s in rep.sub_reports])

outdir = tempfile.mkdtemp()
for fig in ("1a", "2b"):
    main(["repro", "--figure", fig, "--outdir", outdir])
print(sorted(os.listdir(outdir)))
