"""
Command line tour
=================

The ``hifbe`` command samples envelopes, runs the iteration and the
check suites.  Here it is called in-process; the shell form is
``hifbe envelope --problem oscillatory --p 1.5 --gamma 0.2``.
"""

import json
import os
import tempfile

from hifbe.cli import main

tmp = tempfile.mkdtemp()

# envelope table with a header, then an SVG plot
code = main(["envelope", "--problem", "oscillatory", "--p", "1.5", "--gamma", "0.2", "--n", "5",
             "--plot", os.path.join(tmp, "env.svg")])
print("exit", code)

# a config file, with a flag taking precedence
conf = os.path.join(tmp, "solve.conf")
with open(conf, "w") as fh:
    fh.write("problem = oscillatory\np = 1.5\ngamma = 0.4\nx0 = 2\ninner.grid_points = 2001\n")
code = main(["solve", "--config", conf, "--gamma", "0.2", "--out", os.path.join(tmp, "trace.csv")])
print("exit", code)

# one check suite as JSON
out = os.path.join(tmp, "majorant.json")
main(["check", "--suite", "majorant", "--out", out])
print([r["check_id"] + ": " + r["status"] for r in json.load(open(out))])
