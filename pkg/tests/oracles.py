"""Independent reference computations behind the frozen expected values.

Nothing here imports the package: every value comes from direct arithmetic,
closed forms, or brute-force minimisation with scipy.  Run

    python3 tests/oracles.py

to regenerate ``tests/data/frozen.json``.
"""

import json
import math
import os

import numpy as np
from scipy import optimize

HERE = os.path.dirname(os.path.abspath(__file__))
FROZEN = os.path.join(HERE, "data", "frozen.json")


def osc_phi(x):
    return 0.5 * abs(x) ** 1.5 + abs(0.3 * math.sin(5 * x)) + 0.2 * x * x * math.exp(-x * x)


def brute_min_1d(fun, lo, hi, pieces=2000):
    """Global minimum of a 1-D function: dense grid, then bounded Brent in each best cell."""
    xs = np.linspace(lo, hi, pieces + 1)
    vals = np.array([fun(t) for t in xs])
    best_x, best_v = xs[int(np.argmin(vals))], float(vals.min())
    for i in np.argsort(vals)[:20]:
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, pieces)]
        res = optimize.minimize_scalar(fun, bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12})
        if res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    return best_x, best_v


def oracle_values():
    out = {}
    out["osc_phi_at_1"] = osc_phi(1.0)
    out["majorant_phi_at_0"] = (2 / 3) * 0 - 0.5 * math.cos(0) + 0.2 * 0
    # quad-l1 model at x=0, y=0.5, p=2, gamma=0.5
    out["quad_l1_model"] = 0.5 * (0 - 1) ** 2 + (0 - 1) * 0.5 + 0.5 + 0.25 / (2 * 0.5)
    # power-q subproblem at x=1, p=1.5, gamma=1 by brute force
    y, v = brute_min_1d(lambda t: 2 / 3 + 1.0 * (t - 1) + abs(1 - t) ** 1.5 / 1.5, -5, 5)
    out["powerq_sub_y"], out["powerq_sub_value"] = y, v
    # quad-l1 at p=1.5, gamma=0.5, x=0.3 by brute force
    y, v = brute_min_1d(lambda t: 0.5 * 0.49 - 0.7 * (t - 0.3) + abs(t) + abs(0.3 - t) ** 1.5 / 0.75, -5, 5)
    out["quadl1_p15_y"], out["quadl1_p15_value"] = y, v
    # oscillatory envelope at x=1, p=1.5, gamma=1 by brute force
    a = 0.75
    y, v = brute_min_1d(lambda t: 0.5 + a * (t - 1) + abs(0.3 * math.sin(5 * t))
                        + 0.2 * t * t * math.exp(-t * t) + abs(1 - t) ** 1.5 / 1.5, -9, 11, 20000)
    out["osc_env_x1_g1_y"], out["osc_env_x1_g1_value"] = y, v
    # Huber values
    out["huber_2"] = 1 + 0.5 * 1.0
    out["huber_half"] = 0.5 * 0.25
    # tau example
    out["tau_example"] = math.sqrt(2.3 / 0.3)
    # power-q lower bound constant r=1, gamma_hat=1, p=1.5 by scipy on the 2-D function
    c0 = 2 ** 0.5 / 1.5

    def F(z):
        x, y = z
        return (2 / 3) * abs(x) ** 1.5 + math.copysign(abs(x) ** 0.5, x) * (y - x) + c0 * abs(y) ** 1.5

    best = math.inf
    for x0 in np.linspace(-1, 1, 21):
        for y0 in np.linspace(-4, 4, 17):
            res = optimize.minimize(F, [x0, y0], method="L-BFGS-B", bounds=[(-1, 1), (-50, 50)])
            best = min(best, float(res.fun))
    out["powerq_c1_min"] = best
    # Hölder constant of sgn(x)|x|^(1/2): sup attained at x = -y, value sqrt(2)
    out["powerq_holder_sup"] = math.sqrt(2.0)
    # kappa_p infimum in 1-D equals p - 1
    out["kappa_1d_p15"] = 0.5
    # uniform shrinkage radius for power-q, eps = 0.1: 2 sqrt(theta) = eps
    out["powerq_shrink_theta_eps01"] = (0.1 / 2) ** 2
    # Hölder modulus from the tau example inputs, nu = 1, p = 2, gamma = 0.1, r = 1
    tau = out["tau_example"]
    out["modulus_example"] = 1 * (3 + tau) + 2 ** 1 / (2 * 0.1) + (3 + tau) ** 1 * 2 ** 0 / 0.1
    # gradient-step iterates for f = x^2/2, gamma = 0.5, x0 = 2: x_k = 2^(1-k) until |d| <= 1e-6
    k = 0
    while 2.0 ** (1 - k) / 2 > 1e-6:
        k += 1
    out["quad_hifba_records"] = k + 1
    return out


if __name__ == "__main__":
    vals = oracle_values()
    os.makedirs(os.path.dirname(FROZEN), exist_ok=True)
    with open(FROZEN, "w") as fh:
        json.dump(vals, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(vals, indent=2, sort_keys=True))
