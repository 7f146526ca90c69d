"""Oracle types for the smooth part f and nonsmooth part g of phi = f + g.

Points are 1-D float arrays of shape ``(n,)``.  Oracles flagged
``vectorized=True`` also accept stacked points of shape ``(..., n)`` and
return one value (or gradient row) per point; the batch helpers below fall
back to a Python loop otherwise.

Extended reals are plain floats with ``math.inf`` as the explicit +infinity
sentinel.  A non-finite value from ``f`` is a fault, never a sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CapabilityError, DomainError, ExponentMismatchError, OracleFaultError

HOLDER_SAFETY = 1.1


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise DomainError(f"expected a point of shape (n,), got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DomainError(f"dimension mismatch: point has {x.shape[0]} coordinates, problem has {dim}")
    return x


def extended_sub(a: float, b: float) -> float:
    """``a - b`` on the extended reals with the rule inf - inf = inf."""
    if a == math.inf:
        return math.inf
    return a - b


@dataclass(frozen=True)
class SmoothOracle:
    """Differentiable part f with Hölder metadata.

    ``nu``/``l_nu`` describe a nu-Hölder continuous gradient; ``mu``/``l_mu``
    optionally describe a mu-Hölder Hessian.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    nu: float = 1.0
    l_nu: float = 0.0
    mu: Optional[float] = None
    l_mu: Optional[float] = None
    vectorized: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if not 0.0 < self.nu <= 1.0:
            raise ValueError(f"Hölder exponent nu must lie in (0, 1], got {self.nu}")
        if self.l_nu < 0:
            raise ValueError("l_nu must be nonnegative")

    def value_at(self, x) -> float:
        v = float(self.value(as_point(x, self.dim)))
        if not math.isfinite(v):
            raise OracleFaultError(f"f returned non-finite value {v} at x={x}")
        return v

    def gradient_at(self, x) -> np.ndarray:
        d = np.asarray(self.gradient(as_point(x, self.dim)), dtype=float).reshape(self.dim)
        if not np.all(np.isfinite(d)):
            raise OracleFaultError(f"f returned non-finite gradient {d} at x={x}")
        return d

    def hessian_at(self, x) -> np.ndarray:
        if self.hessian is None:
            raise CapabilityError("the smooth oracle has no Hessian evaluator")
        return np.asarray(self.hessian(as_point(x, self.dim)), dtype=float).reshape(self.dim, self.dim)

    def values(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.vectorized:
            out = np.asarray(self.value(X), dtype=float)
        else:
            flat = X.reshape(-1, self.dim)
            out = np.array([self.value(row) for row in flat], dtype=float).reshape(X.shape[:-1])
        if not np.all(np.isfinite(out)):
            raise OracleFaultError("f returned non-finite values on a batch")
        return out

    def gradients(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.vectorized:
            out = np.asarray(self.gradient(X), dtype=float).reshape(X.shape)
        else:
            flat = X.reshape(-1, self.dim)
            out = np.array([self.gradient(row) for row in flat], dtype=float).reshape(X.shape)
        if not np.all(np.isfinite(out)):
            raise OracleFaultError("f returned non-finite gradients on a batch")
        return out


@dataclass(frozen=True)
class NonsmoothOracle:
    """Proper lsc part g, possibly +inf-valued.

    analytic_prox(u, gamma, p) returns the minimizer set of
    ``y -> g(y) + |u - y|^p / (p gamma)`` as an array of shape ``(k, n)``;
    it is only trusted for orders listed in ``prox_orders`` (None means all).
    subdiff_1d(x) returns a closed interval ``(lo, hi)`` (1-D problems only).
    ``zero`` marks g == 0 and ``box`` marks g as the indicator of [lo, hi];
    both enable closed-form subproblem solutions.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    analytic_prox: Optional[Callable[[np.ndarray, float, float], np.ndarray]] = None
    prox_orders: Optional[tuple] = None
    subdiff_1d: Optional[Callable[[float], tuple]] = None
    prox_bound_hint: Optional[float] = None
    zero: bool = False
    box: Optional[tuple] = None
    vectorized: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.subdiff_1d is not None and self.dim != 1:
            raise ValueError("subdiff_1d is only meaningful for dim == 1")
        if self.box is not None and (self.dim != 1 or self.box[0] > self.box[1]):
            raise ValueError("box indicators are supported for dim == 1 with lo <= hi")

    def value_at(self, x) -> float:
        v = float(self.value(as_point(x, self.dim)))
        if math.isnan(v) or v == -math.inf:
            raise OracleFaultError(f"g returned {v} at x={x}; g must map into R U {{+inf}}")
        return v

    def values(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        if self.vectorized:
            out = np.asarray(self.value(Y), dtype=float)
            if out.shape != Y.shape[:-1]:
                out = np.broadcast_to(out, Y.shape[:-1]).copy()
        else:
            flat = Y.reshape(-1, self.dim)
            out = np.array([self.value(row) for row in flat], dtype=float).reshape(Y.shape[:-1])
        if np.any(np.isnan(out)) or np.any(out == -np.inf):
            raise OracleFaultError("g returned NaN or -inf on a batch")
        return out

    def has_prox(self, p: float) -> bool:
        if self.analytic_prox is None:
            return False
        return self.prox_orders is None or any(abs(p - q) < 1e-14 for q in self.prox_orders)


@dataclass(frozen=True)
class CompositeProblem:
    """phi = f + g together with optional calm-point metadata."""

    f: SmoothOracle
    g: NonsmoothOracle
    id: str = "custom"
    known_minimizer: Optional[np.ndarray] = None
    calm_constant: Optional[float] = None
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        if self.f.dim != self.g.dim:
            raise ValueError(f"f.dim={self.f.dim} differs from g.dim={self.g.dim}")
        if self.known_minimizer is not None:
            object.__setattr__(self, "known_minimizer", as_point(self.known_minimizer, self.f.dim))

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def nu(self) -> float:
        return self.f.nu

    def phi(self, x) -> float:
        return composite_value(self, x)

    def phis(self, X: np.ndarray) -> np.ndarray:
        """phi at stacked points ``X`` of shape ``(..., n)``."""
        fv = self.f.values(X)
        gv = self.g.values(X)
        return np.where(np.isinf(gv), np.inf, fv + gv)


def composite_value(problem: CompositeProblem, x) -> float:
    """phi(x) = f(x) + g(x), with +inf propagated from g."""
    x = as_point(x, problem.dim)
    fv = problem.f.value_at(x)
    gv = problem.g.value_at(x)
    if gv == math.inf:
        return math.inf
    return fv + gv


def _box_arrays(domain, dim):
    lo, hi = domain
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,)).copy()
    if np.any(hi <= lo):
        raise ValueError("domain box must have hi > lo in every coordinate")
    return lo, hi


def _pair_ratios(f: SmoothOracle, X: np.ndarray, Y: np.ndarray, nu: float) -> np.ndarray:
    dist = np.linalg.norm(X - Y, axis=-1)
    keep = dist > 0
    if not np.any(keep):
        return np.zeros(0)
    gx = f.gradients(X[keep])
    gy = f.gradients(Y[keep])
    return np.linalg.norm(gx - gy, axis=-1) / dist[keep] ** nu


def holder_ratio_profile(f: SmoothOracle, nu: float, domain, n_samples: int = 4000,
                         seed: int = 0, levels: int = 6):
    """Max gradient-difference ratios at pair separations diam * 10**-k.

    Pairs are centred on random points and on a lattice through the box
    centre and corners, so isolated singularities at those points are seen
    at every scale.  Returns (global_max, per_level_max).
    """
    lo, hi = _box_arrays(domain, f.dim)
    rng = np.random.default_rng(seed)
    n = f.dim
    X = rng.uniform(lo, hi, size=(n_samples, n))
    Y = rng.uniform(lo, hi, size=(n_samples, n))
    overall = _pair_ratios(f, X, Y, nu)
    best = float(overall.max()) if overall.size else 0.0

    per_axis = 11 if n == 1 else max(3, int(round(400 ** (1.0 / n))))
    per_axis |= 1  # odd, so the box centre is a lattice node
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    n_rand = max(n_samples // 4, 1)
    diam = float(np.linalg.norm(hi - lo))
    profile = []
    for k in range(1, levels + 1):
        delta = diam * 10.0 ** (-k)
        centres = np.vstack([lattice, rng.uniform(lo, hi, size=(n_rand, n))])
        u = rng.normal(size=centres.shape)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        A = np.clip(centres - 0.5 * delta * u, lo, hi)
        B = np.clip(centres + 0.5 * delta * u, lo, hi)
        r = _pair_ratios(f, A, B, nu)
        m = float(r.max()) if r.size else 0.0
        profile.append(m)
        best = max(best, m)
    return best, profile


def estimate_holder_constant(f: SmoothOracle, nu: float, domain, n_samples: int = 4000,
                             seed: int = 0) -> float:
    """Sampled Hölder constant of grad f for exponent ``nu`` on a box.

    Returns 1.1 times the largest ratio |grad f(x) - grad f(y)| / |x - y|^nu
    seen over random and multi-scale pairs.  Raises ExponentMismatchError
    when the ratios keep growing as the pair separation shrinks.
    """
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    best, profile = holder_ratio_profile(f, nu, domain, n_samples=n_samples, seed=seed)
    coarse, fine = profile[2], profile[-1]
    # bounded ratios stay flat across three decades; a too-large nu grows like 10**(3*excess)
    if fine > 3.0 * max(coarse, 1e-300) and fine > 1e-12 and profile[-1] >= profile[-2] >= profile[-3]:
        raise ExponentMismatchError(
            f"Hölder ratios diverge under refinement for nu={nu}: "
            f"{coarse:.3g} -> {fine:.3g} over three decades; the declared exponent is too large")
    return HOLDER_SAFETY * best


def check_hessian_consistency(f: SmoothOracle, points: Sequence, h: float = 1e-6) -> float:
    """Largest deviation between the Hessian and a symmetrised central-difference Jacobian."""
    worst = 0.0
    for x in points:
        x = as_point(x, f.dim)
        J = np.empty((f.dim, f.dim))
        for i in range(f.dim):
            e = np.zeros(f.dim)
            e[i] = h
            J[:, i] = (f.gradient_at(x + e) - f.gradient_at(x - e)) / (2 * h)
        J = 0.5 * (J + J.T)
        worst = max(worst, float(np.max(np.abs(J - f.hessian_at(x)))))
    return worst
