"""Builtin problem instances, addressed by stable string ids.

Hölder constants are sampled once with :func:`hifbe.core.estimate_holder_constant`
on [-3, 3]^n (seed 0, 4000 samples) and frozen here; the README
lists them.  ``regenerate_constants`` recomputes them for comparison.
"""

from __future__ import annotations

import math
from typing import Callable, Dict

import numpy as np

from .core import CompositeProblem, NonsmoothOracle, SmoothOracle, estimate_holder_constant
from .errors import CatalogMissError
from .inner import soft_threshold

CONSTANT_DOMAIN = (-3.0, 3.0)
CONSTANT_SEED = 0
CONSTANT_SAMPLES = 4000

# frozen output of regenerate_constants()
FROZEN_L_NU = {
    "zero": 0.0,
    "power-q": 1.5556349186104048,
    "oscillatory": 1.1667261889578036,
    "majorant-demo": 1.5556349186104048,
    "quad-l1": 1.1000000000081416,
    "quad-free": 2.427817451935044,
    "quad-free1d": 1.1,
}

QUAD_A = np.array([[2.0, 0.5], [0.5, 1.0]])
QUAD_B = np.array([1.0, -1.0])


def _first(x):
    return np.asarray(x, dtype=float)[..., 0]


# ---- smooth parts ---------------------------------------------------------

def _power_f(c: float, q: float, l_nu: float) -> SmoothOracle:
    """c |x|^q in 1-D (q in (1, 2))."""

    def value(x):
        return c * np.abs(_first(x)) ** q

    def gradient(x):
        t = np.asarray(x, dtype=float)
        return c * q * np.sign(t) * np.abs(t) ** (q - 1.0)

    def hessian(x):
        t = abs(float(np.asarray(x).reshape(-1)[0]))
        h = math.inf if t == 0.0 else c * q * (q - 1.0) * t ** (q - 2.0)
        return np.array([[h]])

    return SmoothOracle(dim=1, value=value, gradient=gradient, hessian=hessian,
                        nu=q - 1.0, l_nu=l_nu, vectorized=True)


def _quadratic_f(A: np.ndarray, b: np.ndarray, l_nu: float) -> SmoothOracle:
    """0.5 x^T A x - b^T x."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, A, x) - x @ b

    def gradient(x):
        return np.asarray(x, dtype=float) @ A.T - b

    def hessian(x):
        return A.copy()

    return SmoothOracle(dim=A.shape[0], value=value, gradient=gradient, hessian=hessian,
                        nu=1.0, l_nu=l_nu, vectorized=True)


def _zero_f(dim: int = 1) -> SmoothOracle:
    return SmoothOracle(dim=dim, value=lambda x: np.zeros(np.shape(x)[:-1]),
                        gradient=lambda x: np.zeros(np.shape(x)),
                        hessian=lambda x: np.zeros((dim, dim)),
                        nu=1.0, l_nu=0.0, vectorized=True)


# ---- nonsmooth parts ------------------------------------------------------

def _zero_g(dim: int = 1) -> NonsmoothOracle:
    return NonsmoothOracle(dim=dim, value=lambda y: np.zeros(np.shape(y)[:-1]),
                           analytic_prox=lambda u, gamma, p: np.atleast_2d(np.asarray(u, dtype=float)),
                           subdiff_1d=(lambda y: (0.0, 0.0)) if dim == 1 else None,
                           zero=True, vectorized=True)


def abs_g() -> NonsmoothOracle:
    """g(y) = |y| with the p = 2 prox and its subdifferential."""

    def value(y):
        return np.abs(_first(y))

    def prox(u, gamma, p):
        return np.atleast_2d(soft_threshold(np.asarray(u, dtype=float), gamma))

    def subdiff(y):
        y = float(y)
        if y == 0.0:
            return (-1.0, 1.0)
        s = math.copysign(1.0, y)
        return (s, s)

    return NonsmoothOracle(dim=1, value=value, analytic_prox=prox, prox_orders=(2.0,),
                           subdiff_1d=subdiff, vectorized=True)


def _osc_h_prime(y: float) -> float:
    return 0.4 * y * math.exp(-y * y) * (1.0 - y * y)


def _oscillatory_g() -> NonsmoothOracle:
    """|0.3 sin 5y| + 0.2 y^2 exp(-y^2); kinks at y = k pi / 5."""

    def value(y):
        t = _first(y)
        return np.abs(0.3 * np.sin(5.0 * t)) + 0.2 * t * t * np.exp(-t * t)

    def subdiff(y):
        y = float(y)
        hp = _osc_h_prime(y)
        k = round(5.0 * y / math.pi)
        if abs(5.0 * y - k * math.pi) <= 1e-12 * max(1.0, abs(5.0 * y)):
            return (hp - 1.5, hp + 1.5)
        s = math.sin(5.0 * y)
        slope = 1.5 * math.cos(5.0 * y) * math.copysign(1.0, s) + hp
        return (slope, slope)

    return NonsmoothOracle(dim=1, value=value, subdiff_1d=subdiff, vectorized=True)


def _majorant_g() -> NonsmoothOracle:
    """-0.5 cos 3y + 0.2 |y|."""

    def value(y):
        t = _first(y)
        return -0.5 * np.cos(3.0 * t) + 0.2 * np.abs(t)

    def subdiff(y):
        y = float(y)
        base = 1.5 * math.sin(3.0 * y)
        if y == 0.0:
            return (base - 0.2, base + 0.2)
        s = base + 0.2 * math.copysign(1.0, y)
        return (s, s)

    return NonsmoothOracle(dim=1, value=value, subdiff_1d=subdiff, vectorized=True)


def box_g(lo: float, hi: float) -> NonsmoothOracle:
    """Indicator of [lo, hi] in 1-D."""

    def value(y):
        t = _first(y)
        return np.where((t >= lo) & (t <= hi), 0.0, np.inf)

    def subdiff(y):
        y = float(y)
        if lo < y < hi:
            return (0.0, 0.0)
        if y == lo == hi:
            return (-math.inf, math.inf)
        if y == lo:
            return (-math.inf, 0.0)
        if y == hi:
            return (0.0, math.inf)
        return (math.nan, math.nan)

    return NonsmoothOracle(dim=1, value=value, subdiff_1d=subdiff, box=(lo, hi), vectorized=True)


# ---- builders -------------------------------------------------------------

def _smooth_part(pid: str, l_nu: float) -> SmoothOracle:
    if pid == "zero":
        return _zero_f()
    if pid in ("power-q", "majorant-demo"):
        return _power_f(2.0 / 3.0, 1.5, l_nu)
    if pid == "oscillatory":
        return _power_f(0.5, 1.5, l_nu)
    if pid == "quad-l1":
        return _shifted_quadratic(l_nu)
    if pid == "quad-free":
        return _quadratic_f(QUAD_A, QUAD_B, l_nu)
    if pid == "quad-free1d":
        return _quadratic_f(np.array([[1.0]]), np.array([0.0]), l_nu)
    raise CatalogMissError(pid)


def _shifted_quadratic(l_nu: float) -> SmoothOracle:
    """0.5 (x - 1)^2."""

    def value(x):
        return 0.5 * (_first(x) - 1.0) ** 2

    def gradient(x):
        return np.asarray(x, dtype=float) - 1.0

    return SmoothOracle(dim=1, value=value, gradient=gradient, hessian=lambda x: np.array([[1.0]]),
                        nu=1.0, l_nu=l_nu, vectorized=True)


def _build(pid: str, l_nu: float) -> CompositeProblem:
    f = _smooth_part(pid, l_nu)
    if pid == "zero":
        return CompositeProblem(f, _zero_g(), id=pid, known_minimizer=np.zeros(1),
                                notes="phi == 0")
    if pid == "power-q":
        return CompositeProblem(f, _zero_g(), id=pid, known_minimizer=np.zeros(1),
                                notes="f = (1/q)|x|^q, q = 3/2")
    if pid == "oscillatory":
        return CompositeProblem(f, _oscillatory_g(), id=pid, known_minimizer=np.zeros(1),
                                notes="f = 0.5|x|^1.5, g = |0.3 sin 5x| + 0.2 x^2 exp(-x^2)")
    if pid == "majorant-demo":
        return CompositeProblem(f, _majorant_g(), id=pid, known_minimizer=np.zeros(1),
                                notes="f = (2/3)|x|^1.5, g = -0.5 cos 3x + 0.2|x|")
    if pid == "quad-l1":
        return CompositeProblem(f, abs_g(), id=pid, known_minimizer=np.zeros(1),
                                notes="f = 0.5 (x - 1)^2, g = |x|")
    if pid == "quad-free":
        return CompositeProblem(f, _zero_g(2), id=pid,
                                known_minimizer=np.linalg.solve(QUAD_A, QUAD_B),
                                notes="f = 0.5 x^T A x - b^T x, g = 0")
    if pid == "quad-free1d":
        return CompositeProblem(f, _zero_g(), id=pid, known_minimizer=np.zeros(1),
                                notes="f = 0.5 x^2, g = 0")
    raise CatalogMissError(pid)


CATALOG_IDS = tuple(FROZEN_L_NU)


def problem_catalog_get(pid: str) -> CompositeProblem:
    """Fully wired builtin problem for ``pid``."""
    if pid not in FROZEN_L_NU:
        raise CatalogMissError(f"unknown problem id {pid!r}; valid ids: {', '.join(CATALOG_IDS)}")
    return _build(pid, FROZEN_L_NU[pid])


def regenerate_constants() -> Dict[str, float]:
    """Re-run the Hölder-constant estimation behind ``FROZEN_L_NU``."""
    out = {}
    for pid in CATALOG_IDS:
        f = _smooth_part(pid, 0.0)
        out[pid] = estimate_holder_constant(f, f.nu, CONSTANT_DOMAIN, n_samples=CONSTANT_SAMPLES,
                                            seed=CONSTANT_SEED)
    return out
