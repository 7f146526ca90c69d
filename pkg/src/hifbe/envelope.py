"""Envelope value, splitting map, residual and the envelope gradient formula."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .core import CompositeProblem, NonsmoothOracle, SmoothOracle, as_point
from .errors import EnvelopeUndefinedError, ProxUnboundedError
from .inner import (EnvelopeConfig, SubproblemSolution, model_value, power_step, solve_subproblem,
                    solve_subproblem_batch)


@dataclass
class EnvelopeEval:
    value: float
    hifbs: SubproblemSolution
    residual: np.ndarray
    single_valued: bool
    certified: bool

    @property
    def representative(self) -> np.ndarray:
        return self.hifbs.representative


@dataclass
class GradientReport:
    """Validity flags attached to a candidate gradient."""

    single_valued: bool
    certified: bool
    at_kink: bool
    minimizers: int

    @property
    def trustworthy(self) -> bool:
        return self.single_valued and self.certified and not self.at_kink


def _wrap(problem, x, sol):
    return EnvelopeEval(value=sol.value, hifbs=sol, residual=x - sol.representative,
                        single_valued=sol.single_valued, certified=sol.certified)


def _undefined(exc: ProxUnboundedError) -> EnvelopeUndefinedError:
    return EnvelopeUndefinedError(f"envelope is -inf or not finite: {exc}",
                                  witness=exc.witness, ray=exc.ray)


def hifbe(problem: CompositeProblem, x, cfg: EnvelopeConfig) -> EnvelopeEval:
    """Envelope value at ``x`` together with the minimizer set."""
    x = as_point(x, problem.dim)
    try:
        sol = solve_subproblem(problem, x, cfg)
    except ProxUnboundedError as exc:
        raise _undefined(exc) from exc
    return _wrap(problem, x, sol)


def hifbe_batch(problem: CompositeProblem, xs, cfg: EnvelopeConfig) -> List[EnvelopeEval]:
    """:func:`hifbe` at stacked points, shape ``(m,)`` in 1-D or ``(m, n)``."""
    xs = np.asarray(xs, dtype=float).reshape(-1, problem.dim)
    try:
        sols = solve_subproblem_batch(problem, xs, cfg)
    except ProxUnboundedError as exc:
        raise _undefined(exc) from exc
    return [_wrap(problem, x, s) for x, s in zip(xs, sols)]


def envelope_values(problem: CompositeProblem, xs, cfg: EnvelopeConfig) -> np.ndarray:
    return np.array([e.value for e in hifbe_batch(problem, xs, cfg)])


def hifbs(problem: CompositeProblem, x, cfg: EnvelopeConfig) -> SubproblemSolution:
    return hifbe(problem, x, cfg).hifbs


def residual(problem: CompositeProblem, x, cfg: EnvelopeConfig) -> np.ndarray:
    """x minus the representative of the splitting map."""
    return hifbe(problem, x, cfg).residual


def power_gradient(d: np.ndarray, p: float, gamma: float) -> np.ndarray:
    """(1/gamma) |d|^(p-2) d, with the 0/0 = 0 convention at d = 0."""
    nd = float(np.linalg.norm(d))
    if nd == 0.0:
        return np.zeros_like(d)
    return nd ** (p - 2.0) * d / gamma


def candidate_gradient(problem: CompositeProblem, x, cfg: EnvelopeConfig,
                       ev: EnvelopeEval = None) -> Tuple[np.ndarray, GradientReport]:
    """Hess f(x) (y - x) + (1/gamma) |x - y|^(p-2) (x - y) at the representative y.

    Only a candidate unless the report says the minimizer is unique, certified
    and away from the fixed-point singularity.
    """
    x = as_point(x, problem.dim)
    if ev is None:
        ev = hifbe(problem, x, cfg)
    y = ev.representative
    d = x - y
    if np.all(d == 0.0):
        # both terms vanish; avoids Hess f(x) * 0 when the Hessian blows up at x
        v = np.zeros(problem.dim)
        problem.f.hessian_at(x)  # still surfaces a missing Hessian
    else:
        H = problem.f.hessian_at(x)
        v = H @ (y - x) + power_gradient(d, cfg.p, cfg.gamma)
    report = GradientReport(single_valued=ev.single_valued, certified=ev.certified,
                            at_kink=bool(np.linalg.norm(d) <= cfg.tol_y),
                            minimizers=int(ev.hifbs.minimizers.shape[0]))
    return v, report


def default_fd_step(x) -> float:
    return 1e-5 * (1.0 + float(np.linalg.norm(x)))


def fd_gradient(problem: CompositeProblem, x, cfg: EnvelopeConfig, h: float = None) -> np.ndarray:
    """Central differences of the envelope value, one coordinate at a time."""
    x = as_point(x, problem.dim)
    if h is None:
        h = default_fd_step(x)
    if not h > 0:
        raise ValueError("step h must be positive")
    n = problem.dim
    pts = np.repeat(x[None, :], 2 * n, axis=0)
    for i in range(n):
        pts[2 * i, i] += h
        pts[2 * i + 1, i] -= h
    vals = envelope_values(problem, pts, cfg)
    return (vals[0::2] - vals[1::2]) / (2.0 * h)


def home(g: NonsmoothOracle, x, gamma: float, p: float, cfg: EnvelopeConfig = None) -> EnvelopeEval:
    """High-order Moreau envelope of g: the f == 0 case of :func:`hifbe`."""
    if cfg is None:
        cfg = EnvelopeConfig(p=p, gamma=gamma)
    else:
        cfg = cfg.with_(p=p, gamma=gamma)
    f0 = SmoothOracle(dim=g.dim, value=lambda z: np.zeros(np.shape(z)[:-1]),
                      gradient=lambda z: np.zeros(np.shape(z)),
                      hessian=lambda z: np.zeros((g.dim, g.dim)), nu=1.0, l_nu=0.0,
                      vectorized=True)
    return hifbe(CompositeProblem(f0, g, id="home"), x, cfg)


def forward_value_closed_form(f: SmoothOracle, x, gamma: float, p: float):
    """(value, minimizer) of the subproblem when g == 0."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    x = as_point(x, f.dim)
    a = f.gradient_at(x)
    na = float(np.linalg.norm(a))
    fx = f.value_at(x)
    if na == 0.0:
        return fx, x.copy()
    y = x + power_step(a, gamma, p)
    val = fx - (1.0 - 1.0 / p) * gamma ** (1.0 / (p - 1.0)) * na ** (p / (p - 1.0))
    return val, y


def phi_values(problem: CompositeProblem, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float).reshape(-1, problem.dim)
    return problem.phis(xs)


__all__ = ["EnvelopeEval", "GradientReport", "hifbe", "hifbe_batch", "envelope_values", "hifbs",
           "residual", "candidate_gradient", "fd_gradient", "default_fd_step", "home",
           "forward_value_closed_form", "power_gradient", "phi_values", "model_value"]
