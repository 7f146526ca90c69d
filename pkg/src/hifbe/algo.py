"""The high-order forward-backward iteration x_{k+1} in T(x_k), with traces."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import CompositeProblem, as_point
from .envelope import candidate_gradient, hifbe
from .errors import EnvelopeUndefinedError
from .inner import EnvelopeConfig

STALL_WINDOW = 10
STOP_REASONS = ("residual-tol", "max-iters", "envelope-undefined", "stalled")


@dataclass
class TraceRecord:
    k: int
    x: np.ndarray
    phi: float
    env: float
    res_norm: float
    d: np.ndarray
    alternates: int = 0  # extra minimizers not taken
    single_valued: bool = True
    certified: bool = True


@dataclass
class HifbaTrace:
    records: List[TraceRecord] = field(default_factory=list)
    stop_reason: str = ""
    faults: List[str] = field(default_factory=list)
    gamma: float = float("nan")
    p: float = float("nan")

    def __len__(self):
        return len(self.records)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    @property
    def phis(self) -> np.ndarray:
        return np.array([r.phi for r in self.records])

    def to_csv(self, fmt=None) -> str:
        """CSV text: ``k,x,phi,env,res_norm,d`` in 1-D, coordinates expanded otherwise."""
        fmt = fmt or (lambda v: format(v, ".17g"))
        if not self.records:
            return ""
        n = self.records[0].x.shape[0]
        xs = ["x"] if n == 1 else [f"x_{i + 1}" for i in range(n)]
        ds = ["d"] if n == 1 else [f"d_{i + 1}" for i in range(n)]
        buf = io.StringIO()
        buf.write(",".join(["k", *xs, "phi", "env", "res_norm", *ds]) + "\n")
        for r in self.records:
            row = [str(r.k), *map(fmt, r.x), fmt(r.phi), fmt(r.env), fmt(r.res_norm), *map(fmt, r.d)]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def hifba_step(problem: CompositeProblem, x, cfg: EnvelopeConfig) -> np.ndarray:
    """One iteration: the representative of the splitting map at ``x``."""
    return hifbe(problem, x, cfg).representative.copy()


def descent_guaranteed(problem: CompositeProblem, cfg: EnvelopeConfig) -> bool:
    """True when p = 1 + nu and gamma < 1 / L_nu, so phi must decrease."""
    f = problem.f
    return abs(cfg.p - (1.0 + f.nu)) < 1e-12 and (f.l_nu == 0.0 or cfg.gamma < 1.0 / f.l_nu)


def hifba_run(problem: CompositeProblem, x0, cfg: EnvelopeConfig, max_iters: int = 500,
              res_tol: float = 1e-6) -> HifbaTrace:
    """Iterate until the residual drops to ``res_tol`` or ``max_iters`` steps.

    The final record is the iterate where the run stopped; its ``d`` is the
    step that would have come next.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if not res_tol > 0:
        raise ValueError("res_tol must be positive")
    x = as_point(x0, problem.dim).copy()
    trace = HifbaTrace(gamma=cfg.gamma, p=cfg.p)
    check_descent = descent_guaranteed(problem, cfg)
    stall = 0
    prev_phi = None
    for k in range(max_iters):
        try:
            ev = hifbe(problem, x, cfg)
        except EnvelopeUndefinedError as exc:
            trace.stop_reason = "envelope-undefined"
            trace.faults.append(f"k={k}: {exc}")
            return trace
        phi = problem.phi(x)
        y = ev.representative.copy()
        d = y - x
        res = float(np.linalg.norm(ev.residual))
        trace.records.append(TraceRecord(k=k, x=x.copy(), phi=phi, env=ev.value, res_norm=res, d=d,
                                         alternates=ev.hifbs.minimizers.shape[0] - 1,
                                         single_valued=ev.single_valued, certified=ev.certified))
        if check_descent:
            if ev.value > phi + cfg.tol_val:
                trace.faults.append(f"k={k}: envelope {ev.value!r} exceeds phi {phi!r}")
            if prev_phi is not None and phi > prev_phi + cfg.tol_val:
                trace.faults.append(f"k={k}: phi increased from {prev_phi!r} to {phi!r}")
        prev_phi = phi
        if res <= res_tol:
            trace.stop_reason = "residual-tol"
            return trace
        stall = stall + 1 if np.linalg.norm(d) < cfg.tol_y else 0
        if stall >= STALL_WINDOW:
            trace.stop_reason = "stalled"
            return trace
        x = y
    trace.stop_reason = "max-iters"
    return trace


def scaled_gradient_check(problem: CompositeProblem, record: TraceRecord,
                          cfg: EnvelopeConfig) -> Optional[float]:
    """|((1/gamma)|d|^(p-2) I - Hess f(x)) d + grad env(x)| at a trace record.

    Returns None (skipped) when the step is within tol_y of zero, where the
    power term is singular.
    """
    d = np.asarray(record.d, dtype=float)
    nd = float(np.linalg.norm(d))
    if nd <= cfg.tol_y:
        return None
    v, _ = candidate_gradient(problem, record.x, cfg)
    H = problem.f.hessian_at(record.x)
    lhs = (nd ** (cfg.p - 2.0) / cfg.gamma) * d - H @ d
    return float(np.linalg.norm(lhs + v))
