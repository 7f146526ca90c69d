"""Solvers for the splitting subproblem

    min_y  f(x) + <grad f(x), y - x> + g(y) + |x - y|^p / (p gamma).

Three routes, tried in order:

* closed forms from :func:`prox_registry_lookup` (certified),
* a bracketed uniform grid plus golden-section refinement in 1-D (certified
  unless the minimizer sits on the bracket boundary),
* multistart local search in n-D (never certified).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np
from scipy import optimize

from .core import CompositeProblem, as_point
from .errors import BracketTooSmallError, ProxUnboundedError

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
MAX_BRACKET_DOUBLINGS = 6
MAX_CANDIDATES = 12
_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class EnvelopeConfig:
    """Order, step parameter and inner-solver settings."""

    p: float = 2.0
    gamma: float = 1.0
    bracket_radius: Optional[float] = None
    grid_points: int = 4001
    tol_y: float = 1e-8
    tol_val: float = 1e-10
    tol_tie: float = 1e-8
    multistarts: int = 16
    max_inner_iters: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"order p must exceed 1, got {self.p}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if min(self.tol_y, self.tol_val, self.tol_tie) <= 0:
            raise ValueError("tolerances must be positive")
        if self.grid_points < 101 or self.grid_points % 2 == 0:
            raise ValueError("grid_points must be odd and at least 101")
        if self.bracket_radius is not None and not self.bracket_radius > 0:
            raise ValueError("bracket_radius must be positive")

    def with_(self, **changes) -> "EnvelopeConfig":
        return replace(self, **changes)


@dataclass
class SubproblemSolution:
    minimizers: np.ndarray  # shape (k, n)
    representative: np.ndarray
    value: float
    certified: bool
    n_evals: int = 0
    method: str = ""
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def single_valued(self) -> bool:
        return self.minimizers.shape[0] == 1


def soft_threshold(u, t):
    """sgn(u) * max(|u| - t, 0)."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(u) * np.maximum(np.abs(u) - t, 0.0)


def power_step(a: np.ndarray, gamma: float, p: float) -> np.ndarray:
    """Minimizer d of <a, d> + |d|^p / (p gamma), i.e. -gamma^(1/(p-1)) |a|^((2-p)/(p-1)) a."""
    a = np.asarray(a, dtype=float)
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    scale = np.zeros_like(na)
    nz = na > 0
    scale[nz] = gamma ** (1.0 / (p - 1.0)) * na[nz] ** ((2.0 - p) / (p - 1.0))
    return -scale * a


def _pow(a, p):
    """a ** p for a >= 0, avoiding the general power routine for the common orders."""
    if p == 2.0:
        return a * a
    if p == 1.5:
        return a * np.sqrt(a)
    return a ** p


def _model_rows(problem, x, fx, ax, Y, cfg):
    """Model values at Y (shape (m, k, n)) for anchors x (m, n)."""
    D = Y - x[:, None, :]
    G = problem.g.values(Y)
    if D.shape[-1] == 1:
        d = D[..., 0]
        lin = ax[:, 0:1] * d
        reg = _pow(np.abs(d), cfg.p)
    else:
        lin = np.einsum("mn,mkn->mk", ax, D)
        reg = _pow(np.linalg.norm(D, axis=-1), cfg.p)
    out = G + lin
    out += fx[:, None]
    out += reg * (1.0 / (cfg.p * cfg.gamma))
    inf = np.isinf(G)
    return np.where(inf, np.inf, out) if inf.any() else out


def model_value(problem: CompositeProblem, x, y, cfg: EnvelopeConfig) -> float:
    """l(x, y) + |x - y|^p / (p gamma), +inf exactly when g(y) = +inf."""
    x = as_point(x, problem.dim)
    y = as_point(y, problem.dim)
    gy = problem.g.value_at(y)
    if gy == math.inf:
        return math.inf
    fx = problem.f.value_at(x)
    ax = problem.f.gradient_at(x)
    d = y - x
    return fx + float(ax @ d) + gy + float(np.linalg.norm(d)) ** cfg.p / (cfg.p * cfg.gamma)


def prox_registry_lookup(problem: CompositeProblem, p: float) -> Optional[Callable]:
    """Closed-form subproblem solver ``solver(x, gamma) -> (k, n) minimizers``, or None.

    Covers g == 0 (any p), g with an analytic prox at p == 2, and 1-D box
    indicators (any p).  For p != 2 a prox of g at the forward point is not
    the splitting map, so general g gets no entry.
    """
    g, f = problem.g, problem.f

    if g.zero:
        def solve_free(x, gamma):
            x = as_point(x, problem.dim)
            return (x + power_step(f.gradient_at(x), gamma, p))[None, :]
        return solve_free

    if g.box is not None and problem.dim == 1:
        lo, hi = g.box

        def solve_box(x, gamma):
            x = as_point(x, 1)
            y = x + power_step(f.gradient_at(x), gamma, p)
            return np.clip(y, lo, hi)[None, :]
        return solve_box

    if abs(p - 2.0) < 1e-14 and g.has_prox(2.0):
        def solve_fb(x, gamma):
            x = as_point(x, problem.dim)
            u = x - gamma * f.gradient_at(x)
            ys = np.asarray(g.analytic_prox(u, gamma, 2.0), dtype=float)
            return ys.reshape(-1, problem.dim)
        return solve_fb

    return None


def _finalize(problem, ys, vals, cfg, certified, n_evals, method):
    """Keep every point within tol_tie of the best, dedupe, pick the representative."""
    ys = np.asarray(ys, dtype=float).reshape(-1, problem.dim)
    vals = np.asarray(vals, dtype=float)
    best = float(np.min(vals))
    keep = vals <= best + cfg.tol_tie
    ys, vals = ys[keep], vals[keep]
    order = np.argsort(vals, kind="stable")
    chosen, chosen_vals = [], []
    for i in order:
        if all(np.linalg.norm(ys[i] - c) > 10 * cfg.tol_y for c in chosen):
            chosen.append(ys[i])
            chosen_vals.append(vals[i])
    chosen = np.array(chosen)
    chosen_vals = np.array(chosen_vals)
    norms = np.linalg.norm(chosen, axis=1)
    # smallest norm first, then lexicographic on coordinates
    keys = [chosen[:, j] for j in range(problem.dim - 1, -1, -1)] + [norms]
    order = np.lexsort(keys)
    chosen, chosen_vals = chosen[order], chosen_vals[order]
    return SubproblemSolution(minimizers=chosen, representative=chosen[0].copy(), value=best,
                              certified=certified, n_evals=n_evals, method=method,
                              values=chosen_vals)


def _default_radius(problem, x, cfg):
    if cfg.bracket_radius is not None:
        return np.full(x.shape[0], float(cfg.bracket_radius))
    # twice the g == 0 step length, so long forward steps start inside the bracket
    a = np.abs(problem.f.gradients(x)[:, 0])
    step = (cfg.gamma * a) ** (1.0 / (cfg.p - 1.0))
    return 10.0 * (1.0 + np.abs(x[:, 0])) + 2.0 * step


def _golden_batch(problem, xs, fx, ax, lo, hi, cfg):
    """Vectorised golden-section search on brackets [lo, hi], one per row.

    Returns the best point seen and its model value for each row.
    """
    m = lo.shape[0]
    # per-row iteration budgets keep each row independent of its batch neighbours
    width = hi - lo
    scale = 1.0 + np.maximum(np.abs(lo), np.abs(hi))
    target = np.maximum(cfg.tol_y * 1e-3, 8 * np.finfo(float).eps * scale)
    with np.errstate(divide="ignore"):
        need = np.ceil(np.log(target / np.maximum(width, 1e-300)) / math.log(INVPHI))
    rows_iter = np.where(width <= target, 0, need).astype(int)
    n_iter = int(rows_iter.max()) if m else 0

    def evaluate(y):
        return _model_rows(problem, xs, fx, ax, y[:, None, None], cfg)[:, 0]

    a, b = lo.copy(), hi.copy()
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = evaluate(c), evaluate(d)
    best_y = np.where(fc <= fd, c, d)
    best_v = np.minimum(fc, fd)
    n_evals = 2 * m
    for it in range(n_iter):
        active = it < rows_iter
        left = fc <= fd
        b_new = np.where(left, d, b)
        a_new = np.where(left, a, c)
        d_new = np.where(left, c, a_new + INVPHI * (b_new - a_new))
        c_new = np.where(left, b_new - INVPHI * (b_new - a_new), d)
        fresh = np.where(left, c_new, d_new)
        fv = evaluate(fresh)
        n_evals += int(active.sum())
        fc_new = np.where(left, fv, fd)
        fd_new = np.where(left, fc, fv)
        a = np.where(active, a_new, a)
        b = np.where(active, b_new, b)
        c = np.where(active, c_new, c)
        d = np.where(active, d_new, d)
        fc = np.where(active, fc_new, fc)
        fd = np.where(active, fd_new, fd)
        better = active & (fv < best_v)
        best_y = np.where(better, fresh, best_y)
        best_v = np.where(better, fv, best_v)
    mid = 0.5 * (a + b)
    fm = evaluate(mid)
    n_evals += m
    better = fm < best_v
    best_y = np.where(better, mid, best_y)
    best_v = np.where(better, fm, best_v)
    return best_y, best_v, n_evals


def _grid_chunk(problem, xs, radii, cfg):
    """Grid + refinement for a chunk of 1-D anchors.

    Returns per-anchor (ys, vals, boundary_hit, n_evals).
    """
    m = xs.shape[0]
    N = cfg.grid_points
    offsets = np.linspace(-1.0, 1.0, N)
    offsets[N // 2] = 0.0  # the anchor itself is a grid node
    x1 = xs[:, 0]
    Y = x1[:, None] + radii[:, None] * offsets[None, :]
    fx = problem.f.values(xs)
    ax = problem.f.gradients(xs)
    M = _model_rows(problem, xs, fx, ax, Y[..., None], cfg)
    n_evals = m * N

    finite = np.isfinite(M)
    Mf = M if finite.all() else np.where(finite, M, np.inf)
    gmin = Mf.min(axis=1)
    imin = Mf.argmin(axis=1)
    floor = -1.0 / cfg.tol_val
    low = gmin < floor
    if np.any(low):
        r = int(np.nonzero(low)[0][0])
        w = Y[r, imin[r]]
        raise ProxUnboundedError(
            f"subproblem value {gmin[r]:.3g} below {floor:.3g} at anchor x={x1[r]:.6g}; "
            "g does not look prox-bounded for this (p, gamma)",
            witness=np.array([w]), ray=np.array([np.sign(w - x1[r]) or 1.0]))

    # local minima of the grid and, at those nodes only, a slope allowance
    is_min = finite.copy()
    is_min[:, 1:] &= Mf[:, 1:] <= Mf[:, :-1]
    is_min[:, :-1] &= Mf[:, :-1] <= Mf[:, 1:]
    rows, cols = np.nonzero(is_min)
    here = Mf[rows, cols]
    left = np.where(cols > 0, Mf[rows, np.maximum(cols - 1, 0)], np.inf)
    right = np.where(cols < N - 1, Mf[rows, np.minimum(cols + 1, N - 1)], np.inf)
    dl = np.where(np.isfinite(left), np.abs(here - np.where(np.isfinite(left), left, 0.0)), 0.0)
    dr = np.where(np.isfinite(right), np.abs(here - np.where(np.isfinite(right), right, 0.0)), 0.0)
    lower_est = here - 2.0 * np.maximum(dl, dr)
    cand = lower_est <= gmin[rows] + cfg.tol_tie
    rows, cols, lower_est = rows[cand], cols[cand], lower_est[cand]

    # cap the number of basins refined per anchor, lowest lower-estimates first
    if rows.size:
        est = lower_est
        order = np.lexsort((est, rows))
        rows, cols = rows[order], cols[order]
        rank = np.arange(rows.size) - np.searchsorted(rows, rows, side="left")
        keep = rank < MAX_CANDIDATES
        rows, cols = rows[keep], cols[keep]
    lo_idx = np.maximum(cols - 1, 0)
    hi_idx = np.minimum(cols + 1, N - 1)
    lo = Y[rows, lo_idx]
    hi = Y[rows, hi_idx]
    ry, rv, ev = _golden_batch(problem, xs[rows], fx[rows], ax[rows], lo, hi, cfg)
    n_evals += ev
    # the grid node itself competes with its refinement
    gv = Mf[rows, cols]
    use_grid = gv < rv
    ry = np.where(use_grid, Y[rows, cols], ry)
    rv = np.where(use_grid, gv, rv)

    h = 2.0 * radii / (N - 1)
    out = []
    for i in range(m):
        sel = rows == i
        ys_i, vs_i = ry[sel], rv[sel]
        if ys_i.size == 0:
            # everything infinite on the grid: the bracket misses dom g
            out.append((ys_i, vs_i, True, n_evals // max(m, 1)))
            continue
        j = int(np.argmin(vs_i))
        ystar = ys_i[j]
        hit = (ystar - Y[i, 0] <= h[i]) or (Y[i, -1] - ystar <= h[i])
        out.append((ys_i, vs_i, bool(hit), n_evals // max(m, 1)))
    return out


def _solve_grid_1d(problem, xs, cfg):
    m = xs.shape[0]
    radii = _default_radius(problem, xs, cfg)
    results: List[Optional[SubproblemSolution]] = [None] * m
    pending = np.arange(m)
    for attempt in range(MAX_BRACKET_DOUBLINGS + 1):
        chunk = max(1, _CHUNK_ELEMENTS // cfg.grid_points)
        still = []
        for start in range(0, pending.size, chunk):
            idx = pending[start:start + chunk]
            outs = _grid_chunk(problem, xs[idx], radii[idx], cfg)
            for k, (ys_i, vs_i, hit, ev) in zip(idx, outs):
                if hit:
                    still.append(k)
                    continue
                results[k] = _finalize(problem, ys_i, vs_i, cfg, True, ev, "grid")
        pending = np.array(still, dtype=int)
        if pending.size == 0:
            return results
        radii[pending] *= 2.0
    k = int(pending[0])
    raise BracketTooSmallError(
        f"minimizer stays on the bracket boundary for anchor x={xs[k, 0]:.6g} "
        f"after {MAX_BRACKET_DOUBLINGS} doublings (radius {radii[k]:.3g}); pass a larger bracket_radius",
        anchor=xs[k].copy(), radius=float(radii[k]))


def _solve_multistart(problem, x, cfg):
    """Best-effort local search from several starts; never certified."""
    n = problem.dim
    f, g = problem.f, problem.g
    fx = f.value_at(x)
    ax = f.gradient_at(x)
    p, gamma = cfg.p, cfg.gamma
    radius = cfg.bracket_radius if cfg.bracket_radius is not None else 10.0 * (1.0 + np.linalg.norm(x))
    rng = np.random.default_rng(cfg.seed)
    starts = [x.copy(), x + power_step(ax, gamma, p)]
    while len(starts) < max(cfg.multistarts, 2):
        u = rng.normal(size=n)
        u *= radius * rng.uniform() ** (1.0 / n) / np.linalg.norm(u)
        starts.append(x + u)
    evals = [0]

    def model(y):
        evals[0] += 1
        gy = g.value_at(y)
        if gy == math.inf:
            return math.inf
        d = y - x
        return fx + float(ax @ d) + gy + float(np.linalg.norm(d)) ** p / (p * gamma)

    def smooth_grad(y):
        d = y - x
        nd = np.linalg.norm(d)
        return ax + (nd ** (p - 2) * d if nd > 0 else 0.0 * d) / gamma

    use_prox = g.has_prox(2.0)
    ys, vals = [], []
    for y0 in starts:
        if use_prox:
            y, t = y0.copy(), 1.0
            fy = model(y)
            for _ in range(cfg.max_inner_iters):
                s_y = fy - g.value_at(y)
                gr = smooth_grad(y)
                while True:
                    cand = np.asarray(g.analytic_prox(y - t * gr, t, 2.0), dtype=float).reshape(-1, n)[0]
                    fc = model(cand)
                    s_c = fc - g.value_at(cand)
                    step = cand - y
                    if s_c <= s_y + gr @ step + (step @ step) / (2 * t) + 1e-15 or t < 1e-14:
                        break
                    t *= 0.5
                done = np.linalg.norm(cand - y) <= cfg.tol_y
                y, fy = cand, fc
                t *= 2.0
                if done:
                    break
        else:
            res = optimize.minimize(model, y0, method="Powell",
                                    options={"xtol": cfg.tol_y, "ftol": cfg.tol_val,
                                             "maxiter": cfg.max_inner_iters * n})
            y, fy = np.asarray(res.x, dtype=float), float(res.fun)
        if fy < -1.0 / cfg.tol_val:
            raise ProxUnboundedError(
                f"subproblem value {fy:.3g} below {-1.0 / cfg.tol_val:.3g}; g does not look prox-bounded",
                witness=y, ray=(y - x) / max(np.linalg.norm(y - x), 1e-300))
        ys.append(y)
        vals.append(fy)
    ys.append(x.copy())
    vals.append(model(x))
    return _finalize(problem, np.array(ys), np.array(vals), cfg, False, evals[0], "multistart")


def _solve_registry(problem, x, cfg, solver):
    ys = solver(x, cfg.gamma)
    vals = np.array([model_value(problem, x, y, cfg) for y in ys])
    return _finalize(problem, ys, vals, cfg, True, len(ys), "analytic")


def solve_subproblem(problem: CompositeProblem, x, cfg: EnvelopeConfig) -> SubproblemSolution:
    """Global minimizers of the splitting subproblem at anchor ``x``."""
    x = as_point(x, problem.dim)
    solver = prox_registry_lookup(problem, cfg.p)
    if solver is not None:
        return _solve_registry(problem, x, cfg, solver)
    if problem.dim == 1:
        return _solve_grid_1d(problem, x[None, :], cfg)[0]
    return _solve_multistart(problem, x, cfg)


def solve_subproblem_batch(problem: CompositeProblem, xs, cfg: EnvelopeConfig) -> List[SubproblemSolution]:
    """:func:`solve_subproblem` at many anchors; 1-D grid work is vectorised."""
    xs = np.asarray(xs, dtype=float)
    if problem.dim == 1:
        xs = xs.reshape(-1, 1)
    else:
        xs = xs.reshape(-1, problem.dim)
    solver = prox_registry_lookup(problem, cfg.p)
    if solver is not None:
        return [_solve_registry(problem, x, cfg, solver) for x in xs]
    if problem.dim == 1:
        return _solve_grid_1d(problem, xs, cfg)
    return [_solve_multistart(problem, x, cfg) for x in xs]
