"""Design optimizers.

Three layers share one engine:

* a multiplicative reweighting step that is exact on a fixed support,
* a vertex-direction pass (add the point of largest averaged variance with a
  decaying step) used to locate support cheaply and as a warm start,
* Nelder-Mead polishing in a smooth reparameterization: coordinates move
  through x = lo + span * sin^2(phi) and weights through a stick-breaking
  chain of squared sines, so the search space is unconstrained.

Support size is scheduled upward from the smallest plausible value and each
candidate must pass the equivalence check before it is accepted as optimal.
Exact (integer replication) designs come from either a candidate-set exchange
pass or simulated annealing with incremental determinant updates.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .designs import (
    ContinuousDesign,
    EquivalenceReport,
    ExactDesign,
    GridSpec,
    build_eval_grid,
    d_objective,
    equivalence_scan,
    default_tol,
    from_runs,
    information_matrix,
    prune_design,
    resolve_window,
    support_bound,
)
from .errors import NumericalError, ValidationError
from .families import ModelSpec, eval_basis_many, weight_from_eta
from .priors import (
    STREAM_ANNEAL,
    STREAM_EXCHANGE,
    STREAM_LOWDISC,
    STREAM_STARTS,
    resolve_sample,
    rng_for,
)


def _log(enabled: bool, msg: str) -> None:
    if enabled:
        print(msg, file=sys.stderr)


# ------------------------------------------------------------ transformations

def stick_decode(psis: np.ndarray) -> np.ndarray:
    """Map t-1 angles to t positive weights summing to one."""
    t = psis.shape[0] + 1
    w = np.empty(t)
    rem = 1.0
    for i, a in enumerate(psis):
        s = math.sin(a) ** 2
        w[i] = rem * s
        rem *= 1.0 - s
    w[t - 1] = rem
    return w


def stick_encode(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    t = w.shape[0]
    psis = np.empty(max(t - 1, 0))
    rem = 1.0
    for i in range(t - 1):
        frac = w[i] / rem if rem > 1e-300 else 0.0
        frac = min(max(frac, 0.0), 1.0)
        psis[i] = math.asin(math.sqrt(frac))
        rem *= 1.0 - frac
    return psis


def box_decode(phis: np.ndarray, lo: np.ndarray, span: np.ndarray) -> np.ndarray:
    return lo + span * np.sin(phis) ** 2


def box_encode(x: np.ndarray, lo: np.ndarray, span: np.ndarray) -> np.ndarray:
    frac = np.clip((x - lo) / span, 0.0, 1.0)
    return np.arcsin(np.sqrt(frac))


# ------------------------------------------------------------------ atom pool

class _PointAtoms:
    """Evaluates basis rows and weights for a stack of parameter draws."""

    def __init__(self, model: ModelSpec, thetas: np.ndarray, tw: np.ndarray):
        self.model = model
        self.thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        tw = np.asarray(tw, dtype=float).reshape(-1)
        self.tw = tw / tw.sum()
        self.p = model.p

    def eval(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        F = eval_basis_many(self.model.basis, X)
        eta = F @ self.thetas.T
        U = weight_from_eta(self.model.family, self.model.link, eta).T
        return F, np.atleast_2d(U)

    def info_stack(self, F: np.ndarray, U: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.einsum("sn,ni,nj->sij", U * w, F, F)

    def mean_objective(self, X: np.ndarray, w: np.ndarray) -> float:
        F, U = self.eval(X)
        if not np.all(np.isfinite(U)):
            return math.inf
        Ms = self.info_stack(F, U, w)
        sign, ld = np.linalg.slogdet(Ms)
        if not (np.all(sign > 0) and np.all(np.isfinite(ld))):
            return math.inf
        return float(-(self.tw @ ld))

    def canonical_objective(self, design) -> float:
        """Average -log det through the strict elimination path."""
        acc = 0.0
        for th, wt in zip(self.thetas, self.tw):
            val = d_objective(information_matrix(design, self.model, th))
            if math.isinf(val):
                return math.inf
            acc += wt * val
        return acc


def _search_box(model: ModelSpec, thetas, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    window = resolve_window(model, np.atleast_2d(thetas), grid)
    lo, hi = [], []
    for b_lo, b_hi in model.region.bounds:
        if math.isinf(b_lo):
            lo.append(window[0])
            hi.append(window[1])
        else:
            lo.append(b_lo)
            hi.append(b_hi)
    lo = np.array(lo)
    return lo, np.array(hi) - lo


# --------------------------------------------------- multiplicative reweighting

def refine_weights(
    atoms: _PointAtoms, X: np.ndarray, w0: np.ndarray, iters: int = 600, tol: float = 1e-12
) -> tuple[np.ndarray, float]:
    """Fixed-support weight optimization by the w <- w * (dbar/p) rule.

    Monotone for the averaged log determinant; a halving guard keeps it safe
    near machine precision.
    """
    F, U = atoms.eval(X)
    if not np.all(np.isfinite(U)):
        return w0, math.inf
    w = np.asarray(w0, dtype=float).copy()
    w = np.maximum(w, 1e-300)
    w /= w.sum()
    p = atoms.p

    def objective(wv):
        Ms = atoms.info_stack(F, U, wv)
        sign, ld = np.linalg.slogdet(Ms)
        if not (np.all(sign > 0) and np.all(np.isfinite(ld))):
            return math.inf, None
        return float(-(atoms.tw @ ld)), Ms

    obj, Ms = objective(w)
    if math.isinf(obj):
        return w0, math.inf
    for _ in range(iters):
        Minv = np.linalg.inv(Ms)
        q = np.einsum("ni,sij,nj->sn", F, Minv, F)
        dbar = atoms.tw @ (U * q)
        if float(np.max(dbar)) / p - 1.0 < tol:
            break
        step = dbar / p
        new_w = w * step
        new_w /= new_w.sum()
        new_obj, new_Ms = objective(new_w)
        if not new_obj < obj:
            # try a damped step before giving up
            new_w = w * np.sqrt(step)
            new_w /= new_w.sum()
            new_obj, new_Ms = objective(new_w)
            if not new_obj < obj:
                break
        w, obj, Ms = new_w, new_obj, new_Ms
    return w, obj


# ------------------------------------------------------------- vertex direction

@dataclass(frozen=True, eq=False)
class WynnFedorovResult:
    design: ContinuousDesign
    objective: float
    n_iters: int
    min_psi: float
    converged: bool


def _wf_core(
    atoms: _PointAtoms,
    grid_pts: np.ndarray,
    max_iters: int,
    tol: float,
    log_progress: bool = False,
) -> tuple[np.ndarray, np.ndarray, float, int, float, bool]:
    model = atoms.model
    p = model.p
    Fg, Ug = atoms.eval(grid_pts)
    finite = np.all(np.isfinite(Ug), axis=0)
    grid_pts, Fg, Ug = grid_pts[finite], Fg[finite], Ug[:, finite]
    if grid_pts.shape[0] < p:
        raise NumericalError("candidate grid too small after dropping inadmissible points")

    from scipy.stats import qmc

    sob = qmc.Sobol(d=model.k, scramble=True, seed=rng_for(0, STREAM_LOWDISC))
    lo = grid_pts.min(axis=0)
    hi = grid_pts.max(axis=0)
    n_draw = 1 << max(int(math.ceil(math.log2(p + 1))), 0)
    pts = None
    for _ in range(32):
        raw = lo + (hi - lo) * sob.random(n_draw)[: p + 1]
        F0, U0 = atoms.eval(raw)
        if not np.all(np.isfinite(U0)):
            continue
        w0 = np.full(p + 1, 1.0 / (p + 1))
        Ms = atoms.info_stack(F0, U0, w0)
        sign, ld = np.linalg.slogdet(Ms)
        if np.all(sign > 0) and np.all(np.isfinite(ld)):
            pts = raw
            break
    if pts is None:
        raise NumericalError("could not find a nonsingular starting design after 32 re-draws")

    sup_pts = [row.copy() for row in pts]
    sup_w = list(w0)
    by_grid: dict[int, int] = {}

    best_obj = float(-(atoms.tw @ ld))
    best_pts = np.array(sup_pts)
    best_w = np.array(sup_w)
    min_psi = -math.inf
    converged = False
    it = 0
    for it in range(max_iters):
        Minv = np.linalg.inv(Ms)
        d = np.zeros(grid_pts.shape[0])
        for s in range(atoms.thetas.shape[0]):
            G = Fg @ Minv[s]
            d += atoms.tw[s] * Ug[s] * np.einsum("ni,ni->n", G, Fg)
        j = int(np.argmax(d))
        min_psi = p - float(d[j])
        if min_psi >= -tol:
            converged = True
            break
        alpha = 1.0 / (it + 1 + p)
        for i in range(len(sup_w)):
            sup_w[i] *= 1.0 - alpha
        if j in by_grid:
            sup_w[by_grid[j]] += alpha
        else:
            by_grid[j] = len(sup_pts)
            sup_pts.append(grid_pts[j].copy())
            sup_w.append(alpha)
        fj = Fg[j]
        Ms = (1.0 - alpha) * Ms + alpha * Ug[:, j][:, None, None] * np.outer(fj, fj)[None, :, :]
        sign, ld = np.linalg.slogdet(Ms)
        if not (np.all(sign > 0) and np.all(np.isfinite(ld))):
            break
        obj = float(-(atoms.tw @ ld))
        if obj < best_obj - 1e-15:
            best_obj = obj
            best_pts = np.array(sup_pts)
            best_w = np.array(sup_w)
            _log(log_progress, f"[vertex-direction] iter={it} objective={obj:.9f}")
    return best_pts, best_w, best_obj, it, min_psi, converged


def wynn_fedorov(
    model: ModelSpec,
    theta,
    region=None,
    grid: GridSpec | None = None,
    max_iters: int = 5000,
    tol: float | None = None,
    log_progress: bool = False,
) -> WynnFedorovResult:
    """Vertex-direction search with step 1/(s+1+p) over a candidate grid.

    Returns the incumbent best design (pruned), not necessarily the final
    iterate.  Converges slowly but never diverges; intended for warm starts
    and as a reference method.
    """
    if region is not None:
        model = replace(model, region=region)
    grid = grid or GridSpec()
    if tol is None:
        tol = default_tol(model.p)
    thetas = np.atleast_2d(np.asarray(theta, dtype=float))
    tw = np.full(thetas.shape[0], 1.0 / thetas.shape[0])
    atoms = _PointAtoms(model, thetas, tw)
    grid_pts = build_eval_grid(model, thetas, grid)
    pts, w, _, it, min_psi, conv = _wf_core(atoms, grid_pts, max_iters, tol, log_progress)
    w = np.asarray(w, dtype=float)
    design = prune_design(
        ContinuousDesign(pts, w / w.sum()),
        region=model.region,
        weight_floor=1e-5,
        max_support=support_bound(model.p),
    )
    return WynnFedorovResult(
        design=design,
        objective=atoms.canonical_objective(design),
        n_iters=it,
        min_psi=float(min_psi),
        converged=bool(conv),
    )


# --------------------------------------------------------- continuous optimizer

@dataclass(frozen=True)
class ContinuousOptOptions:
    """Knobs for the support-size schedule and the polishing stack."""

    t_min: int | None = None
    t_max: int | None = None
    multistarts: int = 16
    max_evals: int = 2000
    restarts: int = 2
    seed: int = 0
    sample: object = None  # SampleSpec or ParamSample for stochastic priors
    grid: GridSpec | None = None
    tol: float | None = None
    weight_floor: float = 1e-4
    merge_radius: float = 1e-3
    wf_warm_start: bool = True
    wf_iters: int = 600
    log_progress: bool = False

    def __post_init__(self):
        if self.multistarts < 1 or self.max_evals < 10 or self.restarts < 0:
            raise ValidationError("bad optimizer options")


@dataclass(frozen=True, eq=False)
class OptimizeResult:
    design: ContinuousDesign
    objective: float
    report: EquivalenceReport
    is_optimal: bool
    t_final: int


def _nm(fun, z0: np.ndarray, max_evals: int) -> tuple[np.ndarray, float]:
    res = minimize(
        fun,
        z0,
        method="Nelder-Mead",
        options={
            "maxfev": max_evals,
            "xatol": 1e-10,
            "fatol": 1e-13,
            "adaptive": True,
        },
    )
    return np.asarray(res.x, dtype=float), float(res.fun)


def _polish(atoms, lo, span, t, z0, opts) -> tuple[float, np.ndarray, np.ndarray]:
    k = atoms.model.k

    def fun(z):
        X = box_decode(z[: t * k].reshape(t, k), lo, span)
        w = stick_decode(z[t * k :])
        return atoms.mean_objective(X, w)

    z = np.asarray(z0, dtype=float)
    obj = fun(z)
    for _ in range(1 + opts.restarts):
        z_new, obj_new = _nm(fun, z, opts.max_evals)
        if obj_new < obj:
            z, obj = z_new, obj_new
        X = box_decode(z[: t * k].reshape(t, k), lo, span)
        w = stick_decode(z[t * k :])
        w_ref, obj_ref = refine_weights(atoms, X, w)
        if obj_ref < obj:
            z = np.concatenate([z[: t * k], stick_encode(w_ref)])
            improvement = obj - obj_ref
            obj = obj_ref
        else:
            improvement = 0.0
        if improvement < 1e-11:
            break
    X = box_decode(z[: t * k].reshape(t, k), lo, span)
    w = stick_decode(z[t * k :])
    return obj, X, w


def _initial_state(
    atoms, lo, span, t, s_idx, opts, warm: tuple[np.ndarray, np.ndarray] | None
) -> tuple[np.ndarray, np.ndarray] | None:
    k = atoms.model.k
    if s_idx == 0 and warm is not None:
        wp, ww = warm
        order = np.argsort(ww)[::-1]
        X0 = wp[order][:t]
        w0 = ww[order][:t]
        if X0.shape[0] < t:
            rng = rng_for(opts.seed, STREAM_STARTS, t, s_idx)
            extra = t - X0.shape[0]
            X0 = np.vstack([X0, lo + span * rng.random((extra, k))])
            w0 = np.concatenate([w0, np.full(extra, w0.min() if w0.size else 1.0)])
        return X0, w0 / w0.sum()
    if s_idx == 1:
        from scipy.stats import qmc

        sob = qmc.Sobol(d=k, scramble=True, seed=rng_for(opts.seed, STREAM_LOWDISC, t))
        n_draw = 1 << max(int(math.ceil(math.log2(t))), 0)
        X0 = lo + span * sob.random(n_draw)[:t]
        return X0, np.full(t, 1.0 / t)
    rng = rng_for(opts.seed, STREAM_STARTS, t, s_idx)
    for _ in range(32):
        X0 = lo + span * rng.random((t, k))
        w0 = 0.1 + rng.random(t)
        w0 /= w0.sum()
        if math.isfinite(atoms.mean_objective(X0, w0)):
            return X0, w0
    return None


def optimize_continuous(
    model: ModelSpec, prior, options: ContinuousOptOptions | None = None
) -> OptimizeResult:
    """Find a D-optimal continuous design, certified by the equivalence check.

    The support-size schedule runs from t_min (default p) upward; at each size
    the multistart polish stack runs and the best candidate is scanned.  The
    first candidate passing the scan is returned with is_optimal True.  If no
    size up to t_max passes, the best design found is returned with
    is_optimal False (not an error).
    """
    opts = options or ContinuousOptOptions()
    ps = resolve_sample(prior, opts.sample)
    thetas, tw = ps.draws, ps.weights
    if thetas.shape[1] != model.p:
        raise ValidationError(
            f"prior dimension {thetas.shape[1]} does not match model p={model.p}"
        )
    p = model.p
    cap = support_bound(p)
    t_min = p if opts.t_min is None else int(opts.t_min)
    t_max = cap if opts.t_max is None else int(opts.t_max)
    if not (p <= t_min <= t_max <= cap):
        raise ValidationError(
            f"support schedule must satisfy p <= t_min <= t_max <= {cap}"
        )
    grid_spec = opts.grid or GridSpec()
    tol = opts.tol if opts.tol is not None else default_tol(p)
    atoms = _PointAtoms(model, thetas, tw)
    lo, span = _search_box(model, thetas, grid_spec)

    warm = None
    if opts.wf_warm_start:
        try:
            grid_pts = build_eval_grid(model, thetas, grid_spec)
            wp, ww, _, _, _, _ = _wf_core(
                atoms, grid_pts, opts.wf_iters, tol=0.02 * p, log_progress=False
            )
            warm = (np.asarray(wp), np.asarray(ww) / np.asarray(ww).sum())
        except NumericalError:
            warm = None

    best_obj = math.inf
    best_design = None
    best_report = None
    best_t = t_min
    for t in range(t_min, t_max + 1):
        t_best = (math.inf, None, None)
        for s_idx in range(opts.multistarts):
            init = _initial_state(atoms, lo, span, t, s_idx, opts, warm)
            if init is None:
                continue
            X0, w0 = init
            z0 = np.concatenate([box_encode(X0, lo, span).ravel(), stick_encode(w0)])
            obj, X, w = _polish(atoms, lo, span, t, z0, opts)
            if obj < t_best[0]:
                t_best = (obj, X, w)
        if t_best[1] is None:
            continue
        _, X, w = t_best
        # the stick transform can pinch a weight to exactly zero; drop such
        # points before handing the design to the pruner
        alive = w > 0.0
        if np.count_nonzero(alive) < p:
            continue
        X, w = X[alive], w[alive]
        design = prune_design(
            ContinuousDesign(X, w / w.sum()),
            region=model.region,
            weight_floor=opts.weight_floor,
            merge_radius=opts.merge_radius,
            max_support=cap,
        )
        w_ref, _ = refine_weights(atoms, design.points, design.weights)
        alive = w_ref > 0.0
        if np.count_nonzero(alive) < p:
            continue
        design = ContinuousDesign(
            design.points[alive], w_ref[alive] / w_ref[alive].sum()
        )
        obj = atoms.canonical_objective(design)
        if math.isinf(obj):
            continue
        report = equivalence_scan(design, model, thetas, tw, grid=grid_spec, tol=tol)
        _log(
            opts.log_progress,
            f"[optimize] t={t} objective={obj:.9f} min_psi={report.min_psi:.2e}",
        )
        if obj < best_obj:
            best_obj, best_design, best_report, best_t = obj, design, report, t
        if report.is_optimal:
            return OptimizeResult(design, obj, report, True, t)
    if best_design is None:
        raise NumericalError("no nonsingular design found at any support size")
    return OptimizeResult(best_design, best_obj, best_report, False, best_t)


# -------------------------------------------------------------- exact designs

@dataclass(frozen=True)
class ExactOptOptions:
    """Settings for integer-replication optimizers.

    grid_step controls the exchange candidate lattice.  The annealing schedule
    is geometric: temperature multiplies by `cooling` every `cooling_interval`
    proposals (default 100 n); the proposal neighborhood shrinks geometrically
    from the first to the second fraction of each axis span.
    """

    n: int
    method: str = "grid_exchange"
    grid_step: float = 0.05
    t0: float | None = None
    cooling: float = 0.95
    cooling_interval: int | None = None
    steps: int = 100_000
    neighborhood: tuple[float, float] = (0.5, 0.02)
    seed: int = 0
    restarts: int | None = None
    sample: object = None
    log_progress: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("exact design size n must be at least 1")
        if self.method not in ("grid_exchange", "anneal"):
            raise ValidationError(f"unknown exact method {self.method!r}")
        if not (0.0 < self.cooling < 1.0):
            raise ValidationError("cooling factor must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class ExactOptResult:
    design: ExactDesign
    objective: float
    method: str
    details: dict


def optimize_exact(model: ModelSpec, prior, options: ExactOptOptions) -> ExactOptResult:
    ps = resolve_sample(prior, options.sample)
    atoms = _PointAtoms(model, ps.draws, ps.weights)
    if options.n * 1 < model.p:
        # n runs give at most n distinct information atoms
        if options.n < model.p:
            raise ValidationError(f"n={options.n} runs cannot estimate p={model.p} parameters")
    if options.method == "grid_exchange":
        runs, details = _grid_exchange(atoms, options)
    else:
        runs, details = _anneal(atoms, options)
    design = from_runs(runs)
    return ExactOptResult(
        design=design,
        objective=atoms.canonical_objective(design),
        method=options.method,
        details=details,
    )


def _exact_objective(atoms, X) -> float:
    n = X.shape[0]
    return atoms.mean_objective(X, np.full(n, 1.0 / n))


def _grid_exchange(atoms: _PointAtoms, opts: ExactOptOptions):
    model = atoms.model
    n, p = opts.n, atoms.p
    cand = build_eval_grid(model, atoms.thetas, GridSpec(step=opts.grid_step))
    Fc, Uc = atoms.eval(cand)
    finite = np.all(np.isfinite(Uc), axis=0)
    cand, Fc, Uc = cand[finite], Fc[finite], Uc[:, finite]
    ncand = cand.shape[0]
    if ncand < 1:
        raise NumericalError("no admissible candidate points on the lattice")
    restarts = 8 if opts.restarts is None else opts.restarts

    best_obj, best_idx = math.inf, None
    for r in range(restarts):
        rng = rng_for(opts.seed, STREAM_EXCHANGE, r)
        idx = None
        for _ in range(32):
            trial = rng.integers(0, ncand, size=n)
            if math.isfinite(_exact_objective(atoms, cand[trial])):
                idx = np.array(trial)
                break
        if idx is None:
            continue

        def rebuild(idx):
            Ms = np.einsum("sn,ni,nj->sij", Uc[:, idx] / n, Fc[idx], Fc[idx])
            sign, ld = np.linalg.slogdet(Ms)
            return Ms, np.linalg.inv(Ms), float(-(atoms.tw @ ld))

        Ms, Minv, obj = rebuild(idx)
        for _pass in range(60):
            improved = False
            for pos in range(n):
                i = idx[pos]
                fi = Fc[i]
                # per draw: current point's variance, all candidates' variances,
                # and the cross terms with the current point
                A = np.einsum("sij,j->si", Minv, fi)
                b = Uc[:, i] * np.einsum("si,i->s", A, fi)
                g = Fc @ A.T  # (ncand, s)
                q = Uc.T * np.einsum("ni,sij,nj->ns", Fc, Minv, Fc)
                ratio = (1.0 + q / n) * (1.0 - b / n)[None, :] + (
                    Uc[:, i][None, :] * Uc.T * g * g
                ) / (n * n)
                with np.errstate(divide="ignore", invalid="ignore"):
                    delta = -np.log(np.where(ratio > 0.0, ratio, np.nan)) @ atoms.tw
                delta = np.where(np.isfinite(delta), delta, math.inf)
                c = int(np.argmin(delta))
                if delta[c] < -1e-12 and c != i:
                    fc = Fc[c]
                    Ms += (
                        Uc[:, c][:, None, None] * np.outer(fc, fc)[None, :, :]
                        - Uc[:, i][:, None, None] * np.outer(fi, fi)[None, :, :]
                    ) / n
                    idx[pos] = c
                    Minv = np.linalg.inv(Ms)
                    sign, ld = np.linalg.slogdet(Ms)
                    obj = float(-(atoms.tw @ ld))
                    improved = True
            if not improved:
                break
        if obj < best_obj:
            best_obj, best_idx = obj, idx.copy()
            _log(opts.log_progress, f"[exchange] restart={r} objective={obj:.9f}")
    if best_idx is None:
        raise NumericalError("could not find a nonsingular starting design after 32 re-draws")
    return cand[best_idx], {"restarts": restarts, "n_candidates": int(ncand)}


def _anneal(atoms: _PointAtoms, opts: ExactOptOptions):
    model = atoms.model
    n, p, k = opts.n, atoms.p, model.k
    lo, span = _search_box(model, atoms.thetas, GridSpec())
    restarts = 2 if opts.restarts is None else opts.restarts
    interval = opts.cooling_interval or 100 * n
    r0, r1 = opts.neighborhood

    best_obj, best_X = math.inf, None
    for chain in range(max(restarts, 1)):
        rng = rng_for(opts.seed, STREAM_ANNEAL, chain)
        # temperature scale from the objective spread over random probes
        probe_objs = []
        for _ in range(64):
            Xp = lo + span * rng.random((n, k))
            v = _exact_objective(atoms, Xp)
            if math.isfinite(v):
                probe_objs.append(v)
        if opts.t0 is not None:
            T = float(opts.t0)
        elif len(probe_objs) >= 2:
            T = float(np.std(probe_objs))
            if T <= 0:
                T = 1.0
        else:
            T = 1.0
        X = None
        for _ in range(32):
            Xt = lo + span * rng.random((n, k))
            if math.isfinite(_exact_objective(atoms, Xt)):
                X = Xt
                break
        if X is None:
            raise NumericalError("could not find a nonsingular starting design after 32 re-draws")

        F = eval_basis_many(model.basis, X)
        eta = F @ atoms.thetas.T
        U = weight_from_eta(model.family, model.link, eta).T
        U = np.atleast_2d(U)
        Ms = np.einsum("sn,ni,nj->sij", U / n, F, F)
        Minv = np.linalg.inv(Ms)
        sign, ld = np.linalg.slogdet(Ms)
        obj = float(-(atoms.tw @ ld))
        chain_best_obj, chain_best_X = obj, X.copy()
        accepts = 0
        for step in range(opts.steps):
            i = int(rng.integers(n))
            j = int(rng.integers(k))
            frac = step / max(opts.steps - 1, 1)
            rad = span[j] * r0 * (r1 / r0) ** frac
            a = max(lo[j], X[i, j] - rad)
            b = min(lo[j] + span[j], X[i, j] + rad)
            x_new = a + (b - a) * rng.random()
            row = X[i].copy()
            row[j] = x_new
            f_new = eval_basis_many(model.basis, row[None, :])[0]
            eta_new = atoms.thetas @ f_new
            u_new = np.atleast_1d(
                weight_from_eta(model.family, model.link, eta_new)
            )
            if not np.all(np.isfinite(u_new)):
                continue
            f_old = F[i]
            u_old = U[:, i]
            Av = np.einsum("sij,j->si", Minv, f_new)
            Aw = np.einsum("sij,j->si", Minv, f_old)
            a_q = u_new * np.einsum("si,i->s", Av, f_new)
            b_q = u_old * np.einsum("si,i->s", Aw, f_old)
            cross = np.einsum("si,i->s", Av, f_old)
            ratio = (1.0 + a_q / n) * (1.0 - b_q / n) + u_new * u_old * cross * cross / (n * n)
            if np.any(ratio <= 0.0) or not np.all(np.isfinite(ratio)):
                continue
            delta = float(-(atoms.tw @ np.log(ratio)))
            if delta >= 0.0 and rng.random() >= math.exp(-delta / T):
                continue
            # accept
            X[i, j] = x_new
            Ms += (
                u_new[:, None, None] * np.outer(f_new, f_new)[None, :, :]
                - u_old[:, None, None] * np.outer(f_old, f_old)[None, :, :]
            ) / n
            F[i] = f_new
            U[:, i] = u_new
            obj += delta
            accepts += 1
            if accepts % 512 == 0:
                # periodic exact refresh kills rank-one drift
                Ms = np.einsum("sn,ni,nj->sij", U / n, F, F)
                sign, ld = np.linalg.slogdet(Ms)
                obj = float(-(atoms.tw @ ld))
            Minv = np.linalg.inv(Ms)
            if obj < chain_best_obj - 1e-15:
                chain_best_obj = obj
                chain_best_X = X.copy()
                _log(opts.log_progress, f"[anneal] step={step} objective={obj:.9f}")
            if (step + 1) % interval == 0:
                T *= opts.cooling
        exact = _exact_objective(atoms, chain_best_X)
        if exact < best_obj:
            best_obj, best_X = exact, chain_best_X.copy()
    if best_X is None:
        raise NumericalError("annealing found no usable design")
    return best_X, {"restarts": max(restarts, 1), "steps": int(opts.steps)}
