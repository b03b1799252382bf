"""Block designs for models with a shared random intercept.

Each block of m runs shares one normal random effect with variance sigma2 on
the linear predictor scale.  Marginal information approximations:

  ql   quasi-likelihood on the marginal moments (closed form needs the
       poisson-log pair): mubar = exp(eta + sigma2/2),
       V = diag(mubar) + (e^{sigma2} - 1) mubar mubar',  Delta = diag(mubar)
  mql  first-order expansion around a zero random effect: mu = h(eta),
       V = diag(V_glm(mu)) + sigma2 * Delta J Delta,  Delta = diag(h'(eta))
  gee  working covariance D^{1/2} R(alpha) D^{1/2} with exchangeable R and
       D = diag(V_glm(mu))

and in every case the block contributes M(zeta) = F' Delta V^{-1} Delta F,
the m-run analogue of the pointwise atom u f f'.  At sigma2 = 0 (gee with
alpha = 0) all three collapse to the independent-observation information.

For binomial blocks with a logistic link the exact marginal information is
also available by Gauss-Hermite quadrature over the random intercept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .designs import (
    EquivalenceReport,
    _lock,
    d_objective,
    psd_logdet,
    support_bound,
)
from .errors import (
    DimensionError,
    NumericalError,
    SingularDesignError,
    UnsupportedModelError,
    ValidationError,
)
from .families import (
    ModelSpec,
    assert_eta_admissible,
    eval_basis_many,
    inverse_link,
    mean_derivative,
)
from .optimize import (
    ContinuousOptOptions,
    _nm,
    box_decode,
    box_encode,
    stick_decode,
    stick_encode,
)
from .priors import STREAM_STARTS, rng_for

BLOCK_METHODS = ("ql", "mql", "gee")


@dataclass(frozen=True)
class RandomInterceptModel:
    """A marginal GLM plus a block-shared normal intercept."""

    base: ModelSpec
    sigma2: float
    m: int

    def __post_init__(self):
        if float(self.sigma2) < 0.0:
            raise ValidationError("random intercept variance must be nonnegative")
        if int(self.m) < 1:
            raise ValidationError("block size must be at least 1")
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "m", int(self.m))

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def k(self) -> int:
        return self.base.k


@dataclass(frozen=True, eq=False)
class BlockDesign:
    """Weighted measure over blocks; blocks is (t, m, k)."""

    blocks: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.blocks, dtype=float)
        if B.ndim == 2:
            B = B[:, :, None]
        if B.ndim != 3:
            raise DimensionError(f"blocks must be (t, m, k), got shape {B.shape}")
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != B.shape[0]:
            raise DimensionError(f"{B.shape[0]} blocks but {w.shape[0]} weights")
        if not np.all(w > 0.0):
            raise ValidationError("block weights must be strictly positive")
        if abs(float(w.sum()) - 1.0) > 1e-8:
            raise ValidationError(f"block weights sum to {float(w.sum()):.12g}, expected 1")
        if not np.all(np.isfinite(B)):
            raise ValidationError("block coordinates must be finite")
        object.__setattr__(self, "blocks", _lock(B))
        object.__setattr__(self, "weights", _lock(w))

    @property
    def t(self) -> int:
        return self.blocks.shape[0]

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    @property
    def k(self) -> int:
        return self.blocks.shape[2]

    def canonical(self) -> "BlockDesign":
        """Rows sorted within each block, then blocks sorted, weights carried."""
        B = np.array(self.blocks)
        for b in range(B.shape[0]):
            order = np.lexsort(B[b].T[::-1])
            B[b] = B[b][order]
        flat = B.reshape(B.shape[0], -1)
        order = np.lexsort(flat.T[::-1])
        return BlockDesign(B[order], np.array(self.weights)[order])


def _check_method(model: RandomInterceptModel, method: str) -> None:
    if method not in BLOCK_METHODS:
        raise ValidationError(f"unknown block method {method!r}")
    fam, link = model.base.family.kind, model.base.link.kind
    if method == "ql" and not (fam == "poisson" and link == "log"):
        raise UnsupportedModelError(
            "closed-form marginal moments are only available for the "
            "poisson family with log link; use mql or gee instead"
        )


def _block_matrices(
    model: RandomInterceptModel, etas: np.ndarray, method: str, gee_alpha: float
) -> tuple[np.ndarray, np.ndarray]:
    """V (n, m, m) and the diagonal of Delta (n, m) for blocks of predictors."""
    base = model.base
    s2 = model.sigma2
    m = etas.shape[1]
    phi = base.family.dispersion
    eye = np.eye(m)
    ones = np.ones((m, m))
    if method == "ql":
        mubar = np.exp(etas + 0.5 * s2)
        V = mubar[:, :, None] * eye[None, :, :] * phi
        V = V + (math.expm1(s2)) * mubar[:, :, None] * mubar[:, None, :]
        return V, mubar
    mu = inverse_link(base.link, etas)
    var = base.family.variance(mu) * phi
    delta = mean_derivative(base.link, etas)
    if method == "mql":
        V = var[:, :, None] * eye[None, :, :]
        V = V + s2 * delta[:, :, None] * delta[:, None, :]
        return V, delta
    # gee
    if not (0.0 <= gee_alpha < 1.0):
        raise ValidationError("exchangeable correlation must be in [0, 1)")
    R = (1.0 - gee_alpha) * eye + gee_alpha * ones
    sd = np.sqrt(var)
    V = sd[:, :, None] * R[None, :, :] * sd[:, None, :]
    return V, delta


def block_info_batch(
    Z: np.ndarray,
    model: RandomInterceptModel,
    theta,
    method: str,
    gee_alpha: float = 0.5,
) -> np.ndarray:
    """Information matrices for a stack of blocks, shape (n, p, p)."""
    _check_method(model, method)
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 2:
        Z = Z[:, :, None]
    n, m, k = Z.shape
    if m != model.m or k != model.k:
        raise DimensionError(f"blocks have shape {(m, k)}, model expects {(model.m, model.k)}")
    theta = np.asarray(theta, dtype=float).reshape(-1)
    F = eval_basis_many(model.base.basis, Z.reshape(n * m, k)).reshape(n, m, model.p)
    etas = F @ theta
    assert_eta_admissible(model.base.link, etas)
    V, delta = _block_matrices(model, etas, method, gee_alpha)
    Vinv = np.linalg.inv(V)
    A = delta[:, :, None] * F
    M = np.einsum("nmi,nml,nlj->nij", A, Vinv, A)
    return 0.5 * (M + M.transpose(0, 2, 1))


def block_info_matrix(
    zeta, model: RandomInterceptModel, theta, method: str, gee_alpha: float = 0.5
) -> np.ndarray:
    """Information contributed by one block of m runs."""
    zeta = np.asarray(zeta, dtype=float)
    if zeta.ndim == 1:
        zeta = zeta[:, None]
    return block_info_batch(zeta[None, :, :], model, theta, method, gee_alpha)[0]


def block_design_info(
    design: BlockDesign, model: RandomInterceptModel, theta, method: str,
    gee_alpha: float = 0.5,
) -> np.ndarray:
    Ms = block_info_batch(design.blocks, model, theta, method, gee_alpha)
    return np.einsum("n,nij->ij", design.weights, Ms)


def block_objective(
    design: BlockDesign, model: RandomInterceptModel, theta, method: str,
    gee_alpha: float = 0.5,
) -> float:
    return d_objective(block_design_info(design, model, theta, method, gee_alpha))


def mv_sensitivity(
    zeta, design: BlockDesign, model: RandomInterceptModel, theta, method: str,
    gee_alpha: float = 0.5,
) -> float:
    """psi(zeta) = p - tr{ M(zeta) M(design)^{-1} }, the block-level analogue
    of the pointwise sensitivity (and equal to it at m = 1, sigma2 = 0)."""
    M = block_design_info(design, model, theta, method, gee_alpha)
    if psd_logdet(M) is None:
        raise SingularDesignError("block design information matrix is singular")
    Minv = np.linalg.inv(M)
    Mz = block_info_matrix(zeta, model, theta, method, gee_alpha)
    return float(model.p - np.einsum("ij,ji->", Mz, Minv))


def _block_grid(model: RandomInterceptModel, step: float) -> np.ndarray:
    """All lex-nondecreasing blocks with rows on the axis lattice."""
    for lo, hi in model.base.region.bounds:
        if math.isinf(lo):
            raise ValidationError("block grids need a bounded region")
    axes = []
    for lo, hi in model.base.region.bounds:
        npts = max(int(round((hi - lo) / step)), 1)
        axes.append(np.linspace(lo, hi, npts + 1))
    if model.k == 1:
        pts = axes[0][:, None]
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([a.ravel() for a in mesh])
    n = pts.shape[0]
    idx_combos = [
        combo for combo in product(range(n), repeat=model.m)
        if all(combo[i] <= combo[i + 1] for i in range(model.m - 1))
    ]
    Z = np.stack([pts[list(c)] for c in idx_combos])
    return Z


def block_equivalence_check(
    design: BlockDesign,
    model: RandomInterceptModel,
    theta,
    method: str,
    grid_step: float = 0.02,
    tol: float | None = None,
    gee_alpha: float = 0.5,
) -> EquivalenceReport:
    """Scan the block-level sensitivity over a lattice of blocks."""
    _check_method(model, method)
    p = model.p
    if tol is None:
        tol = 1e-3 * p
    M = block_design_info(design, model, theta, method, gee_alpha)
    ld = psd_logdet(M)
    if ld is None:
        raise SingularDesignError("block design information matrix is singular")
    Minv = np.linalg.inv(M)
    Z = _block_grid(model, grid_step)
    Z = np.vstack([Z, design.blocks])
    Ms = block_info_batch(Z, model, theta, method, gee_alpha)
    psi = p - np.einsum("nij,ji->n", Ms, Minv)
    j = int(np.argmin(psi))
    return EquivalenceReport(
        min_psi=float(psi[j]),
        argmin=np.asarray(Z[j], dtype=float),
        tol=float(tol),
        is_optimal=bool(psi[j] >= -tol),
        support_size=int(design.t),
        objective=float(-ld),
        n_grid=int(Z.shape[0]),
    )


@dataclass(frozen=True, eq=False)
class BlockOptResult:
    design: BlockDesign
    objective: float
    report: EquivalenceReport
    is_optimal: bool


def optimize_block_design(
    model: RandomInterceptModel,
    theta,
    method: str,
    options: ContinuousOptOptions | None = None,
    gee_alpha: float = 0.5,
) -> BlockOptResult:
    """D-optimal measure over blocks, certified on the block lattice.

    Uses the same stack as the pointwise optimizer: a multiplicative warm
    start on a coarse block lattice locates the support, then Nelder-Mead in
    the angle parameterization polishes block coordinates and weights.
    """
    _check_method(model, method)
    opts = options or ContinuousOptOptions()
    theta = np.asarray(theta, dtype=float).reshape(-1)
    p, m, k = model.p, model.m, model.k
    for lo, hi in model.base.region.bounds:
        if math.isinf(lo):
            raise ValidationError("block optimization needs a bounded region")
    lo = np.array([b[0] for b in model.base.region.bounds] * m)
    hi = np.array([b[1] for b in model.base.region.bounds] * m)
    span = hi - lo

    def info_of(Zflat: np.ndarray) -> np.ndarray:
        return block_info_batch(
            Zflat.reshape(-1, m, k), model, theta, method, gee_alpha
        )

    def objective(Zflat: np.ndarray, w: np.ndarray) -> float:
        Ms = info_of(Zflat)
        M = np.einsum("n,nij->ij", w, Ms)
        ld = psd_logdet(M)
        return math.inf if ld is None else -ld

    # multiplicative warm start on a coarse lattice of blocks
    warm_blocks, warm_w = None, None
    try:
        Zg = _block_grid(model, max(0.05, opts.merge_radius * 10))
        Mg = block_info_batch(Zg, model, theta, method, gee_alpha)
        w = np.full(Zg.shape[0], 1.0 / Zg.shape[0])
        for _ in range(3000):
            M = np.einsum("n,nij->ij", w, Mg)
            if psd_logdet(M) is None:
                break
            Minv = np.linalg.inv(M)
            d = np.einsum("nij,ji->n", Mg, Minv)
            if d.max() / p - 1.0 < 1e-9:
                break
            w = w * d / p
            w /= w.sum()
        keep = w > 1e-4
        if keep.sum() >= 1:
            warm_blocks = Zg[keep]
            warm_w = w[keep] / w[keep].sum()
    except (NumericalError, np.linalg.LinAlgError):
        pass

    t_lo = opts.t_min if opts.t_min is not None else max(1, math.ceil(p / m))
    t_hi = opts.t_max if opts.t_max is not None else support_bound(p)
    if not (1 <= t_lo <= t_hi):
        raise ValidationError("bad block support schedule")
    tol = opts.tol if opts.tol is not None else 1e-3 * p
    grid_step = (opts.grid.step if opts.grid is not None else None) or 0.02

    def refine_block_weights(Zflat, w0):
        Ms = info_of(Zflat)
        w = np.maximum(np.asarray(w0, dtype=float), 1e-300)
        w /= w.sum()
        obj = objective(Zflat, w)
        if math.isinf(obj):
            return w0, math.inf
        for _ in range(600):
            M = np.einsum("n,nij->ij", w, Ms)
            ld = psd_logdet(M)
            if ld is None:
                break
            Minv = np.linalg.inv(M)
            d = np.einsum("nij,ji->n", Ms, Minv)
            if d.max() / p - 1.0 < 1e-12:
                break
            new_w = w * d / p
            new_w /= new_w.sum()
            new_obj = objective(Zflat, new_w)
            if not new_obj < obj:
                break
            w, obj = new_w, new_obj
        return w, obj

    best = (math.inf, None, None)
    best_report = None
    for t in range(t_lo, t_hi + 1):
        dim = t * m * k

        def fun(z):
            Z = box_decode(z[:dim].reshape(t, m * k), lo, span)
            w = stick_decode(z[dim:])
            return objective(Z, w)

        t_best = (math.inf, None, None)
        for s_idx in range(opts.multistarts):
            if s_idx == 0 and warm_blocks is not None:
                order = np.argsort(warm_w)[::-1]
                Z0 = warm_blocks[order][:t].reshape(-1, m * k)
                w0 = warm_w[order][:t]
                if Z0.shape[0] < t:
                    rng = rng_for(opts.seed, STREAM_STARTS, t, s_idx)
                    extra = t - Z0.shape[0]
                    Z0 = np.vstack([Z0, lo + span * rng.random((extra, m * k))])
                    w0 = np.concatenate([w0, np.full(extra, max(w0.min(), 1e-3))])
                w0 = w0 / w0.sum()
            else:
                rng = rng_for(opts.seed, STREAM_STARTS, t, s_idx)
                Z0 = lo + span * rng.random((t, m * k))
                w0 = 0.1 + rng.random(t)
                w0 /= w0.sum()
            z = np.concatenate([box_encode(Z0, lo, span).ravel(), stick_encode(w0)])
            obj = fun(z)
            for _ in range(1 + opts.restarts):
                z_new, obj_new = _nm(fun, z, opts.max_evals)
                if obj_new < obj:
                    z, obj = z_new, obj_new
                Zc = box_decode(z[:dim].reshape(t, m * k), lo, span)
                wc = stick_decode(z[dim:])
                w_ref, obj_ref = refine_block_weights(Zc, wc)
                if obj_ref < obj:
                    z = np.concatenate([z[:dim], stick_encode(w_ref)])
                    gain = obj - obj_ref
                    obj = obj_ref
                else:
                    gain = 0.0
                if gain < 1e-11:
                    break
            if obj < t_best[0]:
                t_best = (obj, box_decode(z[:dim].reshape(t, m * k), lo, span),
                          stick_decode(z[dim:]))
        if t_best[1] is None:
            continue
        _, Z, w = t_best
        design = _prune_blocks(Z.reshape(t, m, k), w, model, opts)
        w_ref, _ = refine_block_weights(design.blocks.reshape(design.t, -1),
                                        design.weights)
        design = BlockDesign(design.blocks, w_ref / w_ref.sum()).canonical()
        obj = block_objective(design, model, theta, method, gee_alpha)
        if math.isinf(obj):
            continue
        report = block_equivalence_check(
            design, model, theta, method, grid_step=grid_step, tol=tol,
            gee_alpha=gee_alpha,
        )
        if obj < best[0]:
            best = (obj, design, report)
        if report.is_optimal:
            return BlockOptResult(design, obj, report, True)
    if best[1] is None:
        raise NumericalError("no nonsingular block design found")
    return BlockOptResult(best[1], best[0], best[2], False)


def _prune_blocks(Z, w, model: RandomInterceptModel, opts) -> BlockDesign:
    """Canonicalize slot order, merge near-identical blocks, drop dust."""
    t, m, k = Z.shape
    Z = np.array(Z)
    for b in range(t):
        order = np.lexsort(Z[b].T[::-1])
        Z[b] = Z[b][order]
    span = np.array([b[1] - b[0] for b in model.base.region.bounds] * m)
    flat = Z.reshape(t, m * k) / span
    w = np.asarray(w, dtype=float).copy()
    parent = list(range(t))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(t):
        for j in range(i + 1, t):
            if np.linalg.norm(flat[i] - flat[j]) <= opts.merge_radius:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for i in range(t):
        groups.setdefault(find(i), []).append(i)
    out_Z, out_w = [], []
    for idxs in groups.values():
        ww = w[idxs]
        tot = ww.sum()
        out_Z.append((Z[idxs] * ww[:, None, None]).sum(axis=0) / tot)
        out_w.append(tot)
    Z2 = np.array(out_Z)
    w2 = np.array(out_w)
    keep = w2 >= opts.weight_floor
    if not np.any(keep):
        keep = w2 == w2.max()
    Z2, w2 = Z2[keep], w2[keep]
    return BlockDesign(Z2, w2 / w2.sum()).canonical()


# ------------------------------------------------- exact binary block information

def direct_binary_block_info(
    zeta, model: RandomInterceptModel, theta, quadrature_order: int = 32
) -> np.ndarray:
    """Exact marginal information for a logistic block by direct enumeration.

    Marginalizes the random intercept with Gauss-Hermite quadrature, walks all
    2^m outcome vectors, and differentiates the marginal score by central
    differences (step 1e-5).  Limited to small blocks; the outcome enumeration
    grows as 2^m.
    """
    base = model.base
    if base.family.kind != "binomial" or base.link.kind != "logistic":
        raise UnsupportedModelError(
            "direct marginal information is implemented for the "
            "binomial family with logistic link"
        )
    if model.m > 3:
        raise ValidationError("direct enumeration is limited to blocks of at most 3 runs")
    if quadrature_order < 2:
        raise ValidationError("quadrature order must be at least 2")
    zeta = np.asarray(zeta, dtype=float)
    if zeta.ndim == 1:
        zeta = zeta[:, None]
    m = zeta.shape[0]
    if m != model.m or zeta.shape[1] != model.k:
        raise DimensionError(
            f"block has shape {zeta.shape}, model expects {(model.m, model.k)}"
        )
    theta = np.asarray(theta, dtype=float).reshape(-1)
    F = eval_basis_many(base.basis, zeta)
    Y = np.array(list(product((0.0, 1.0), repeat=m)))
    nodes, wts = np.polynomial.hermite.hermgauss(quadrature_order)
    gamma = math.sqrt(2.0 * model.sigma2) * nodes
    wq = wts / math.sqrt(math.pi)

    def probs_scores(th):
        eta = F @ th
        mu = 1.0 / (1.0 + np.exp(-(eta[None, :] + gamma[:, None])))  # (Q, m)
        W = np.where(Y[None, :, :] == 1.0, mu[:, None, :], 1.0 - mu[:, None, :])
        L = W.prod(axis=2)  # (Q, 2^m)
        py = wq @ L
        T = Y[None, :, :] - mu[:, None, :]  # (Q, 2^m, m)
        S = T @ F  # (Q, 2^m, p)
        num = np.einsum("q,qy,qyp->yp", wq, L, S)
        return py, num / py[:, None]

    py0, s0 = probs_scores(theta)
    h = 1e-5
    p = base.basis.p
    H = np.zeros((2 ** m, p, p))
    for r in range(p):
        e = np.zeros(p)
        e[r] = h
        _, s_plus = probs_scores(theta + e)
        _, s_minus = probs_scores(theta - e)
        H[:, :, r] = (s_plus - s_minus) / (2.0 * h)
    M = -np.einsum("y,yij->ij", py0, H)
    return 0.5 * (M + M.T)
