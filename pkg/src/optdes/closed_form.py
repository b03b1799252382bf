"""Analytic D-optimal design constructors.

Each constructor returns a TheoremDesign: the design itself plus the rule
name, the intermediate quantities of the construction, and the precondition
checks that were verified.  Constructions are exact up to the scalar
maximization of the linear-predictor profile, which is solved by golden
section to 1e-10.

All constructors produce designs that pass ``equivalence_scan`` at their
defining parameter vector; that cross-check lives in the test suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .designs import ContinuousDesign
from .errors import PreconditionError, UnsupportedModelError
from .families import (
    DesignRegion,
    Family,
    LinkFunction,
    ModelBasis,
    ModelSpec,
    inverse_link,
    weight_from_eta,
)

__all__ = [
    "CanonicalConstant",
    "TheoremDesign",
    "GammaConditionReport",
    "canonical_logistic_constant",
    "logistic_peak_eta",
    "logistic_1d_design",
    "yang_zhang_design",
    "gamma_ofaat_design",
    "russell_poisson_design",
    "bayes_minimal_poisson_design",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CanonicalConstant:
    """Support half-width of the symmetric two-point design on the predictor scale."""

    link: str
    c_star: float
    mu_star: float
    residual: float


@dataclass(frozen=True)
class TheoremDesign:
    """A closed-form design plus the record of how it was built.

    conditions holds each verified precondition as name -> True; a
    constructor that cannot verify a precondition raises instead, except
    where the contract says to fall back (see logistic_1d_design).
    """

    design: ContinuousDesign
    model: ModelSpec
    rule: str
    intermediates: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)


@dataclass(frozen=True)
class GammaConditionReport:
    """Returned by gamma_ofaat_design when the product condition fails."""

    satisfied: bool
    link: str
    shape: float
    lhs: float
    rhs: float
    worst_pair: tuple
    note: str


def _golden_max(fun, lo: float, hi: float, tol: float = 1e-10) -> float:
    # unimodal scalar maximization; returns the abscissa
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = fun(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = fun(x1)
    return 0.5 * (a + b)


def logistic_peak_eta(k: int) -> float:
    """Positive eta maximizing eta^2 * u(eta)^(k+1) for the logistic weight.

    k=1 gives the single-variable constant; larger k arises in the
    unbounded-last-axis factorial construction where the determinant
    carries k+1 powers of the weight against eta^2.
    """
    if k < 1:
        raise PreconditionError("k must be a positive integer")

    fam, lnk = Family("binomial"), LinkFunction("logistic")

    def logobj(eta: float) -> float:
        return 2.0 * math.log(eta) + (k + 1) * math.log(
            float(weight_from_eta(fam, lnk, eta))
        )

    eta = _golden_max(logobj, 1e-8, 50.0)

    # golden section localizes to ~sqrt(eps) on a flat peak; polish on the
    # stationarity equation 2/eta = (k+1)(2h - 1), dh/deta = h(1-h)
    def resid_fn(e: float) -> float:
        h = float(inverse_link(lnk, e))
        return 2.0 / e - (k + 1) * (2.0 * h - 1.0)

    for _ in range(50):
        h = float(inverse_link(lnk, eta))
        r = resid_fn(eta)
        slope = -2.0 / eta**2 - 2.0 * (k + 1) * h * (1.0 - h)
        step = r / slope
        eta -= step
        if abs(step) < 1e-15 * eta:
            break
    resid = abs(resid_fn(eta))
    if resid > 1e-8:
        raise ArithmeticError(f"stationarity residual {resid:.3e} too large")
    return eta


def canonical_logistic_constant() -> CanonicalConstant:
    """Half-width c* of the optimal two-point design for a single logistic variable.

    The design puts weight 1/2 at predictor values +-c*; c* satisfies
    1/eta = 2h(eta) - 1 and is about 1.5434.
    """
    c = logistic_peak_eta(1)
    mu = float(inverse_link(LinkFunction("logistic"), c))
    resid = abs(1.0 / c - (2.0 * mu - 1.0))
    return CanonicalConstant(link="logistic", c_star=c, mu_star=mu, residual=resid)


def _logistic_model(k: int, region: DesignRegion) -> ModelSpec:
    return ModelSpec(
        Family("binomial"),
        LinkFunction("logistic"),
        ModelBasis.first_order(k),
        region,
    )


def logistic_1d_design(
    theta0: float, theta1: float, region: DesignRegion | None = None
) -> TheoremDesign:
    """Two-point equal-weight design for a single-variable logistic model.

    Support is at x = (+-c* - theta0)/theta1.  With a bounded region that
    excludes either point, the result falls back to the numerical
    optimizer and conditions["support_inside_region"] records False.
    """
    if theta1 == 0.0:
        raise PreconditionError(
            "theta1 = 0: the support points recede without limit"
        )
    cc = canonical_logistic_constant()
    xs = sorted([(-cc.c_star - theta0) / theta1, (cc.c_star - theta0) / theta1])
    if region is None:
        region = DesignRegion(((-math.inf, math.inf),))
    if region.k != 1:
        raise PreconditionError("region must be one-dimensional")
    model = _logistic_model(1, region)
    inside = all(region.contains(np.array([x])) for x in xs)
    if inside:
        design = ContinuousDesign(
            np.array([[xs[0]], [xs[1]]]), np.array([0.5, 0.5])
        )
        conditions = {"support_inside_region": True}
        intermediates = {"c_star": cc.c_star, "mu_star": cc.mu_star}
    else:
        # constrained optimum may pair a boundary point with an interior one
        from .optimize import optimize_continuous

        res = optimize_continuous(model, np.array([theta0, theta1]))
        design = res.design
        conditions = {"support_inside_region": False}
        intermediates = {
            "c_star": cc.c_star,
            "fallback_objective": res.objective,
            "fallback_certified": res.is_optimal,
        }
    return TheoremDesign(
        design=design,
        model=model,
        rule="logistic_1d",
        intermediates=intermediates,
        conditions=conditions,
    )


def yang_zhang_design(
    theta, region: DesignRegion | None = None
) -> TheoremDesign:
    """Factorial-corner design for a first-order logistic model whose last
    axis is unbounded.

    The first k-1 coordinates run over the corners of [-1,1]^(k-1); at each
    corner the last coordinate solves theta_k * x_k = +-eta* - eta_corner,
    where eta* maximizes eta^2 u(eta)^(k+1).  All 2^k points get weight
    2^-k.  Every support point therefore sits at predictor value +-eta*,
    which is what the equivalence check certifies.
    """
    th = np.asarray(theta, dtype=float)
    if th.ndim != 1 or th.size < 2:
        raise PreconditionError("theta must be (intercept, slopes...) with k >= 1")
    k = th.size - 1
    if th[k] == 0.0:
        raise PreconditionError("slope of the unbounded axis must be nonzero")
    if region is None:
        bounds = [(-1.0, 1.0)] * (k - 1) + [(-math.inf, math.inf)]
        region = DesignRegion(tuple(bounds))
    else:
        if region.k != k:
            raise PreconditionError(f"region has {region.k} axes, theta implies {k}")
        if region.unbounded_axis != k - 1:
            raise PreconditionError("last axis must be the unbounded one")
        for j in range(k - 1):
            lo, hi = region.bounds[j]
            if not (lo == -1.0 and hi == 1.0):
                raise PreconditionError(
                    f"bounded axis {j + 1} must be exactly [-1, 1]"
                )
    eta_star = logistic_peak_eta(k)
    corners = list(itertools.product((-1.0, 1.0), repeat=k - 1))
    pts = []
    corner_etas = []
    last_values = []
    for corner in corners:
        eta_c = th[0] + float(np.dot(th[1:k], corner))
        corner_etas.append(eta_c)
        for s in (1.0, -1.0):
            xk = (s * eta_star - eta_c) / th[k]
            last_values.append(xk)
            pts.append(list(corner) + [xk])
    n = len(pts)
    design = ContinuousDesign(np.array(pts), np.full(n, 1.0 / n))
    model = _logistic_model(k, region)
    return TheoremDesign(
        design=design,
        model=model,
        rule="yang_zhang",
        intermediates={
            "peak_eta": eta_star,
            "corner_etas": corner_etas,
            "last_axis_values": last_values,
        },
        conditions={"last_axis_unbounded": True, "bounded_axes_unit": True},
    )


def gamma_ofaat_design(theta, link: LinkFunction):
    """One-factor-at-a-time design for gamma regression on [0,1]^k.

    Support {0, e_1, ..., e_k} with equal weights 1/(k+1) is optimal when
    the intercept term squared is at most every pairwise product of slopes
    (power link: theta0^2 <= theta_i theta_j; the shape-lambda transform
    replaces theta0 by (1 + lambda*theta0)/lambda).  When the condition
    fails a GammaConditionReport is returned instead of a design and the
    caller should fall back to optimize_continuous.
    """
    if link.kind not in ("power", "boxcox"):
        raise UnsupportedModelError(
            f"link {link.kind!r} not covered; use power or boxcox"
        )
    th = np.asarray(theta, dtype=float)
    if th.ndim != 1 or th.size < 2:
        raise PreconditionError("theta must be (intercept, slopes...) with k >= 1")
    k = th.size - 1
    slopes = th[1:]
    if np.any(slopes < 0.0):
        j = int(np.argmin(slopes)) + 1
        raise PreconditionError(
            f"slope theta_{j} is negative; reorient the factor so slopes are >= 0"
        )
    if not np.any(slopes > 0.0):
        raise PreconditionError("at least one slope must be strictly positive")
    lam = float(link.shape)
    if link.kind == "power":
        lhs = th[0] ** 2
    else:
        lhs = (1.0 + lam * th[0]) ** 2
    # smallest pairwise product over i, j = 1..k; i = j is included, so the
    # minimum is just the smallest slope squared
    i = j = int(np.argmin(slopes))
    if link.kind == "power":
        rhs = float(slopes[i] * slopes[j])
    else:
        rhs = float(lam * lam * slopes[i] * slopes[j])
    if lhs > rhs + 1e-12:
        note = "condition fails; search numerically with optimize_continuous"
        if link.kind == "boxcox":
            note += (
                "; as the shape tends to 0 the condition fails for every "
                "theta and the optimum tends to the 2^k factorial"
            )
        return GammaConditionReport(
            satisfied=False,
            link=link.kind,
            shape=lam,
            lhs=lhs,
            rhs=rhs,
            worst_pair=(i + 1, j + 1),
            note=note,
        )
    pts = np.zeros((k + 1, k))
    for a in range(k):
        pts[a + 1, a] = 1.0
    design = ContinuousDesign(pts, np.full(k + 1, 1.0 / (k + 1)))
    region = DesignRegion.cube(0.0, 1.0, k)
    model = ModelSpec(Family("gamma"), link, ModelBasis.first_order(k), region)
    return TheoremDesign(
        design=design,
        model=model,
        rule="gamma_ofaat",
        intermediates={"lhs": lhs, "min_slope_product": rhs},
        conditions={"nonnegative_slopes": True, "product_condition": True},
    )


def russell_poisson_design(theta, region: DesignRegion) -> TheoremDesign:
    """Minimally supported design for a first-order Poisson log-link model.

    Anchor c takes each axis at its upper limit when the slope is positive,
    lower limit otherwise.  The k+1 equally weighted points are c itself
    and c stepped back by 2/theta_i along each axis.  Requires
    |theta_i (u_i - l_i)| >= 2 so every stepped point stays inside the box.
    The construction ignores the intercept and is invariant under
    permutation of the factor labels.
    """
    th = np.asarray(theta, dtype=float)
    if th.ndim != 1 or th.size < 2:
        raise PreconditionError("theta must be (intercept, slopes...) with k >= 1")
    k = th.size - 1
    if not isinstance(region, DesignRegion):
        region = DesignRegion(tuple(tuple(b) for b in region))
    if region.k != k:
        raise PreconditionError(f"region has {region.k} axes, theta implies {k}")
    if not region.is_bounded:
        raise PreconditionError("region must be a bounded box")
    lo = np.array([b[0] for b in region.bounds])
    hi = np.array([b[1] for b in region.bounds])
    conditions = {}
    for i in range(k):
        spread = abs(th[i + 1] * (hi[i] - lo[i]))
        if spread < 2.0:
            raise PreconditionError(
                f"|theta_{i + 1} * (u_{i + 1} - l_{i + 1})| = {spread:.6g} < 2; "
                "the stepped support point would leave the region"
            )
        conditions[f"axis_{i + 1}_spread"] = True
    c = np.where(th[1:] > 0.0, hi, lo)
    pts = [c - (2.0 / th[i + 1]) * _unit(k, i) for i in range(k)]
    pts.append(c)
    design = ContinuousDesign(np.array(pts), np.full(k + 1, 1.0 / (k + 1)))
    model = ModelSpec(
        Family("poisson"), LinkFunction("log"), ModelBasis.first_order(k), region
    )
    return TheoremDesign(
        design=design,
        model=model,
        rule="russell_poisson",
        intermediates={"anchor": c.tolist(), "steps": (2.0 / th[1:]).tolist()},
        conditions=conditions,
    )


def _unit(k: int, i: int) -> np.ndarray:
    e = np.zeros(k)
    e[i] = 1.0
    return e


def bayes_minimal_poisson_design(prior, region: DesignRegion) -> TheoremDesign:
    """Prior-mean delegation for the minimally supported Poisson design.

    For saturated equal-weight designs the log determinant is linear in
    theta, so the design optimal on average over the prior is the locally
    optimal design at theta* = E(theta).  The mean is computed exactly
    (box midpoints or the weighted sample mean), never by fresh sampling.
    """
    theta_star = np.asarray(prior.mean(), dtype=float)
    inner = russell_poisson_design(theta_star, region)
    intermediates = dict(inner.intermediates)
    intermediates["theta_star"] = theta_star.tolist()
    conditions = dict(inner.conditions)
    conditions["prior_mean_exact"] = True
    return TheoremDesign(
        design=inner.design,
        model=inner.model,
        rule="bayes_minimal_poisson",
        intermediates=intermediates,
        conditions=conditions,
    )
