"""Shared test helpers."""

import numpy as np


def nearest_row(target, pool) -> int:
    """Index of the pool row closest to target in max-abs distance."""
    t = np.asarray(target, dtype=float)
    return int(np.argmin(np.max(np.abs(np.asarray(pool) - t), axis=1)))


def assert_design_matches(design, expected, point_tol, weight_tol):
    """Match each expected (point, weight) pair to the nearest support point.

    expected is a sequence of (coords, weight).  Matching by proximity keeps
    the check independent of support ordering.
    """
    for coords, w in expected:
        g = np.asarray(coords, dtype=float)
        i = nearest_row(g, design.points)
        err = np.max(np.abs(design.points[i] - g))
        assert err <= point_tol, f"no support point near {g.tolist()} (best off by {err:.2e})"
        werr = abs(float(design.weights[i]) - w)
        assert werr <= weight_tol, f"weight at {g.tolist()} off by {werr:.2e}"
