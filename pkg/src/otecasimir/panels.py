"""Panel-based quadrature building blocks.

Embedded 7/15-point Gauss-Kronrod rules provide a value and an error estimate
per panel; fixed-order Gauss-Legendre rules cover sub-intervals whose edges
are already aligned with the integrand's structure (band edges, branch
points).  Everything here is deterministic: node sets depend only on panel
edges, and sums run in fixed index order.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "GK_NODES",
    "GK_WEIGHTS",
    "GAUSS_WEIGHTS",
    "gk_nodes",
    "gk_reduce",
    "gk_panel",
    "gk_fixed",
    "adaptive_gk",
    "gl_nodes",
    "geometric_edges",
]

# 15-point Kronrod extension of 7-point Gauss on [-1, 1]; the Gauss nodes sit
# at the odd Kronrod indices.
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144838258730,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.0,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

# full symmetric 15-node layout, ascending
GK_NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_G_EXT = np.zeros(15)
_G_EXT[1:14:2] = np.concatenate([_WG[:3], [_WG[3]], _WG[2::-1]])
GAUSS_WEIGHTS = _G_EXT


def gk_nodes(a, b):
    """The 15 Kronrod abscissae mapped to [a, b]."""
    mid = 0.5 * (a + b)
    hw = 0.5 * (b - a)
    return mid + hw * GK_NODES


def gk_reduce(a, b, fvals):
    """(value, error) of one panel from the 15 node evaluations."""
    hw = 0.5 * (b - a)
    fvals = np.asarray(fvals)
    resk = hw * float(np.dot(GK_WEIGHTS, fvals))
    resg = hw * float(np.dot(GAUSS_WEIGHTS, fvals))
    return resk, abs(resk - resg)


def gk_panel(f, a, b):
    """Evaluate one Gauss-Kronrod panel of a scalar function."""
    xs = gk_nodes(a, b)
    return gk_reduce(a, b, np.array([f(x) for x in xs]))


def gk_fixed(f, edges):
    """Sum of Gauss-Kronrod panels over consecutive edge pairs; (value, error)."""
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = gk_panel(f, a, b)
        total += v
        err += e
    return total, err


def adaptive_gk(f, edges, rel_tol, max_splits=60, abs_floor=0.0):
    """Adaptive Gauss-Kronrod refinement starting from the given panel edges.

    Splits the worst panel in half until the summed error estimate drops
    below rel_tol * |value| (or the absolute floor) or the split budget is
    exhausted.  Returns (value, error, n_evals).
    """
    panels = []
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = gk_panel(f, a, b)
        panels.append([a, b, v, e])
    n_evals = 15 * (len(edges) - 1)
    for _ in range(max_splits):
        total = sum(p[2] for p in panels)
        err = sum(p[3] for p in panels)
        if err <= max(rel_tol * abs(total), abs_floor):
            break
        worst = max(range(len(panels)), key=lambda i: panels[i][3])
        a, b, _, _ = panels.pop(worst)
        mid = 0.5 * (a + b)
        for aa, bb in ((a, mid), (mid, b)):
            v, e = gk_panel(f, aa, bb)
            panels.append([aa, bb, v, e])
        n_evals += 30
    total = sum(p[2] for p in panels)
    err = sum(p[3] for p in panels)
    return total, err, n_evals


@lru_cache(maxsize=64)
def gl_nodes(n):
    """Gauss-Legendre nodes and weights on [-1, 1] (cached)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def geometric_edges(start, scale, stop):
    """Edges [start, start + scale, start + 2 scale, start + 4 scale, ...] up to stop.

    A doubling ladder used for smoothly decaying tails; always includes both
    endpoints and never returns a degenerate interval.
    """
    if stop <= start:
        raise ValueError("geometric_edges needs stop > start")
    edges = [start]
    step = scale
    while edges[-1] + step < stop:
        edges.append(edges[-1] + step)
        step *= 2.0
    if stop > edges[-1] * (1 + 1e-12) or len(edges) == 1:
        edges.append(stop)
    else:
        edges[-1] = stop
    return np.array(edges)


def origin_cascade(scale, levels, ratio=4.0):
    """Edges 0 < scale/ratio^levels < ... < scale/ratio < scale.

    Dyadic-style refinement toward 0, used where the integrand has a conical
    kink at the origin of the transverse-wavevector plane.
    """
    if levels <= 0:
        return np.array([0.0, scale])
    return np.concatenate([[0.0], scale * ratio ** -np.arange(levels, -1, -1.0)])
