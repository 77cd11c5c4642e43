"""Frequency and wavevector integration for the grating pressure.

The pressure splits into an equilibrium part at the temperature of body 1
(a Matsubara sum over imaginary frequencies, or a xi-integral at T = 0) and a
two-temperature correction integrated over real frequencies.  Wavevector
integrals run over the Brillouin zone in kx (folded when both gratings are
mirror-symmetric) and over ky >= 0 doubled (the integrand is even in ky).
Frequency panels adapt via embedded Gauss-Kronrod estimates; wavevector
panels are Gauss-Legendre with edges pinned to the diffraction branch points
ky_n = sqrt((omega/c)^2 - kxn^2) and a doubling ladder through the evanescent
tail, truncated once kappa * gap exceeds ``tail_kappa``.

Mode points are evaluated in stacked batches (one LAPACK call across many
(kx, ky) at a time), and all reductions run in fixed index order, so results
are independent of the worker count.  Caching is opt-in: when a cache is
passed, identical node batches (grids pinned across a distance sweep) reuse
the stored scattering blocks bit-for-bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .cache import OperatorCache
from .constants import C_LIGHT, HBAR, K_B
from .neqforce import (
    NeqError,
    delta_integrand,
    eq_integrand,
    gap_operators,
    gap_reflections_imag,
    population_diff,
    spectral_window,
)
from .panels import geometric_edges, gk_nodes, gk_reduce, gl_nodes, origin_cascade
from .results import PressureResult, QuadratureSpec

__all__ = [
    "QuadratureSpec",
    "PressureResult",
    "TransitionError",
    "pressure",
    "integrate_delta",
    "matsubara_eq",
    "delta_spectrum",
    "convergence_scan",
    "find_transition",
]


class TransitionError(RuntimeError):
    """No sign change of the pressure inside the bracketing interval."""


def _parallel_map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _foldable(geo1, geo2):
    """kx integrand is even when both profiles are mirror-symmetric in x."""
    return geo1.shift == 0.0 and geo2.shift == 0.0


def _gl_over_edges(edges, n, n_head=None, head=0):
    """GL nodes/weights per consecutive edge pair; the first ``head`` panels
    (an origin cascade, tiny contributions) may use a cheaper rule."""
    nodes, weights = [], []
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        x, w = gl_nodes(n_head if (n_head and i < head) else n)
        mid, hw = 0.5 * (a + b), 0.5 * (b - a)
        nodes.extend(mid + hw * x)
        weights.extend(hw * w)
    return np.array(nodes), np.array(weights)


def _fold_kx_grid(geo1, geo2, edges_pos, spec, head=0):
    """kx nodes/weights from edges on [0, bz], reflected unless foldable."""
    n_head = max(4, spec.kx_nodes // 2)
    if _foldable(geo1, geo2):
        nodes, weights = _gl_over_edges(edges_pos, spec.kx_nodes, n_head, head)
        return nodes, 2.0 * weights
    full = np.concatenate([-edges_pos[::-1], edges_pos[1:]])
    return _gl_over_edges(full, spec.kx_nodes)


def _kx_nodes_eq(geo1, geo2, xi, gap, spec):
    """Cascade at the k = 0 cone, then a doubling ladder across the zone."""
    bz = np.pi / geo1.period
    start = min(0.25 * max(xi / C_LIGHT, 0.5 / gap), 0.25 * bz)
    cascade = origin_cascade(start, spec.origin_levels)
    edges = np.concatenate([cascade, geometric_edges(start, start, bz)[1:]])
    return _fold_kx_grid(geo1, geo2, edges, spec, head=spec.origin_levels)


def _kx_nodes_delta(geo1, geo2, omega, gap, spec):
    """Propagating-band panels up to omega/c, then a ladder resolving the
    evanescent decay scale out to the zone edge."""
    bz = np.pi / geo1.period
    kc = omega / C_LIGHT
    if kc >= bz:
        edges = np.linspace(0.0, bz, spec.kx_panels + 1)
    else:
        pw = np.linspace(0.0, kc, max(2, spec.kx_panels) + 1)
        ladder = geometric_edges(kc, 0.5 * max(kc, 0.5 / gap), bz)
        edges = np.concatenate([pw, ladder[1:]])
    return _fold_kx_grid(geo1, geo2, edges, spec)


def _ky_nodes_delta(omega, kx, period, mbar, gap, spec):
    """ky >= 0 nodes/weights with edges at every retained order's branch point."""
    kc = omega / C_LIGHT
    edges = {0.0}
    for n in range(-mbar, mbar + 1):
        kxn = kx + 2.0 * np.pi * n / period
        if abs(kxn) < kc:
            edges.add(math.sqrt(kc**2 - kxn**2))
    edges = sorted(edges)
    ky_max = math.hypot(spec.tail_kappa / gap, kc)
    ladder = geometric_edges(edges[-1], 0.5 * max(kc, 0.5 / gap), ky_max)
    all_edges = np.concatenate([edges, ladder[1:]])
    return _gl_over_edges(all_edges, spec.ky_nodes)


def _ky_nodes_eq(xi, gap, spec):
    kap_max = spec.tail_kappa / gap
    if xi / C_LIGHT >= kap_max:
        return np.array([]), np.array([])
    ky_max = math.sqrt(kap_max**2 - (xi / C_LIGHT) ** 2)
    scale = 0.25 * max(xi / C_LIGHT, 0.5 / gap)
    cascade = origin_cascade(min(scale, 0.5 * ky_max), spec.origin_levels)
    edges = np.concatenate([cascade, geometric_edges(cascade[-1], cascade[-1], ky_max)[1:]])
    return _gl_over_edges(edges, spec.ky_nodes, max(4, spec.ky_nodes // 2), spec.origin_levels)


def _batch_size(M):
    """Modes per stacked evaluation, bounded so temporaries stay ~100 MB."""
    width = 2 * (2 * M + 1)
    return max(16, min(1024, 400_000 // (width * width)))


def _chunks(total, size):
    for start in range(0, total, size):
        yield slice(start, min(start + size, total))


def _inner_delta(geo1, geo2, thermal, gap, omega, M, mbar, spec, cache, grid_gap=None):
    """Folded wavevector integral of the correction integrand at one omega.

    Returns (value, max_imag_residual, n_modes); the value is
    integral dkx dky (doubled over ky) of the per-mode integrand.
    """
    ggap = grid_gap or gap
    kx_nodes, kx_weights = _kx_nodes_delta(geo1, geo2, omega, ggap, spec)
    kxs, kys, ws = [], [], []
    for kx, wx in zip(kx_nodes, kx_weights):
        ky_nodes, ky_weights = _ky_nodes_delta(omega, kx, geo1.period, mbar, ggap, spec)
        kxs.append(np.full(ky_nodes.size, kx))
        kys.append(ky_nodes)
        ws.append(wx * 2.0 * ky_weights)
    kxs, kys, ws = np.concatenate(kxs), np.concatenate(kys), np.concatenate(ws)

    parts, residual = [], 0.0
    for sl in _chunks(kxs.size, _batch_size(M)):
        ops = gap_operators(geo1, geo2, omega, kxs[sl], kys[sl], M, mbar, gap, cache)
        v, res = delta_integrand(ops, thermal)
        if np.ndim(v) == 0:  # populations dead at this omega
            parts.append(float(v) * float(np.sum(ws[sl])))
        else:
            parts.append(float(np.dot(ws[sl], v)))
            residual = max(residual, float(np.max(res)))
    return math.fsum(parts), residual, kxs.size


def integrate_delta(geo1, geo2, thermal, gap, M, mbar, spec=None, cache=None, grid_gap=None):
    """Two-temperature pressure correction; (value, error, diagnostics).

    Adaptive in frequency: log-spaced Gauss-Kronrod panels over the thermally
    alive window are split at the largest error estimate until the summed
    estimate beats the tolerance or the split budget runs out.  Exactly zero
    (no mode evaluations) at global equilibrium.
    """
    spec = spec or QuadratureSpec()
    if thermal.is_equilibrium:
        return 0.0, 0.0, {"omega_evals": 0, "modes": 0, "max_im_residual": 0.0, "refinements": 0}
    lo, hi = spectral_window(thermal, spec.omega_min, spec.population_rel_cut)

    stats = []  # (modes, residual) per omega node; list.append is thread-safe

    def f_log(u):
        w = math.exp(u)
        val, res, n = _inner_delta(geo1, geo2, thermal, gap, w, M, mbar, spec, cache, grid_gap)
        stats.append((n, res))
        return w * val

    u_edges = np.linspace(math.log(lo), math.log(hi), spec.omega_panels + 1)
    panels = []
    for a, b in zip(u_edges[:-1], u_edges[1:]):
        fv = _parallel_map(f_log, list(gk_nodes(a, b)), spec.workers)
        v, e = gk_reduce(a, b, fv)
        panels.append([a, b, v, e])
    n_omega = 15 * (len(u_edges) - 1)
    refinements = 0
    for _ in range(spec.max_refine):
        total = sum(p[2] for p in panels)
        err = sum(p[3] for p in panels)
        if err <= 0.5 * spec.tolerance * abs(total):
            break
        worst = max(range(len(panels)), key=lambda i: panels[i][3])
        a, b, _, _ = panels.pop(worst)
        mid = 0.5 * (a + b)
        for aa, bb in ((a, mid), (mid, b)):
            fv = _parallel_map(f_log, list(gk_nodes(aa, bb)), spec.workers)
            v, e = gk_reduce(aa, bb, fv)
            panels.append([aa, bb, v, e])
        n_omega += 30
        refinements += 1
    total = sum(p[2] for p in panels)
    err = sum(p[3] for p in panels)
    scale = 1.0 / (2.0 * np.pi) ** 3
    diag = {
        "omega_evals": n_omega,
        "modes": sum(n for n, _ in stats),
        "max_im_residual": max((r for _, r in stats), default=0.0),
        "refinements": refinements,
        "omega_window": (lo, hi),
    }
    return scale * total, scale * err, diag


def _inner_eq(geo1, geo2, gap, xi, M, mbar, spec, cache, grid_gap=None):
    """Wavevector integral of the Matsubara summand at one xi."""
    ggap = grid_gap or gap
    kx_nodes, kx_weights = _kx_nodes_eq(geo1, geo2, xi, ggap, spec)
    ky_nodes, ky_weights = _ky_nodes_eq(xi, ggap, spec)
    if ky_nodes.size == 0:
        return 0.0, 0
    kxs = np.repeat(kx_nodes, ky_nodes.size)
    kys = np.tile(ky_nodes, kx_nodes.size)
    ws = np.repeat(kx_weights, ky_nodes.size) * np.tile(2.0 * ky_weights, kx_nodes.size)

    parts = []
    for sl in _chunks(kxs.size, _batch_size(M)):
        r1p, r2m, kappa = gap_reflections_imag(geo1, geo2, xi, kxs[sl], kys[sl], M, mbar, gap, cache)
        parts.append(float(np.dot(ws[sl], eq_integrand(r1p, r2m, kappa))))
    return math.fsum(parts), kxs.size


def matsubara_eq(geo1, geo2, temperature, gap, M, mbar, spec=None, cache=None, grid_gap=None):
    """Equilibrium pressure of the grating pair; (value, error, diagnostics)."""
    spec = spec or QuadratureSpec()
    scale = 1.0 / (2.0 * np.pi) ** 2
    modes = 0

    if temperature == 0.0:
        xi_max = spec.tail_kappa * C_LIGHT / gap
        edges = geometric_edges(0.0, C_LIGHT / (8.0 * gap), xi_max)
        floor = edges[1] * 1e-8

        def f(xi):
            v, n = _inner_eq(geo1, geo2, gap, max(xi, floor), M, mbar, spec, cache, grid_gap)
            counters.append(n)
            return v

        counters = []
        total, err = 0.0, 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            fv = [f(x) for x in gk_nodes(a, b)]  # modes parallelize inside _inner_eq
            v, e = gk_reduce(a, b, fv)
            total += v
            err += e
        val = HBAR / (2.0 * np.pi) * scale * total
        return val, HBAR / (2.0 * np.pi) * scale * err, {
            "matsubara_terms": 0,
            "modes": sum(counters),
        }

    xi_1 = 2.0 * np.pi * K_B * temperature / HBAR
    total = 0.0
    v, n = _inner_eq(geo1, geo2, gap, spec.xi_floor_factor * xi_1, M, mbar, spec, cache, grid_gap)
    total += 0.5 * v
    modes += n
    n_terms = 1
    below = 0
    last = abs(v)
    for l in range(1, spec.matsubara_max_terms + 1):
        v, n = _inner_eq(geo1, geo2, gap, l * xi_1, M, mbar, spec, cache, grid_gap)
        total += v
        modes += n
        n_terms += 1
        last = abs(v)
        below = below + 1 if last < spec.matsubara_rel_cut * max(abs(total), 1e-300) else 0
        if below >= 2:
            break
    value = K_B * temperature * scale * total
    err = K_B * temperature * scale * last
    return value, err, {"matsubara_terms": n_terms, "modes": modes}


def pressure(geo1, geo2, thermal, gap, spec=None, M=None, mbar=None, cache=None, grid_gap=None):
    """Total pressure between the gratings; negative = attraction.

    Truncation orders are taken from ``convergence_scan`` when not given.
    ``grid_gap`` pins the wavevector grids to a reference distance so sweeps
    and transition searches hit the operator cache at every distance.
    """
    spec = spec or QuadratureSpec()
    if M is None or mbar is None:
        M_scan, mbar_scan, _ = convergence_scan(geo1, geo2, thermal, gap, spec.tolerance, cache=cache)
        M = M_scan if M is None else M
        mbar = mbar_scan if mbar is None else mbar
    if mbar > M:
        raise NeqError(f"mbar = {mbar} exceeds M = {M}")

    eq, err_eq, diag_eq = matsubara_eq(geo1, geo2, thermal.t1, gap, M, mbar, spec, cache, grid_gap)
    delta, err_delta, diag_delta = integrate_delta(
        geo1, geo2, thermal, gap, M, mbar, spec, cache, grid_gap
    )
    diagnostics = {"M": M, "mbar": mbar, "pipeline": "grating"}
    diagnostics.update({f"eq_{k}": v for k, v in diag_eq.items()})
    diagnostics.update({f"delta_{k}": v for k, v in diag_delta.items()})
    return PressureResult.combine(eq, delta, err_eq, err_delta, diagnostics)


def delta_spectrum(geo1, geo2, thermal, gap, omegas, M, mbar, spec=None, cache=None):
    """Frequency density of the correction: rows (omega, d delta / d omega).

    Integrating the density over omega recovers the correction term.
    """
    spec = spec or QuadratureSpec()
    if thermal.is_equilibrium:
        omegas = np.asarray(omegas, dtype=float)
        return np.column_stack([omegas, np.zeros_like(omegas)])
    scale = 1.0 / (2.0 * np.pi) ** 3

    def one(w):
        val, _, _ = _inner_delta(geo1, geo2, thermal, gap, w, M, mbar, spec, cache)
        return scale * val

    values = _parallel_map(one, list(omegas), spec.workers)
    return np.column_stack([np.asarray(omegas, dtype=float), np.array(values)])


def _scan_samples(geo1, geo2, thermal, gap):
    """Representative mode points probing the truncation behaviour."""
    bz = np.pi / geo1.period
    if thermal.is_equilibrium:
        xi_1 = 2.0 * np.pi * K_B * max(thermal.t1, 1.0) / HBAR
        freqs = [("imag", xi_1), ("imag", 5.0 * xi_1)]
    else:
        lo, hi = spectral_window(thermal)
        probe = np.geomspace(lo, hi, 400)
        weight = [
            abs(population_diff(w, thermal.tenv, thermal.t1))
            + abs(population_diff(w, thermal.t2, thermal.t1))
            for w in probe
        ]
        w_peak = probe[int(np.argmax(weight))]
        freqs = [("real", 0.6 * w_peak), ("real", 1.5 * w_peak)]
    samples = []
    for kind, w in freqs:
        kc = (w if kind == "real" else w) / C_LIGHT
        for kx in (0.25 * bz, 0.7 * bz):
            for ky in (0.5 / gap, 0.6 * kc + 0.1 / gap):
                samples.append((kind, w, kx, ky))
    return samples


def convergence_scan(geo1, geo2, thermal, gap, accuracy=1e-2, M_cap=30, cache=None, samples=None):
    """Smallest (M, mbar) stable to ``accuracy`` at representative mode points.

    For each sample the retained-trace tail fixes mbar (smallest block whose
    value agrees with the full trace), then M grows in steps of two until the
    value at that mbar is Cauchy-stable under M -> M + 2.  The returned pair
    is the maximum over samples.  Raises if M_cap is hit, which signals an
    unconverged geometry rather than a numerical bug.
    """
    cache = cache if cache is not None else OperatorCache()
    samples = samples if samples is not None else _scan_samples(geo1, geo2, thermal, gap)

    def value(kind, w, kx, ky, M, mbar):
        if kind == "imag":
            r1p, r2m, kappa = gap_reflections_imag(geo1, geo2, w, kx, ky, M, mbar, gap, cache)
            return eq_integrand(r1p, r2m, kappa)
        ops = gap_operators(geo1, geo2, w, kx, ky, M, mbar, gap, cache)
        return delta_integrand(ops, thermal)[0]

    M_all, mbar_all = 0, 0
    table = []
    for kind, w, kx, ky in samples:
        found = None
        prev_vals = None
        M = 0
        while M <= M_cap:
            vals = [value(kind, w, kx, ky, M, mb) for mb in range(M + 1)]
            scale = max(abs(vals[-1]), 1e-300)
            mbar = next(
                (mb for mb in range(M + 1) if abs(vals[mb] - vals[-1]) <= accuracy * scale),
                M,
            )
            if mbar <= M - 2 and prev_vals is not None and len(prev_vals) > mbar:
                if abs(vals[mbar] - prev_vals[mbar]) <= accuracy * scale:
                    found = (M - 2, mbar)
                    break
            prev_vals = vals
            M += 2
        if found is None:
            raise NeqError(
                f"truncation scan did not converge by M = {M_cap} at mode "
                f"(kind={kind}, omega={w:.3e}, kx={kx:.3e}, ky={ky:.3e})"
            )
        table.append({"kind": kind, "omega": w, "kx": kx, "ky": ky, "M": found[0], "mbar": found[1]})
        M_all = max(M_all, found[0])
        mbar_all = max(mbar_all, found[1])
    return M_all, mbar_all, table


def find_transition(geo1, geo2, thermal, d_lo, d_hi, rel_tol=1e-2, spec=None, M=None, mbar=None, cache=None):
    """Distance where the total pressure changes sign, by bisection.

    The wavevector grids are pinned to d_lo so every bisection step sees the
    same nodes (and, when a cache is supplied, can reuse scattering
    operators).  Raises TransitionError if the bracket does not straddle a
    sign change.
    """
    spec = spec or QuadratureSpec()
    if M is None or mbar is None:
        M, mbar, _ = convergence_scan(geo1, geo2, thermal, d_lo, spec.tolerance, cache=cache)
    grid_gap = d_lo  # the bracket moves below; the grids must not

    def total(d):
        return pressure(geo1, geo2, thermal, d, spec, M, mbar, cache, grid_gap=grid_gap).total

    f_lo, f_hi = total(d_lo), total(d_hi)
    if f_lo == 0.0:
        return d_lo
    if f_hi == 0.0:
        return d_hi
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise TransitionError(
            f"no sign change in [{d_lo:.3e}, {d_hi:.3e}]: P = {f_lo:.3e} .. {f_hi:.3e}"
        )
    while (d_hi - d_lo) > rel_tol * d_lo:
        mid = math.sqrt(d_lo * d_hi)
        f_mid = total(mid)
        if f_mid == 0.0:
            return mid
        if math.copysign(1.0, f_mid) == math.copysign(1.0, f_lo):
            d_lo, f_lo = mid, f_mid
        else:
            d_hi, f_hi = mid, f_mid
    return math.sqrt(d_lo * d_hi)
