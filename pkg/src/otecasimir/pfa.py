"""Planar (specular) pressure pipeline and the proximity-force combination.

Layered-media reflection and transmission amplitudes come from the
interface-by-interface recursion (no growing exponentials), giving the
equilibrium pressure as a Matsubara sum and the two-temperature correction
from the scalar per-polarization flux formulas.  This pipeline shares no
linear algebra with the modal solver, so it doubles as an independent check
of the grating code in the uniform limit.

The proximity-force estimate for a pair of aligned lamellar gratings splits
the unit cell into its filled fraction f (two tooth stacks, gap d) and open
fraction 1 - f (backing slabs only, gap d + h1 + h2) and averages the two
planar pressures with weights f and 1 - f.

Sign convention everywhere: negative = attraction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT, HBAR, K_B
from .fmm import branch_sqrt
from .materials import VACUUM, eps_at, is_vacuum
from .neqforce import NeqError, population_diff, spectral_window
from .panels import adaptive_gk, geometric_edges, gk_fixed
from .results import PressureResult, QuadratureSpec

__all__ = [
    "PfaError",
    "PlanarBody",
    "SlabPair",
    "fresnel",
    "planar_rt",
    "lifshitz_matsubara",
    "planar_eq_pressure",
    "planar_delta_pressure",
    "slab_pressure",
    "pfa_pressure",
]


class PfaError(ValueError):
    """Invalid input to the planar or proximity-force pipeline."""


def fresnel(pol, eps_a, eps_b, kza, kzb):
    """Single-interface amplitudes (r, t) for incidence from medium a.

    TM amplitudes are normalized like the modal basis (fields carry
    1/sqrt(eps)), which keeps |t|^2 flux-meaningful with weight kz alone.
    """
    if pol == "TE":
        den = kza + kzb
        return (kza - kzb) / den, 2.0 * kza / den
    den = eps_b * kza + eps_a * kzb
    r = (eps_b * kza - eps_a * kzb) / den
    t = 2.0 * np.sqrt(eps_a * eps_b) * kza / den
    return r, t


@dataclass(frozen=True)
class PlanarBody:
    """Laterally uniform stack, listed from the gap face outward.

    ``back`` is the half-space behind the last layer: vacuum for a suspended
    body, anything else makes the body semi-infinite.
    """

    layers: tuple = ()
    back: object = VACUUM

    def __post_init__(self):
        for mat, th in self.layers:
            if th < 0 or not math.isfinite(th):
                raise PfaError(f"layer thickness must be finite and >= 0, got {th}")
        object.__setattr__(self, "layers", tuple((m, float(t)) for m, t in self.layers))

    @property
    def semi_infinite(self):
        return not is_vacuum(self.back)


@dataclass(frozen=True)
class SlabPair:
    """Two homogeneous parallel slabs; thickness2 = None means a half-space."""

    material1: object
    thickness1: float
    material2: object
    thickness2: float | None
    gap: float

    def __post_init__(self):
        if self.thickness1 <= 0 or not math.isfinite(self.thickness1):
            raise PfaError(f"thickness1 must be finite and > 0, got {self.thickness1}")
        if self.thickness2 is not None and (self.thickness2 <= 0 or not math.isfinite(self.thickness2)):
            raise PfaError(f"thickness2 must be finite and > 0 (or None), got {self.thickness2}")
        if self.gap <= 0:
            raise PfaError(f"gap must be > 0, got {self.gap}")

    def bodies(self):
        body1 = PlanarBody(layers=((self.material1, self.thickness1),))
        if self.thickness2 is None:
            body2 = PlanarBody(layers=(), back=self.material2)
        else:
            body2 = PlanarBody(layers=((self.material2, self.thickness2),))
        return body1, body2


def planar_rt(body, pol, omega, k):
    """(r_front, t, r_back) of a stack at one (omega, k); omega real or i xi.

    r_front is seen from the gap face, r_back from the far side, t through
    the whole stack (equal in both directions for these reciprocal stacks).
    All amplitudes are referenced at the faces.
    """
    media = [1.0 + 0.0j] + [eps_at(m, omega) for m, _ in body.layers] + [eps_at(body.back, omega)]
    ths = [t for _, t in body.layers]
    k0sq = (complex(omega) / C_LIGHT) ** 2
    kz = [branch_sqrt(e * k0sq - k * k) for e in media]

    def cascade(media, kz, ths):
        last = len(media) - 2  # index of the last interface
        r_acc, t_acc = fresnel(pol, media[last], media[last + 1], kz[last], kz[last + 1])
        for i in range(last - 1, -1, -1):
            rho, tau = fresnel(pol, media[i], media[i + 1], kz[i], kz[i + 1])
            ph = np.exp(1j * kz[i + 1] * ths[i])
            den = 1.0 + rho * r_acc * ph * ph
            r_acc = (rho + r_acc * ph * ph) / den
            t_acc = tau * ph * t_acc / den
        return r_acc, t_acc

    if not body.layers and is_vacuum(body.back):
        one = 1.0 + 0.0j
        return 0.0 + 0.0j, one, 0.0 + 0.0j

    r_front, t = cascade(media, kz, ths)
    r_back, _ = cascade(media[::-1], kz[::-1], ths[::-1])
    return r_front, t, r_back


def _eq_k_integral(r1_fn, r2_fn, xi, gap, spec):
    """(1/2pi) integral k dk sum_p of the Matsubara summand at one xi."""
    kap_max = spec.tail_kappa / gap
    if xi / C_LIGHT >= kap_max:
        return 0.0, 0.0
    kmax = math.sqrt(kap_max**2 - (xi / C_LIGHT) ** 2)
    scale = max(xi / C_LIGHT, 0.5 / gap)
    edges = geometric_edges(0.0, 0.25 * scale, kmax)

    def f(k):
        kappa = math.hypot(k, xi / C_LIGHT)
        damp = math.exp(-2.0 * kappa * gap)
        acc = 0.0
        for pol in ("TE", "TM"):
            x = complex(r1_fn(pol, xi, k)) * complex(r2_fn(pol, xi, k)) * damp
            acc += (-2.0 * kappa * (x / (1.0 - x))).real
        return k * acc

    val, err = gk_fixed(f, edges)
    return val / (2.0 * np.pi), err / (2.0 * np.pi)


def lifshitz_matsubara(r1_fn, r2_fn, temperature, gap, spec=None):
    """Equilibrium pressure from injectable reflection functions (pol, xi, k) -> r.

    At T > 0 this is the Matsubara sum k_B T sum' over xi_l = 2 pi l k_B T /
    hbar (the l = 0 term taken at a small positive xi); at T = 0 it becomes
    (hbar / 2 pi) times the xi integral.  Returns (value, error, n_terms).
    """
    spec = spec or QuadratureSpec()
    if temperature < 0:
        raise PfaError(f"temperature must be >= 0, got {temperature}")

    if temperature == 0.0:
        xi_max = spec.tail_kappa * C_LIGHT / gap
        base = geometric_edges(0.0, C_LIGHT / (8.0 * gap), xi_max)
        marks = [w for w in (1e13, 1e14, 1e15, 1e16, 1e17) if base[0] < w < xi_max]
        edges = np.unique(np.concatenate([base, marks]))
        # the xi -> 0 end is finite; evaluate at a tiny floor instead of 0
        floor = edges[1] * 1e-8

        def f(xi):
            return _eq_k_integral(r1_fn, r2_fn, max(xi, floor), gap, spec)[0]

        val, err, n_evals = adaptive_gk(f, edges, 0.1 * spec.tolerance, max_splits=40)
        return HBAR / (2.0 * np.pi) * val, HBAR / (2.0 * np.pi) * err, n_evals

    xi_1 = 2.0 * np.pi * K_B * temperature / HBAR
    total = 0.0
    err_total = 0.0
    val, err = _eq_k_integral(r1_fn, r2_fn, spec.xi_floor_factor * xi_1, gap, spec)
    total += 0.5 * val
    err_total += 0.5 * err
    n_terms = 1
    below = 0
    for l in range(1, spec.matsubara_max_terms + 1):
        val, err = _eq_k_integral(r1_fn, r2_fn, l * xi_1, gap, spec)
        total += val
        err_total += err
        n_terms += 1
        below = below + 1 if abs(val) < spec.matsubara_rel_cut * max(abs(total), 1e-300) else 0
        if below >= 2:
            break
    else:
        warnings.warn("Matsubara sum hit its term cap before converging", RuntimeWarning)
    tail_guard = abs(val)
    return K_B * temperature * total, K_B * temperature * (err_total + tail_guard), n_terms


def _body_r_fn(body):
    return lambda pol, xi, k: planar_rt(body, pol, 1j * xi, k)[0]


def planar_eq_pressure(body1, body2, temperature, gap, spec=None):
    """Equilibrium pressure between two stacks; (value, error, n_terms)."""
    return lifshitz_matsubara(_body_r_fn(body1), _body_r_fn(body2), temperature, gap, spec)


def _delta_mode(body1, body2, thermal, gap, omega, k, n_e1, n_21):
    """Scalar two-temperature integrand summed over polarizations (one k).

    Oriented like the modal integrand: positive = repulsive, so a hot far
    body radiating onto a cold near one pushes them apart.
    """
    kz = complex(branch_sqrt(((omega / C_LIGHT) ** 2) - k * k))
    pw = k < omega / C_LIGHT
    acc = 0.0
    for pol in ("TE", "TM"):
        r1p, t1, r1m = planar_rt(body1, pol, omega, k)
        r2_raw, t2_raw, _ = planar_rt(body2, pol, omega, k)
        ph = np.exp(1j * kz * gap)
        r2 = r2_raw * ph * ph
        u = 1.0 / (1.0 - r1p * r2)
        if pw:
            kzr = kz.real
            t2 = 0.0 if body2.semi_infinite else t2_raw * ph
            absorb1 = 1.0 + abs(r1p) ** 2 - abs(t1) ** 2
            a2 = kzr * (abs(u * t1) ** 2 - 1.0) * (1.0 + abs(r2) ** 2)
            r12 = r1m + t1 * u * r2 * t1
            a3 = kzr * (abs(r2) ** 2 - abs(r12) ** 2)
            b = kzr * abs(u) ** 2 * (1.0 - abs(r2) ** 2 - abs(t2) ** 2) * absorb1
            a1 = kzr * abs(u * t2) ** 2 * absorb1
            acc += n_e1 * (a1 + a2 + a3) + n_21 * b
        else:
            kappa = kz.imag
            b = -4.0 * kappa * abs(u) ** 2 * r2.imag * r1p.real
            acc += n_21 * b
    return HBAR * acc


def planar_delta_pressure(body1, body2, thermal, gap, spec=None):
    """Two-temperature pressure correction between two stacks; (value, error).

    Vanishes identically (and is short-circuited to exactly 0.0) at global
    equilibrium.
    """
    spec = spec or QuadratureSpec()
    if thermal.is_equilibrium:
        return 0.0, 0.0
    if body1.semi_infinite:
        raise PfaError("body 1 (the lower body) must be finite")
    lo, hi = spectral_window(thermal, spec.omega_min, spec.population_rel_cut)

    def inner(omega):
        n_e1 = population_diff(omega, thermal.tenv, thermal.t1)
        n_21 = population_diff(omega, thermal.t2, thermal.t1)
        if n_e1 == 0.0 and n_21 == 0.0:
            return 0.0
        kc = omega / C_LIGHT
        pw_edges = kc * np.array([0.0, 0.3, 0.6, 0.8, 0.9, 0.96, 0.99, 1.0])
        kmax = math.hypot(spec.tail_kappa / gap, kc)
        ew_edges = geometric_edges(kc, 0.25 * max(kc, 0.5 / gap), kmax)

        def f(k):
            return k * _delta_mode(body1, body2, thermal, gap, omega, k, n_e1, n_21)

        v1, _ = gk_fixed(f, pw_edges)
        v2, _ = gk_fixed(f, ew_edges)
        return (v1 + v2) / (4.0 * np.pi**2)

    u_edges = np.linspace(math.log(lo), math.log(hi), spec.omega_panels + 1)

    def f_log(u):
        w = math.exp(u)
        return w * inner(w)

    val, err, _ = adaptive_gk(f_log, u_edges, 0.3 * spec.tolerance, max_splits=spec.max_refine)
    return val, err


def slab_pressure(pair, thermal, spec=None):
    """Pressure between two homogeneous slabs at temperatures (t1, t2) in an
    environment at tenv; same contract as the grating pipeline but through
    the dedicated specular path."""
    spec = spec or QuadratureSpec()
    body1, body2 = pair.bodies()
    eq, err_eq, n_terms = planar_eq_pressure(body1, body2, thermal.t1, pair.gap, spec)
    delta, err_delta = planar_delta_pressure(body1, body2, thermal, pair.gap, spec)
    return PressureResult.combine(
        eq, delta, err_eq, err_delta, {"matsubara_terms": n_terms, "pipeline": "planar"}
    )


def _grating_stack(geometry, filled):
    """PlanarBody for one grating branch: tooth layer kept or removed."""
    layers = []
    if filled and geometry.depth > 0:
        layers.append((geometry.ridge, geometry.depth))
    if geometry.semi_infinite:
        return PlanarBody(layers=tuple(layers), back=geometry.backing)
    if geometry.thickness > 0:
        layers.append((geometry.backing, geometry.thickness))
    if not is_vacuum(geometry.beyond):
        raise PfaError("finite bodies must sit in vacuum")
    return PlanarBody(layers=tuple(layers))


def check_pfa_applies(geo1, geo2):
    """Raise PfaError unless the lateral proximity average is defined."""
    if geo1.period != geo2.period:
        raise PfaError("proximity-force average needs equal periods")
    if geo1.filling != geo2.filling:
        raise PfaError("proximity-force average needs equal filling fractions")
    if geo1.shift != geo2.shift:
        raise PfaError("proximity-force average needs aligned ridges (equal shifts)")
    if geo1.semi_infinite:
        raise PfaError("body 1 (the lower body) must be finite")
    if not geo1.semi_infinite and not is_vacuum(geo1.beyond):
        raise PfaError("finite bodies must sit in vacuum")
    if not geo2.semi_infinite and not is_vacuum(geo2.beyond):
        raise PfaError("finite bodies must sit in vacuum")


def pfa_pressure(geo1, geo2, thermal, gap, spec=None):
    """Proximity-force estimate for two aligned lamellar gratings.

    Requires equal periods, filling fractions and lateral offsets (so the
    filled fractions face each other).  Lateral averaging then weights the
    tooth-to-tooth channel by f at gap d and the groove-to-groove channel by
    1 - f at gap d + h1 + h2.
    """
    spec = spec or QuadratureSpec()
    check_pfa_applies(geo1, geo2)
    f = geo1.filling

    results = {}
    for label, filled in (("filled", True), ("open", False)):
        body1 = _grating_stack(geo1, filled)
        body2 = _grating_stack(geo2, filled)
        gap_eff = gap if filled else gap + geo1.depth + geo2.depth
        eq, err_eq, n_terms = planar_eq_pressure(body1, body2, thermal.t1, gap_eff, spec)
        delta, err_delta = planar_delta_pressure(body1, body2, thermal, gap_eff, spec)
        results[label] = PressureResult.combine(
            eq, delta, err_eq, err_delta, {"matsubara_terms": n_terms, "gap": gap_eff}
        )

    filled_res, open_res = results["filled"], results["open"]
    diagnostics = {
        "pipeline": "pfa",
        "filled_total": filled_res.total,
        "open_total": open_res.total,
        "filling": f,
    }
    return PressureResult.combine(
        f * filled_res.eq + (1.0 - f) * open_res.eq,
        f * filled_res.delta + (1.0 - f) * open_res.delta,
        f * filled_res.error_eq + (1.0 - f) * open_res.error_eq,
        f * filled_res.error_delta + (1.0 - f) * open_res.error_delta,
        diagnostics,
    )
