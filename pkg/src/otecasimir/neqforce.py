"""Per-mode pressure integrands for two gratings at independent temperatures.

The configuration is body 1 below (corrugation facing up), body 2 above
(corrugation facing down), separated tip-to-tip by a vacuum gap d, with the
environment radiating at its own temperature.  Everything here works at a
single mode point (omega, kx, ky); the integration layers live elsewhere.

Two integrands are exposed:

* ``eq_integrand`` -- the imaginary-frequency summand of the equilibrium
  (Lifshitz) part, evaluated at omega = i xi from the two gap-side reflection
  operators.
* ``delta_integrand`` -- the real-frequency correction that switches on when
  the three temperatures differ.  It is assembled from products of Hermitian
  one-sided flux operators, so each term's trace is real; the imaginary
  residual is returned as a numerical diagnostic.

Sign convention: both integrands (and everything downstream) report pressure
with negative = attraction, positive = repulsion.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .cache import OperatorCache
from .constants import C_LIGHT, HBAR, K_B
from .fmm import (
    ModeBasis,
    SMatrix,
    assemble_smatrix,
    central_block,
    mirror_smatrix,
    translate_smatrix,
)
from .materials import is_vacuum

__all__ = [
    "NeqError",
    "ThermalState",
    "thermal_occupation",
    "mean_photon_energy",
    "population_diff",
    "spectral_window",
    "body_operators",
    "GapOperators",
    "gap_operators",
    "gap_reflections_imag",
    "delta_integrand",
    "eq_integrand",
]


class NeqError(ValueError):
    """Invalid configuration for the two-temperature pressure formulas."""


@dataclass(frozen=True)
class ThermalState:
    """Temperatures of body 1, body 2 and the surrounding environment (K)."""

    t1: float
    t2: float
    tenv: float

    def __post_init__(self):
        for label, t in (("t1", self.t1), ("t2", self.t2), ("tenv", self.tenv)):
            if t < 0 or not math.isfinite(t):
                raise NeqError(f"temperature {label} must be finite and >= 0, got {t}")

    @property
    def is_equilibrium(self):
        return self.t1 == self.t2 == self.tenv


def thermal_occupation(omega, temperature):
    """Bose occupation 1 / (exp(hbar omega / kT) - 1); zero at T = 0."""
    if temperature == 0.0:
        return 0.0
    x = HBAR * omega / (K_B * temperature)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def mean_photon_energy(omega, temperature):
    """(hbar omega / 2) coth(hbar omega / 2 kT) = hbar omega (1/2 + n)."""
    return HBAR * omega * (0.5 + thermal_occupation(omega, temperature))


def population_diff(omega, t_a, t_b):
    """n(omega, t_a) - n(omega, t_b); exactly 0.0 when the temperatures match."""
    if t_a == t_b:
        return 0.0
    return thermal_occupation(omega, t_a) - thermal_occupation(omega, t_b)


def spectral_window(thermal, omega_min=1e11, rel_cut=1e-12):
    """Frequency window [omega_min, omega_max] supporting the correction term.

    The upper edge is where the combined population weight |n_e1| + |n_21|
    has fallen below rel_cut of its peak; beyond it the integrand is
    exponentially dead.
    """
    if thermal.is_equilibrium:
        raise NeqError("spectral window undefined at global equilibrium")
    probe = np.geomspace(1e10, 1e18, 1600)
    weight = np.array(
        [
            abs(population_diff(w, thermal.tenv, thermal.t1))
            + abs(population_diff(w, thermal.t2, thermal.t1))
            for w in probe
        ]
    )
    peak = weight.max()
    alive = np.nonzero(weight > rel_cut * peak)[0]
    omega_max = probe[min(alive[-1] + 1, len(probe) - 1)]
    if omega_max <= omega_min:
        raise NeqError(
            f"spectral window collapsed: omega_max = {omega_max:.3e} <= omega_min = {omega_min:.3e}"
        )
    return omega_min, float(omega_max)


def body_operators(geometry, omega, kx, ky, M, cache=None, _flip_branch=False):
    """Raw S-matrix of one body (its own frame, gap side below), cached.

    ``kx``/``ky`` may be equal-length arrays, batching the whole assembly
    over one leading axis; a batch is cached as a unit keyed by the exact
    node bytes, so identical grids (pinned across a distance sweep) hit.
    """
    if cache is None:
        basis = ModeBasis(omega, kx, ky, M, geometry.period)
        return assemble_smatrix(basis, geometry, _flip_branch=_flip_branch)
    if np.ndim(kx) == 0:
        where = (float(kx), float(ky))
    else:
        digest = hashlib.sha256()
        digest.update(np.asarray(kx, dtype=float).tobytes())
        digest.update(np.asarray(ky, dtype=float).tobytes())
        where = ("batch", digest.hexdigest())
    key = (
        "smat",
        geometry.cache_token(),
        complex(omega).real,
        complex(omega).imag,
        *where,
        int(M),
        bool(_flip_branch),
    )

    def compute():
        basis = ModeBasis(omega, kx, ky, M, geometry.period)
        return assemble_smatrix(basis, geometry, _flip_branch=_flip_branch)

    return cache.get_or_compute(key, compute)


def _require_vacuum_outside(geometry, label):
    if geometry.semi_infinite:
        return
    if not is_vacuum(geometry.beyond):
        raise NeqError(
            f"the two-temperature formulas need finite {label} to sit in vacuum; "
            f"its far side is {geometry.beyond.name!r}"
        )


@dataclass(frozen=True)
class GapOperators:
    """Gap-referenced scattering blocks of both bodies at one mode point.

    All blocks are restricted to the central 2(2 mbar + 1) sub-basis.  Body 2
    blocks are translated to the actual gap; body 1 sits with its top face at
    z = 0.  ``t2m`` is None for a semi-infinite body 2.
    """

    omega: float
    kz: np.ndarray      # vacuum kz on the retained orders
    pw: np.ndarray      # propagating-sector mask on the retained orders
    r1p: np.ndarray
    t1p: np.ndarray
    t1m: np.ndarray
    r1m: np.ndarray
    r2m: np.ndarray
    t2m: np.ndarray | None


def gap_operators(geo1, geo2, omega, kx, ky, M, mbar, gap, cache=None, _flip_branch=False):
    """Build the operator set entering the two-temperature trace formulas."""
    if geo1.semi_infinite:
        raise NeqError("body 1 (the lower body) must be finite; only body 2 may be semi-infinite")
    if geo1.period != geo2.period:
        raise NeqError("both bodies must share one period")
    _require_vacuum_outside(geo1, "body 1")
    _require_vacuum_outside(geo2, "body 2")
    if gap <= 0:
        raise NeqError(f"gap must be > 0, got {gap}")
    if mbar > M:
        raise NeqError(f"central width mbar = {mbar} exceeds truncation M = {M}")
    omega = complex(omega)
    if omega.imag != 0.0 or omega.real <= 0.0:
        raise NeqError("the two-temperature integrand lives at real positive frequency")
    omega = omega.real

    basis = ModeBasis(omega, kx, ky, M, geo1.period)
    keep = np.arange(M - mbar, M + mbar + 1)
    kz = basis.kz(1.0)[..., keep]
    pw = basis.kn[..., keep] < abs(basis.k0)

    s1 = mirror_smatrix(body_operators(geo1, omega, kx, ky, M, cache, _flip_branch))
    r1p = central_block(s1.r_plus, M, mbar)
    t1p = central_block(s1.t_plus, M, mbar)
    t1m = central_block(s1.t_minus, M, mbar)
    r1m = central_block(s1.r_minus, M, mbar)

    s2 = body_operators(geo2, omega, kx, ky, M, cache, _flip_branch)
    if s2.semi_infinite:
        s2c = SMatrix(central_block(s2.r_minus, M, mbar))
    else:
        s2c = SMatrix(*(central_block(b, M, mbar) for b in s2.blocks()))
    s2t = translate_smatrix(s2c, kz, gap)
    r2m = s2t.r_minus
    t2m = None if s2t.semi_infinite else s2t.t_minus

    return GapOperators(
        omega=omega,
        kz=kz,
        pw=pw,
        r1p=r1p,
        t1p=t1p,
        t1m=t1m,
        r1m=r1m,
        r2m=r2m,
        t2m=t2m,
    )


def _flux_weights(kz, pw):
    """Diagonal weights kz^n split into propagating/evanescent sectors."""
    kz2 = np.tile(kz, 2)
    pw2 = np.tile(pw, 2)
    pm1_pw = np.where(pw2, 1.0 / kz2, 0.0)
    pm1_ew = np.where(pw2, 0.0, 1.0 / kz2)
    p2_pw = np.where(pw2, kz2**2, 0.0)
    p2_ew = np.where(pw2, 0.0, kz2**2)
    return pm1_pw, pm1_ew, p2_pw, p2_ew


def _H(a):
    """Conjugate transpose on the last two axes."""
    return np.swapaxes(a.conj(), -1, -2)


def _bdiag(v):
    """Diagonal matrix (batched) from the last axis of v."""
    return v[..., :, None] * np.eye(v.shape[-1], dtype=v.dtype)


def _f_emit(r, pm1_pw, pm1_ew):
    """P^pw_{-1} - R P^pw_{-1} R^+ + R P^ew_{-1} - P^ew_{-1} R^+ (emission-side)."""
    rh = _H(r)
    return (
        _bdiag(pm1_pw)
        - (r * pm1_pw[..., None, :]) @ rh
        + r * pm1_ew[..., None, :]
        - pm1_ew[..., :, None] * rh
    )


def _f_absorb(r, p2_pw, p2_ew):
    """P^pw_2 + R^+ P^pw_2 R + R^+ P^ew_2 + P^ew_2 R (absorption-side)."""
    rh = _H(r)
    return (
        _bdiag(p2_pw)
        + rh @ (p2_pw[..., :, None] * r)
        + rh * p2_ew[..., None, :]
        + p2_ew[..., :, None] * r
    )


def delta_integrand(ops, thermal):
    """Two-temperature pressure integrand at one real-frequency mode point.

    Returns (value, imag_residual): the value is
    +hbar tr{n_e1 (A1 + A2 + A3) + n_21 B} -- oriented so that in the
    attraction-negative convention pure radiation from a hot far body comes
    out repulsive (positive) -- and integrating it over
    d omega dkx dky / (2 pi)^3 gives the pressure correction directly.  The
    residual is |Im tr| / |tr|, which vanishes analytically.
    """
    omega = ops.omega
    n_e1 = population_diff(omega, thermal.tenv, thermal.t1)
    n_21 = population_diff(omega, thermal.t2, thermal.t1)
    if n_e1 == 0.0 and n_21 == 0.0:
        return 0.0, 0.0

    pm1_pw, pm1_ew, p2_pw, p2_ew = _flux_weights(ops.kz, ops.pw)
    r1p, r2m = ops.r1p, ops.r2m
    n = r1p.shape[-1]
    eye = np.eye(n, dtype=complex)
    u12 = np.linalg.solve(eye - r1p @ r2m, np.broadcast_to(eye, r1p.shape).copy())
    u21 = np.linalg.solve(eye - r2m @ r1p, np.broadcast_to(eye, r1p.shape).copy())

    # environment flux through body 1 from below: f_2(R1+) - T1-^+ P2^pw T1-
    w1 = _f_absorb(r1p, p2_pw, p2_ew) - _H(ops.t1m) @ (p2_pw[..., :, None] * ops.t1m)

    bracket = np.zeros(r1p.shape, dtype=complex)
    if n_e1 != 0.0:
        # A2: environment photons entering through body 1
        tpt = (ops.t1p * pm1_pw[..., None, :]) @ _H(ops.t1p)
        a2 = (u12 @ tpt @ _H(u12) - _bdiag(pm1_pw)) @ _f_absorb(r2m, p2_pw, p2_ew)
        # A3: environment photons reflected off the pair from below
        r12 = ops.r1m + ops.t1m @ u21 @ r2m @ ops.t1p
        a3 = (
            (r2m * pm1_pw[..., None, :]) @ _H(r2m) - (r12 * pm1_pw[..., None, :]) @ _H(r12)
        ) * p2_pw[..., None, :]
        bracket += n_e1 * (a2 + a3)
        if ops.t2m is not None:
            # A1: environment photons entering through body 2
            a1 = u21 @ (ops.t2m * pm1_pw[..., None, :]) @ _H(ops.t2m) @ _H(u21) @ w1
            bracket += n_e1 * a1
    if n_21 != 0.0:
        # B: exchange between the bodies (emission of 2, absorption through 1)
        emit2 = _f_emit(r2m, pm1_pw, pm1_ew)
        if ops.t2m is not None:
            emit2 = emit2 - (ops.t2m * pm1_pw[..., None, :]) @ _H(ops.t2m)
        bracket += n_21 * (u21 @ emit2 @ _H(u21) @ w1)

    tr = np.trace(bracket, axis1=-2, axis2=-1)
    value = HBAR * tr.real
    residual = np.abs(tr.imag) / np.maximum(np.abs(tr), 1e-300)
    if np.ndim(value) == 0:
        return float(value), float(residual)
    return value, residual


def gap_reflections_imag(geo1, geo2, xi, kx, ky, M, mbar, gap, cache=None):
    """Gap-side reflection operators and kappa at omega = i xi (Matsubara axis)."""
    if geo1.semi_infinite:
        raise NeqError("body 1 (the lower body) must be finite; only body 2 may be semi-infinite")
    if geo1.period != geo2.period:
        raise NeqError("both bodies must share one period")
    if mbar > M:
        raise NeqError(f"central width mbar = {mbar} exceeds truncation M = {M}")
    omega = 1j * xi
    basis = ModeBasis(omega, kx, ky, M, geo1.period)
    kz = basis.kz(1.0)[..., np.arange(M - mbar, M + mbar + 1)]

    s1 = mirror_smatrix(body_operators(geo1, omega, kx, ky, M, cache))
    r1p = central_block(s1.r_plus, M, mbar)
    s2 = body_operators(geo2, omega, kx, ky, M, cache)
    r2m = central_block(s2.r_minus, M, mbar)
    phase = np.tile(np.exp(1j * kz * gap), 2)
    r2m = phase[..., :, None] * r2m * phase[..., None, :]
    kappa = kz.imag.copy()
    return r1p, r2m, kappa


def eq_integrand(r1p, r2m, kappa):
    """Equilibrium Matsubara summand -tr[K (U12 R1 R2 + U21 R2 R1)].

    K = diag(kappa) over both polarization blocks.  Summed over l (weight 1/2
    at l = 0) and integrated over dkx dky / (2 pi)^2 times k_B T, this gives
    the equilibrium pressure, negative = attraction.  Batched inputs return
    one value per mode point.
    """
    kap2 = np.tile(kappa, 2)
    x = r1p @ r2m
    y = r2m @ r1p
    eye = np.eye(x.shape[-1], dtype=complex)
    ux = np.linalg.solve(eye - x, x)
    uy = np.linalg.solve(eye - y, y)
    diag_sum = np.diagonal(ux, axis1=-2, axis2=-1) + np.diagonal(uy, axis1=-2, axis2=-1)
    tr = np.sum(kap2 * diag_sum, axis=-1)
    return -tr.real if tr.ndim else float(-tr.real)
