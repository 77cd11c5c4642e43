"""Self-check suite behind the ``validate`` subcommand.

Each check is a fast, deterministic probe of one load-bearing property:
algebraic identities of the scattering composition, energy conservation of
lossless gratings (with a deliberately tampered run as a negative control),
reduction of the modal solver to textbook planar coefficients, exact nulls at
global equilibrium, the ideal-mirror Lifshitz limit, the dispersion-relation
round trip for tabulated permittivities, and byte-identity of CSV output with
the operator cache on and off.
"""

from __future__ import annotations

import math
import sys

import numpy as np

from .cache import OperatorCache
from .config import parse_config
from .constants import C_LIGHT, HBAR
from .fmm import (
    ModeBasis,
    assemble_smatrix,
    diffraction_efficiencies,
    identity_smatrix,
    star,
)
from .geometry import GratingGeometry
from .materials import OscillatorModel, TabulatedIndex, get_material
from .neqforce import ThermalState, delta_integrand, gap_operators
from .pfa import PlanarBody, lifshitz_matsubara, planar_rt

_LOSSLESS = OscillatorModel(name="eps4", eps_inf=4.0)
_SILICA = get_material("silica-model")
_SILICON = get_material("silicon-model")


def _rand_contractive(rng, n):
    """Random 4-block scatterer with spectral radius safely below 1."""
    blocks = []
    for _ in range(4):
        m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        blocks.append(0.6 * m / max(1.0, np.linalg.norm(m, 2)))
    return tuple(blocks)


def check_star_identity(rng):
    """Composing with the identity scatterer leaves any block untouched."""
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        s = _rand_contractive(rng, n)
        eye = identity_smatrix(n)
        for combined in (star(s, eye), star(eye, s)):
            worst = max(
                worst, max(np.max(np.abs(a - b)) for a, b in zip(combined, s))
            )
    return worst < 1e-12, f"max identity defect {worst:.2e}"


def check_star_associativity(rng):
    """(A * B) * C equals A * (B * C) on random contractive triples."""
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        a, b, c = (_rand_contractive(rng, n) for _ in range(3))
        left = star(star(a, b), c)
        right = star(a, star(b, c))
        worst = max(worst, max(np.max(np.abs(x - y)) for x, y in zip(left, right)))
    return worst < 1e-12, f"max associativity defect {worst:.2e}"


def _energy_defect(rng, flip_branch):
    geo = GratingGeometry(
        period=1.0e-6, depth=0.4e-6, thickness=0.3e-6, filling=0.5, ridge=_LOSSLESS
    )
    omega = 2.0 * np.pi * C_LIGHT / 0.8e-6
    worst = 0.0
    for _ in range(6):
        kx = float(rng.uniform(-0.9, 0.9)) * np.pi / geo.period
        ky = float(rng.uniform(0.0, 0.8)) * omega / C_LIGHT
        basis = ModeBasis(omega, kx, ky, 8, geo.period)
        smat = assemble_smatrix(basis, geo, _flip_branch=flip_branch)
        for pol in ("TE", "TM"):
            r_eff, t_eff = diffraction_efficiencies(smat, basis, 1.0, 1.0, pol, 0)
            worst = max(worst, abs(float(np.sum(r_eff) + np.sum(t_eff)) - 1.0))
    return worst


def check_energy_conservation(rng):
    """A lossless grating scatters exactly unit power across all orders."""
    worst = _energy_defect(rng, flip_branch=False)
    return worst < 1e-8, f"max efficiency-sum defect {worst:.2e}"


def check_tamper_control(rng):
    """Negative control: flipping the eigenvalue branch must break energy conservation."""
    import warnings

    from .fmm import ConditionWarning

    # the flipped branch grows exponentially through the layers, so the
    # feedback solves are expected to go ill-conditioned here
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditionWarning)
        worst = _energy_defect(rng, flip_branch=True)
    return worst > 1e-6, f"tampered efficiency-sum defect {worst:.2e} (must be large)"


def check_uniform_vs_planar(rng):
    """A filled grating (f = 1) reproduces the planar stack amplitudes."""
    geo = GratingGeometry(
        period=1.0e-6, depth=0.6e-6, thickness=1.4e-6, filling=1.0, ridge=_SILICA
    )
    body = PlanarBody(layers=((_SILICA, geo.depth), (_SILICA, geo.thickness)))
    worst = 0.0
    for omega in (2.0e14, 1.2e15):
        for frac in (0.2, 0.7):
            k = frac * omega / C_LIGHT
            basis = ModeBasis(omega, 0.0, k, 3, geo.period)
            smat = assemble_smatrix(basis, geo)
            j_te, j_tm = 3, 2 * 3 + 1 + 3
            for pol, j in (("TE", j_te), ("TM", j_tm)):
                r_ref, t_ref, _ = planar_rt(body, pol, omega, k)
                worst = max(worst, abs(smat.r_minus[j, j] - r_ref))
                worst = max(worst, abs(smat.t_plus[j, j] - t_ref))
    return worst < 1e-10, f"max planar-reduction defect {worst:.2e}"


def check_semi_infinite_fresnel(rng):
    """A semi-infinite uniform body reduces to the single-interface amplitude."""
    geo = GratingGeometry(
        period=1.0e-6, depth=0.0, thickness=None, filling=1.0, ridge=_SILICON
    )
    body = PlanarBody(back=_SILICON)
    worst = 0.0
    for omega in (3.0e14, 2.0e15):
        for frac in (0.1, 0.85):
            k = frac * omega / C_LIGHT
            basis = ModeBasis(omega, 0.0, k, 2, geo.period)
            smat = assemble_smatrix(basis, geo)
            j_te, j_tm = 2, 2 * 2 + 1 + 2
            for pol, j in (("TE", j_te), ("TM", j_tm)):
                r_ref, _, _ = planar_rt(body, pol, omega, k)
                worst = max(worst, abs(smat.r_minus[j, j] - r_ref))
    return worst < 1e-10, f"max Fresnel defect {worst:.2e}"


def check_equilibrium_null(rng):
    """The two-temperature integrand vanishes identically at equilibrium."""
    geo1 = GratingGeometry(
        period=1.0e-6, depth=0.5e-6, thickness=1.0e-6, filling=0.5, ridge=_SILICA
    )
    geo2 = GratingGeometry(
        period=1.0e-6, depth=0.3e-6, thickness=None, filling=0.4, ridge=_SILICON
    )
    thermal = ThermalState(300.0, 300.0, 300.0)
    worst = 0.0
    for _ in range(5):
        omega = float(rng.uniform(5e13, 5e14))
        kx = float(rng.uniform(-1.0, 1.0)) * np.pi / geo1.period
        ky = float(rng.uniform(0.0, 2.0)) * omega / C_LIGHT
        ops = gap_operators(geo1, geo2, omega, kx, ky, 3, 2, 3.0e-6)
        value, _ = delta_integrand(ops, thermal)
        worst = max(worst, abs(value))
    return worst == 0.0, f"max |integrand| at equilibrium {worst:.2e} (must be exactly 0)"


def check_ideal_mirror_lifshitz(rng):
    """Perfect mirrors at T = 0 give the closed-form inverse-quartic pressure."""
    gap = 1.0e-6

    def mirror(pol, xi, k):
        return 1.0 if pol == "TM" else -1.0

    value, err, _ = lifshitz_matsubara(mirror, mirror, 0.0, gap)
    ideal = -math.pi**2 * HBAR * C_LIGHT / (240.0 * gap**4)
    rel = abs(value - ideal) / abs(ideal)
    return rel < 1e-6, f"ideal-mirror deviation {rel:.2e} (quoted error {err:.2e})"


def check_kk_round_trip(rng):
    """Imaginary-axis permittivity from tabulated loss matches the model."""
    model = _SILICA
    omega = np.geomspace(1e11, 1e18, 4000)
    eps = model.eps(omega)
    table = TabulatedIndex(
        name="kk-probe", omega=omega, eps_re=eps.real, eps_im=eps.imag, extend=True
    )
    worst = 0.0
    for xi in (1e13, 1e14, 1e15):
        exact = model.eps_imag_axis(xi)
        via_kk = table.eps_imag_axis(xi)
        worst = max(worst, abs(via_kk - exact) / abs(exact - 1.0))
    return worst < 2e-2, f"max dispersion-integral deviation {worst:.2e}"


_CACHE_CHECK_CONFIG = """
gap: 2.0e-6
thermal: {t1: 300.0, t2: 300.0, tenv: 300.0}
grating1:
  period: 1.0e-6
  depth: 0.5e-6
  thickness: 1.0e-6
  filling: 0.5
  ridge: silica-model
grating2:
  period: 1.0e-6
  depth: 0.5e-6
  thickness: null
  filling: 0.5
  ridge: silicon-model
quadrature:
  tolerance: 1.0e-2
  kx_nodes: 4
  ky_nodes: 4
  origin_levels: 2
  tail_kappa: 8.0
  matsubara_rel_cut: 1.0e-6
truncation: {mode: fixed, M: 2, mbar: 1}
"""


def check_cache_transparency(rng):
    """Enabling the operator cache leaves the CSV output byte-identical."""
    from .cli import _render_csv, pressure_rows

    cfg = parse_config(_CACHE_CHECK_CONFIG)
    outputs = []
    for cache in (None, OperatorCache()):
        columns, rows = pressure_rows(cfg, cache, include_timing=False)
        outputs.append(_render_csv(cfg, "pressure", columns, rows, cfg.output.precision))
    return outputs[0] == outputs[1], (
        "cache on/off CSV bytes identical"
        if outputs[0] == outputs[1]
        else "cache on/off CSV bytes differ"
    )


CHECKS = [
    ("star-identity", check_star_identity),
    ("star-associativity", check_star_associativity),
    ("energy-conservation", check_energy_conservation),
    ("tamper-negative-control", check_tamper_control),
    ("uniform-vs-planar", check_uniform_vs_planar),
    ("semi-infinite-fresnel", check_semi_infinite_fresnel),
    ("equilibrium-null", check_equilibrium_null),
    ("ideal-mirror-lifshitz", check_ideal_mirror_lifshitz),
    ("dispersion-round-trip", check_kk_round_trip),
    ("cache-transparency", check_cache_transparency),
]


def run_checks(stream=None):
    """Run every check; print one [PASS]/[FAIL] line each; return failures."""
    stream = stream if stream is not None else sys.stdout
    failures = []
    for name, fn in CHECKS:
        rng = np.random.default_rng(20260814)
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        tag = "PASS" if ok else "FAIL"
        print(f"[{tag}] {name}: {detail}", file=stream)
        if not ok:
            failures.append(name)
    if failures:
        print(f"{len(failures)} of {len(CHECKS)} checks failed", file=stream)
    else:
        print(f"all {len(CHECKS)} checks passed", file=stream)
    return failures
