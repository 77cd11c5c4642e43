"""Shared result and configuration types for the pressure pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class QuadratureSpec:
    """Tunable knobs of the frequency/wavevector integration.

    The defaults target ~1% relative accuracy on the total pressure for
    micron-scale geometries; ``tolerance`` drives the adaptive refinement of
    the real-frequency integral and the Matsubara tail cut.
    """

    tolerance: float = 1e-2          # relative accuracy goal for each part
    omega_min: float = 1e11          # rad/s; lower edge of the real-axis window
    omega_panels: int = 10           # initial log-spaced frequency panels
    max_refine: int = 40             # frequency panel splits allowed
    kx_panels: int = 2               # uniform Brillouin-zone panels (plus band-edge cuts)
    kx_nodes: int = 8                # Gauss-Legendre nodes per kx panel
    ky_nodes: int = 10               # Gauss-Legendre nodes per ky panel
    tail_kappa: float = 18.0         # stop the evanescent tail once kappa*d exceeds this
    matsubara_rel_cut: float = 1e-10  # relative term size ending the xi sum
    matsubara_max_terms: int = 5000
    population_rel_cut: float = 1e-12  # defines the upper frequency window edge
    xi_floor_factor: float = 1e-4    # l = 0 term evaluated at this fraction of xi_1
    origin_levels: int = 6           # panel cascade depth at the k = 0 cone (eq part)
    workers: int = 1

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class PressureResult:
    """Pressure between the two bodies, negative = attraction (toward each other).

    ``total`` is exactly ``eq + delta``: the equilibrium part evaluated at the
    temperature of body 1 plus the two-temperature correction.  ``error`` is
    the summed quadrature error estimate; ``diagnostics`` carries counters and
    residuals (mode evaluations, Matsubara terms, the largest imaginary trace
    residual, truncation orders used).
    """

    total: float
    eq: float
    delta: float
    error: float
    error_eq: float
    error_delta: float
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def combine(cls, eq, delta, error_eq, error_delta, diagnostics):
        return cls(
            total=eq + delta,
            eq=eq,
            delta=delta,
            error=error_eq + error_delta,
            error_eq=error_eq,
            error_delta=error_delta,
            diagnostics=diagnostics,
        )
