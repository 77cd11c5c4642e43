"""Thermal populations, gap operator assembly and the two-temperature trace.

The key cross-check here is the specular reduction: at filling 1 and a
single retained order the modal trace integrand must collapse, term by
term, onto the scalar two-temperature integrand of the planar pipeline.
"""

import math

import numpy as np
import pytest

from otecasimir.cache import OperatorCache
from otecasimir.constants import C_LIGHT, HBAR, K_B
from otecasimir.geometry import GratingGeometry
from otecasimir.materials import VACUUM
from otecasimir.neqforce import (
    NeqError,
    ThermalState,
    body_operators,
    delta_integrand,
    eq_integrand,
    gap_operators,
    gap_reflections_imag,
    mean_photon_energy,
    population_diff,
    spectral_window,
    thermal_occupation,
)
from otecasimir.pfa import _delta_mode, _grating_stack, planar_rt


class TestPopulations:
    def test_occupation_is_exactly_zero_at_zero_temperature(self):
        assert thermal_occupation(1.0e14, 0.0) == 0.0

    def test_occupation_is_one_where_quantum_equals_kt_log_two(self):
        t = 300.0
        omega = math.log(2.0) * K_B * t / HBAR
        assert thermal_occupation(omega, t) == pytest.approx(1.0, rel=1e-12)

    def test_occupation_classical_limit(self):
        t = 300.0
        omega = 1e-8 * K_B * t / HBAR
        n = thermal_occupation(omega, t)
        assert n == pytest.approx(K_B * t / (HBAR * omega), rel=1e-7)

    def test_occupation_deep_wien_tail_flushes_to_zero(self):
        t = 1.0
        omega = 800.0 * K_B * t / HBAR
        assert thermal_occupation(omega, t) == 0.0

    def test_mean_energy_reduces_to_zero_point_at_zero_temperature(self):
        omega = 3.0e14
        assert mean_photon_energy(omega, 0.0) == HBAR * omega / 2.0

    def test_mean_energy_coth_form(self):
        omega, t = 8.0e13, 350.0
        x = HBAR * omega / (2.0 * K_B * t)
        expected = HBAR * omega / (2.0 * math.tanh(x))
        assert mean_photon_energy(omega, t) == pytest.approx(expected, rel=1e-12)

    def test_population_diff_is_exactly_zero_at_equal_temperatures(self):
        assert population_diff(1.0e13, 250.0, 250.0) == 0.0
        assert population_diff(1.0e13, 0.0, 0.0) == 0.0

    def test_population_diff_antisymmetric_and_hot_minus_cold_positive(self):
        d = population_diff(2.0e14, 400.0, 200.0)
        assert d > 0.0
        assert population_diff(2.0e14, 200.0, 400.0) == -d
        expected = thermal_occupation(2.0e14, 400.0) - thermal_occupation(2.0e14, 200.0)
        assert d == expected


class TestThermalState:
    def test_rejects_negative_and_non_finite_temperatures(self):
        with pytest.raises(NeqError):
            ThermalState(-1.0, 300.0, 300.0)
        with pytest.raises(NeqError):
            ThermalState(300.0, math.nan, 300.0)
        with pytest.raises(NeqError):
            ThermalState(300.0, 300.0, math.inf)

    def test_equilibrium_flag(self):
        assert ThermalState(300.0, 300.0, 300.0).is_equilibrium
        assert ThermalState(0.0, 0.0, 0.0).is_equilibrium
        assert not ThermalState(300.0, 300.0, 10.0).is_equilibrium
        assert not ThermalState(200.0, 400.0, 200.0).is_equilibrium


class TestSpectralWindow:
    def test_undefined_at_equilibrium(self, thermal_eq):
        with pytest.raises(NeqError):
            spectral_window(thermal_eq)

    def test_upper_edge_sits_past_the_live_populations(self, thermal_neq):
        lo, hi = spectral_window(thermal_neq)
        assert lo < hi

        def weight(w):
            return abs(population_diff(w, thermal_neq.tenv, thermal_neq.t1)) + abs(
                population_diff(w, thermal_neq.t2, thermal_neq.t1)
            )

        probe = np.geomspace(1e10, 1e18, 1600)
        peak = max(weight(w) for w in probe)
        assert weight(hi) <= 1e-12 * peak
        # thermal quanta of the 400 K body are still well inside the window
        assert hi > 5.0 * K_B * 400.0 / HBAR

    def test_window_grows_as_the_cut_tightens(self, thermal_neq):
        _, hi_loose = spectral_window(thermal_neq, rel_cut=1e-6)
        _, hi_tight = spectral_window(thermal_neq, rel_cut=1e-14)
        assert hi_tight > hi_loose


class TestGapOperatorAssembly:
    def test_semi_infinite_lower_body_rejected(self, grating2, thermal_neq):
        with pytest.raises(NeqError, match="body 1"):
            gap_operators(grating2, grating2, 2e14, 1e5, 0.0, M=1, mbar=1, gap=1e-6)

    def test_mismatched_periods_rejected(self, grating1, grating2):
        other = grating2.scaled(period=2.0e-6)
        with pytest.raises(NeqError, match="period"):
            gap_operators(grating1, other, 2e14, 1e5, 0.0, M=1, mbar=1, gap=1e-6)

    def test_nonpositive_gap_rejected(self, grating1, grating2):
        with pytest.raises(NeqError, match="gap"):
            gap_operators(grating1, grating2, 2e14, 1e5, 0.0, M=1, mbar=1, gap=0.0)

    def test_non_vacuum_far_side_rejected(self, grating1, grating2, silicon):
        leaky = grating1.scaled(beyond=silicon)
        with pytest.raises(NeqError, match="vacuum"):
            gap_operators(leaky, grating2, 2e14, 1e5, 0.0, M=1, mbar=1, gap=1e-6)

    def test_complex_or_nonpositive_frequency_rejected(self, grating1, grating2):
        for bad in (1e14 + 1e13j, 0.0, -2e14):
            with pytest.raises(NeqError, match="frequency"):
                gap_operators(grating1, grating2, bad, 1e5, 0.0, M=1, mbar=1, gap=1e-6)

    def test_central_basis_wider_than_truncation_rejected(self, grating1, grating2):
        with pytest.raises(NeqError, match="mbar"):
            gap_operators(grating1, grating2, 2e14, 1e5, 0.0, M=1, mbar=2, gap=1e-6)
        with pytest.raises(NeqError, match="mbar"):
            gap_reflections_imag(grating1, grating2, 1e14, 1e5, 0.0, 1, 2, 1e-6)

    def test_block_shapes_and_semi_infinite_masking(self, grating1, grating2):
        omega = 2.0e14
        ops = gap_operators(grating1, grating2, omega, 0.4e6, 0.2e6, M=2, mbar=1, gap=1e-6)
        n = 2 * (2 * 1 + 1)
        for block in (ops.r1p, ops.t1p, ops.t1m, ops.r1m, ops.r2m):
            assert block.shape == (n, n)
        assert ops.t2m is None  # far body is semi-infinite
        assert ops.kz.shape == (3,)
        assert ops.pw.dtype == bool
        assert ops.omega == omega

    def test_finite_far_body_keeps_its_transmission(self, grating1, grating2):
        # a formerly semi-infinite body keeps beyond=backing; reset it
        finite2 = grating2.scaled(thickness=0.5e-6, beyond=VACUUM)
        ops = gap_operators(grating1, finite2, 2.0e14, 0.4e6, 0.0, M=1, mbar=1, gap=1e-6)
        assert ops.t2m is not None
        assert ops.t2m.shape == ops.r2m.shape

    def test_body_operator_cache_returns_same_object(self, grating1, tmp_path):
        cache = OperatorCache(tmp_path / "ops")
        first = body_operators(grating1, 2.0e14, 1.0e6, 0.5e6, 1, cache)
        second = body_operators(grating1, 2.0e14, 1.0e6, 0.5e6, 1, cache)
        assert second is first
        flipped = body_operators(grating1, 2.0e14, 1.0e6, 0.5e6, 1, cache, _flip_branch=True)
        assert flipped is not first


class TestDeltaIntegrand:
    def test_exactly_zero_at_global_equilibrium(self, grating1, grating2, thermal_eq):
        ops = gap_operators(grating1, grating2, 1.8e14, 2.1e6, 1.3e6, M=1, mbar=1, gap=2e-6)
        assert delta_integrand(ops, thermal_eq) == (0.0, 0.0)
        cold = ThermalState(0.0, 0.0, 0.0)
        assert delta_integrand(ops, cold) == (0.0, 0.0)

    def test_batched_points_match_pointwise_evaluation(self, grating1, grating2, thermal_neq):
        omega = 2.2e14
        kc = omega / C_LIGHT
        kx = np.array([0.3, 1.2, 2.9]) * kc
        ky = np.array([0.0, 0.7, 1.4]) * kc
        ops = gap_operators(grating1, grating2, omega, kx, ky, M=1, mbar=1, gap=1.5e-6)
        values, residuals = delta_integrand(ops, thermal_neq)
        assert values.shape == (3,)
        assert np.all(residuals < 1e-8)
        for i in range(3):
            single = gap_operators(
                grating1, grating2, omega, float(kx[i]), float(ky[i]), M=1, mbar=1, gap=1.5e-6
            )
            value, residual = delta_integrand(single, thermal_neq)
            assert values[i] == pytest.approx(value, rel=1e-11)
            assert residual < 1e-8


class TestSpecularReduction:
    """Filling 1 with one retained order must reproduce the planar integrand."""

    @pytest.fixture()
    def uniform_pair(self, silica, silicon):
        geo1 = GratingGeometry(
            period=1.0e-6, depth=0.4e-6, thickness=0.8e-6, filling=1.0, ridge=silica
        )
        geo2 = GratingGeometry(
            period=1.0e-6, depth=0.3e-6, thickness=None, filling=1.0, ridge=silicon
        )
        return geo1, geo2

    @pytest.mark.parametrize("omega", [1.2e14, 2.8e14])
    @pytest.mark.parametrize("kfac", [0.0, 0.45, 0.85, 1.3, 2.5])
    def test_trace_matches_scalar_integrand(self, uniform_pair, thermal_neq, omega, kfac):
        geo1, geo2 = uniform_pair
        body1 = _grating_stack(geo1, filled=True)
        body2 = _grating_stack(geo2, filled=True)
        gap = 2.0e-6
        k = kfac * omega / C_LIGHT

        ops = gap_operators(geo1, geo2, omega, k, 0.0, M=0, mbar=0, gap=gap)
        value, residual = delta_integrand(ops, thermal_neq)

        n_e1 = population_diff(omega, thermal_neq.tenv, thermal_neq.t1)
        n_21 = population_diff(omega, thermal_neq.t2, thermal_neq.t1)
        reference = _delta_mode(body1, body2, thermal_neq, gap, omega, k, n_e1, n_21)

        assert value == pytest.approx(reference, rel=1e-8)
        assert residual < 1e-8

    @pytest.mark.parametrize("kfac", [0.45, 1.3])
    def test_trace_matches_scalar_integrand_finite_far_body(
        self, uniform_pair, silicon, thermal_neq, kfac
    ):
        geo1, _ = uniform_pair
        geo2 = GratingGeometry(
            period=1.0e-6, depth=0.3e-6, thickness=0.7e-6, filling=1.0, ridge=silicon
        )
        body1 = _grating_stack(geo1, filled=True)
        body2 = _grating_stack(geo2, filled=True)
        omega, gap = 2.2e14, 1.5e-6
        k = kfac * omega / C_LIGHT

        ops = gap_operators(geo1, geo2, omega, k, 0.0, M=0, mbar=0, gap=gap)
        assert ops.t2m is not None  # the environment-through-body-2 channel is live
        value, residual = delta_integrand(ops, thermal_neq)

        n_e1 = population_diff(omega, thermal_neq.tenv, thermal_neq.t1)
        n_21 = population_diff(omega, thermal_neq.t2, thermal_neq.t1)
        reference = _delta_mode(body1, body2, thermal_neq, gap, omega, k, n_e1, n_21)

        assert value == pytest.approx(reference, rel=1e-8)
        assert residual < 1e-8

    def test_hot_far_body_pushes_at_large_gap(self, uniform_pair):
        """Radiation pressure from a hot half-space is repulsive (positive)."""
        geo1, geo2 = uniform_pair
        thermal = ThermalState(0.0, 400.0, 0.0)
        omega = 2.0e14  # near the 400 K thermal peak
        kc = omega / C_LIGHT
        gap = 20.0e-6
        total = 0.0
        for kfac in (0.1, 0.3, 0.5, 0.7, 0.9):
            ops = gap_operators(geo1, geo2, omega, kfac * kc, 0.0, M=0, mbar=0, gap=gap)
            value, _ = delta_integrand(ops, thermal)
            total += value
        assert total > 0.0


class TestImaginaryAxisOperators:
    @pytest.fixture()
    def uniform_pair(self, silica, silicon):
        geo1 = GratingGeometry(
            period=1.0e-6, depth=0.4e-6, thickness=0.8e-6, filling=1.0, ridge=silica
        )
        geo2 = GratingGeometry(
            period=1.0e-6, depth=0.3e-6, thickness=None, filling=1.0, ridge=silicon
        )
        return geo1, geo2

    def test_reflections_match_scalar_stack_and_kappa_is_exact(self, uniform_pair):
        geo1, geo2 = uniform_pair
        body1 = _grating_stack(geo1, filled=True)
        body2 = _grating_stack(geo2, filled=True)
        xi, k, gap = 1.5e14, 2.2e6, 1.2e-6

        r1p, r2m, kappa = gap_reflections_imag(geo1, geo2, xi, k, 0.0, 0, 0, gap)
        expected_kappa = math.hypot(xi / C_LIGHT, k)
        assert kappa[0] == pytest.approx(expected_kappa, rel=1e-12)

        decay = math.exp(-2.0 * expected_kappa * gap)
        for j, pol in enumerate(("TE", "TM")):
            r1 = complex(planar_rt(body1, pol, 1j * xi, k)[0])
            r2 = complex(planar_rt(body2, pol, 1j * xi, k)[0]) * decay
            assert r1p[j, j] == pytest.approx(r1, rel=1e-10)
            assert r2m[j, j] == pytest.approx(r2, rel=1e-10)
        assert abs(r1p[0, 1]) < 1e-14 and abs(r1p[1, 0]) < 1e-14
        assert np.max(np.abs(r1p.imag)) < 1e-12
        assert np.max(np.abs(r2m.imag)) < 1e-12

    def test_eq_integrand_matches_scalar_round_trip_sum(self, uniform_pair):
        geo1, geo2 = uniform_pair
        xi, k, gap = 1.1e14, 3.0e6, 1.0e-6
        r1p, r2m, kappa = gap_reflections_imag(geo1, geo2, xi, k, 0.0, 0, 0, gap)
        value = eq_integrand(r1p, r2m, kappa)

        expected = 0.0
        for j in range(2):
            rr = (r1p[j, j] * r2m[j, j]).real
            expected += -2.0 * kappa[0] * rr / (1.0 - rr)
        assert value == pytest.approx(expected, rel=1e-10)
        # both reflections are below unity, the round trip attracts
        assert value < 0.0

    def test_semi_infinite_lower_body_rejected(self, grating2):
        with pytest.raises(NeqError, match="body 1"):
            gap_reflections_imag(grating2, grating2, 1e14, 1e5, 0.0, 1, 1, 1e-6)
