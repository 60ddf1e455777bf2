import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants as sc
from scipy.special import zeta

from casimir_bvl.lifshitz import (ThermalGeometry, matsubara_term, matsubara_xi, pressure,
                                  term_integrand, zero_freq_term)
from casimir_bvl.materials import MaterialModel, OpticalTable, PhysicalConstants
from casimir_bvl.quadrature import QuadratureBudget
from casimir_bvl.reflection import Prescription, PrescriptionKind

WP, GAMMA = 1.37e16, 5.32e13
DRUDE = MaterialModel.drude(WP, GAMMA)
PLASMA = MaterialModel.plasma(WP)
DZ = Prescription(PrescriptionKind.DRUDE_ZERO)
PZ = Prescription(PrescriptionKind.PLASMA_ZERO, WP)
IU = Prescription(PrescriptionKind.IDEAL_UNITY)


def test_matsubara_frequency():
    assert matsubara_xi(1, 300.0) == pytest.approx(2.466e14, rel=1e-3)
    assert matsubara_xi(0, 300.0) == 0.0
    assert matsubara_xi(3, 300.0, PhysicalConstants(hbar_scale=0.5)) == pytest.approx(6 * matsubara_xi(1, 300.0), rel=1e-15)


@pytest.mark.parametrize("gap, temp", [(0.0, 300.0), (1e-6, 0.0), (math.inf, 1.0), (1e-6, math.nan)])
def test_geometry_validation(gap, temp):
    with pytest.raises(ValueError):
        ThermalGeometry(gap, temp)


def test_term_integrand_vanishes_for_vacuum():
    geom = ThermalGeometry(1e-6, 300.0)
    k = np.geomspace(1e3, 1e8, 11)
    assert np.all(term_integrand(1, k, geom, DRUDE, eps=1.0) == 0)
    assert matsubara_term(1, geom, DRUDE, eps=1.0).value == 0


def test_term_integrand_rejects_zero_index():
    with pytest.raises(ValueError):
        term_integrand(0, 1e6, ThermalGeometry(1e-6, 300.0), DRUDE)


@pytest.mark.parametrize("a", [1e-7, 1e-6, 1e-5])
def test_zero_term_closed_forms(a):
    geom = ThermalGeometry(a, 300.0)
    tm = -zeta(3) * sc.k * 300.0 / (8 * math.pi * a ** 3)
    assert zero_freq_term(geom, DZ).value == pytest.approx(tm, rel=1e-12)
    assert zero_freq_term(geom, IU).value == pytest.approx(2 * tm, rel=1e-12)
    plasma = zero_freq_term(geom, PZ).value
    assert 2 * tm < plasma < tm


def test_drude_zero_term_against_quadrature():
    # the closed form must match a direct integration of the TM weight
    from casimir_bvl.quadrature import integrate_semi_infinite
    a = 5e-6
    geom = ThermalGeometry(a, 3000.0)

    def tm(k):
        safe = np.where(k > 0, k, 1.0)
        return np.where(k > 0, safe * safe / np.expm1(2 * a * safe), 0.0)

    res = integrate_semi_infinite(tm, 0.0, QuadratureBudget(rel_tol=1e-12, decay_scale_hint=1 / (2 * a)))
    assert -geom.kt / (2 * math.pi) * res.value == pytest.approx(zero_freq_term(geom, DZ).value, rel=1e-9)


def test_plasma_needs_frequency():
    with pytest.raises(ValueError):
        zero_freq_term(ThermalGeometry(1e-6, 300.0), Prescription(PrescriptionKind.PLASMA_ZERO))


def test_ideal_metal_zero_temperature_limit():
    a = 1e-6
    rep = pressure(ThermalGeometry(a, 1.0), MaterialModel.ideal(), IU)
    exact = -math.pi ** 2 * sc.hbar * sc.c / (240 * a ** 4)
    assert rep.converged
    assert rep.pressure == pytest.approx(exact, rel=5e-3)


def test_ideal_metal_high_temperature_limit():
    a, t = 5e-6, 3000.0
    rep = pressure(ThermalGeometry(a, t), MaterialModel.ideal(), IU)
    assert rep.pressure == pytest.approx(-zeta(3) * sc.k * t / (4 * math.pi * a ** 3), rel=0.01)


def test_report_is_sum_of_parts():
    rep = pressure(ThermalGeometry(1e-6, 300.0), DRUDE, DZ)
    assert rep.pressure == rep.zero_term + math.fsum(rep.term_values)
    assert rep.n_terms == len(rep.term_values)


def test_terms_non_positive_and_decay_beyond_knee():
    geom = ThermalGeometry(1e-6, 300.0)
    rep = pressure(geom, DRUDE, DZ)
    assert rep.zero_term <= 0 and all(t <= 0 for t in rep.term_values)
    knee = next(l for l in range(1, 100) if matsubara_xi(l, 300.0) >= sc.c / (2 * geom.gap))
    tail = [abs(t) for t in rep.term_values[knee - 1:]]
    assert all(b < a for a, b in zip(tail, tail[1:]))


def test_truncation_bound_is_sound():
    geom = ThermalGeometry(1e-6, 300.0)
    budget = QuadratureBudget(rel_tol=1e-6)
    rep = pressure(geom, DRUDE, DZ, budget)
    explicit = rep.zero_term + math.fsum(matsubara_term(l, geom, DRUDE, QuadratureBudget(rel_tol=1e-11)).value
                                         for l in range(1, 80))
    assert rep.n_terms < 79
    assert abs(rep.pressure - explicit) <= rep.error_estimate


@settings(max_examples=10)
@given(a=st.floats(2e-7, 2e-5), t=st.floats(10.0, 1000.0),
       combo=st.sampled_from([(DRUDE, DZ), (PLASMA, PZ), (DRUDE, PZ), (PLASMA, DZ)]))
def test_attraction(a, t, combo):
    rep = pressure(ThermalGeometry(a, t), *combo, QuadratureBudget(rel_tol=1e-6))
    assert rep.converged
    assert rep.pressure < 0


@pytest.mark.parametrize("model, pres", [(DRUDE, DZ), (PLASMA, PZ), (MaterialModel.ideal(), IU)])
def test_monotone_decay_in_gap(model, pres):
    gaps = np.geomspace(1e-7, 1e-5, 9)
    mags = [abs(pressure(ThermalGeometry(a, 300.0), model, pres, QuadratureBudget(rel_tol=1e-7)).pressure)
            for a in gaps]
    assert all(b < a for a, b in zip(mags, mags[1:]))


def test_drude_plasma_discontinuity():
    geom = ThermalGeometry(1e-6, 300.0)
    ref = pressure(geom, PLASMA, PZ)
    te_zero = zero_freq_term(geom, PZ).value - zero_freq_term(geom, DZ).value
    gaps = []
    for k in range(2, 6):
        drude = pressure(geom, MaterialModel.drude(WP, WP * 10.0 ** -k), DZ)
        gaps.append(drude.pressure - ref.pressure)
    # the difference does not close: it tends to minus the plasma TE zero-frequency term
    devs = [abs(g / -te_zero - 1) for g in gaps]
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 1e-2
    assert abs(gaps[-1]) > 0.1 * abs(ref.pressure)


def test_large_gap_ratio_tends_to_half():
    geom = ThermalGeometry(8e-6, 300.0)
    ratio = pressure(geom, DRUDE, DZ).pressure / pressure(geom, PLASMA, PZ).pressure
    assert ratio == pytest.approx(0.5, rel=0.01)


def test_worker_and_batch_independence():
    geom = ThermalGeometry(5e-7, 300.0)
    ref = pressure(geom, DRUDE, DZ)
    for workers, batch in [(4, 32), (2, 5), (1, 1)]:
        assert pressure(geom, DRUDE, DZ, workers=workers, batch=batch) == ref


def test_vacuum_table_gives_zero():
    t = OpticalTable(tuple(np.geomspace(1e12, 1e16, 10)), (0.0,) * 10)
    rep = pressure(ThermalGeometry(1e-6, 300.0), MaterialModel.tabulated(t), DZ)
    assert rep.pressure == 0.0 and rep.converged


def test_tabulated_drude_matches_analytic():
    t = OpticalTable.from_model(DRUDE, np.geomspace(1e9, 1e19, 500))
    geom = ThermalGeometry(1e-6, 300.0)
    budget = QuadratureBudget(rel_tol=1e-7)
    tab = pressure(geom, MaterialModel.tabulated(t), DZ, budget).pressure
    assert tab == pytest.approx(pressure(geom, DRUDE, DZ, budget).pressure, rel=0.01)


def test_non_convergence_is_reported():
    rep = pressure(ThermalGeometry(1e-6, 300.0), DRUDE, DZ, max_terms=3)
    assert not rep.converged
    assert rep.metadata["messages"]
