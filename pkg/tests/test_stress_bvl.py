import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants as sc
from scipy.integrate import quad
from scipy.special import zeta

from casimir_bvl import kernels
from casimir_bvl.errors import CapabilityError
from casimir_bvl.lifshitz import ThermalGeometry, pressure
from casimir_bvl.materials import MaterialModel, OpticalTable, PhysicalConstants
from casimir_bvl.reflection import Prescription, PrescriptionKind
from casimir_bvl.stress_bvl import (IdealToy, _neville_ridders, bvl_check, calT_perp,
                                    classical_limit_extrapolate, classical_t_perp,
                                    default_hbar_ladder, frequency_cutoff, stress_split, t_long,
                                    t_perp)

WP, GAMMA = 1.37e16, 5.32e13
DRUDE = MaterialModel.drude(WP, GAMMA)
DZ = Prescription(PrescriptionKind.DRUDE_ZERO)
PZ = Prescription(PrescriptionKind.PLASMA_ZERO, WP)
IU = Prescription(PrescriptionKind.IDEAL_UNITY)
GEOM = ThermalGeometry(1e-6, 300.0)


def matsubara_t_perp(d, temp, s, n_terms=200):
    """Independent oracle: -2 k_B T sum_l calT(i xi_l) with scipy quad and an l^-4 tail."""
    x1 = 2 * math.pi * sc.k * temp / (s * sc.hbar)

    def calt(xi):
        e = 1 + WP ** 2 / (xi * (xi + GAMMA))
        rb = (e - 1) / (e + 1)

        def f(k):
            q = math.sqrt(k * k + (xi / sc.c) ** 2)
            km = math.sqrt(k * k + e * (xi / sc.c) ** 2)
            out = 0.0
            for r in ((q - km) / (q + km), (e * q - km) / (e * q + km)):
                big = r * r * math.exp(-2 * q * d)
                out += q * big / (1 - big)
            big = rb * rb * math.exp(-2 * k * d)
            return k * (out - k * big / (1 - big))

        tot, lo, width = 0.0, 0.0, 1 / (2 * d)
        for _ in range(12):
            tot += quad(f, lo, lo + width, epsabs=0, epsrel=1e-11, limit=200)[0]
            lo, width = lo + width, 2 * width
        return tot / (2 * math.pi)

    terms = [calt(l * x1) for l in range(1, n_terms + 1)]
    total = math.fsum(terms) + terms[-1] * n_terms / 3
    return -2 * sc.k * temp * total


# ---- toy reflector --------------------------------------------------------------------

def test_toy_validation():
    for w in (0.0, -1.0, math.inf):
        with pytest.raises(ValueError):
            IdealToy(w)


@given(w=st.floats(0.0, 1e20))
def test_toy_passive(w):
    toy = IdealToy(1e15)
    assert abs(toy.rho(w)) <= 1.0
    assert toy.rho(0.0) == 1.0


# ---- spectral function ----------------------------------------------------------------

def test_calT_drude_vanishes_at_low_frequency():
    vals = [abs(calT_perp(w, GEOM, DRUDE)) * GEOM.gap ** 3 for w in (1e9, 1e6, 1e3)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-12


def test_calT_toy_low_frequency_limit():
    v = calT_perp(1e3, GEOM, IdealToy.for_gap(GEOM.gap))
    assert v.real == pytest.approx(zeta(3) / (8 * math.pi * GEOM.gap ** 3), rel=1e-9)
    assert abs(v.imag) * GEOM.gap ** 3 < 1e-9


@pytest.mark.parametrize("model", [MaterialModel.plasma(WP), MaterialModel.ideal(),
                                   MaterialModel.tabulated(OpticalTable.from_model(DRUDE, np.geomspace(1e11, 1e18, 20)))])
def test_lossless_or_tabulated_sources_rejected(model):
    with pytest.raises(CapabilityError):
        calT_perp(1e14, GEOM, model)
    with pytest.raises(CapabilityError):
        stress_split(GEOM, model)


def test_bad_inputs():
    with pytest.raises(ValueError):
        calT_perp(0.0, GEOM, DRUDE)
    with pytest.raises(TypeError):
        calT_perp(1e14, GEOM, "gold")


def test_frequency_cutoff_below_material_scale():
    wc = frequency_cutoff(GEOM, DRUDE)
    assert 0 < wc <= WP / 4
    assert wc <= 2 * sc.c / GEOM.gap


# ---- compiled and pure-Python kernels -------------------------------------------------

needs_compiled = pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled kernel not built")


@needs_compiled
@settings(max_examples=60)
@given(region=st.sampled_from([0, 1, 2]), t=st.floats(1e-3, 1.5), wr=st.floats(1e10, 1e16),
       wi=st.floats(0.0, 1e16), toy=st.booleans())
def test_backends_agree_pointwise(region, t, wr, wi, toy):
    d, c = 1e-6, sc.c
    omega = complex(wr, wi)
    from casimir_bvl.stress_bvl import _reflection_data
    eps, rb2, one_m, is_toy = _reflection_data(omega, IdealToy(1e15) if toy else DRUDE)
    arg = t if region == 0 else t / d
    args = (region, arg, omega, d, c, eps, rb2, one_m, is_toy)
    a = kernels.compiled_backend.eval_integrand(*args)
    b = kernels.python_backend.eval_integrand(*args)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12 * abs(b) + 1e-300)


@needs_compiled
@pytest.mark.parametrize("omega", [1e12, 3e14, complex(2e15, 4e14)])
def test_backends_agree_on_inner_integrals(omega):
    from casimir_bvl.stress_bvl import _inner_breakpoints, _reflection_data
    d, c = 1e-6, sc.c
    eps, rb2, one_m, toy = _reflection_data(omega, DRUDE)
    th, tq = _inner_breakpoints(complex(omega), d, eps, toy, c)
    args = (omega, d, c, eps, rb2, one_m, toy, th, tq, 1e-10, 0.0, 5000)
    for ra, rb in zip(kernels.compiled_backend.calt_inner(*args), kernels.python_backend.calt_inner(*args)):
        assert ra[3] and rb[3]
        assert ra[0] == pytest.approx(rb[0], rel=1e-9)


# ---- stress split ---------------------------------------------------------------------

def test_split_identity_and_workers():
    s1 = stress_split(GEOM, DRUDE)
    s3 = stress_split(GEOM, DRUDE, workers=3)
    assert s1.total == s1.t_long + s1.t_perp
    assert s1 == s3
    assert s1.converged


def test_split_matches_lifshitz():
    s = stress_split(GEOM, DRUDE)
    p = pressure(GEOM, DRUDE, DZ).pressure
    assert abs(s.total - p) <= 0.02 * abs(p)


def test_single_pieces_match_split():
    s = stress_split(GEOM, DRUDE)
    assert t_perp(GEOM, DRUDE).t_perp == pytest.approx(s.t_perp, rel=1e-6)
    assert t_long(GEOM, DRUDE).t_long == pytest.approx(s.t_long, rel=1e-6)


def test_t_perp_against_matsubara_oracle():
    r = t_perp(GEOM, DRUDE)
    assert r.t_perp == pytest.approx(matsubara_t_perp(GEOM.gap, GEOM.temp, 1.0), rel=1e-4)


# ---- classical transverse stress ------------------------------------------------------

def test_classical_drude_is_exactly_zero():
    for a in np.geomspace(1e-8, 1e-3, 7):
        assert classical_t_perp(ThermalGeometry(a, 300.0), DZ) == 0.0


def test_classical_ideal_is_reference_scale():
    assert classical_t_perp(GEOM, IU) == -GEOM.classical_scale


def test_classical_plasma_ordering():
    a = GEOM.gap
    wps = [x * sc.c / a for x in np.geomspace(0.1, 100, 13)]
    mags = [abs(classical_t_perp(GEOM, Prescription(PrescriptionKind.PLASMA_ZERO, w))) for w in wps]
    assert all(b > a_ for a_, b in zip(mags, mags[1:]))
    assert mags[-1] < GEOM.classical_scale


def test_classical_plasma_needs_frequency():
    with pytest.raises(ValueError):
        classical_t_perp(GEOM, Prescription(PrescriptionKind.PLASMA_ZERO))


# ---- hbar ladder ----------------------------------------------------------------------

def test_neville_recovers_polynomial():
    h = [1.0, 0.25, 0.0625]
    val, err = _neville_ridders(h, [3 + 2 * x + x * x for x in h])
    assert val == pytest.approx(3.0, abs=1e-12)


def test_default_ladder_is_classical():
    lad = default_hbar_ladder(GEOM, DRUDE)
    assert len(lad) == 3 and lad[0] <= 1 and lad[1] == lad[0] / 2
    assert sc.hbar * lad[0] * WP <= sc.k * GEOM.temp * (1 + 1e-12)


@pytest.mark.parametrize("ladder", [(1.0, 0.5), (1.0, 0.5, 0.5), (0.5, 1.0, 0.25), (2.0, 1.0, 0.5), (1.0, 0.5, 0.0)])
def test_ladder_validation(ladder):
    with pytest.raises(ValueError):
        classical_limit_extrapolate(GEOM, DRUDE, ladder)


def test_ladder_rejects_lossless():
    with pytest.raises(CapabilityError):
        classical_limit_extrapolate(GEOM, MaterialModel.plasma(WP))


def test_drude_extrapolates_to_zero():
    ex = classical_limit_extrapolate(GEOM, DRUDE)
    assert ex.reliable
    assert abs(ex.value - classical_t_perp(GEOM, DZ)) <= 0.01 * GEOM.classical_scale
    assert all(abs(v) < abs(u) for u, v in zip(ex.values, ex.values[1:]))


def test_toy_extrapolates_to_ideal_value():
    ex = classical_limit_extrapolate(GEOM, IdealToy.for_gap(GEOM.gap))
    assert ex.reliable
    assert abs(ex.value - classical_t_perp(GEOM, IU)) <= 0.01 * GEOM.classical_scale


# ---- verdict --------------------------------------------------------------------------

GAPS = list(np.geomspace(1e-7, 1e-5, 5))


def test_verdict_drude_consistent():
    v = bvl_check(GAPS, 300.0, DZ)
    assert v.consistent
    assert all(x == 0.0 for x in v.normalized)


def test_verdict_plasma_inconsistent():
    v = bvl_check(GAPS, 300.0, PZ)
    assert not v.consistent
    assert all(0 < x < 1 for x in v.normalized)
    assert list(v.normalized) == sorted(v.normalized)


def test_verdict_ideal_is_one():
    v = bvl_check(GAPS, 300.0, IU)
    assert all(x == pytest.approx(1.0, rel=1e-15) for x in v.normalized)


def test_verdict_threshold_is_literal():
    assert bvl_check(GAPS, 300.0, PZ, threshold=2.0).consistent


def test_verdict_json_schema():
    doc = bvl_check(GAPS, 300.0, PZ).to_json()
    assert {"prescription", "threshold", "gaps_m", "classical_t_perp_Pa", "reference_scale_Pa",
            "normalized", "consistent"} <= set(doc)
    json.dumps(doc)


@pytest.mark.parametrize("gaps, threshold", [([1e-7, 1e-5], 1e-6), ([1e-7, 2e-7, 5e-7], 1e-6),
                                              ([-1e-7, 1e-6, 1e-5], 1e-6), (GAPS, 0.0)])
def test_verdict_input_errors(gaps, threshold):
    with pytest.raises(ValueError):
        bvl_check(gaps, 300.0, DZ, threshold=threshold)


def test_pure_python_backend_gives_same_spectral_function(monkeypatch):
    import casimir_bvl.stress_bvl as sb
    ref = calT_perp(3e14, GEOM, DRUDE)
    monkeypatch.setattr(sb, "kernel", kernels.python_backend)
    assert calT_perp(3e14, GEOM, DRUDE) == pytest.approx(ref, rel=1e-8)
