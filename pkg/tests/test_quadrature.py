import math
import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import zeta

from casimir_bvl.quadrature import (IntegralResult, QuadratureBudget, QuadratureError,
                                    geometric_ladder, integrate_finite, integrate_panels,
                                    integrate_semi_infinite)


def bose(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-8
    out[small] = x[small]
    out[~small] = x[~small] ** 2 / np.expm1(x[~small])
    return out


# ---- budget ---------------------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [dict(rel_tol=0.0), dict(rel_tol=-1e-3), dict(abs_tol=-1.0),
                                    dict(max_subdivisions=0), dict(max_subdivisions=2.5),
                                    dict(decay_scale_hint=0.0), dict(decay_scale_hint=math.inf)])
def test_budget_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        QuadratureBudget(**kwargs)


def test_budget_is_immutable():
    b = QuadratureBudget()
    with pytest.raises(Exception):
        b.rel_tol = 1.0
    assert b.replace(rel_tol=1e-3).rel_tol == 1e-3


# ---- closed-form examples -------------------------------------------------------------

def test_constant_on_unit_interval():
    r = integrate_finite(lambda x: np.ones_like(x), 0.0, 1.0)
    assert r.converged
    assert r.value == pytest.approx(1.0, rel=1e-15)


def test_exponential_on_half_line():
    r = integrate_semi_infinite(lambda x: np.exp(-x), 0.0)
    assert r.converged
    assert abs(r.value - 1.0) <= 1e-9


def test_bose_integral_oracle():
    r = integrate_semi_infinite(bose, 0.0, QuadratureBudget(rel_tol=1e-12))
    exact = 2.0 * zeta(3)
    assert r.converged
    assert abs(r.value - exact) / exact <= 1e-10


@pytest.mark.parametrize("f, lo, hi, exact", [
    (lambda x: np.ones_like(x), 0.0, 1.0, 1.0),
    (np.sin, 0.0, math.pi, 2.0),
    (lambda x: 1.0 / (1.0 + x * x), -1.0, 1.0, math.pi / 2),
    (np.sqrt, 0.0, 1.0, 2.0 / 3.0),
])
def test_error_estimate_is_honest_finite(f, lo, hi, exact):
    r = integrate_finite(f, lo, hi, QuadratureBudget(rel_tol=1e-10))
    assert r.converged
    assert abs(r.value - exact) <= max(r.error_estimate, 4e-16 * abs(exact))


@pytest.mark.parametrize("f, exact", [
    (lambda x: np.exp(-x), 1.0),
    (bose, 2.0 * zeta(3)),
    (lambda x: 1.0 / (1.0 + x) ** 3, 0.5),
])
def test_error_estimate_is_honest_semi_infinite(f, exact):
    r = integrate_semi_infinite(f, 0.0, QuadratureBudget(rel_tol=1e-9))
    assert r.converged
    assert abs(r.value - exact) <= r.error_estimate


def test_converged_implies_within_budget():
    b = QuadratureBudget(rel_tol=1e-6)
    r = integrate_finite(lambda x: np.exp(np.sin(10 * x)), 0.0, 3.0, b)
    assert r.converged
    assert r.error_estimate <= max(b.rel_tol * abs(r.value), b.abs_tol)


def test_complex_integrand():
    r = integrate_finite(lambda x: np.exp(1j * x), 0.0, math.pi)
    assert isinstance(r.value, complex)
    assert r.value == pytest.approx(2j, abs=1e-13)


def test_scalar_only_integrand_is_accepted():
    r = integrate_finite(math.cos, 0.0, math.pi / 2)
    assert r.value == pytest.approx(1.0, rel=1e-12)


# ---- failure reporting ----------------------------------------------------------------

def test_nan_integrand_raises():
    with pytest.raises(QuadratureError):
        integrate_finite(lambda x: np.full_like(x, np.nan), 0.0, 1.0)


def test_non_decaying_integrand_is_flagged():
    r = integrate_semi_infinite(lambda x: np.ones_like(x), 0.0, QuadratureBudget(max_subdivisions=60))
    assert not r.converged
    assert math.isinf(r.error_estimate)
    assert "decay" in r.message


def test_budget_exhaustion_is_flagged():
    r = integrate_finite(lambda x: np.sin(1.0 / x), 1e-6, 1.0, QuadratureBudget(rel_tol=1e-14, max_subdivisions=5))
    assert not r.converged
    assert r.message


@pytest.mark.parametrize("bps", [[0.0], [1.0, 0.0], [0.0, math.inf], [0.0, 1.0, 1.0]])
def test_bad_breakpoints(bps):
    with pytest.raises(ValueError):
        integrate_panels(np.exp, bps, QuadratureBudget())


def test_geometric_ladder_doubles():
    bp = geometric_ladder(1.0, 2.0, 4)
    assert list(np.diff(bp)) == [2.0, 4.0, 8.0, 16.0]


# ---- properties -----------------------------------------------------------------------

@pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
def test_scale_invariance(s):
    b = QuadratureBudget(rel_tol=1e-10)
    base = integrate_semi_infinite(bose, 0.0, b).value
    scaled = integrate_semi_infinite(lambda x: bose(s * x) * s, 0.0, b.replace(decay_scale_hint=1.0 / s)).value
    assert scaled == pytest.approx(base, rel=1e-10)


@given(a=st.floats(0.1, 10.0), p=st.integers(0, 6))
def test_polynomial_exactness(a, p):
    # the 21-point Kronrod rule is exact for polynomials up to degree 31
    r = integrate_finite(lambda x: x ** p, 0.0, a)
    assert r.value == pytest.approx(a ** (p + 1) / (p + 1), rel=1e-13)


@given(lam=st.floats(1e-3, 1e3))
def test_exponential_rate(lam):
    r = integrate_semi_infinite(lambda x: np.exp(-lam * x), 0.0,
                                QuadratureBudget(rel_tol=1e-10, decay_scale_hint=1.0 / lam))
    assert r.converged
    assert r.value == pytest.approx(1.0 / lam, rel=1e-9)


def test_determinism_across_threads():
    def job(out, i):
        out[i] = integrate_semi_infinite(bose, 0.0, QuadratureBudget(rel_tol=1e-12))
    out = [None] * 8
    threads = [threading.Thread(target=job, args=(out, i)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    ref = integrate_semi_infinite(bose, 0.0, QuadratureBudget(rel_tol=1e-12))
    assert all(isinstance(r, IntegralResult) and r == ref for r in out)
