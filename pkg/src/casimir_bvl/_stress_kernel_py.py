"""Pure-numpy backend for the inner k-integrals of the real-frequency stress.

Mirrors ``_stress_kernel.pyx`` function for function. Used when the compiled
extension is unavailable or when ``CASIMIR_BVL_PURE_PYTHON=1`` is set.
"""
from __future__ import annotations

import numpy as np

from .quadrature import QuadratureBudget, QuadratureError, integrate_panels

BACKEND = "python"


def _cexpm1(z):
    x, y = z.real, z.imag
    s = np.sin(0.5 * y)
    return (np.expm1(x) * np.cos(y) - 2.0 * s * s) + 1j * (np.exp(x) * np.sin(y))


def _qw_fresnel(q, km, e, d):
    x = 2.0 * q * d
    big_e = np.exp(-x)
    m = -_cexpm1(-x)
    a = e * q
    n = (a * a + km * km) * m + 2.0 * a * km * (1.0 + big_e)
    return q * (a - km) ** 2 * big_e / n


def _kw_const(k, r2, one_m_r2, d):
    x = 2.0 * k * d + 0j
    big_e = np.exp(-x)
    m = -_cexpm1(-x)
    return k * r2 * big_e / (one_m_r2 + r2 * m)


def _vac_q(z):
    on_cut = (z.imag == 0.0) & (z.real < 0.0)
    return np.where(on_cut, -1j * np.sqrt(np.abs(z.real)), np.sqrt(z))


class _Params:
    __slots__ = ("K", "d", "w2", "delta", "eps", "rb2", "one_m_rb2", "toy")

    def __init__(self, omega, d, c, eps, rb2, one_m_rb2, toy):
        omega = complex(omega)
        wr, wi = omega.real / c, omega.imag / c
        self.K = wr
        self.w2 = omega * omega / (c * c)
        self.delta = complex(wi * wi, -2.0 * wr * wi)
        self.d = d
        self.eps = complex(eps)
        self.rb2 = complex(rb2)
        self.one_m_rb2 = complex(one_m_rb2)
        self.toy = bool(toy)


def _integrand(region, t, p):
    t = np.asarray(t, dtype=float)
    if region == 2:
        return -t * _kw_const(t, p.rb2, p.one_m_rb2, p.d)
    big_k = p.K
    if region == 0:
        st, ct = np.sin(t), np.cos(t)
        k = big_k * st
        jac = big_k * big_k * st * ct
        z = p.delta - (big_k * ct) ** 2
    else:
        k = np.sqrt(t * t + big_k * big_k)
        jac = t
        z = p.delta + t * t
    z = np.asarray(z, dtype=complex)
    q = _vac_q(z)
    if p.toy:
        return jac * (2.0 * _kw_const(q, p.rb2, p.one_m_rb2, p.d) - _kw_const(k, p.rb2, p.one_m_rb2, p.d))
    km = np.sqrt(z + (1.0 - p.eps) * p.w2)
    return jac * (_qw_fresnel(q, km, 1.0, p.d) + _qw_fresnel(q, km, p.eps, p.d)
                  - _kw_const(k, p.rb2, p.one_m_rb2, p.d))


def _adapt(region, bps, p, rel_tol, abs_tol, max_sub):
    budget = QuadratureBudget(rel_tol=rel_tol, abs_tol=abs_tol, max_subdivisions=max_sub)
    try:
        res = integrate_panels(lambda t: _integrand(region, t, p), bps, budget)
    except QuadratureError as exc:
        raise ArithmeticError(f"stress kernel integrand returned NaN ({exc})") from None
    return complex(res.value), res.error_estimate, res.evaluations, res.converged


def calt_inner(omega, d, c, eps, rb2, one_m_rb2, toy, bps_theta, bps_t, rel_tol, abs_tol, max_sub):
    p = _Params(omega, d, c, eps, rb2, one_m_rb2, toy)
    return (_adapt(0, bps_theta, p, rel_tol, abs_tol, max_sub),
            _adapt(1, bps_t, p, rel_tol, abs_tol, max_sub))


def long_inner(d, rb2, one_m_rb2, bps_k, rel_tol, abs_tol, max_sub):
    p = _Params(0.0, d, 1.0, 1.0, rb2, one_m_rb2, False)
    return _adapt(2, bps_k, p, rel_tol, abs_tol, max_sub)


def eval_integrand(region, t, omega, d, c, eps, rb2, one_m_rb2, toy):
    p = _Params(omega, d, c, eps, rb2, one_m_rb2, toy)
    return complex(_integrand(region, np.array([t]), p)[0])
