"""Thermal Casimir pressure between two identical half-spaces.

The pressure is the Matsubara sum

    P = -(k_B T / pi) sum'_l int_0^inf dk k q_l sum_alpha
        r_alpha^2 e^{-2 a q_l} / (1 - r_alpha^2 e^{-2 a q_l})

with ``q_l = sqrt(k^2 + xi_l^2 / c^2)``, ``xi_l = 2 pi k_B T l / hbar`` and
the primed sum halving the l = 0 term. The l = 0 term is taken from a
zero-frequency prescription rather than from the permittivity.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import zeta

from .materials import MaterialKind, MaterialModel, PhysicalConstants, eps_imag_axis
from .quadrature import IntegralResult, QuadratureBudget, integrate_semi_infinite
from .reflection import Prescription, PrescriptionKind, imag_axis_r2

__all__ = [
    "ThermalGeometry",
    "PressureReport",
    "matsubara_xi",
    "term_integrand",
    "matsubara_term",
    "zero_freq_term",
    "pressure",
    "ZETA3",
]

ZETA3 = float(zeta(3))
DEFAULT_BUDGET = QuadratureBudget(rel_tol=1e-9)


@dataclass(frozen=True)
class ThermalGeometry:
    """Plate separation ``gap`` (m), temperature ``temp`` (K) and constants."""

    gap: float
    temp: float
    constants: PhysicalConstants = PhysicalConstants()

    def __post_init__(self):
        if not (math.isfinite(self.gap) and self.gap > 0):
            raise ValueError(f"gap must be > 0, got {self.gap!r}")
        if not (math.isfinite(self.temp) and self.temp > 0):
            raise ValueError(f"temp must be > 0, got {self.temp!r}")

    @property
    def kt(self) -> float:
        return self.constants.k_b * self.temp

    @property
    def classical_scale(self) -> float:
        """zeta(3) k_B T / (8 pi a^3), the one-polarization classical pressure."""
        return ZETA3 * self.kt / (8.0 * math.pi * self.gap ** 3)


@dataclass(frozen=True)
class PressureReport:
    """Result of a Matsubara-sum pressure evaluation.

    ``pressure`` equals ``zero_term + fsum(term_values)``; ``term_values[i]``
    is the contribution of l = i + 1 in Pa.
    """

    pressure: float
    error_estimate: float
    n_terms: int
    term_values: tuple
    zero_term: float
    converged: bool
    metadata: dict = field(default_factory=dict, compare=False)


def matsubara_xi(l: int, temp: float, constants: PhysicalConstants = PhysicalConstants()) -> float:
    """Matsubara frequency ``2 pi k_B T l / hbar_eff`` in rad/s."""
    if l < 0:
        raise ValueError(f"l must be >= 0, got {l!r}")
    if not constants.hbar_scale > 0:
        raise ValueError("hbar_scale must be > 0; the classical limit is taken analytically")
    return 2.0 * math.pi * constants.k_b * temp * l / constants.hbar_eff


def _weight(r2, one_minus_r2, x):
    # r^2 e^{-x} / (1 - r^2 e^{-x}), accurate for r^2 -> 1 and x -> 0
    e = np.exp(-x)
    m = -np.expm1(-x)
    den = one_minus_r2 + r2 * m
    return np.where(r2 == 0, 0.0, r2 * e / np.where(den == 0, 1.0, den))


def term_integrand(l: int, kperp, geom: ThermalGeometry, model: MaterialModel, eps=None):
    """``2 pi k q_l sum_alpha W_alpha`` for Matsubara index ``l >= 1``.

    ``eps`` may be passed to reuse a permittivity already computed for this
    ``xi_l`` (tabulated materials are expensive to evaluate).
    """
    if l < 1:
        raise ValueError("term_integrand needs l >= 1; use zero_freq_term for l = 0")
    c = geom.constants.c
    xi = matsubara_xi(l, geom.temp, geom.constants)
    if eps is None:
        eps = eps_imag_axis(model, xi)
    k = np.asarray(kperp, dtype=float)
    r2te, omte, r2tm, omtm = imag_axis_r2(eps, xi, k, c)
    q = np.sqrt(k * k + (xi / c) ** 2)
    x = 2.0 * geom.gap * q
    return 2.0 * math.pi * k * q * (_weight(r2te, omte, x) + _weight(r2tm, omtm, x))


def _scaled(res: IntegralResult, factor: float) -> IntegralResult:
    return IntegralResult(res.value * factor, res.error_estimate * abs(factor),
                          res.evaluations, res.converged, res.message)


def matsubara_term(l: int, geom: ThermalGeometry, model: MaterialModel,
                   budget: QuadratureBudget = DEFAULT_BUDGET, eps=None) -> IntegralResult:
    """Contribution of Matsubara index ``l >= 1`` to the pressure, in Pa."""
    if eps is None:
        eps = eps_imag_axis(model, matsubara_xi(l, geom.temp, geom.constants))
    hint = budget.replace(decay_scale_hint=1.0 / (2.0 * geom.gap))
    res = integrate_semi_infinite(lambda k: term_integrand(l, k, geom, model, eps), 0.0, hint)
    return _scaled(res, -geom.kt / (2.0 * math.pi ** 2))


def _plasma_te_integrand(k, a, big_k):
    s = np.sqrt(big_k * big_k + k * k)
    r = big_k * big_k / (s + k) ** 2
    om = 2.0 * k / (s + k) * (1.0 + r)
    return k * k * _weight(r * r, om, 2.0 * a * k)


def zero_freq_term(geom: ThermalGeometry, prescription: Prescription,
                   omega_p: Optional[float] = None,
                   budget: QuadratureBudget = DEFAULT_BUDGET) -> IntegralResult:
    """Half-weighted l = 0 term in Pa.

    The TM part (r_TM = 1) and the ideal TE part use the closed form
    ``int_0^inf k^2 / (e^{2 a k} - 1) dk = zeta(3) / (4 a^3)``. The plasma TE
    part is integrated numerically; the Drude TE part is exactly zero.
    """
    tm = -ZETA3 * geom.kt / (8.0 * math.pi * geom.gap ** 3)
    kind = prescription.kind
    if kind is PrescriptionKind.DRUDE_ZERO:
        return IntegralResult(tm, 0.0, 0, True)
    if kind is PrescriptionKind.IDEAL_UNITY:
        return IntegralResult(2.0 * tm, 0.0, 0, True)
    wp = prescription.resolve_omega_p(omega_p)
    if wp is None or not wp > 0:
        raise ValueError(f"plasma prescription needs omega_p > 0, got {wp!r}")
    te = _plasma_te(geom, wp, budget)
    return IntegralResult(tm + te.value, te.error_estimate, te.evaluations, te.converged, te.message)


def _plasma_te(geom: ThermalGeometry, omega_p: float, budget: QuadratureBudget) -> IntegralResult:
    """TE zero-frequency piece under the plasma prescription, in Pa."""
    a = geom.gap
    big_k = omega_p / geom.constants.c
    hint = budget.replace(decay_scale_hint=1.0 / (2.0 * a))
    res = integrate_semi_infinite(lambda k: _plasma_te_integrand(k, a, big_k), 0.0, hint)
    return _scaled(res, -geom.kt / (2.0 * math.pi))


def _tail_bound(terms):
    """Geometric tail bound from the last three terms, or None if not decaying."""
    t1, t2, t3 = (abs(t) for t in terms[-3:])
    if t3 == 0.0 and t2 == 0.0:
        return 0.0
    if t1 == 0.0 or t2 == 0.0:
        return None
    rho = max(t2 / t1, t3 / t2)
    if not rho < 1.0:
        return None
    return t3 * rho / (1.0 - rho)


def pressure(geom: ThermalGeometry, model: MaterialModel, prescription: Prescription,
             budget: QuadratureBudget = DEFAULT_BUDGET, *, max_terms: int = 200_000,
             workers: int = 1, batch: int = 32) -> PressureReport:
    """Casimir pressure (Pa, negative for attraction) from the Matsubara sum.

    Terms l = 1, 2, ... are summed in ascending order until the geometric
    tail bound drops below ``budget.rel_tol * |partial sum|``; the bound is
    added to ``error_estimate``. Terms may be computed by ``workers``
    threads, but the stopping index and the reduction depend only on the
    term values, so the result is identical for any worker count.
    """
    meta = {
        "material": model.describe(),
        "prescription": prescription.name,
        "rel_tol": budget.rel_tol,
        "abs_tol": budget.abs_tol,
        "hbar_scale": geom.constants.hbar_scale,
    }
    if model.is_vacuum:
        # Im eps = 0 everywhere: eps(i xi) = 1, no reflection at any frequency.
        meta["note"] = "vacuum material; all terms vanish"
        return PressureReport(0.0, 0.0, 0, (), 0.0, True, meta)

    zero = zero_freq_term(geom, prescription, model.omega_p, budget)
    terms, errors = [], []
    converged = zero.converged
    messages = [zero.message] if zero.message else []
    tail = None
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def one(l):
        xi = matsubara_xi(l, geom.temp, geom.constants)
        return matsubara_term(l, geom, model, budget, eps=eps_imag_axis(model, xi))

    try:
        l = 1
        done = False
        while not done and l <= max_terms:
            ls = range(l, min(l + batch, max_terms + 1))
            results = list(pool.map(one, ls)) if pool else [one(i) for i in ls]
            for res in results:
                terms.append(res.value)
                errors.append(res.error_estimate)
                if not res.converged:
                    converged = False
                    messages.append(f"l={len(terms)}: {res.message}")
                if len(terms) >= 3:
                    tail = _tail_bound(terms)
                    partial = zero.value + math.fsum(terms)
                    if tail is not None and tail <= budget.rel_tol * abs(partial):
                        done = True
                        break
            l += len(ls)
    finally:
        if pool:
            pool.shutdown()

    if not done:
        converged = False
        messages.append(f"Matsubara sum not converged after {len(terms)} terms")
        tail = abs(terms[-1]) * len(terms) if terms else math.inf
    total = zero.value + math.fsum(terms)
    err = zero.error_estimate + math.fsum(errors) + tail
    meta["tail_bound"] = tail
    if messages:
        meta["messages"] = messages
    return PressureReport(total, err, len(terms), tuple(terms), zero.value, converged, meta)
