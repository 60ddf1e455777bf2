"""Real-frequency stress split and the classical transverse-stress check.

The zz stress in the gap splits into a longitudinal and a transverse part,

    T_long = (1/pi^2) int_0^inf (dw/w) E_b(w) Im[-int dk k^2 W(2kd, rbar^2)]
    T_perp = -(2/pi) int_0^inf (dw/w) E_b(w) Im calT(w)
    calT(w) = (1/2pi) int dk k {q W_TE + q W_TM - k W(2kd, rbar^2)}

with ``W(x, r^2) = r^2 e^{-x} / (1 - r^2 e^{-x})``, ``q = sqrt(k^2 - w^2/c^2)``
and ``rbar = (eps - 1)/(eps + 1)``. Their sum equals the Matsubara pressure.

In the classical limit (hbar -> 0 at fixed T) the transverse part tends to
``-k_B T calT(0)``, which only involves the zero-frequency TE reflection
coefficient. It vanishes for a Drude metal and is finite for the plasma
prescription.

Outer frequency integral
------------------------
The real-axis integrand oscillates with period ``pi c / d`` and, from a
fraction of the plasma frequency upward, carries very narrow guided-mode
peaks that adaptive quadrature can step over without noticing. The integral
is therefore taken on the real axis only up to
``w_c = min(2 c / d, W / 4)`` (``W`` the plasma frequency or the toy
roll-off); the remainder ``int_{w_c}^inf`` is evaluated exactly on the
vertical ray ``w_c + i y``, where every integrand is smooth and decays. This
is legitimate because calT, the rbar term and coth are analytic for
``Re w >= w_c > 0``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CapabilityError
from .kernels import BACKEND, kernel
from .lifshitz import ZETA3, ThermalGeometry, _plasma_te
from .materials import MaterialKind, MaterialModel, PhysicalConstants
from .quadrature import QuadratureBudget, integrate_panels, integrate_semi_infinite
from .reflection import Prescription, PrescriptionKind

__all__ = [
    "IdealToy",
    "StressSplit",
    "BvlVerdict",
    "Extrapolation",
    "calT_perp",
    "t_long",
    "t_perp",
    "stress_split",
    "classical_t_perp",
    "classical_limit_extrapolate",
    "default_hbar_ladder",
    "bvl_check",
    "frequency_cutoff",
]

INNER_BUDGET = QuadratureBudget(rel_tol=1e-9, max_subdivisions=20000)
OUTER_BUDGET = QuadratureBudget(rel_tol=1e-7, max_subdivisions=20000)
DEFAULT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class IdealToy:
    """Causal stand-in for a perfect reflector on the real axis.

    All reflection coefficients (TE, TM and rbar) equal
    ``rho(w) = (W / (W - i w))^2``: rho(0) = 1, |rho| <= 1 for real w, and
    rho is analytic in the upper half plane. The classical limit reproduces
    the r_TE = 1 zero-frequency value ``-zeta(3) k_B T / (8 pi a^3)``.

    Parameters
    ----------
    cutoff : float
        Roll-off frequency W in rad/s.
    """

    cutoff: float

    def __post_init__(self):
        if not (math.isfinite(self.cutoff) and self.cutoff > 0):
            raise ValueError(f"cutoff must be > 0, got {self.cutoff!r}")

    @classmethod
    def for_gap(cls, gap: float, factor: float = 10.0,
                constants: PhysicalConstants = PhysicalConstants()) -> "IdealToy":
        """Toy with cutoff ``factor * c / (2 gap)``."""
        return cls(factor * constants.c / (2.0 * gap))

    def rho(self, omega):
        return (self.cutoff / (self.cutoff - 1j * np.asarray(omega, dtype=complex))) ** 2


Source = Union[MaterialModel, IdealToy]


@dataclass(frozen=True)
class StressSplit:
    """Longitudinal and transverse stress in Pa with ``total = t_long + t_perp``."""

    t_long: float
    t_perp: float
    total: float
    error_estimate: float
    converged: bool = True
    metadata: dict = field(default_factory=dict, compare=False)


def _check_source(source: Source):
    if isinstance(source, IdealToy):
        return
    if not isinstance(source, MaterialModel):
        raise TypeError(f"expected MaterialModel or IdealToy, got {type(source).__name__}")
    if source.kind is not MaterialKind.DRUDE:
        raise CapabilityError(
            f"real-frequency stress needs a lossy Drude model; {source.kind.value} has no loss "
            "on the real axis (surface-mode poles make the integrals ill-defined)")


def _reflection_data(omega: complex, source: Source):
    """(eps, rbar^2, 1 - rbar^2, toy flag) at complex frequency ``omega``."""
    if isinstance(source, IdealToy):
        u = 1.0 - 1j * omega / source.cutoff
        rho = 1.0 / (u * u)
        # 1 - rho^2 = (u^4 - 1)/u^4 with u - 1 exact
        one_m = (u - 1.0) * (u + 1.0) * (u * u + 1.0) / (u * u * u * u)
        return 1.0 + 0j, rho * rho, one_m, True
    em1 = -source.omega_p ** 2 / (omega * (omega + 1j * source.gamma))
    eps = 1.0 + em1
    rb = em1 / (eps + 1.0)
    return eps, rb * rb, 4.0 * eps / (eps + 1.0) ** 2, False


def _inner_breakpoints(omega: complex, d: float, eps: complex, toy: bool, c: float):
    big_k = omega.real / c
    theta = [0.0, 0.5 * math.pi]
    if not toy and 0.0 < eps.real < 1.0:
        # total-internal-reflection edge k = sqrt(Re eps) w / c
        theta.append(math.asin(math.sqrt(eps.real)))
    n_modes = int(big_k * 2.0 * d / math.pi)
    kappa = np.arange(1, n_modes + 1) * math.pi / (2.0 * d)
    kappa = kappa[kappa < big_k]
    theta = np.unique(np.concatenate([theta, np.arccos(kappa / big_k)]))
    ell = 1.0 / (2.0 * d)
    t = np.concatenate([[0.0], ell * np.logspace(-4, 0, 9), ell * (2.0 ** np.arange(1, 7) - 1.0)])
    t = np.concatenate([t, t[-1] * np.array([1.5, 2.5, 4.0])])
    return np.ascontiguousarray(theta), np.ascontiguousarray(np.unique(t))


# The TE, TM and rbar pieces are each of order (2d)^-3 and cancel pointwise
# at low frequency; rounding then limits the absolute accuracy to this
# fraction of (2d)^-3.
CANCELLATION_FLOOR = 1e-12


def _inner_abs_tol(d: float, inner: QuadratureBudget) -> float:
    return max(inner.abs_tol, CANCELLATION_FLOOR / (2.0 * d) ** 3)


def _calT_raw(omega: complex, d: float, c: float, source: Source, inner: QuadratureBudget):
    eps, rb2, one_m, toy = _reflection_data(omega, source)
    th, tq = _inner_breakpoints(omega, d, eps, toy, c)
    a, b = kernel.calt_inner(omega, d, c, eps, rb2, one_m, toy, th, tq,
                             inner.rel_tol, _inner_abs_tol(d, inner), int(inner.max_subdivisions))
    val = (a[0] + b[0]) / (2.0 * math.pi)
    err = (a[1] + b[1]) / (2.0 * math.pi)
    return val, err, a[3] and b[3]


def _long_raw(omega: complex, d: float, c: float, source: Source, inner: QuadratureBudget):
    eps, rb2, one_m, toy = _reflection_data(omega, source)
    _, tq = _inner_breakpoints(omega, d, eps, toy, c)
    v, e, _, conv = kernel.long_inner(d, rb2, one_m, tq, inner.rel_tol, _inner_abs_tol(d, inner),
                                      int(inner.max_subdivisions))
    return v, e, conv


def calT_perp(omega: float, geom: ThermalGeometry, model: Source,
              budget: QuadratureBudget = INNER_BUDGET) -> complex:
    """Transverse spectral function calT(omega) in 1/m^3 at real ``omega > 0``."""
    if not omega > 0:
        raise ValueError(f"omega must be > 0, got {omega!r}")
    _check_source(model)
    val, err, conv = _calT_raw(complex(omega), geom.gap, geom.constants.c, model, budget)
    if not conv:
        warnings.warn(f"calT inner integral not converged at omega = {omega:.6g} (error {err:.3g})",
                      RuntimeWarning, stacklevel=2)
    return val


def _coth(x):
    x = np.asarray(x, dtype=complex)
    big = x.real > 40.0
    xs = np.where(big, 1.0, x)
    # 1 + 2/(e^{2x} - 1); the small-|x| branch keeps full precision near 0
    return np.where(big, 1.0 + 2.0 * np.exp(-2.0 * np.where(big, x, 0.0)), 1.0 / np.tanh(xs))


def _eb_over_omega(omega, temp: float, constants: PhysicalConstants):
    """E_b(w)/w = (hbar/2) coth(hbar w / 2 k_B T), for real or complex w."""
    w = np.asarray(omega, dtype=complex)
    h = constants.hbar_eff
    kt = constants.k_b * temp
    x = h * w / (2.0 * kt)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    big_val = 0.5 * h * _coth(xs)
    xw = np.where(small, x, 1.0)
    small_val = kt / np.where(small, w, 1.0) * (1.0 + xw * xw / 3.0)
    return np.where(small, small_val, big_val)


def frequency_cutoff(geom: ThermalGeometry, source: Source) -> float:
    """Real-axis cutoff ``w_c`` of the outer integral in rad/s.

    ``min(2 c / a, W / 4)`` with W the material's characteristic frequency
    (plasma frequency, or the toy roll-off). This keeps the real segment
    below the first gap-mode threshold ``pi c / a`` and well below the
    surface-plasmon band, where the real-axis integrand has narrow
    guided-mode resonances. Everything above ``w_c`` is integrated on the
    vertical ray, where those resonances are damped.
    """
    char = source.cutoff if isinstance(source, IdealToy) else source.omega_p
    return min(2.0 * geom.constants.c / geom.gap, 0.25 * char)


def _real_breakpoints(wc: float, geom: ThermalGeometry, source: Source):
    pts = list(np.logspace(math.log10(wc) - 10.0, math.log10(wc), 41))
    if isinstance(source, MaterialModel):
        pts.append(source.gamma)
    return np.unique(np.array([0.0] + [p for p in pts if 0.0 < p <= wc]))


def _ray_breakpoints(wc: float, geom: ThermalGeometry):
    """Matsubara pole heights y = xi_l when the ray passes close to them.

    coth(hbar w / 2 k_B T) has poles at w = i xi_l; on the ray they show up
    as peaks of width ~w_c at y = xi_l once w_c is below xi_1.
    """
    k = geom.constants
    xi1 = 2.0 * math.pi * k.k_b * geom.temp / k.hbar_eff
    if wc >= xi1:
        return []
    return list(xi1 * np.arange(1, 65))


class _Outer:
    """Packed outer integrand: real part transverse, imaginary part longitudinal."""

    def __init__(self, geom, source, inner, want_perp, want_long, workers):
        self.geom = geom
        self.source = source
        self.inner = inner
        self.want_perp = want_perp
        self.want_long = want_long
        self.workers = workers
        self.conv = True
        self.inner_err = 0.0
        self.pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def _point(self, omega):
        d, c = self.geom.gap, self.geom.constants.c
        tp = tl = 0.0
        ok = True
        err = 0.0
        if self.want_perp:
            tp, e1, c1 = _calT_raw(omega, d, c, self.source, self.inner)
            ok &= c1
            err += e1
        if self.want_long:
            tl, e2, c2 = _long_raw(omega, d, c, self.source, self.inner)
            ok &= c2
            err += e2
        return tp, tl, ok, err

    def _many(self, omegas):
        if self.pool is not None:
            out = list(self.pool.map(self._point, omegas))
        else:
            out = [self._point(w) for w in omegas]
        tp = np.array([o[0] for o in out], dtype=complex)
        tl = np.array([o[1] for o in out], dtype=complex)
        if not all(o[2] for o in out):
            self.conv = False
        return tp, tl

    def real(self, w):
        tp, tl = self._many([complex(x) for x in w])
        eb = _eb_over_omega(w, self.geom.temp, self.geom.constants).real
        return eb * tp.imag + 1j * eb * tl.imag

    def ray(self, wc):
        def f(y):
            om = wc + 1j * np.asarray(y)
            tp, tl = self._many(list(om))
            eb = 1j * _eb_over_omega(om, self.geom.temp, self.geom.constants)
            return (eb * tp).imag + 1j * (eb * tl).imag
        return f

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _outer_integrals(geom, source, budget, inner, want_perp, want_long, workers):
    _check_source(source)
    wc = frequency_cutoff(geom, source)
    outer = _Outer(geom, source, inner, want_perp, want_long, workers)
    try:
        seg = integrate_panels(outer.real, _real_breakpoints(wc, geom, source), budget)
        ray_budget = budget.replace(decay_scale_hint=geom.constants.c / (2.0 * geom.gap))
        ray = integrate_semi_infinite(outer.ray(wc), 0.0, ray_budget,
                                      breakpoints=_ray_breakpoints(wc, geom))
    finally:
        outer.close()
    total = complex(seg.value) + complex(ray.value)
    conv = seg.converged and ray.converged and outer.conv
    msgs = [m for m in (seg.message, ray.message) if m]
    if not outer.conv:
        msgs.append("an inner k-integral did not converge")
    meta = {
        "omega_cutoff": wc,
        "real_segment": complex(seg.value),
        "ray": complex(ray.value),
        "evaluations": seg.evaluations + ray.evaluations,
        "backend": BACKEND,
    }
    if msgs:
        meta["messages"] = msgs
    return total, seg.error_estimate + ray.error_estimate, conv, meta


def stress_split(geom: ThermalGeometry, model: Source,
                 budget: QuadratureBudget = OUTER_BUDGET,
                 inner: QuadratureBudget = INNER_BUDGET, *, workers: int = 1) -> StressSplit:
    """Longitudinal and transverse stress (Pa) from real-frequency integrals."""
    total, err, conv, meta = _outer_integrals(geom, model, budget, inner, True, True, workers)
    tp = -(2.0 / math.pi) * total.real
    tl = total.imag / math.pi ** 2
    meta["t_perp_ray"] = -(2.0 / math.pi) * meta["ray"].real
    meta["t_long_ray"] = meta["ray"].imag / math.pi ** 2
    error = (2.0 / math.pi + 1.0 / math.pi ** 2) * err
    return StressSplit(tl, tp, tl + tp, error, conv, meta)


def t_long(geom: ThermalGeometry, model: Source, budget: QuadratureBudget = OUTER_BUDGET,
           inner: QuadratureBudget = INNER_BUDGET, *, workers: int = 1) -> StressSplit:
    """Longitudinal stress only (``t_perp`` is reported as 0)."""
    total, err, conv, meta = _outer_integrals(geom, model, budget, inner, False, True, workers)
    tl = total.imag / math.pi ** 2
    return StressSplit(tl, 0.0, tl, err / math.pi ** 2, conv, meta)


def t_perp(geom: ThermalGeometry, model: Source, budget: QuadratureBudget = OUTER_BUDGET,
           inner: QuadratureBudget = INNER_BUDGET, *, workers: int = 1) -> StressSplit:
    """Transverse stress only (``t_long`` is reported as 0)."""
    total, err, conv, meta = _outer_integrals(geom, model, budget, inner, True, False, workers)
    tp = -(2.0 / math.pi) * total.real
    return StressSplit(0.0, tp, tp, 2.0 / math.pi * err, conv, meta)


def classical_t_perp(geom: ThermalGeometry, prescription: Prescription,
                     omega_p: Optional[float] = None,
                     budget: QuadratureBudget = QuadratureBudget(rel_tol=1e-10)) -> float:
    """Classical transverse stress ``-(k_B T / 2 pi) int k^2 W(2ka, r_TE(0,k)^2) dk``.

    Drude gives exactly 0 and the ideal reflector
    ``-zeta(3) k_B T / (8 pi a^3)``, both without quadrature.
    """
    kind = prescription.kind
    if kind is PrescriptionKind.DRUDE_ZERO:
        return 0.0
    if kind is PrescriptionKind.IDEAL_UNITY:
        return -geom.classical_scale
    wp = prescription.resolve_omega_p(omega_p)
    if wp is None or not wp > 0:
        raise ValueError(f"plasma prescription needs omega_p > 0, got {wp!r}")
    return _plasma_te(geom, wp, budget).value


@dataclass(frozen=True)
class Extrapolation:
    """Result of the hbar -> 0 extrapolation of the transverse stress.

    Attributes
    ----------
    value : float
        Extrapolated classical transverse stress in Pa.
    error_estimate : float
        Ridders-style error of the selected tableau entry.
    reliable : bool
        False when the ladder values are not monotone beyond their error, or
        when an underlying integral failed to converge.
    ladder : tuple of float
        hbar scale factors used.
    values : tuple of float
        t_perp at each ladder entry.
    """

    value: float
    error_estimate: float
    reliable: bool
    ladder: tuple
    values: tuple
    errors: tuple = ()
    message: str = ""


def default_hbar_ladder(geom: ThermalGeometry, source: Source, n: int = 3) -> tuple:
    """hbar scale factors inside the classical regime.

    The transverse stress is only near its classical value once
    ``hbar W << k_B T`` for every material frequency W (plasma frequency,
    toy roll-off, and ``c / 2a``). The ladder starts at
    ``s_top = k_B T / (hbar W_max)`` (capped at 1) and halves ``n - 1`` times.
    """
    k = geom.constants
    char = source.cutoff if isinstance(source, IdealToy) else source.omega_p
    w_max = max(char, k.c / (2.0 * geom.gap))
    s_top = min(1.0, k.k_b * geom.temp / (k.hbar * w_max))
    return tuple(s_top * 0.5 ** i for i in range(n))


def _neville_ridders(h, values):
    """Extrapolate values(h) to h = 0 by polynomial (Neville) tableau.

    Returns the tableau entry with the smallest error estimate, where the
    error of entry (i, j) is the larger of its distances to the two entries
    it was built from (Ridders' rule).
    """
    n = len(h)
    tab = [[float(v)] for v in values]
    best, best_err = tab[-1][0], abs(values[-1] - values[-2]) if n > 1 else math.inf
    for j in range(1, n):
        for i in range(j, n):
            prev, diag = tab[i][j - 1], tab[i - 1][j - 1]
            new = prev + (prev - diag) * h[i] / (h[i - j] - h[i])
            tab[i].append(new)
            err = max(abs(new - prev), abs(new - diag))
            if err <= best_err:
                best, best_err = new, err
    return best, best_err


def classical_limit_extrapolate(geom: ThermalGeometry, model: Source,
                                s_ladder: Optional[Sequence[float]] = None,
                                budget: QuadratureBudget = OUTER_BUDGET,
                                inner: QuadratureBudget = INNER_BUDGET, *,
                                workers: int = 1) -> Extrapolation:
    """Classical transverse stress from an hbar-scaling ladder.

    ``t_perp`` is evaluated with ``hbar -> s hbar`` for each ``s`` and the
    sequence is extrapolated to ``s = 0`` as a polynomial in ``s^2`` (the
    thermal energy E_b is even in hbar). ``s_ladder`` defaults to
    :func:`default_hbar_ladder`.
    """
    if s_ladder is None:
        s_ladder = default_hbar_ladder(geom, model)
    s = [float(x) for x in s_ladder]
    if len(s) < 3:
        raise ValueError(f"s_ladder needs at least 3 entries, got {len(s)}")
    if any(not 0.0 < x <= 1.0 for x in s):
        raise ValueError("s_ladder entries must lie in (0, 1]")
    if any(b >= a for a, b in zip(s, s[1:])):
        raise ValueError(f"s_ladder must be strictly decreasing, got {s}")
    _check_source(model)

    values, errs = [], []
    conv = True
    for x in s:
        g = ThermalGeometry(geom.gap, geom.temp, geom.constants.scaled(x))
        r = t_perp(g, model, budget, inner, workers=workers)
        values.append(r.t_perp)
        errs.append(r.error_estimate)
        conv &= r.converged
    value, err = _neville_ridders([x * x for x in s], values)

    diffs = np.diff(values)
    tol = max(errs) + budget.rel_tol * max(abs(v) for v in values)
    monotone = bool(np.all(diffs >= -tol) or np.all(diffs <= tol))
    reliable = conv and monotone
    msg = []
    if not monotone:
        msg.append("ladder values are not monotone in s")
    if not conv:
        msg.append("a ladder evaluation did not converge")
    return Extrapolation(value, err + max(errs), reliable, tuple(s), tuple(values), tuple(errs),
                         "; ".join(msg))


@dataclass(frozen=True)
class BvlVerdict:
    """Classical transverse stress normalised by ``zeta(3) k_B T / (8 pi a^3)``.

    ``normalized = -classical_t_perp / reference_scale``, so the ideal
    reflector gives 1. ``consistent`` is true when every ``|normalized|`` is
    below ``threshold``.
    """

    prescription: Prescription
    gaps: tuple
    classical_t_perp: tuple
    reference_scale: tuple
    normalized: tuple
    consistent: bool
    threshold: float
    temp: float = 0.0

    def to_json(self) -> dict:
        return {
            "prescription": self.prescription.name,
            "threshold": self.threshold,
            "gaps_m": list(self.gaps),
            "classical_t_perp_Pa": list(self.classical_t_perp),
            "reference_scale_Pa": list(self.reference_scale),
            "normalized": list(self.normalized),
            "consistent": self.consistent,
        }


def bvl_check(gaps: Sequence[float], temp: float, prescription: Prescription,
              omega_p: Optional[float] = None, threshold: float = DEFAULT_THRESHOLD,
              budget: QuadratureBudget = QuadratureBudget(rel_tol=1e-10),
              constants: PhysicalConstants = PhysicalConstants()) -> BvlVerdict:
    """Check that the classical transverse stress vanishes at every gap.

    Needs at least three gaps spanning at least one decade.
    """
    g = sorted(float(x) for x in gaps)
    if len(g) < 3:
        raise ValueError(f"need at least 3 gaps, got {len(g)}")
    if g[0] <= 0 or g[-1] / g[0] < 10.0 * (1.0 - 1e-12):
        raise ValueError("gaps must be positive and span at least one decade")
    if not (math.isfinite(threshold) and threshold > 0):
        raise ValueError(f"threshold must be > 0, got {threshold!r}")
    values, scales, norm = [], [], []
    for a in [float(x) for x in gaps]:
        geom = ThermalGeometry(a, temp, constants)
        v = classical_t_perp(geom, prescription, omega_p, budget)
        s = geom.classical_scale
        values.append(v)
        scales.append(s)
        # attraction counts positive: ideal reflector -> 1, Drude -> 0
        norm.append(-v / s if v != 0.0 else 0.0)
    consistent = max(abs(x) for x in norm) < threshold
    return BvlVerdict(prescription, tuple(float(x) for x in gaps), tuple(values), tuple(scales),
                      tuple(norm), consistent, threshold, temp)
