"""Fresnel reflection coefficients of a vacuum/half-space interface.

Signed coefficients follow the usual optics convention (r_TE < 0 on the
imaginary axis). Every observable in the package depends on r**2 only.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import CapabilityError, PoleError

__all__ = [
    "PrescriptionKind",
    "Prescription",
    "ReflectionPair",
    "fresnel_imag_axis",
    "fresnel_real_axis",
    "r_te_zero",
    "r_tm_zero",
    "rbar",
    "imag_axis_r2",
]


class PrescriptionKind(enum.Enum):
    DRUDE_ZERO = "drude"
    PLASMA_ZERO = "plasma"
    IDEAL_UNITY = "ideal"


@dataclass(frozen=True)
class Prescription:
    """Rule for the zero-frequency TE reflection coefficient.

    Parameters
    ----------
    kind : PrescriptionKind
    omega_p : float, optional
        Plasma frequency for ``PLASMA_ZERO``. When omitted the material's
        value is used.
    """

    kind: PrescriptionKind
    omega_p: Optional[float] = None

    def __post_init__(self):
        if self.omega_p is not None:
            if self.kind is not PrescriptionKind.PLASMA_ZERO:
                raise ValueError(f"{self.kind.value} prescription takes no omega_p")
            if not (math.isfinite(self.omega_p) and self.omega_p > 0):
                raise ValueError(f"omega_p must be > 0, got {self.omega_p!r}")

    @classmethod
    def parse(cls, name: str, omega_p: Optional[float] = None) -> "Prescription":
        try:
            kind = PrescriptionKind(str(name).strip().lower())
        except ValueError:
            raise ValueError(f"unknown prescription {name!r}; expected drude, plasma or ideal") from None
        return cls(kind, omega_p if kind is PrescriptionKind.PLASMA_ZERO else None)

    @property
    def name(self) -> str:
        return self.kind.value

    def resolve_omega_p(self, fallback: Optional[float]) -> Optional[float]:
        return self.omega_p if self.omega_p is not None else fallback


class ReflectionPair(NamedTuple):
    r_te: object
    r_tm: object


def _ideal_mask(eps):
    return np.isinf(np.real(eps))


def fresnel_imag_axis(eps, xi, kperp, c: float) -> ReflectionPair:
    """Reflection coefficients at imaginary frequency ``i xi``.

    With ``q = sqrt(k^2 + xi^2/c^2)`` and ``k_m = sqrt(k^2 + eps xi^2/c^2)``,
    ``r_te = (q - k_m)/(q + k_m)`` and ``r_tm = (eps q - k_m)/(eps q + k_m)``.
    The numerators are rewritten so that eps close to 1 loses no digits.
    ``eps = inf`` gives the ideal-metal limits (-1, 1).
    """
    eps = np.asarray(eps, dtype=float)
    xi = np.asarray(xi, dtype=float)
    k = np.asarray(kperp, dtype=float)
    if np.any(eps < 1):
        raise ValueError("eps on the imaginary axis must be >= 1")
    if np.any(~(xi > 0)) or np.any(k < 0):
        raise ValueError("need xi > 0 and kperp >= 0")
    ideal = _ideal_mask(eps)
    e = np.where(ideal, 2.0, eps)
    w2 = (xi / c) ** 2
    q = np.sqrt(k * k + w2)
    km = np.sqrt(k * k + e * w2)
    em1 = e - 1.0
    r_te = -em1 * w2 / (q + km) ** 2
    r_tm = em1 * ((e + 1.0) * k * k + e * w2) / (e * q + km) ** 2
    r_te = np.where(ideal, -1.0, r_te)
    r_tm = np.where(ideal, 1.0, r_tm)
    if r_te.ndim == 0:
        return ReflectionPair(float(r_te), float(r_tm))
    return ReflectionPair(r_te, r_tm)


def imag_axis_r2(eps, xi, kperp, c: float):
    """Return ``(r_te^2, 1 - r_te^2, r_tm^2, 1 - r_tm^2)`` without cancellation.

    ``1 - r^2`` is formed as ``4 a b / (a + b)^2`` so the Lifshitz weight stays
    accurate when |r| is close to one.
    """
    eps = np.asarray(eps, dtype=float)
    ideal = _ideal_mask(eps)
    e = np.where(ideal, 2.0, eps)
    w2 = (np.asarray(xi, dtype=float) / c) ** 2
    k = np.asarray(kperp, dtype=float)
    q = np.sqrt(k * k + w2)
    km = np.sqrt(k * k + e * w2)
    em1 = e - 1.0
    r_te = -em1 * w2 / (q + km) ** 2
    r_tm = em1 * ((e + 1.0) * k * k + e * w2) / (e * q + km) ** 2
    omr_te = 4.0 * q * km / (q + km) ** 2
    omr_tm = 4.0 * e * q * km / (e * q + km) ** 2
    one, zero = 1.0, 0.0
    return (np.where(ideal, one, r_te * r_te), np.where(ideal, zero, omr_te),
            np.where(ideal, one, r_tm * r_tm), np.where(ideal, zero, omr_tm))


def r_te_zero(p: Prescription, kperp, omega_p: Optional[float], c: float):
    """Zero-frequency TE reflection coefficient under prescription ``p``.

    Drude: 0. Ideal: 1. Plasma:
    ``(sqrt(K^2 + k^2) - k) / (sqrt(K^2 + k^2) + k)`` with ``K = omega_p / c``.
    """
    k = np.asarray(kperp, dtype=float)
    if np.any(~(k > 0)):
        raise ValueError("kperp must be > 0")
    if p.kind is PrescriptionKind.DRUDE_ZERO:
        out = np.zeros_like(k)
    elif p.kind is PrescriptionKind.IDEAL_UNITY:
        out = np.ones_like(k)
    else:
        wp = p.resolve_omega_p(omega_p)
        if wp is None or not wp > 0:
            raise ValueError(f"plasma prescription needs omega_p > 0, got {wp!r}")
        big_k = wp / c
        s = np.sqrt(big_k * big_k + k * k)
        out = big_k * big_k / (s + k) ** 2
    return float(out) if out.ndim == 0 else out


def r_tm_zero() -> float:
    """Zero-frequency TM reflection coefficient of a conductor: exactly 1."""
    return 1.0


def _vac_sqrt(z):
    # Re q >= 0; on the cut (z real negative) take Im q <= 0
    z = np.asarray(z, dtype=complex)
    q = np.sqrt(z)
    on_cut = (z.imag == 0) & (z.real < 0)
    return np.where(on_cut, -1j * np.sqrt(np.abs(z.real)), q)


def fresnel_real_axis(eps, omega, kperp, c: float) -> ReflectionPair:
    """Reflection coefficients at real frequency ``omega``.

    ``q = sqrt(k^2 - omega^2/c^2)`` with Re q >= 0 (Im q <= 0 on the cut) and
    ``k_m = sqrt(k^2 - eps omega^2/c^2)`` with Im k_m <= 0. A lossless eps
    that puts ``k_m`` exactly on its branch cut has no unique answer and is
    rejected with :class:`CapabilityError`.
    """
    eps = np.asarray(eps, dtype=complex)
    w = np.asarray(omega, dtype=float)
    k = np.asarray(kperp, dtype=float)
    if np.any(eps.imag < 0):
        raise ValueError("Im eps must be >= 0 (passive medium)")
    if np.any(~(w > 0)) or np.any(k < 0):
        raise ValueError("need omega > 0 and kperp >= 0")
    w2 = (w / c) ** 2
    q = _vac_sqrt(k * k - w2 + 0j)
    zm = k * k - eps * w2
    if np.any((zm.imag == 0) & (zm.real < 0)):
        raise CapabilityError(
            "lossless permittivity puts the medium wavevector on its branch cut; "
            "add loss (gamma > 0) for real-axis evaluation")
    km = np.sqrt(zm)
    r_te = (q - km) / (q + km)
    r_tm = (eps * q - km) / (eps * q + km)
    if r_te.ndim == 0:
        return ReflectionPair(complex(r_te), complex(r_tm))
    return ReflectionPair(r_te, r_tm)


def rbar(eps):
    """Nonretarded reflection coefficient (eps - 1)/(eps + 1).

    ``eps = inf`` returns 1. ``eps = -1`` is the surface-mode pole and raises
    :class:`PoleError`.
    """
    e = np.asarray(eps, dtype=complex)
    if np.any(e == -1):
        raise PoleError(f"rbar evaluated at the surface-mode pole eps = -1 (input {eps!r})")
    inf = np.isinf(e.real)
    safe = np.where(inf, 0.0, e)
    out = np.where(inf, 1.0 + 0j, (safe - 1.0) / (safe + 1.0))
    return complex(out) if out.ndim == 0 else out
