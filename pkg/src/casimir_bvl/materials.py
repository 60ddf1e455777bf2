"""Permittivity models, physical constants and tabulated optical data.

Frequencies are angular frequencies in rad/s throughout. Conversions from eV
happen only at the command-line boundary (see :func:`ev_to_rad_s`).
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import constants as sc

from .errors import CapabilityError
from .quadrature import QuadratureBudget, integrate_panels

__all__ = [
    "MaterialKind",
    "MaterialModel",
    "OpticalTable",
    "PhysicalConstants",
    "KKResult",
    "GOLD_OMEGA_P",
    "GOLD_GAMMA",
    "eps_imag_axis",
    "eps_real_axis",
    "kk_to_imag_axis",
    "e_beta",
    "ev_to_rad_s",
]

# Literature Drude parameters for gold (about 9.0 eV and 0.035 eV). These are
# defaults for the configuration layer; physics code always takes them as
# arguments.
GOLD_OMEGA_P = 1.37e16
GOLD_GAMMA = 5.32e13


def ev_to_rad_s(energy_ev: float) -> float:
    """Convert a photon energy in eV to an angular frequency E/hbar."""
    return energy_ev * sc.electron_volt / sc.hbar


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants with a scale factor on Planck's constant.

    The effective hbar used by every formula is ``hbar_scale * hbar``;
    sending ``hbar_scale`` toward 0 at fixed temperature probes the classical
    limit.
    """

    hbar: float = sc.hbar
    k_b: float = sc.k
    c: float = sc.c
    hbar_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.hbar_scale <= 1.0:
            raise ValueError(f"hbar_scale must lie in (0, 1], got {self.hbar_scale!r}")
        for name in ("hbar", "k_b", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")

    @property
    def hbar_eff(self) -> float:
        return self.hbar_scale * self.hbar

    def scaled(self, hbar_scale: float) -> "PhysicalConstants":
        return dataclasses.replace(self, hbar_scale=hbar_scale)


class MaterialKind(enum.Enum):
    DRUDE = "drude"
    PLASMA = "plasma"
    IDEAL = "ideal"
    TABULATED = "table"


@dataclass(frozen=True)
class OpticalTable:
    """Tabulated imaginary part of the permittivity on the real axis.

    Parameters
    ----------
    omega : sequence of float
        Angular frequencies in rad/s, strictly increasing and positive.
    im_eps : sequence of float
        Im eps(omega) >= 0 at those frequencies.
    source : str, optional
        Provenance note (file path or generator), not used in comparisons.
    """

    omega: tuple
    im_eps: tuple
    source: str = field(default="", compare=False)

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        e = np.asarray(self.im_eps, dtype=float)
        if w.ndim != 1 or w.shape != e.shape:
            raise ValueError("omega and im_eps must be 1-D sequences of equal length")
        if w.size < 8:
            raise ValueError(f"an optical table needs at least 8 rows, got {w.size}")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(e)):
            raise ValueError("optical table contains non-finite values")
        if np.any(w <= 0):
            raise ValueError("table frequencies must be > 0")
        if np.any(np.diff(w) <= 0):
            raise ValueError("table frequencies must be strictly increasing")
        if np.any(e < 0):
            raise ValueError("Im eps must be >= 0 (passive medium)")
        object.__setattr__(self, "omega", tuple(float(x) for x in w))
        object.__setattr__(self, "im_eps", tuple(float(x) for x in e))

    @property
    def omega_array(self) -> np.ndarray:
        return np.asarray(self.omega)

    @property
    def im_eps_array(self) -> np.ndarray:
        return np.asarray(self.im_eps)

    @property
    def is_vacuum(self) -> bool:
        return not any(self.im_eps)

    @classmethod
    def from_csv(cls, path) -> "OpticalTable":
        """Read a ``omega_rad_s,im_eps`` CSV file; ``#`` lines are comments."""
        path = Path(path)
        with path.open(newline="") as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
        rows = list(csv.reader(lines))
        if not rows or [h.strip() for h in rows[0]] != ["omega_rad_s", "im_eps"]:
            raise ValueError(f"{path}: expected header 'omega_rad_s,im_eps'")
        omega, im_eps = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 2:
                raise ValueError(f"{path}: data row {lineno - 1} has {len(row)} fields, expected 2")
            try:
                omega.append(float(row[0]))
                im_eps.append(float(row[1]))
            except ValueError as exc:
                raise ValueError(f"{path}: data row {lineno - 1}: {exc}") from None
        return cls(tuple(omega), tuple(im_eps), source=str(path))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            fh.write("omega_rad_s,im_eps\n")
            for w, e in zip(self.omega, self.im_eps):
                fh.write(f"{w!r},{e!r}\n")

    @classmethod
    def from_model(cls, model: "MaterialModel", omega) -> "OpticalTable":
        """Sample Im eps of an analytic model on the given real frequencies."""
        omega = np.asarray(omega, dtype=float)
        im = np.imag(eps_real_axis(model, omega))
        return cls(tuple(omega), tuple(np.maximum(im, 0.0)), source=f"synthesized from {model.kind.value}")


@dataclass(frozen=True)
class MaterialModel:
    """Permittivity model of the plate material.

    Use the constructors :meth:`drude`, :meth:`plasma`, :meth:`ideal` and
    :meth:`tabulated` rather than filling the fields by hand.
    """

    kind: MaterialKind
    omega_p: Optional[float] = None
    gamma: Optional[float] = None
    table: Optional[OpticalTable] = None

    def __post_init__(self):
        k = self.kind
        if k in (MaterialKind.DRUDE, MaterialKind.PLASMA):
            if self.omega_p is None or not (math.isfinite(self.omega_p) and self.omega_p > 0):
                raise ValueError(f"{k.value} model needs omega_p > 0, got {self.omega_p!r}")
        elif self.omega_p is not None:
            raise ValueError(f"{k.value} model takes no omega_p")
        if k is MaterialKind.DRUDE:
            if self.gamma is None or not (math.isfinite(self.gamma) and self.gamma > 0):
                raise ValueError(
                    f"Drude model needs gamma > 0 (use the plasma model for gamma = 0), got {self.gamma!r}")
        elif self.gamma is not None:
            raise ValueError(f"{k.value} model takes no gamma")
        if k is MaterialKind.TABULATED:
            if not isinstance(self.table, OpticalTable):
                raise ValueError("tabulated model needs an OpticalTable")
        elif self.table is not None:
            raise ValueError(f"{k.value} model takes no table")

    @classmethod
    def drude(cls, omega_p: float = GOLD_OMEGA_P, gamma: float = GOLD_GAMMA) -> "MaterialModel":
        return cls(MaterialKind.DRUDE, omega_p=float(omega_p), gamma=float(gamma))

    @classmethod
    def plasma(cls, omega_p: float = GOLD_OMEGA_P) -> "MaterialModel":
        return cls(MaterialKind.PLASMA, omega_p=float(omega_p))

    @classmethod
    def ideal(cls) -> "MaterialModel":
        return cls(MaterialKind.IDEAL)

    @classmethod
    def tabulated(cls, table: OpticalTable) -> "MaterialModel":
        return cls(MaterialKind.TABULATED, table=table)

    @property
    def is_vacuum(self) -> bool:
        return self.kind is MaterialKind.TABULATED and self.table.is_vacuum

    def describe(self) -> dict:
        out = {"kind": self.kind.value}
        if self.omega_p is not None:
            out["omega_p_rad_s"] = self.omega_p
        if self.gamma is not None:
            out["gamma_rad_s"] = self.gamma
        if self.table is not None:
            out["table"] = self.table.source
        return out


def _check_positive(name, x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError(f"{name} must be > 0, got {x!r}")
    return arr


def eps_imag_axis(model: MaterialModel, xi, budget: Optional[QuadratureBudget] = None):
    """Permittivity eps(i xi) at imaginary frequency ``xi`` (rad/s).

    Accepts a scalar or an array. Returns ``inf`` for the ideal metal; the
    reflection layer turns that into the limiting coefficients.
    """
    x = _check_positive("xi", xi)
    k = model.kind
    if k is MaterialKind.DRUDE:
        out = 1.0 + model.omega_p ** 2 / (x * (x + model.gamma))
    elif k is MaterialKind.PLASMA:
        out = 1.0 + (model.omega_p / x) ** 2
    elif k is MaterialKind.IDEAL:
        out = np.full_like(x, np.inf)
    else:
        flat = [kk_to_imag_axis(model.table, float(v), budget).value for v in x.ravel()]
        out = np.asarray(flat).reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def eps_real_axis(model: MaterialModel, omega):
    """Complex permittivity eps(omega) on the real axis (Drude or plasma)."""
    w = _check_positive("omega", omega)
    k = model.kind
    if k is MaterialKind.DRUDE:
        out = 1.0 - model.omega_p ** 2 / (w * (w + 1j * model.gamma))
    elif k is MaterialKind.PLASMA:
        out = (1.0 - (model.omega_p / w) ** 2) + 0j
    else:
        raise CapabilityError(
            f"real-axis permittivity is only available for analytic Drude or plasma models, not {k.value}")
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KKResult:
    """Kramers-Kronig value of eps(i xi) with coverage diagnostics.

    Attributes
    ----------
    value : float
        eps(i xi) >= 1.
    error_estimate : float
        Quadrature error on ``value``.
    extrapolated_fraction : float
        Share of ``value - 1`` contributed by the power-law tails outside the
        table range.
    warnings : tuple of str
        Coverage warnings (e.g. xi far below the table).
    """

    value: float
    error_estimate: float
    extrapolated_fraction: float
    warnings: tuple = ()

    def __float__(self):
        return self.value


def _x_minus_atan(a):
    # a - atan(a) without cancellation for small a
    if a < 1e-2:
        a2 = a * a
        return a * a2 * (1.0 / 3.0 - a2 * (1.0 / 5.0 - a2 * (1.0 / 7.0 - a2 / 9.0)))
    return a - math.atan(a)


def _loglog_interp(table: OpticalTable):
    lw = np.log(table.omega_array)
    e = table.im_eps_array
    pos = e > 0
    le = np.where(pos, np.log(np.where(pos, e, 1.0)), 0.0)

    def interp(u):
        i = np.clip(np.searchsorted(lw, u, side="right") - 1, 0, lw.size - 2)
        t = (u - lw[i]) / (lw[i + 1] - lw[i])
        both = pos[i] & pos[i + 1]
        log_val = np.exp(le[i] + t * (le[i + 1] - le[i]))
        lin_val = e[i] + t * (e[i + 1] - e[i])
        return np.where(both, log_val, lin_val)

    return interp


def kk_to_imag_axis(table: OpticalTable, xi: float,
                    budget: Optional[QuadratureBudget] = None) -> KKResult:
    """Kramers-Kronig transform of tabulated Im eps to the imaginary axis.

    Evaluates ``1 + (2/pi) * int_0^inf w Im eps(w) / (w^2 + xi^2) dw``.
    Inside the table Im eps is interpolated linearly in log-log space
    (linearly where a row is zero). Below the first row Im eps is continued
    proportional to ``w``, above the last row proportional to ``w**-3``; both
    tails are integrated in closed form.
    """
    if not xi > 0:
        raise ValueError(f"xi must be > 0, got {xi!r}")
    if table.is_vacuum:
        return KKResult(1.0, 0.0, 0.0)
    budget = budget or QuadratureBudget(rel_tol=1e-10)
    w = table.omega_array
    e = table.im_eps_array
    w0, wn = w[0], w[-1]

    # lower tail: Im eps = e0 * w / w0
    a = w0 / xi
    low = (e[0] / w0) * xi * _x_minus_atan(a)
    # upper tail: Im eps = eN * (wN / w)^3
    b = xi / wn
    high = e[-1] * _x_minus_atan(b) / (b ** 3) / wn if b > 0 else 0.0

    interp = _loglog_interp(table)

    def integrand(u):
        om = np.exp(u)
        return om * om * interp(u) / (om * om + xi * xi)

    res = integrate_panels(integrand, np.log(w), budget)
    body = res.value
    total = body + low + high
    value = 1.0 + (2.0 / math.pi) * total
    warnings = []
    if xi < 1e-6 * w0:
        warnings.append(f"xi = {xi:.3g} rad/s is below 1e-6 x the first table frequency; "
                        "result is dominated by extrapolation")
    if not res.converged:
        warnings.append(res.message)
    frac = (low + high) / total if total > 0 else 0.0
    return KKResult(float(value), (2.0 / math.pi) * res.error_estimate, float(frac), tuple(warnings))


def e_beta(omega, temp: float, constants: PhysicalConstants = PhysicalConstants()):
    """Mean energy of a thermal oscillator, (hbar w / 2) coth(hbar w / 2 k_B T).

    Uses the effective hbar. The form ``k_B T * x / tanh(x)`` is evaluated
    with a series for small ``x`` so the classical limit k_B T is reached
    without cancellation.
    """
    w = _check_positive("omega", omega)
    if not temp > 0:
        raise ValueError(f"temp must be > 0, got {temp!r}")
    kt = constants.k_b * temp
    x = constants.hbar_eff * w / (2.0 * kt)
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    out = kt * np.where(small, 1.0 + x * x / 3.0, xs / np.tanh(xs))
    return float(out) if out.ndim == 0 else out
