"""Command-line interface, JSON run configuration and output writers.

Usage examples::

    casimir-bvl pressure --gap 1e-6 --temp 300 --material drude --prescription drude
    casimir-bvl compare --gap-range 0.5e-6:8e-6:5 --temp 300
    casimir-bvl bvl-check --gap-range 1e-7:1e-5:5 --prescription plasma
    casimir-bvl eps-table --material table:gold.csv --temp 300
    casimir-bvl pressure --config run.json --dump-config > resolved.json

A configuration file is one JSON document (see :class:`RunConfig`); flags
override its fields. Frequencies are given in rad/s or, with an ``eV``
suffix, as photon energies.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
non-convergence (rows are still written, with ``converged=false``).
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .lifshitz import ThermalGeometry, matsubara_xi, pressure
from .materials import (GOLD_GAMMA, GOLD_OMEGA_P, MaterialKind, MaterialModel, OpticalTable,
                        PhysicalConstants, eps_imag_axis, ev_to_rad_s, kk_to_imag_axis)
from .quadrature import QuadratureBudget
from .reflection import Prescription, PrescriptionKind
from .stress_bvl import DEFAULT_THRESHOLD, bvl_check

__all__ = ["RunConfig", "main", "build_parser", "load_config", "parse_frequency"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2

GAP_MIN, GAP_MAX = 1e-9, 1e-3
PRESSURE_HEADER = ["gap_m", "temp_K", "prescription", "pressure_Pa", "error_Pa",
                   "n_terms", "zero_term_Pa", "converged"]


def parse_frequency(text) -> float:
    """Parse ``1.37e16``, ``1.37e16rad/s`` or ``9.0eV`` into rad/s."""
    if isinstance(text, (int, float)):
        value = float(text)
    else:
        s = str(text).strip()
        if s.lower().endswith("ev"):
            value = ev_to_rad_s(float(s[:-2]))
        elif s.endswith("rad/s"):
            value = float(s[:-5])
        else:
            value = float(s)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"frequency must be > 0, got {text!r}")
    return value


@dataclass
class RunConfig:
    """Everything a run depends on; serialises to and from one JSON document.

    ``gaps`` is an explicit list in metres; ``gap_range`` (``lo``, ``hi``,
    ``count``, logarithmic) is used when ``gaps`` is empty.
    """

    material: str = "drude"
    omega_p: float = GOLD_OMEGA_P
    gamma: float = GOLD_GAMMA
    prescription: str = "drude"
    gaps: list = field(default_factory=list)
    gap_range: Optional[dict] = None
    temp: float = 300.0
    hbar_scale: float = 1.0
    rel_tol: float = 1e-9
    abs_tol: float = 0.0
    max_subdivisions: int = 2000
    format: Optional[str] = None
    out: Optional[str] = None
    threshold: float = DEFAULT_THRESHOLD
    compare: list = field(default_factory=lambda: ["drude", "plasma"])
    n_terms: int = 50
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # ---- validation and derived objects -------------------------------------------------

    def gap_list(self) -> list:
        if self.gaps:
            try:
                gaps = [float(g) for g in self.gaps]
            except (TypeError, ValueError):
                raise ConfigError(f"gaps: expected a list of numbers, got {self.gaps!r}") from None
        elif self.gap_range:
            r = self.gap_range
            try:
                lo, hi, count = float(r["lo"]), float(r["hi"]), int(r["count"])
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"gap_range: expected {{lo, hi, count}}, got {r!r}") from None
            if not (lo > 0 and hi > lo and count >= 2):
                raise ConfigError(f"gap_range: need 0 < lo < hi and count >= 2, got {r!r}")
            gaps = list(np.geomspace(lo, hi, count))
        else:
            raise ConfigError("no gap given: use --gap, --gap-range or the 'gaps' field")
        for g in gaps:
            if not (GAP_MIN <= g <= GAP_MAX):
                raise ConfigError(f"gap {g!r} m outside the supported range [{GAP_MIN}, {GAP_MAX}] m")
        return [float(g) for g in gaps]

    def check_scalars(self):
        if not (isinstance(self.temp, (int, float)) and math.isfinite(self.temp) and self.temp > 0):
            raise ConfigError(f"temp: must be > 0 K, got {self.temp!r}")
        if not (isinstance(self.hbar_scale, (int, float)) and 0 < self.hbar_scale <= 1):
            raise ConfigError(f"hbar_scale: must lie in (0, 1], got {self.hbar_scale!r}")
        if self.format not in (None, "csv", "json"):
            raise ConfigError(f"format: expected csv or json, got {self.format!r}")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError(f"workers: must be an integer >= 1, got {self.workers!r}")
        if not (isinstance(self.n_terms, int) and self.n_terms >= 1):
            raise ConfigError(f"n_terms: must be an integer >= 1, got {self.n_terms!r}")

    def budget(self) -> QuadratureBudget:
        try:
            return QuadratureBudget(rel_tol=float(self.rel_tol), abs_tol=float(self.abs_tol),
                                    max_subdivisions=int(self.max_subdivisions))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"quadrature: {exc}") from None

    def constants(self) -> PhysicalConstants:
        return PhysicalConstants(hbar_scale=float(self.hbar_scale))

    def frequencies(self):
        try:
            return parse_frequency(self.omega_p), parse_frequency(self.gamma)
        except ValueError as exc:
            raise ConfigError(f"omega_p/gamma: {exc}") from None

    def model(self, kind: Optional[str] = None) -> MaterialModel:
        """Material model; ``kind`` overrides the analytic model type."""
        name = self.material
        if isinstance(name, str) and name.startswith("table:"):
            path = name[len("table:"):]
            try:
                table = OpticalTable.from_csv(path)
            except FileNotFoundError:
                raise ConfigError(f"material: table file not found: {path}") from None
            except ValueError as exc:
                raise ConfigError(f"material: {exc}") from None
            return MaterialModel.tabulated(table)
        kind = kind or name
        wp, gamma = self.frequencies()
        if kind == "drude":
            return MaterialModel.drude(wp, gamma)
        if kind == "plasma":
            return MaterialModel.plasma(wp)
        if kind == "ideal":
            return MaterialModel.ideal()
        raise ConfigError(f"material: expected drude, plasma, ideal or table:<path>, got {name!r}")

    def prescription_obj(self, name: Optional[str] = None) -> Prescription:
        name = name or self.prescription
        try:
            return Prescription.parse(name)
        except ValueError:
            raise ConfigError(f"prescription: expected drude, plasma or ideal, got {name!r}") from None


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return RunConfig.from_dict(data)


def _parse_gap_range(text: str) -> dict:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--gap-range: expected lo:hi:count, got {text!r}")
    try:
        return {"lo": float(parts[0]), "hi": float(parts[1]), "count": int(parts[2])}
    except ValueError:
        raise ConfigError(f"--gap-range: expected lo:hi:count, got {text!r}") from None


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.gap is not None:
        cfg.gaps = list(args.gap)
        cfg.gap_range = None
    if args.gap_range is not None:
        cfg.gap_range = _parse_gap_range(args.gap_range)
        cfg.gaps = []
    simple = {
        "temp": "temp", "material": "material", "omega_p": "omega_p", "gamma": "gamma",
        "prescription": "prescription", "hbar_scale": "hbar_scale", "out": "out", "format": "format",
        "threshold": "threshold", "n_terms": "n_terms", "workers": "workers", "rel_tol": "rel_tol",
    }
    for attr, key in simple.items():
        v = getattr(args, attr, None)
        if v is not None:
            setattr(cfg, key, v)
    if getattr(args, "pair", None) is not None:
        cfg.compare = args.pair.split(",")
    # normalise frequencies to rad/s so a dumped config is unit-free
    if isinstance(cfg.omega_p, str) or isinstance(cfg.gamma, str):
        cfg.omega_p, cfg.gamma = cfg.frequencies()
    return cfg


# ---- formatting -------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[h]) for h in header) + "\n")
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _emit(text: str, out: Optional[str]):
    """Write ``text`` to ``out`` atomically (or to stdout)."""
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _warn_pairing(model: MaterialModel, presc: Prescription):
    expected = {MaterialKind.DRUDE: PrescriptionKind.DRUDE_ZERO,
                MaterialKind.PLASMA: PrescriptionKind.PLASMA_ZERO,
                MaterialKind.IDEAL: PrescriptionKind.IDEAL_UNITY}.get(model.kind)
    if expected is not None and expected is not presc.kind:
        print(f"warning: {model.kind.value} material combined with the {presc.name} "
              "zero-frequency prescription", file=sys.stderr)


# ---- commands ---------------------------------------------------------------------------


def cmd_pressure(cfg: RunConfig):
    cfg.check_scalars()
    gaps = cfg.gap_list()
    model = cfg.model()
    presc = cfg.prescription_obj()
    _warn_pairing(model, presc)
    budget = cfg.budget()
    consts = cfg.constants()

    def row(a):
        r = pressure(ThermalGeometry(a, float(cfg.temp), consts), model, presc, budget)
        return {"gap_m": a, "temp_K": float(cfg.temp), "prescription": presc.name,
                "pressure_Pa": r.pressure, "error_Pa": r.error_estimate, "n_terms": r.n_terms,
                "zero_term_Pa": r.zero_term, "converged": r.converged}

    rows = _map(row, gaps, cfg.workers)
    if cfg.format != "json":
        text = _csv(PRESSURE_HEADER, rows)
    else:
        text = _json({"command": "pressure", "material": model.describe(), "rows": rows})
    ok = all(r["converged"] for r in rows)
    return text, ok


def cmd_compare(cfg: RunConfig):
    cfg.check_scalars()
    gaps = cfg.gap_list()
    if not (isinstance(cfg.compare, list) and len(cfg.compare) == 2):
        raise ConfigError(f"compare: expected two prescriptions, got {cfg.compare!r}")
    left, right = (cfg.prescription_obj(n) for n in cfg.compare)
    tabulated = isinstance(cfg.material, str) and cfg.material.startswith("table:")
    # each column uses the material model matching its prescription, unless a table is given
    m_left = cfg.model(None if tabulated else left.name)
    m_right = cfg.model(None if tabulated else right.name)
    budget = cfg.budget()
    consts = cfg.constants()
    wp = cfg.frequencies()[0]
    left_p = Prescription(left.kind, wp if left.kind is PrescriptionKind.PLASMA_ZERO else None)
    right_p = Prescription(right.kind, wp if right.kind is PrescriptionKind.PLASMA_ZERO else None)
    lname, rname = f"P_{left.name}_Pa", f"P_{right.name}_Pa"
    if lname == rname:
        lname, rname = f"P_left_{left.name}_Pa", f"P_right_{right.name}_Pa"
    header = ["gap_m", "temp_K", lname, rname, "ratio", "zero_term_diff_Pa", "converged"]

    def row(a):
        geom = ThermalGeometry(a, float(cfg.temp), consts)
        pl = pressure(geom, m_left, left_p, budget)
        pr = pressure(geom, m_right, right_p, budget)
        ratio = pl.pressure / pr.pressure if pr.pressure != 0 else math.nan
        return {"gap_m": a, "temp_K": float(cfg.temp), lname: pl.pressure, rname: pr.pressure,
                "ratio": ratio, "zero_term_diff_Pa": pl.zero_term - pr.zero_term,
                "converged": pl.converged and pr.converged}

    rows = _map(row, gaps, cfg.workers)
    if cfg.format != "json":
        text = _csv(header, rows)
    else:
        text = _json({"command": "compare", "columns": [left.name, right.name], "rows": rows})
    return text, all(r["converged"] for r in rows)


def cmd_bvl(cfg: RunConfig):
    cfg.check_scalars()
    gaps = cfg.gap_list()
    presc = cfg.prescription_obj()
    wp = cfg.frequencies()[0] if presc.kind is PrescriptionKind.PLASMA_ZERO else None
    try:
        threshold = float(cfg.threshold)
        verdict = bvl_check(gaps, float(cfg.temp), presc, wp, threshold,
                            QuadratureBudget(rel_tol=min(float(cfg.rel_tol), 1e-10)), cfg.constants())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    doc = verdict.to_json()
    if cfg.format == "csv":  # the verdict defaults to JSON
        rows = [{"gap_m": g, "classical_t_perp_Pa": v, "reference_scale_Pa": s, "normalized": n}
                for g, v, s, n in zip(doc["gaps_m"], doc["classical_t_perp_Pa"],
                                      doc["reference_scale_Pa"], doc["normalized"])]
        text = _csv(["gap_m", "classical_t_perp_Pa", "reference_scale_Pa", "normalized"], rows)
    else:
        text = _json(doc)
    return text, True


def cmd_eps_table(cfg: RunConfig):
    cfg.check_scalars()
    model = cfg.model()
    consts = cfg.constants()
    rows = []
    for l in range(1, cfg.n_terms + 1):
        xi = matsubara_xi(l, float(cfg.temp), consts)
        row = {"l": l, "xi_rad_s": xi}
        if model.kind is MaterialKind.TABULATED:
            kk = kk_to_imag_axis(model.table, xi)
            row.update(eps=kk.value, extrapolated_fraction=kk.extrapolated_fraction)
        else:
            row["eps"] = eps_imag_axis(model, xi)
        rows.append(row)
    header = ["l", "xi_rad_s", "eps"]
    if model.kind is MaterialKind.TABULATED:
        header.append("extrapolated_fraction")
    if cfg.format != "json":
        text = _csv(header, rows)
    else:
        text = _json({"command": "eps-table", "material": model.describe(), "rows": rows})
    return text, True


COMMANDS = {
    "pressure": cmd_pressure,
    "compare": cmd_compare,
    "bvl-check": cmd_bvl,
    "eps-table": cmd_eps_table,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="casimir-bvl", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "pressure": "Matsubara-sum pressure for each gap",
        "compare": "pressure under two zero-frequency prescriptions side by side",
        "bvl-check": "classical transverse stress verdict for a prescription",
        "eps-table": "eps(i xi_l) at the Matsubara frequencies",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--gap", type=float, action="append", help="gap in m (repeatable)")
        s.add_argument("--gap-range", help="log-spaced gaps lo:hi:count in m")
        s.add_argument("--temp", type=float, help="temperature in K")
        s.add_argument("--material", help="drude | plasma | ideal | table:<path>")
        s.add_argument("--omega-p", help="plasma frequency, rad/s or with eV suffix")
        s.add_argument("--gamma", help="relaxation rate, rad/s or with eV suffix")
        s.add_argument("--prescription", help="drude | plasma | ideal")
        s.add_argument("--hbar-scale", type=float, help="factor s in hbar -> s hbar")
        s.add_argument("--out", help="output file (default: stdout)")
        s.add_argument("--format", choices=["csv", "json"],
                       help="output format (default: json for bvl-check, csv otherwise)")
        s.add_argument("--dump-config", action="store_true",
                       help="print the resolved configuration as JSON and exit")
        s.add_argument("--rel-tol", type=float, help="relative tolerance of integrals and sums")
        s.add_argument("--workers", type=int, help="threads over sweep points")
        if name == "bvl-check":
            s.add_argument("--threshold", type=float, help="verdict threshold on |normalized|")
        if name == "compare":
            s.add_argument("--pair", help="two prescriptions, e.g. drude,plasma")
        if name == "eps-table":
            s.add_argument("--n-terms", type=int, help="number of Matsubara frequencies")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_overrides(cfg, args)
        if args.dump_config:
            sys.stdout.write(_json(cfg.to_dict()))
            return EXIT_OK
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            text, ok = COMMANDS[args.command](cfg)
        _emit(text, cfg.out)
    except (ConfigError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not ok:
        print("error: at least one row did not converge (see the converged column)", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
