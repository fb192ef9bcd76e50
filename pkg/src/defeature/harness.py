"""Experiment runner: case catalog, sweeps, rate fits and report emission.

The catalog ids map one-to-one to the studies of the validation campaign
(feature-shape table, two-hole table, 2D/3D convergence figures, the
Neumann-data study, rounds and fillets).  `run_case` executes the whole
pipeline for one parameter point; `run_sweep` repeats it over a strictly
decreasing size list and fits log-log rates.
"""

from __future__ import annotations

import configparser
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from .errors import ConfigurationError, StageError
from .estimator import (EstimatorReport, assemble_ud, estimator,
                        estimator_tilde, flux_residual, oscillation,
                        sigma_defects)
from .fem import (ProblemData, dirichlet_vertices, h1_seminorm_diff,
                  solve_poisson, transfer_vertex_values)
from .geometry import (Tag, DIRICHLET, NEUMANN_REST, GAMMA_N, GAMMA_0N,
                       GAMMA_P, GAMMA_0P, GAMMA_TILDE)
from .meshing import generate_pair, refine_pair

_ZERO = lambda x: np.zeros(len(x))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    case: str | None = None
    family: str | None = None
    params: dict = field(default_factory=dict)
    eps: tuple = ()                  # sweep values, strictly decreasing
    resolution: int = 0              # 0 = case default
    ref_factor: int = 0              # 0 = case default (power of two)
    growth: float = 1.35
    grading: float | None = None
    solver_tol: float = 1e-10
    solver_method: str = "auto"
    osc_m: tuple = (0, 1)
    workers: int = 1
    out_dir: str | None = None
    fmt: str = "csv"

    def validated(self):
        if len(self.eps) > 1:
            d = np.diff(np.asarray(self.eps))
            if np.any(d >= 0):
                raise ConfigurationError("eps list must be strictly "
                                         "decreasing")
        if self.ref_factor and (self.ref_factor & (self.ref_factor - 1)):
            raise ConfigurationError("ref_factor must be a power of two")
        if self.fmt not in ("csv", "json"):
            raise ConfigurationError(f"unknown output format {self.fmt!r}")
        return self


@dataclass
class CaseReport:
    case: str
    eps: float
    estimator: float
    estimator_tilde: float
    per_feature: dict
    osc: dict
    err_h1s: float
    effectivity: float
    flux_means: dict
    flux_compatible: bool
    flux_residual: float
    theory_covered: bool
    runtime_s: float
    n_elements: int
    n_vertices: int
    report: EstimatorReport

    def row(self):
        return {
            "eps": self.eps, "err_h1s": self.err_h1s,
            "est": self.estimator, "est_tilde": self.estimator_tilde,
            "osc": self.osc.get(1, self.osc.get(0, float("nan"))),
            "eff": self.effectivity, "flux_residual": self.flux_residual,
            "runtime_s": self.runtime_s,
        }


@dataclass
class SweepReport:
    case: str
    points: list
    slope_err: float
    slope_est: float
    slope_osc: float
    eff_min: float
    eff_max: float
    eff_mean: float
    complete: bool = True
    failures: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# case catalog (data sets of the validation campaign)
# ---------------------------------------------------------------------------

@dataclass
class CaseSpec:
    family: str
    params: object              # callable eps -> params dict
    data: object                # callable eps -> ProblemData
    resolution: int
    ref_factor: int = 4
    eps_default: tuple = ()
    grading: float | None = None
    notes: str = ""


def _d_table1(eps):
    one = lambda x: np.ones(len(x))
    return ProblemData(f=one, h=_ZERO, g=_ZERO)


def _d_table2(eps):
    e8 = lambda x: np.exp(-8.0 * (x[:, 0] + x[:, 1]))
    return ProblemData(f=lambda x: -128.0 * e8(x), h=e8, g=_ZERO,
                       g_rest=lambda x: -8.0 * e8(x))


def _d_fig7(eps):
    f = lambda x: 10.0 * np.cos(3 * np.pi * x[:, 0]) \
        * np.sin(5 * np.pi * x[:, 1])
    return ProblemData(f=f, h=_ZERO, g=_ZERO)


def _d_fig8(eps):
    f = lambda x: 10.0 * np.cos(3 * np.pi * x[:, 0]) \
        * np.sin(5 * np.pi * x[:, 1]) * np.sin(7 * np.pi * x[:, 2])
    return ProblemData(f=f, h=_ZERO, g=_ZERO)


def _d_neumann(power):
    def make(eps):
        one = lambda x: np.ones(len(x))
        if power is None:
            g = _ZERO
        else:
            g = lambda x: np.full(len(x), float(eps) ** power)
        return ProblemData(f=one, h=_ZERO, g=g)
    return make


def _d_round(eps):
    h = lambda x: x[:, 0] ** 2 * (1 - x[:, 0]) ** 2 \
        + x[:, 1] ** 2 * (1 - x[:, 1]) ** 2
    return ProblemData(f=_ZERO, h=h, g=_ZERO)


def _d_fillet(eps):
    h = lambda x: np.cos(np.pi * x[:, 0]) + 10.0 * np.cos(5 * np.pi * x[:, 0])
    return ProblemData(f=_ZERO, h=h, g=_ZERO)


_EPS_2D = tuple(1e-2 / 2 ** k for k in range(7))
_EPS_3D = tuple(1e-1 / 2 ** k for k in range(4))

CATALOG = {
    "table1.star.a": CaseSpec("disk_hole",
                              lambda e: {"shape": "star", "r": 1.83e-2},
                              _d_table1, 24),
    "table1.circle.a": CaseSpec("disk_hole",
                                lambda e: {"shape": "circle", "r": 6.37e-2},
                                _d_table1, 10),
    "table1.square": CaseSpec("disk_hole",
                              lambda e: {"shape": "square", "r": 5.00e-2},
                              _d_table1, 12),
    "table1.circle.b": CaseSpec("disk_hole",
                                lambda e: {"shape": "circle", "r": 5.64e-2},
                                _d_table1, 10),
    "table1.star.b": CaseSpec("disk_hole",
                              lambda e: {"shape": "star", "r": 4.02e-2},
                              _d_table1, 24),
    "table2.twoholes": CaseSpec("square_two_holes", lambda e: {},
                                _d_table2, 10),
    "fig7.neg.halfdisk": CaseSpec(
        "square_edge", lambda e: {"variant": "halfdisk_neg", "eps": e},
        _d_fig7, 12, eps_default=_EPS_2D),
    "fig7.neg.cornersquare": CaseSpec(
        "square_edge", lambda e: {"variant": "corner_square_neg", "eps": e},
        _d_fig7, 12, eps_default=_EPS_2D),
    "fig7.pos.halfdisk": CaseSpec(
        "square_edge", lambda e: {"variant": "halfdisk_pos", "eps": e},
        _d_fig7, 12, eps_default=_EPS_2D),
    "fig7.pos.cornersquare": CaseSpec(
        "square_edge", lambda e: {"variant": "corner_square_pos", "eps": e},
        _d_fig7, 12, eps_default=_EPS_2D),
    "fig7.complex.adjacent": CaseSpec(
        "square_edge", lambda e: {"variant": "complex_adjacent", "eps": e},
        _d_fig7, 12, eps_default=_EPS_2D),
    "fig7.complex.overlap": CaseSpec(
        "square_edge", lambda e: {"variant": "complex_overlap", "eps": e},
        _d_fig7, 12, eps_default=_EPS_2D),
    "fig8.3d.neg.edge": CaseSpec(
        "cube_edge", lambda e: {"variant": "box_neg_edge", "eps": e},
        _d_fig8, 7, ref_factor=2, eps_default=_EPS_3D, grading=0.7),
    "fig8.3d.neg.corner": CaseSpec(
        "cube_edge", lambda e: {"variant": "box_neg_corner", "eps": e},
        _d_fig8, 7, ref_factor=2, eps_default=_EPS_3D, grading=0.7),
    "fig8.3d.pos.edge": CaseSpec(
        "cube_edge", lambda e: {"variant": "box_pos_edge", "eps": e},
        _d_fig8, 7, ref_factor=2, eps_default=_EPS_3D, grading=0.7),
    "fig8.3d.pos.corner": CaseSpec(
        "cube_edge", lambda e: {"variant": "box_pos_corner", "eps": e},
        _d_fig8, 7, ref_factor=2, eps_default=_EPS_3D, grading=0.7),
    "fig9.neumann.g1": CaseSpec(
        "disk_hole", lambda e: {"shape": "circle", "r": e},
        _d_neumann(None), 10, eps_default=_EPS_2D),
    "fig9.neumann.g2": CaseSpec(
        "disk_hole", lambda e: {"shape": "circle", "r": e},
        _d_neumann(0), 10, eps_default=_EPS_2D),
    "fig9.neumann.g3": CaseSpec(
        "disk_hole", lambda e: {"shape": "circle", "r": e},
        _d_neumann(-1), 10, eps_default=_EPS_2D),
    "fig9.neumann.g4": CaseSpec(
        "disk_hole", lambda e: {"shape": "circle", "r": e},
        _d_neumann(-3), 10, eps_default=_EPS_2D),
    "table4.round.R1": CaseSpec("round", lambda e: {"R": 1.0}, _d_round, 14),
    "table4.round.R099": CaseSpec("round", lambda e: {"R": 0.99},
                                  _d_round, 14),
    "table4.round.R05": CaseSpec("round", lambda e: {"R": 0.5}, _d_round, 14),
    "table4.round.R025": CaseSpec("round", lambda e: {"R": 0.25},
                                  _d_round, 14),
    "table4.round.R0125": CaseSpec("round", lambda e: {"R": 0.125},
                                   _d_round, 14),
    "table5.fillet.bbox": CaseSpec(
        "fillet", lambda e: {"extension": "bounding-box"}, _d_fillet, 14),
    "table5.fillet.arc": CaseSpec(
        "fillet", lambda e: {"extension": "custom-arc"}, _d_fillet, 14),
    "table5.fillet.identity": CaseSpec(
        "fillet", lambda e: {"extension": "identity"}, _d_fillet, 14),
}


def list_catalog():
    return sorted(CATALOG.keys())


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(name, exc) from exc


def _neumann_map(mesh, data, role):
    table = {Tag(NEUMANN_REST): data.g_rest}
    for tag in mesh.tags():
        if tag.kind in (GAMMA_N, GAMMA_P):
            table[tag] = data.g
        elif tag.kind in (GAMMA_0N, GAMMA_0P) and role == "defeatured":
            table[tag] = data.g0
        elif tag.kind == GAMMA_TILDE:
            table[tag] = data.g_tilde
    return table


def solve_case_fields(domain, data, pair, tol=1e-10, method="auto"):
    """The three solves of one case: u0, the extension, the reference."""
    n_uni = len(pair.universe.coords)
    u0 = solve_poisson(pair.defeatured, data.f, {Tag(DIRICHLET): data.h},
                       _neumann_map(pair.defeatured, data, "defeatured"),
                       tol=tol, method=method)
    u_tilde = None
    if pair.extension is not None:
        ext = pair.extension
        tags0p = [t for t in ext.tags() if t.kind == GAMMA_0P]
        ids = dirichlet_vertices(ext, tags0p)
        inv0 = u0.mesh.master_inverse(n_uni)
        src = inv0[ext.master[ids]]
        vals = u0.coeffs[src]
        u_tilde = solve_poisson(
            ext, data.f, {}, _neumann_map(ext, data, "extension"),
            dirichlet_values=(ids, vals), tol=tol, method=method)
    u_ref = solve_poisson(pair.exact, data.f, {Tag(DIRICHLET): data.h},
                          _neumann_map(pair.exact, data, "exact"),
                          tol=tol, method=method)
    return u0, u_tilde, u_ref


def run_case(config, eps=None, quiet=True):
    """Run one case end to end and return its CaseReport."""
    config = config.validated()
    spec = CATALOG.get(config.case) if config.case else None
    if spec is None and config.family is None:
        raise ConfigurationError(f"unknown case {config.case!r}")
    t0 = time.time()
    if eps is None:
        eps = config.eps[0] if config.eps else \
            (spec.eps_default[0] if spec and spec.eps_default else 0.0)
    if spec is not None:
        family = spec.family
        params = spec.params(eps)
        data = spec.data(eps)
        resolution = config.resolution or spec.resolution
        ref_factor = config.ref_factor or spec.ref_factor
        grading = config.grading if config.grading is not None \
            else spec.grading
    else:
        family = config.family
        params = dict(config.params)
        if eps:
            params.setdefault("eps", eps)
        data = _d_table1(eps)
        resolution = config.resolution or 8
        ref_factor = config.ref_factor or 4
        grading = config.grading

    domain = _stage("build_domain", geo.build_domain, family, params)
    pair = _stage("generate_pair", generate_pair, domain, resolution,
                  grading=grading, growth=config.growth)
    pair = _stage("refine_pair", refine_pair, pair, ref_factor)
    u0, u_tilde, u_ref = _stage(
        "solve", solve_case_fields, domain, data, pair,
        tol=config.solver_tol, method=config.solver_method)
    u_d = _stage("assemble_ud", assemble_ud, u0, u_tilde, pair)
    traces = _stage("sigma_defects", sigma_defects, u_d, domain, data, pair,
                    u_tilde=u_tilde)
    E, contribs = _stage("estimator", estimator, traces, domain.dim)
    E_tilde = _stage("estimator_tilde", estimator_tilde, traces, domain.dim)
    oscs = {m: _stage("oscillation", oscillation, traces, m, domain.dim)
            for m in config.osc_m}
    fmeans, compat = _stage("flux_residual", flux_residual, domain, data,
                            pair)
    err = _stage("h1_seminorm_diff", h1_seminorm_diff, u_ref, u_d)

    per_feature = {}
    for feat in domain.features:
        sub = [t for t in traces if t.tag.feature == feat]
        if sub:
            per_feature[feat] = estimator(sub, domain.dim)[0]
    total = sum(per_feature.values()) if per_feature else E

    report = EstimatorReport(
        dim=domain.dim, sigmas=contribs, estimator=E,
        estimator_tilde=E_tilde, per_feature=per_feature,
        estimator_total=total, osc=oscs, flux_means=fmeans,
        flux_compatible=compat, true_error=err,
        effectivity=total / err if err > 0 else float("inf"),
        theory_covered=domain.theory_covered)
    flux_res = max((abs(v) for m in fmeans.values() for v in m.values()),
                   default=0.0)
    return CaseReport(
        case=config.case or family, eps=float(eps), estimator=E,
        estimator_tilde=E_tilde, per_feature=per_feature, osc=oscs,
        err_h1s=err, effectivity=report.effectivity, flux_means=fmeans,
        flux_compatible=compat, flux_residual=flux_res,
        theory_covered=domain.theory_covered, runtime_s=time.time() - t0,
        n_elements=pair.exact.n_elements, n_vertices=pair.exact.n_vertices,
        report=report)


def _sweep_point(args):
    config, eps = args
    return run_case(config, eps=eps)


def run_sweep(config):
    """Run the case over its size list and fit log-log convergence rates."""
    config = config.validated()
    spec = CATALOG.get(config.case) if config.case else None
    eps_list = tuple(config.eps) or (spec.eps_default if spec else ())
    if len(eps_list) < 3:
        raise ConfigurationError("a sweep needs at least 3 size values")
    points = []
    failures = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            results = list(ex.map(_sweep_point,
                                  [(config, e) for e in eps_list]))
        points = results
    else:
        for eps in eps_list:
            try:
                points.append(run_case(config, eps=eps))
            except Exception as exc:
                failures.append((eps, repr(exc)))
                break
    complete = not failures
    pts = [(p.eps, p.err_h1s) for p in points]
    est = [(p.eps, p.estimator_total if p.per_feature else p.estimator)
           for p in points]
    osc = [(p.eps, p.osc.get(1, float("nan"))) for p in points]
    effs = [p.effectivity for p in points]
    return SweepReport(
        case=config.case or "custom", points=points,
        slope_err=fit_rate(pts) if len(pts) >= 2 else float("nan"),
        slope_est=fit_rate(est) if len(est) >= 2 else float("nan"),
        slope_osc=fit_rate([p for p in osc if p[1] > 0])
        if len(osc) >= 2 else float("nan"),
        eff_min=min(effs) if effs else float("nan"),
        eff_max=max(effs) if effs else float("nan"),
        eff_mean=float(np.mean(effs)) if effs else float("nan"),
        complete=complete, failures=failures)


def fit_rate(points):
    """Least-squares slope of log(y) against log(x)."""
    if len(points) < 2:
        raise ValueError("rate fit needs at least 2 points")
    x = np.asarray([p[0] for p in points], dtype=float)
    y = np.asarray([p[1] for p in points], dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("rate fit needs positive values")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

_CSV_HEADER = "eps,err_h1s,est,est_tilde,osc,eff,flux_residual,runtime_s"


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return "%.17g" % v


def emit_report(report, path, fmt="csv"):
    """Write a case or sweep report; CSV rows follow the fixed header."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        return path
    if fmt != "csv":
        raise ConfigurationError(f"unknown output format {fmt!r}")
    rows = []
    if isinstance(report, SweepReport):
        for p in report.points:
            rows.append(p.row())
    else:
        p = report
        if len(p.per_feature) > 1:
            for feat, Ef in sorted(p.per_feature.items()):
                rows.append({"eps": p.eps, "err_h1s": None, "est": Ef,
                             "est_tilde": None, "osc": None, "eff": None,
                             "flux_residual": max(
                                 (abs(v) for v in
                                  p.flux_means.get(feat, {}).values()),
                                 default=0.0),
                             "runtime_s": None})
        rows.append(p.row())
    with open(path, "w") as fh:
        fh.write(_CSV_HEADER + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r[k]) for k in
                              _CSV_HEADER.split(",")) + "\n")
    return path


def report_to_dict(report):
    if isinstance(report, SweepReport):
        return {
            "case": report.case,
            "slope_err": report.slope_err,
            "slope_est": report.slope_est,
            "slope_osc": report.slope_osc,
            "eff_min": report.eff_min,
            "eff_max": report.eff_max,
            "eff_mean": report.eff_mean,
            "complete": report.complete,
            "failures": list(report.failures),
            "points": [report_to_dict(p) for p in report.points],
        }
    return {
        "case": report.case, "eps": report.eps,
        "estimator": report.estimator,
        "estimator_tilde": report.estimator_tilde,
        "per_feature": {str(k): v for k, v in report.per_feature.items()},
        "osc": {str(k): v for k, v in report.osc.items()},
        "err_h1s": report.err_h1s, "effectivity": report.effectivity,
        "flux_means": {str(k): dict(v) for k, v in report.flux_means.items()},
        "flux_compatible": report.flux_compatible,
        "flux_residual": report.flux_residual,
        "theory_covered": report.theory_covered,
        "runtime_s": report.runtime_s,
        "n_elements": report.n_elements,
        "n_vertices": report.n_vertices,
    }


def load_report_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def parse_config_file(path):
    """Parse the line-oriented key = value config format; one section per
    case.  Returns a list of (name, ExperimentConfig)."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    out = []
    for section in cp.sections():
        s = cp[section]
        cfg = ExperimentConfig(
            case=s.get("case", None),
            family=s.get("family", None),
            eps=tuple(float(v) for v in s.get("eps", "").replace(",", " ")
                      .split()),
            resolution=s.getint("resolution", 0),
            ref_factor=s.getint("ref_factor", 0),
            growth=s.getfloat("growth", 1.35),
            grading=s.getfloat("grading", fallback=None),
            solver_tol=s.getfloat("solver_tol", 1e-10),
            solver_method=s.get("solver_method", "auto"),
            osc_m=tuple(int(v) for v in s.get("osc_m", "0 1")
                        .replace(",", " ").split()),
            workers=s.getint("workers", 1),
            out_dir=s.get("out", None),
            fmt=s.get("format", "csv"),
        )
        params = {}
        for key, val in s.items():
            if key.startswith("param."):
                name = key.split(".", 1)[1]
                try:
                    params[name] = float(val)
                except ValueError:
                    params[name] = val
        cfg.params = params
        out.append((section, cfg.validated()))
    if not out:
        raise ConfigurationError(f"no case sections in {path}")
    return out
