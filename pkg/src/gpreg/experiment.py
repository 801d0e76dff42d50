"""Batch experiment runner: configs, closed-loop runs, metrics, CSV export.

Configuration files use flat INI syntax with sections named after the
library modules (see the README for the grammar).  A ``preset`` selects a
complete base parameter set; any key present in the file overrides the
preset value.  Runs are deterministic: the same file produces byte-identical
trace CSVs.
"""

from __future__ import annotations

import configparser
import copy
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .gp import KernelParams
from .hybrid import HybridArc, IntegratorConfig, dwell_time_monitor, simulate
from .presets import PRESETS, preset_table
from .regulator import (InternalModelParams, ObserverParams, StabilizerParams,
                        check_sigma_condition)
from .vtol import EXO_VARIANTS, ClosedLoop, VtolParams, assemble_closed_loop

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INTEGRATION = 3


class ConfigError(ValueError):
    """Configuration file is malformed or fails validation."""


@dataclass
class ExperimentConfig:
    exosystem: str = "linear"
    preset: str = "table2"
    regulator: str = "gp"
    t_end: float = 50.0
    tail_fraction: float = 0.2
    output_dir: str = "out"
    # gp_identifier
    n_ds: int = 100
    sigma_p2: float = 1.0
    sigma_n2: float = 0.01
    sigma_thr2: float = 0.1
    lambda_eta: tuple = (0.1, 0.1)
    lambda_tau: float = 2.0
    # regulator_core
    c: tuple = (15.0, 75.0, 125.0)
    h: tuple = (15.0, 70.0)
    g: float = 2.0
    l: float = 250.0
    delta: float = 150.0
    rho: float = 2.0
    m1: float = 20.0
    m2: float = 20.0
    L: float = -20.0
    # vtol_testbed
    M: float = 5e4
    J: float = 1.25e4
    wing_l: float = 2.0
    grav: float = 9.81
    # hybrid_engine
    step_initial: float = 1e-7
    tol_rel: float = 1e-8
    tol_abs: float = 1e-10
    event_tol: float = 1e-9
    max_jumps: int = 100000
    max_step: float = math.inf
    # initial
    w0: tuple = (1.0, 0.0, 1.0, 0.0)
    chi0: tuple = (0.0, 0.0, 0.0)
    zeta0: float = 0.0
    eta0: tuple = (0.0, 0.0)
    xi0: tuple = (0.0, 0.0)
    theta0: tuple = (0.0, 0.0)
    p_scale: float = 1.0
    # baseline
    forgetting_rate: float = 0.125


_SCHEMA = {
    ("experiment", "exosystem"): ("exosystem", str),
    ("experiment", "preset"): ("preset", str),
    ("experiment", "regulator"): ("regulator", str),
    ("experiment", "t_end"): ("t_end", float),
    ("experiment", "tail_fraction"): ("tail_fraction", float),
    ("experiment", "output_dir"): ("output_dir", str),
    ("gp_identifier", "n_ds"): ("n_ds", int),
    ("gp_identifier", "sigma_p2"): ("sigma_p2", float),
    ("gp_identifier", "sigma_n2"): ("sigma_n2", float),
    ("gp_identifier", "sigma_thr2"): ("sigma_thr2", float),
    ("gp_identifier", "lambda_eta"): ("lambda_eta", "floats"),
    ("gp_identifier", "lambda_tau"): ("lambda_tau", float),
    ("regulator_core", "c"): ("c", "floats"),
    ("regulator_core", "h"): ("h", "floats"),
    ("regulator_core", "g"): ("g", float),
    ("regulator_core", "l"): ("l", float),
    ("regulator_core", "delta"): ("delta", float),
    ("regulator_core", "rho"): ("rho", float),
    ("regulator_core", "m1"): ("m1", float),
    ("regulator_core", "m2"): ("m2", float),
    ("regulator_core", "L"): ("L", float),
    ("vtol_testbed", "M"): ("M", float),
    ("vtol_testbed", "J"): ("J", float),
    ("vtol_testbed", "wing_l"): ("wing_l", float),
    ("vtol_testbed", "grav"): ("grav", float),
    ("hybrid_engine", "step_initial"): ("step_initial", float),
    ("hybrid_engine", "tol_rel"): ("tol_rel", float),
    ("hybrid_engine", "tol_abs"): ("tol_abs", float),
    ("hybrid_engine", "event_tol"): ("event_tol", float),
    ("hybrid_engine", "max_jumps"): ("max_jumps", int),
    ("hybrid_engine", "max_step"): ("max_step", float),
    ("initial", "w"): ("w0", "floats"),
    ("initial", "chi"): ("chi0", "floats"),
    ("initial", "zeta"): ("zeta0", float),
    ("initial", "eta"): ("eta0", "floats"),
    ("initial", "xi"): ("xi0", "floats"),
    ("initial", "theta"): ("theta0", "floats"),
    ("initial", "p_scale"): ("p_scale", float),
    ("baseline", "forgetting_rate"): ("forgetting_rate", float),
}


def _parse_value(raw: str, kind, where: str):
    try:
        if kind is str:
            return raw.strip()
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "floats":
            return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r}: {exc}") from exc
    raise AssertionError(kind)


def load_config(path) -> ExperimentConfig:
    """Parse an INI config file, resolving its preset first."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    text = Path(path).read_text()
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    preset_name = parser.get("experiment", "preset", fallback="table2").strip()
    if preset_name not in PRESETS:
        raise ConfigError(
            f"experiment.preset: unknown preset {preset_name!r} "
            f"(choose from {sorted(PRESETS)})")

    cfg = ExperimentConfig(preset=preset_name)
    for (section, key), raw in preset_table(preset_name).items():
        attr, kind = _SCHEMA[(section, key)]
        setattr(cfg, attr, _parse_value(raw, kind, f"{section}.{key}"))

    for section in parser.sections():
        for key, raw in parser.items(section):
            if (section, key) not in _SCHEMA:
                raise ConfigError(f"{section}.{key}: unknown configuration key")
            attr, kind = _SCHEMA[(section, key)]
            setattr(cfg, attr, _parse_value(raw, kind, f"{section}.{key}"))
    return cfg


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """All validation failures, each tagged with the offending key."""
    errors = []
    if cfg.exosystem not in EXO_VARIANTS:
        errors.append(f"experiment.exosystem: {cfg.exosystem!r} not in {EXO_VARIANTS}")
    if cfg.regulator not in ("gp", "baseline"):
        errors.append(f"experiment.regulator: {cfg.regulator!r} not 'gp' or 'baseline'")
    if not cfg.t_end >= 0:
        errors.append("experiment.t_end: must be >= 0")
    if not 0 < cfg.tail_fraction <= 1:
        errors.append("experiment.tail_fraction: must lie in (0, 1]")

    d = len(cfg.h)
    if len(cfg.lambda_eta) != d:
        errors.append(
            f"gp_identifier.lambda_eta: needs {d} entries (one per eta dimension), "
            f"got {len(cfg.lambda_eta)}")
    if cfg.n_ds < 1:
        errors.append("gp_identifier.n_ds: must be >= 1")

    try:
        kparams = KernelParams(cfg.sigma_p2, cfg.sigma_n2,
                               np.asarray(cfg.lambda_eta), cfg.lambda_tau)
    except ValueError as exc:
        errors.append(f"gp_identifier: {exc}")
        kparams = None
    if kparams is not None and cfg.regulator == "gp":
        ok, lower, upper = check_sigma_condition(kparams, cfg.sigma_thr2)
        if not ok:
            errors.append(
                "gp_identifier.sigma_thr2: threshold must satisfy "
                f"{lower!r} < sigma_thr2 < {upper!r} "
                f"(got {cfg.sigma_thr2!r}); the lower bound is the "
                "single-sample training-point variance "
                "sigma_p2*sigma_n2/(sigma_p2+sigma_n2)")

    try:
        InternalModelParams(cfg.g, tuple(cfg.h))
    except ValueError as exc:
        errors.append(f"regulator_core.h/g: {exc}")
    try:
        StabilizerParams(cfg.l, cfg.delta, (tuple(cfg.c),), np.array([[cfg.L]]))
    except ValueError as exc:
        errors.append(f"regulator_core.c/l/delta/L: {exc}")
    if len(cfg.c) != 3:
        errors.append("regulator_core.c: the VTOL chain needs exactly 3 coefficients")
    try:
        ObserverParams(cfg.m1, cfg.m2, cfg.rho)
    except ValueError as exc:
        errors.append(f"regulator_core.m1/m2/rho: {exc}")
    try:
        VtolParams(cfg.M, cfg.J, cfg.wing_l, cfg.grav)
    except ValueError as exc:
        errors.append(f"vtol_testbed: {exc}")
    try:
        IntegratorConfig(cfg.step_initial, cfg.tol_rel, cfg.tol_abs,
                         cfg.event_tol, max(cfg.t_end, 0.0) or 1.0,
                         cfg.max_jumps, cfg.max_step)
    except ValueError as exc:
        errors.append(f"hybrid_engine: {exc}")

    if len(cfg.w0) != 4:
        errors.append("initial.w: needs 4 entries")
    if len(cfg.chi0) != 3:
        errors.append("initial.chi: needs 3 entries")
    if len(cfg.eta0) != d:
        errors.append(f"initial.eta: needs {d} entries")
    if len(cfg.xi0) != 2:
        errors.append("initial.xi: needs 2 entries")
    if len(cfg.theta0) != d:
        errors.append(f"initial.theta: needs {d} entries")
    if not cfg.p_scale > 0:
        errors.append("initial.p_scale: must be positive")
    if not cfg.forgetting_rate >= 0:
        errors.append("baseline.forgetting_rate: must be >= 0")
    return errors


def build_loop(cfg: ExperimentConfig) -> ClosedLoop:
    vtol = VtolParams(cfg.M, cfg.J, cfg.wing_l, cfg.grav)
    stab = StabilizerParams(cfg.l, cfg.delta, (tuple(cfg.c),), np.array([[cfg.L]]))
    im = InternalModelParams(cfg.g, tuple(cfg.h))
    obs = ObserverParams(cfg.m1, cfg.m2, cfg.rho)
    gp_params = KernelParams(cfg.sigma_p2, cfg.sigma_n2,
                             np.asarray(cfg.lambda_eta), cfg.lambda_tau)
    return assemble_closed_loop(
        cfg.exosystem, cfg.regulator, vtol, stab, im, obs,
        gp_params=gp_params, sigma_thr2=cfg.sigma_thr2, n_ds=cfg.n_ds,
        forgetting_rate=cfg.forgetting_rate, p0_scale=cfg.p_scale,
        w0=cfg.w0, chi0=cfg.chi0, zeta0=cfg.zeta0, eta0=np.asarray(cfg.eta0),
        xi0=cfg.xi0, theta0=np.asarray(cfg.theta0))


def integrator_config(cfg: ExperimentConfig) -> IntegratorConfig:
    return IntegratorConfig(cfg.step_initial, cfg.tol_rel, cfg.tol_abs,
                            cfg.event_tol, cfg.t_end, cfg.max_jumps,
                            cfg.max_step)


@dataclass
class RunSummary:
    tail_sup_e: float
    jump_count: int
    min_interjump: Optional[float]
    max_interjump: Optional[float]
    max_post_jump_sigma2: Optional[float]
    zeno: bool
    t_end: float
    wall_clock_s: float

    def as_items(self):
        return [
            ("tail_sup_e", self.tail_sup_e),
            ("jump_count", self.jump_count),
            ("min_interjump", self.min_interjump),
            ("max_interjump", self.max_interjump),
            ("max_post_jump_sigma2", self.max_post_jump_sigma2),
            ("zeno", int(self.zeno)),
            ("t_end", self.t_end),
            ("wall_clock_s", self.wall_clock_s),
        ]


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def trace_rows(arc: HybridArc, loop: ClosedLoop):
    """All trace rows of an arc, in hybrid-time order."""
    rows = []
    for seg in arc.segments:
        for t, y in zip(seg.ts, seg.ys):
            rows.append(loop.trace_row(float(t), seg.j, y, seg.disc))
    return rows


def trace_header(d: int) -> list[str]:
    return (["t", "j", "e"] + [f"eta_{i+1}" for i in range(d)]
            + ["xi1", "xi2", "sigma2", "u", "w1", "w2", "w3", "w4", "d_w"])


def export_arc(arc: HybridArc, outdir, loop: Optional[ClosedLoop] = None,
               d: int = 2, sigma_thr2: Optional[float] = None,
               rows=None) -> dict:
    """Write trace.csv, jumps.csv, and (when given) summary.txt inputs.

    With ``loop=None`` a generic arc is exported: the error column holds the
    first state component, the remaining model columns are zero, and the
    jump rows carry the raw event values.  Floats are serialized with 17
    significant digits, so re-reading reproduces them bit-exactly.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if loop is not None:
        d = loop.d
        sigma_thr2 = loop.sigma_thr2
        if rows is None:
            rows = trace_rows(arc, loop)
    elif rows is None:
        rows = []
        for seg in arc.segments:
            for t, y in zip(seg.ts, seg.ys):
                rows.append([float(t), float(seg.j), float(y[0])] + [0.0] * (d + 9))

    header = trace_header(d)
    with open(outdir / "trace.csv", "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(_fmt(row[0]) + "," + str(int(row[1])) + ","
                     + ",".join(_fmt(v) for v in row[2:]) + "\n")

    offset = sigma_thr2 if sigma_thr2 is not None else 0.0
    with open(outdir / "jumps.csv", "w", newline="") as fh:
        fh.write("j,t,sigma2_pre,sigma2_post,buffer_len\n")
        for rec in arc.jumps:
            blen = (len(rec.disc_post.buffer)
                    if rec.disc_post is not None and hasattr(rec.disc_post, "buffer")
                    else 0)
            fh.write(f"{rec.j},{_fmt(rec.t)},{_fmt(rec.event_pre + offset)},"
                     f"{_fmt(rec.event_post + offset)},{blen}\n")
    return {"trace": outdir / "trace.csv", "jumps": outdir / "jumps.csv"}


def summarize(arc: HybridArc, rows, cfg: ExperimentConfig,
              wall_clock_s: float) -> RunSummary:
    t_cut = (1.0 - cfg.tail_fraction) * cfg.t_end
    tail = [abs(row[2]) for row in rows if row[0] >= t_cut]
    tail_sup = max(tail) if tail else 0.0
    report = dwell_time_monitor(arc, require_regenerative=False)
    post_max = (report.post_jump_event_max + cfg.sigma_thr2
                if report.post_jump_event_max is not None and cfg.regulator == "gp"
                else None)
    return RunSummary(tail_sup, arc.n_jumps, report.min_interjump,
                      report.max_interjump, post_max, arc.zeno_flag,
                      cfg.t_end, wall_clock_s)


def write_summary(summary: RunSummary, outdir):
    path = Path(outdir) / "summary.txt"
    with open(path, "w") as fh:
        for key, value in summary.as_items():
            fh.write(f"{key} = {_fmt(value)}\n")
    return path


def run_experiment(cfg: ExperimentConfig, outdir=None):
    """Validate, simulate, export, summarize; returns (arc, summary)."""
    errors = validate_config(cfg)
    if errors:
        raise ConfigError("; ".join(errors))
    outdir = Path(outdir if outdir is not None else cfg.output_dir)
    loop = build_loop(cfg)
    start = time.perf_counter()
    arc = simulate(loop.system, loop.y0, loop.disc0, integrator_config(cfg))
    wall = time.perf_counter() - start
    rows = trace_rows(arc, loop)
    export_arc(arc, outdir, loop=loop, rows=rows)
    summary = summarize(arc, rows, cfg, wall)
    write_summary(summary, outdir)
    return arc, summary


def compare(cfg: ExperimentConfig, outdir=None):
    """Run the GP loop and its baseline twin under shared settings.

    Returns (gp_summary, baseline_summary, ratio); writes per-run outputs in
    gp/ and baseline/ subdirectories plus a comparison.txt report.
    """
    if cfg.regulator != "gp":
        raise ConfigError(
            "experiment.regulator: compare starts from a GP configuration")
    outdir = Path(outdir if outdir is not None else cfg.output_dir)
    base_cfg = copy.deepcopy(cfg)
    base_cfg.regulator = "baseline"

    _, gp_summary = run_experiment(cfg, outdir / "gp")
    _, base_summary = run_experiment(base_cfg, outdir / "baseline")
    ratio = (gp_summary.tail_sup_e / base_summary.tail_sup_e
             if base_summary.tail_sup_e > 0 else math.inf)

    with open(outdir / "comparison.txt", "w") as fh:
        fh.write(f"exosystem = {cfg.exosystem}\n")
        fh.write(f"preset = {cfg.preset}\n")
        fh.write(f"t_end = {_fmt(cfg.t_end)}\n")
        fh.write(f"tail_sup_e_gp = {_fmt(gp_summary.tail_sup_e)}\n")
        fh.write(f"tail_sup_e_baseline = {_fmt(base_summary.tail_sup_e)}\n")
        fh.write(f"ratio = {_fmt(ratio)}\n")
        fh.write(f"jump_count_gp = {gp_summary.jump_count}\n")
    return gp_summary, base_summary, ratio


def read_trace(path):
    """Re-read a trace CSV as (header, rows of floats)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(tok) for tok in line.strip().split(",")]
                for line in fh if line.strip()]
    return header, rows
