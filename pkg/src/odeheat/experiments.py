"""Experiment configs, presets, epsilon sweeps and CSV output.

Config files are JSON::

    {
      "name": "test1",
      "mode": "distributed" | "boundary",
      "adjoint_mode": "discrete" | "continuous",      (optional, default discrete)
      "theta": 1.0,                                   (optional)
      "grid": {"L": 1.0, "T": 0.6, "Nx": 30, "Nt": 120}   (+ "ell" in boundary mode),
      "problem": {"a": expr(x,t), "b": expr(x,t), "c": expr(t),
                  "mu": float, "kappa": float, "omega": [w0, w1],
                  "y0": expr(x), "z0": expr | "compatible"},
      "hum": {"epsilons": [...], "tol": 1e-3, "max_iter": 500,
              "f0_y": expr(x), "f0_z": expr},
      "output_dir": "path"                            (optional)
    }

In boundary mode ``grid.L`` and ``grid.Nx`` describe the extended domain
and ``y0`` is sampled on ``[0, ell]``.  ``"compatible"`` sets
``z0 = y0(0) / mu``.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .expr import Expression, ExpressionError
from .extension import ExtensionConfig, boundary_hum
from .grid import Coupling, GridError, HState, SpaceTimeGrid, h_norm, l2_norm
from .hum import HumConfig, hum_cg
from .solvers import ProblemData, SolverConfig

log = logging.getLogger(__name__)

PRESETS = ("test1", "test2", "test3")
SUMMARY_HEADER = ("epsilon", "N_iter", "norm_yT", "abs_zT", "norm_v")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SummaryRow:
    epsilon: float
    N_iter: int
    norm_yT: float
    abs_zT: float
    norm_v: float


@dataclass
class ExperimentConfig:
    name: str
    mode: str
    grid: dict
    problem: dict
    hum: dict
    adjoint_mode: str = "discrete"
    theta: float = 1.0
    output_dir: Optional[str] = None
    source: Optional[str] = field(default=None, repr=False)

    @property
    def epsilons(self) -> list:
        return [float(e) for e in self.hum["epsilons"]]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "adjoint_mode": self.adjoint_mode,
            "theta": self.theta,
            "grid": self.grid,
            "problem": self.problem,
            "hum": self.hum,
        }


# ---------------------------------------------------------------- parsing


def _line_of(text: Optional[str], key: str) -> str:
    if not text:
        return ""
    for i, line in enumerate(text.splitlines(), 1):
        if re.search(r'"%s"\s*:' % re.escape(key), line):
            return f"line {i}: "
    return ""


def validate(raw: dict, text: Optional[str] = None) -> ExperimentConfig:
    """Check a decoded config and return it as an :class:`ExperimentConfig`."""

    def fail(key, msg):
        raise ConfigError(f"{_line_of(text, key)}{msg}")

    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    for section in ("grid", "problem", "hum"):
        if not isinstance(raw.get(section), dict):
            raise ConfigError(f"{_line_of(text, section)}missing or malformed section '{section}'")
    mode = raw.get("mode", "distributed")
    if mode not in ("distributed", "boundary"):
        fail("mode", f"mode must be 'distributed' or 'boundary', got {mode!r}")
    adjoint_mode = raw.get("adjoint_mode", "discrete")
    if adjoint_mode not in ("discrete", "continuous"):
        fail("adjoint_mode", f"adjoint_mode must be 'discrete' or 'continuous', got {adjoint_mode!r}")
    theta = raw.get("theta", 1.0)
    if not isinstance(theta, (int, float)) or not 0.5 <= theta <= 1.0:
        fail("theta", f"theta must be a number in [0.5, 1], got {theta!r}")

    grid, prob, hum = raw["grid"], raw["problem"], raw["hum"]
    keys = ["L", "T", "Nx", "Nt"] + (["ell"] if mode == "boundary" else [])
    for k in keys:
        if k not in grid:
            fail("grid", f"grid.{k} is required")
    for k in ("Nx", "Nt"):
        if not isinstance(grid[k], int) or isinstance(grid[k], bool):
            fail(k, f"grid.{k} must be an integer, got {grid[k]!r}")

    for k in ("a", "b", "c", "mu", "kappa", "omega", "y0", "z0"):
        if k not in prob:
            fail("problem", f"problem.{k} is required")
    mu, kappa = prob["mu"], prob["kappa"]
    if not all(isinstance(v, (int, float)) for v in (mu, kappa)):
        fail("mu", "problem.mu and problem.kappa must be numbers")
    if not mu * kappa > 0:
        fail("mu", f"problem.mu * problem.kappa must be > 0 (assumption H2), got mu={mu}, kappa={kappa}")
    omega = prob["omega"]
    if not (isinstance(omega, list) and len(omega) == 2 and all(isinstance(w, (int, float)) for w in omega)):
        fail("omega", "problem.omega must be a list [w0, w1]")
    if not omega[0] < omega[1]:
        fail("omega", f"problem.omega needs w0 < w1, got {omega}")
    for k in ("a", "b", "c", "y0") + (() if prob["z0"] == "compatible" else ("z0",)):
        try:
            Expression(prob[k])
        except ExpressionError as exc:
            fail(k, f"problem.{k}: {exc}")

    if "epsilons" not in hum:
        fail("hum", "hum.epsilons is required")
    eps = hum["epsilons"]
    if not (isinstance(eps, list) and eps and all(isinstance(e, (int, float)) and e > 0 for e in eps)):
        fail("epsilons", "hum.epsilons must be a nonempty list of positive numbers")
    tol = hum.setdefault("tol", 1e-3)
    if not (isinstance(tol, (int, float)) and tol > 0):
        fail("tol", "hum.tol must be positive")
    max_iter = hum.setdefault("max_iter", 500)
    if not (isinstance(max_iter, int) and max_iter >= 1):
        fail("max_iter", "hum.max_iter must be an integer >= 1")
    for k, default in (("f0_y", "0"), ("f0_z", "0")):
        try:
            Expression(hum.setdefault(k, default))
        except ExpressionError as exc:
            fail(k, f"hum.{k}: {exc}")

    cfg = ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        mode=mode,
        grid=dict(grid),
        problem=dict(prob),
        hum=dict(hum),
        adjoint_mode=adjoint_mode,
        theta=float(theta),
        output_dir=raw.get("output_dir"),
        source=text,
    )
    try:
        _build(cfg)
    except (GridError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{_line_of(text, 'grid')}invalid geometry: {exc}") from None
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return validate(raw, text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("odeheat").joinpath("presets", f"{name}.json").read_text()
    return validate(json.loads(text), text)


# ---------------------------------------------------------------- building


@dataclass
class _Built:
    grid: SpaceTimeGrid
    data: ProblemData
    y0: np.ndarray
    z0: float
    f0: HState
    solver: SolverConfig
    ext: Optional[ExtensionConfig] = None


def _build(cfg: ExperimentConfig) -> _Built:
    gd, pd, hd = cfg.grid, cfg.problem, cfg.hum
    grid = SpaceTimeGrid(float(gd["L"]), float(gd["T"]), gd["Nx"], gd["Nt"])
    a, b, c = (Expression(pd[k]) for k in ("a", "b", "c"))
    coupling = Coupling(float(pd["mu"]), float(pd["kappa"]))
    omega = tuple(float(w) for w in pd["omega"])
    data = ProblemData.from_functions(grid, a, b, lambda t: c(0.0, t), coupling, omega)
    ext = None
    if cfg.mode == "boundary":
        ext = ExtensionConfig(float(gd["ell"]), grid, omega)
        xs = ext.sub_grid.x
    else:
        xs = grid.x
    y0 = Expression(pd["y0"])(xs, 0.0)
    z0 = y0[0] / coupling.mu if pd["z0"] == "compatible" else float(Expression(pd["z0"])(0.0, 0.0))
    f0 = HState(Expression(hd["f0_y"])(grid.x, 0.0), float(Expression(hd["f0_z"])(0.0, 0.0)))
    solver = SolverConfig(theta=cfg.theta, adjoint_mode=cfg.adjoint_mode)
    return _Built(grid, data, y0, z0, f0, solver, ext)


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_summary(rows, path) -> Path:
    """Write the per-epsilon table with 6 significant digits."""
    path = Path(path)
    _write_rows(
        path,
        SUMMARY_HEADER,
        ([f"{r.epsilon:.6g}", str(int(r.N_iter)), f"{r.norm_yT:.6g}", f"{r.abs_zT:.6g}", f"{r.norm_v:.6g}"] for r in rows),
    )
    return path


def read_summary(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected summary header {reader.fieldnames}")
        return [
            SummaryRow(float(r["epsilon"]), int(r["N_iter"]), float(r["norm_yT"]), float(r["abs_zT"]), float(r["norm_v"]))
            for r in reader
        ]


def write_trajectory(traj, grid: SpaceTimeGrid, coupling: Coupling, outdir: Path, prefix: str = ""):
    t = grid.t
    _write_rows(outdir / f"{prefix}state_y.csv", ["t"] + [str(j) for j in range(grid.Nx + 1)],
                ([_fmt(t[n])] + [_fmt(v) for v in traj.y[n]] for n in range(grid.Nt + 1)))
    _write_rows(outdir / f"{prefix}state_z.csv", ["t", "z"], ([_fmt(t[n]), _fmt(traj.z[n])] for n in range(grid.Nt + 1)))
    _write_rows(
        outdir / f"{prefix}norms_over_time.csv",
        ["t", "norm_y", "abs_z", "h_norm"],
        ([_fmt(t[n]), _fmt(l2_norm(traj.y[n], grid)), _fmt(abs(traj.z[n])), _fmt(h_norm(traj[n], coupling, grid))]
         for n in range(grid.Nt + 1)),
    )


def write_control(v: np.ndarray, built: _Built, outdir: Path):
    nodes = built.data.region.nodes
    t = built.grid.t
    _write_rows(outdir / "control.csv", ["t"] + [str(j) for j in nodes],
                ([_fmt(t[n])] + [_fmt(x) for x in v[n, nodes]] for n in range(1, built.grid.Nt + 1)))


def _eps_dir(eps: float) -> str:
    return f"eps_{eps:.0e}"


def run_experiment(cfg: ExperimentConfig, out_dir=None, epsilons=None) -> list:
    """Run the epsilon sweep of ``cfg`` and write all CSV outputs.

    Returns the summary rows in configured epsilon order.
    """
    out = Path(out_dir or cfg.output_dir or f"out/{cfg.name}")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
    built = _build(cfg)
    eps_list = [float(e) for e in (epsilons or cfg.epsilons)]
    if not eps_list or any(not e > 0 for e in eps_list):
        raise ConfigError("epsilons must be a nonempty list of positive numbers")
    rows = []
    cp = built.data.coupling
    for eps in eps_list:
        hc = HumConfig(eps, float(cfg.hum["tol"]), int(cfg.hum["max_iter"]), built.f0)
        sub = out / _eps_dir(eps)
        sub.mkdir(exist_ok=True)
        if cfg.mode == "boundary":
            res, control, check = boundary_hum(built.y0, built.z0, built.data, built.ext, built.solver, hc)
            sg = built.ext.sub_grid
            _write_rows(sub / "boundary_control.csv", ["t", "u"],
                        ([_fmt(sg.t[n]), _fmt(control.u[n])] for n in range(sg.Nt + 1)))
            write_trajectory(check["trajectory"], sg, cp, sub, prefix="verify_")
            _write_rows(sub / "verification.csv", ["norm_yT", "abs_zT", "norm_u"],
                        [[_fmt(check["norm_yT"]), _fmt(check["abs_zT"]), _fmt(check["norm_u"])]])
            row = SummaryRow(eps, res.iterations, check["norm_yT"], check["abs_zT"], check["norm_u"])
        else:
            res = hum_cg(HState(built.y0, built.z0), built.data, built.grid, built.solver, hc)
            row = SummaryRow(eps, res.iterations, res.norms["norm_yT"], res.norms["abs_zT"], res.norms["norm_v"])
        write_control(res.control_v, built, sub)
        write_trajectory(res.trajectory, built.grid, cp, sub)
        _write_rows(sub / "residuals.csv", ["k", "residual"], ([str(k), _fmt(r)] for k, r in enumerate(res.residual_history)))
        if not res.converged:
            log.warning("eps=%g did not reach tol within max_iter", eps)
        log.info("eps=%g N_iter=%d |y(T)|=%.4g |z(T)|=%.4g |v|=%.4g", eps, row.N_iter, row.norm_yT, row.abs_zT, row.norm_v)
        rows.append(row)
    emit_summary(rows, out / "summary.csv")
    info = {"config": cfg.to_dict(), "epsilons": eps_list, "package_version": __version__, "random_seeds": None}
    (out / "run_info.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return rows


def run_preset(name: str, out_dir=None, adjoint_mode=None, theta=None) -> list:
    cfg = load_preset(name)
    if adjoint_mode:
        cfg.adjoint_mode = adjoint_mode
    if theta is not None:
        cfg.theta = float(theta)
    return run_experiment(cfg, out_dir)


def run_config(path, out_dir=None, adjoint_mode=None, theta=None, epsilons=None) -> list:
    cfg = load_config(path)
    if adjoint_mode:
        cfg.adjoint_mode = adjoint_mode
    if theta is not None:
        cfg.theta = float(theta)
    return run_experiment(cfg, out_dir, epsilons)
