"""Batch harness: task grids, both planners, disturbance sweeps and reports.

Everything here is deterministic given a config and a backend; worker pools
only change wall-clock time, never the ordering or content of outputs.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .collocation import (DEFAULT_NODES, BoundaryConditions, DecisionLayout, build_min_effort,
                          extract_plan, phase_specs)
from .errors import AslipError, InvalidParameters, InvalidPlan
from .model import Params
from .plan import MotionPlan
from .robust import (DEFAULT_DISTURBANCES, DEFAULT_GRID_POINTS, DisturbanceSet, RobustTask,
                     build_robust, extract_robust_plan)
from .sim import SimConfig, Status, apex_state, simulate_step
from .solvers import SolverOptions, SolveStatus, solve

log = logging.getLogger(__name__)

DEFAULT_HEIGHTS = (1.05, 1.10, 1.15, 1.20, 1.25)
DEFAULT_SPEEDS = (0.4, 0.6, 0.8, 1.0, 1.2)
METHODS = ("min-effort", "robust")
REPORT_FORMAT = "aslip-sweep-report"


def default_sweep(n: int = 11, span: float = 0.1) -> tuple:
    # rounded so that the nominal column is exactly 0.0
    return tuple(round(float(v), 12) + 0.0 for v in np.linspace(-span, span, n))


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class TaskGrid:
    """Cartesian product of apex start/goal values."""

    y0: tuple = DEFAULT_HEIGHTS
    xd0: tuple = DEFAULT_SPEEDS
    yf: tuple = DEFAULT_HEIGHTS
    xdf: tuple = DEFAULT_SPEEDS

    def __post_init__(self):
        for f in fields(self):
            vals = tuple(float(v) for v in getattr(self, f.name))
            if not vals:
                raise InvalidParameters(f"task grid list {f.name!r} is empty")
            object.__setattr__(self, f.name, vals)

    def __len__(self):
        return len(self.y0) * len(self.xd0) * len(self.yf) * len(self.xdf)

    def tasks(self) -> list:
        return [BoundaryConditions(*vals)
                for vals in itertools.product(self.y0, self.xd0, self.yf, self.xdf)]

    def to_dict(self):
        return {f.name: list(getattr(self, f.name)) for f in fields(self)}


def _build(cls, d: dict, what: str):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise InvalidParameters(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    grid: TaskGrid = TaskGrid()
    params: Params = Params()
    solver: SolverOptions = SolverOptions()
    sim: SimConfig = SimConfig()
    node_counts: tuple = DEFAULT_NODES
    grid_points: int = DEFAULT_GRID_POINTS
    disturbances: tuple = DEFAULT_DISTURBANCES
    sweep: tuple = field(default_factory=default_sweep)
    backend: Optional[str] = None
    restarts: int = 1  # jittered retries after a failed solve (disabled by --seedless)
    seed: int = 0

    def __post_init__(self):
        phase_specs(self.node_counts)
        object.__setattr__(self, "node_counts", tuple(int(n) for n in self.node_counts))
        object.__setattr__(self, "disturbances", DisturbanceSet(tuple(self.disturbances)).offsets)
        object.__setattr__(self, "sweep", tuple(float(d) for d in self.sweep))
        if self.restarts < 0:
            raise InvalidParameters("restarts must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        kw = {}
        sub = {"grid": TaskGrid, "params": Params, "solver": SolverOptions, "sim": SimConfig}
        for key, typ in sub.items():
            if key in d:
                kw[key] = _build(typ, d.pop(key), key)
        try:
            return _build(cls, {**d, **kw}, "config")
        except (TypeError, ValueError) as exc:
            raise InvalidParameters(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InvalidParameters(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "params": self.params.to_dict(),
            "solver": asdict(self.solver),
            "sim": asdict(self.sim),
            "node_counts": list(self.node_counts),
            "grid_points": self.grid_points,
            "disturbances": list(self.disturbances),
            "sweep": list(self.sweep),
            "backend": self.backend,
            "restarts": self.restarts,
            "seed": self.seed,
        }


# -- optimization ------------------------------------------------------------

@dataclass
class TaskEntry:
    index: int
    method: str
    task: dict
    status: str
    iterations: int = 0
    seconds: float = 0.0
    violation: float = float("nan")
    objective: float = float("nan")
    plan_file: Optional[str] = None
    message: str = ""

    def to_dict(self):
        d = asdict(self)
        for k in ("violation", "objective"):
            if not math.isfinite(d[k]):
                d[k] = None
        return d


def _jitter(x0, lb, ub, rng, scale=0.01):
    width = np.where(np.isfinite(ub - lb), ub - lb, 1.0)
    return np.clip(x0 + scale * width * rng.standard_normal(x0.size), lb, ub)


def _solve_with_restarts(nlp, cfg: ExperimentConfig, seedless: bool, index: int):
    res = solve(nlp, cfg.solver, cfg.backend)
    iters = res.iterations
    if seedless or res.success:
        return res, iters
    rng = np.random.default_rng([cfg.seed, index])
    x0 = nlp.x0
    for _ in range(cfg.restarts):
        nlp.x0 = _jitter(x0, nlp.x_lb, nlp.x_ub, rng)
        res = solve(nlp, cfg.solver, cfg.backend)
        iters += res.iterations
        if res.success:
            break
    nlp.x0 = x0
    return res, iters


def optimize_task(bc: BoundaryConditions, method: str, cfg: ExperimentConfig,
                  seedless: bool = False, index: int = 0):
    """Plan one task; returns ``(TaskEntry, MotionPlan | None)`` and never raises on solver trouble."""
    if method not in METHODS:
        raise InvalidParameters(f"unknown method {method!r}")
    t0 = time.perf_counter()
    entry = TaskEntry(index, method, bc.to_dict(), SolveStatus.ERROR.value)
    try:
        nominal = build_min_effort(bc, cfg.params, phase_specs(cfg.node_counts))
        res, iters = _solve_with_restarts(nominal.nlp, cfg, seedless, index)
        problem = nominal
        if method == "robust" and res.success:
            task = RobustTask(bc, DisturbanceSet(cfg.disturbances), cfg.node_counts,
                              cfg.grid_points)
            problem = build_robust(task, cfg.params, nominal=(nominal, res.x))
            res, more = _solve_with_restarts(problem.nlp, cfg, seedless, index)
            iters += more
        entry.status = res.status.value
        entry.iterations = iters
        entry.violation = res.violation
        entry.objective = res.objective
        entry.message = res.message
        plan = None
        if res.success:
            plan = (extract_plan(res, problem) if method == "min-effort"
                    else extract_robust_plan(res, problem))
    except AslipError as exc:
        entry.status = SolveStatus.ERROR.value
        entry.message = f"{type(exc).__name__}: {exc}"
        plan = None
    entry.seconds = time.perf_counter() - t0
    return entry, plan


def _grid_worker(args):
    index, bc_dict, method, cfg_dict, seedless = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    entry, plan = optimize_task(BoundaryConditions(**bc_dict), method, cfg, seedless, index)
    return entry, (plan.to_dict() if plan is not None else None)


def _pool_map(fn, jobs_args, jobs: int):
    if jobs <= 1 or len(jobs_args) <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order, so outputs are ordered by task index
        return list(pool.map(fn, jobs_args))


@dataclass
class GridRun:
    method: str
    entries: list
    plans: dict  # task index -> plan document

    def log_dict(self):
        return {"method": self.method, "tasks": [e.to_dict() for e in self.entries]}


def run_grid(cfg: ExperimentConfig, method: str, jobs: int = 1, seedless: bool = False,
             out_dir=None) -> GridRun:
    """Plan every grid task with one method; failures are logged, never fatal."""
    if method not in METHODS:
        raise InvalidParameters(f"unknown method {method!r}")
    cfg_dict = cfg.to_dict()
    args = [(i, bc.to_dict(), method, cfg_dict, seedless) for i, bc in enumerate(cfg.grid.tasks())]
    results = _pool_map(_grid_worker, args, jobs)
    entries, plans = [], {}
    for entry, plan in results:
        if plan is not None:
            plans[entry.index] = plan
            entry.plan_file = plan_path(entry.index, method)
        entries.append(entry)
    run = GridRun(method, entries, plans)
    if out_dir is not None:
        write_archive(run, out_dir)
    return run


def plan_path(index: int, method: str) -> str:
    return f"plans/{method}/task_{index:04d}.json"


def write_archive(run: GridRun, out_dir) -> None:
    out = Path(out_dir)
    try:
        (out / "plans" / run.method).mkdir(parents=True, exist_ok=True)
        for index, doc in run.plans.items():
            (out / plan_path(index, run.method)).write_text(json.dumps(doc, indent=1))
        (out / f"log_{run.method}.json").write_text(json.dumps(run.log_dict(), indent=1))
    except OSError as exc:
        raise OSError(f"cannot write plan archive under {out}: {exc}") from exc


@dataclass
class PlanRef:
    index: int
    method: str
    bc: BoundaryConditions
    plan: MotionPlan


def load_archive(out_dir, methods: Sequence[str] = METHODS):
    """Plans listed in the archive logs, plus diagnostics for unreadable ones."""
    out = Path(out_dir)
    refs, diags = [], []
    for method in methods:
        log_file = out / f"log_{method}.json"
        if not log_file.exists():
            continue
        for entry in json.loads(log_file.read_text())["tasks"]:
            if not entry.get("plan_file"):
                continue
            try:
                plan = MotionPlan.load(out / entry["plan_file"])
            except (OSError, InvalidPlan, ValueError) as exc:
                msg = f"skipping {entry['plan_file']}: {exc}"
                log.warning(msg)
                diags.append(msg)
                continue
            refs.append(PlanRef(entry["index"], method, BoundaryConditions(**entry["task"]), plan))
    return refs, diags


# -- sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    task: int
    method: str
    disturbance: float
    status: str
    apex_height: Optional[float] = None
    apex_speed: Optional[float] = None
    height_error: Optional[float] = None
    speed_error: Optional[float] = None


RECORD_COLUMNS = [f.name for f in fields(SweepRecord)]


def sweep_plan(ref: PlanRef, disturbances: Iterable[float], sim: SimConfig) -> list:
    out = []
    for d in disturbances:
        res = simulate_step(ref.plan, apex_state(ref.plan, ref.bc.y0, ref.bc.xd0), float(d), sim)
        if res.ok:
            a = res.apex
            out.append(SweepRecord(ref.index, ref.method, float(d), res.status.value,
                                   a.y, a.xdot, abs(a.y - ref.bc.yf), abs(a.xdot - ref.bc.xdf)))
        else:
            out.append(SweepRecord(ref.index, ref.method, float(d), res.status.value))
    return out


def _sweep_worker(args):
    index, method, bc_dict, plan_doc, disturbances, sim_dict = args
    ref = PlanRef(index, method, BoundaryConditions(**bc_dict), MotionPlan.from_dict(plan_doc))
    return sweep_plan(ref, disturbances, SimConfig(**sim_dict))


@dataclass
class SweepReport:
    disturbances: tuple
    records: tuple
    diagnostics: tuple = ()

    def __post_init__(self):
        self.disturbances = tuple(float(d) for d in self.disturbances)
        self.records = tuple(sorted(self.records, key=lambda r: (r.task, r.method, r.disturbance)))
        self.diagnostics = tuple(self.diagnostics)

    @property
    def methods(self) -> list:
        present = {r.method for r in self.records}
        return [m for m in METHODS if m in present] + sorted(present - set(METHODS))

    def summary(self) -> dict:
        """Failure fractions, mean errors over mutually non-failing cases, error ratios."""
        methods = self.methods
        by_key = {(r.task, r.method, r.disturbance): r for r in self.records}
        keys = sorted({(r.task, r.disturbance) for r in self.records})
        mutual = [k for k in keys
                  if all((k[0], m, k[1]) in by_key and by_key[(k[0], m, k[1])].height_error is not None
                         for m in methods)]
        out = {"methods": {}, "mutual_cases": len(mutual)}
        for m in methods:
            recs = [r for r in self.records if r.method == m]
            fails = sum(r.status != Status.APEX_REACHED.value for r in recs)
            he = [by_key[(t, m, d)].height_error for t, d in mutual]
            se = [by_key[(t, m, d)].speed_error for t, d in mutual]
            out["methods"][m] = {
                "cases": len(recs),
                "failures": fails,
                "failure_fraction": fails / len(recs) if recs else None,
                "mean_height_error": float(np.mean(he)) if he else None,
                "mean_speed_error": float(np.mean(se)) if se else None,
            }
        ratios = {"height": None, "speed": None}
        if "min-effort" in out["methods"] and "robust" in out["methods"] and mutual:
            a, b = out["methods"]["min-effort"], out["methods"]["robust"]
            for key, col in (("height", "mean_height_error"), ("speed", "mean_speed_error")):
                if b[col] and b[col] > 0:
                    ratios[key] = a[col] / b[col]
        out["ratios"] = ratios
        return out

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, "version": 1,
                "disturbances": list(self.disturbances),
                "records": [asdict(r) for r in self.records],
                "diagnostics": list(self.diagnostics),
                "summary": self.summary()}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepReport":
        if d.get("format") != REPORT_FORMAT:
            raise InvalidParameters("not a sweep report document")
        return cls(tuple(d["disturbances"]), tuple(SweepRecord(**r) for r in d["records"]),
                   tuple(d.get("diagnostics", ())))


def run_sweep(plans: Sequence[PlanRef], disturbances: Optional[Sequence[float]] = None,
              sim: SimConfig = SimConfig(), jobs: int = 1, diagnostics=()) -> SweepReport:
    """Simulate every plan at every ground offset (the world apex start is fixed)."""
    dist = tuple(default_sweep() if disturbances is None else (float(d) for d in disturbances))
    args = [(r.index, r.method, r.bc.to_dict(), r.plan.to_dict(), dist, asdict(sim)) for r in plans]
    records = [rec for chunk in _pool_map(_sweep_worker, args, jobs) for rec in chunk]
    return SweepReport(dist, tuple(records), tuple(diagnostics))


# -- output ------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in report.records:
        w.writerow([_fmt(getattr(r, c)) for c in RECORD_COLUMNS])
    return buf.getvalue()


SUMMARY_COLUMNS = ["method", "cases", "failures", "failure_fraction", "mean_height_error",
                   "mean_speed_error", "mutual_cases", "height_ratio", "speed_ratio"]


def summary_csv(report: SweepReport) -> str:
    s = report.summary()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for m, row in s["methods"].items():
        w.writerow([m, row["cases"], row["failures"], _fmt(row["failure_fraction"]),
                    _fmt(row["mean_height_error"]), _fmt(row["mean_speed_error"]),
                    s["mutual_cases"], _fmt(s["ratios"]["height"]) or "NA",
                    _fmt(s["ratios"]["speed"]) or "NA"])
    return buf.getvalue()


def render_report(report: SweepReport, fmt: str) -> dict:
    """File name -> text for a report in ``csv`` or ``json``."""
    if fmt == "csv":
        return {"sweep_records.csv": records_csv(report), "sweep_summary.csv": summary_csv(report)}
    if fmt == "json":
        return {"sweep_report.json": json.dumps(report.to_dict(), indent=1, sort_keys=True)}
    raise InvalidParameters(f"unknown report format {fmt!r}")


def write_files(files: dict, out_dir) -> list:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in files.items():
            path = out / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
            paths.append(path)
        return paths
    except OSError as exc:
        raise OSError(f"cannot write output under {out}: {exc}") from exc


def emit_report(report: SweepReport, out_dir, fmt: str = "csv") -> list:
    return write_files(render_report(report, fmt), out_dir)


SERIES_COLUMNS = ["t", "mode", "x", "y", "xdot", "ydot", "r0", "r0dot", "rp", "force"]


def trajectory_series(plan: MotionPlan, height: float, speed: float, ground: float = 0.0,
                      samples: int = 400, sim: SimConfig = SimConfig()):
    """Body path, set point and leg force sampled uniformly over one simulated half cycle."""
    res = simulate_step(plan, apex_state(plan, height, speed), ground, sim, record=True)
    traj = res.trajectory
    if traj is None or not traj.pieces:
        return res, {c: [] for c in SERIES_COLUMNS}
    ts = np.linspace(traj.pieces[0].t0, traj.t_end, samples)
    states, modes, force = traj.sample(ts)
    cols = {"t": ts.tolist(), "mode": modes}
    for j, name in enumerate(["x", "y", "xdot", "ydot", "r0", "r0dot", "rp"]):
        cols[name] = states[:, j].tolist()
    cols["force"] = force.tolist()
    return res, cols


def series_csv(cols: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    for row in zip(*(cols[c] for c in SERIES_COLUMNS)):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# -- derivative verification -------------------------------------------------

def interior_points(nlp, count: int, seed: int = 0, margin: float = 0.05) -> list:
    """Uniform random points strictly inside the variable box (infinite sides capped at +-1)."""
    rng = np.random.default_rng(seed)
    lb = np.where(np.isfinite(nlp.x_lb), nlp.x_lb, -1.0)
    ub = np.where(np.isfinite(nlp.x_ub), nlp.x_ub, 1.0)
    return [lb + (ub - lb) * rng.uniform(margin, 1 - margin, lb.size) for _ in range(count)]


def gradient_problem(kind: str, bc: BoundaryConditions, cfg: ExperimentConfig):
    """Problem instance for derivative checks; the robust one skips its warm-start solve."""
    if kind == "min-effort":
        return build_min_effort(bc, cfg.params, phase_specs(cfg.node_counts))
    if kind == "robust":
        task = RobustTask(bc, DisturbanceSet(cfg.disturbances), cfg.node_counts, cfg.grid_points)
        lay = DecisionLayout(cfg.node_counts, len(cfg.disturbances), cfg.grid_points)
        return build_robust(task, cfg.params, x0=np.zeros(lay.n_var))
    raise InvalidParameters(f"unknown problem kind {kind!r}")


def check_gradients(kind: str, bc: BoundaryConditions, cfg: ExperimentConfig, points: int = 10,
                    seed: int = 0):
    """``check_jacobian`` at random interior points; one result per point."""
    from .nlp import check_jacobian
    problem = gradient_problem(kind, bc, cfg)
    out = []
    for x in interior_points(problem.nlp, points, seed):
        chk = check_jacobian(problem.nlp, x)
        row = chk.worst[0]
        label = "objective" if row < 0 else problem.nlp.row_labels[row]
        out.append({"max_rel_error": chk.max_rel_error, "worst": list(chk.worst),
                    "worst_label": label, "gradient_rel_error": chk.gradient_rel_error,
                    "pattern_violations": len(chk.pattern_violations)})
    return problem, out
