"""HTTP front of the planning package.

Every endpoint is a thin translation between pydantic models and the core
functions; all numerics live in the package proper. Domain errors map to 422.
"""
from __future__ import annotations

from dataclasses import asdict

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..collocation import BoundaryConditions
from ..errors import AslipError
from ..experiments import (ExperimentConfig, PlanRef, SweepReport, check_gradients,
                           optimize_task, render_report, run_grid, run_sweep,
                           trajectory_series)
from ..plan import MotionPlan
from ..sim import simulate_step, apex_state
from ..solvers import available_backends
from . import schemas as s

app = FastAPI(title="aslip planning service", version=__version__)


@app.exception_handler(AslipError)
async def _domain_error(request: Request, exc: AslipError):
    return JSONResponse(status_code=422, content={"detail": f"{type(exc).__name__}: {exc}"})


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


def _bc(task: s.Task) -> BoundaryConditions:
    return BoundaryConditions(task.y0, task.xd0, task.yf, task.xdf)


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__, "backends": available_backends()}


def _optimize(req: s.OptimizeRequest, method: str) -> s.OptimizeResponse:
    cfg = ExperimentConfig.from_dict(req.config)
    entry, plan = optimize_task(_bc(req.task), method, cfg, req.seedless)
    return s.OptimizeResponse(log=s.TaskLog(**entry.to_dict()),
                              plan=plan.to_dict() if plan is not None else None)


@app.post("/optimize/min-effort", response_model=s.OptimizeResponse)
def optimize_min(req: s.OptimizeRequest):
    return _optimize(req, "min-effort")


@app.post("/optimize/robust", response_model=s.OptimizeResponse)
def optimize_robust(req: s.OptimizeRequest):
    return _optimize(req, "robust")


@app.post("/simulate", response_model=s.SimulateResponse)
def simulate(req: s.SimulateRequest):
    cfg = ExperimentConfig.from_dict(req.config)
    plan = MotionPlan.from_dict(req.plan)
    bc = plan.meta.get("bc", {})
    height = req.height if req.height is not None else bc.get("y0")
    speed = req.speed if req.speed is not None else bc.get("xd0")
    if height is None or speed is None:
        raise ValueError("plan carries no start apex; pass height and speed")
    if req.series:
        res, series = trajectory_series(plan, height, speed, req.ground, req.samples, cfg.sim)
    else:
        res, series = simulate_step(plan, apex_state(plan, height, speed), req.ground, cfg.sim), None
    return s.SimulateResponse(
        status=res.status.value,
        apex=asdict(res.apex) if res.apex is not None else None,
        events=[s.EventModel(time=e.time, kind=e.kind, state=asdict(e.state)) for e in res.events],
        diagnostics=list(res.diagnostics),
        series=series,
    )


@app.post("/grid", response_model=s.GridResponse)
def grid(req: s.GridRequest):
    cfg = ExperimentConfig.from_dict(req.config)
    run = run_grid(cfg, req.method, jobs=req.jobs, seedless=req.seedless)
    plans = {e.plan_file: run.plans[e.index] for e in run.entries if e.plan_file}
    return s.GridResponse(method=run.method, log=run.log_dict(), plans=plans)


@app.post("/sweep", response_model=s.SweepResponse)
def sweep(req: s.SweepRequest):
    cfg = ExperimentConfig.from_dict(req.config)
    refs = [PlanRef(p.index, p.method, _bc(p.task), MotionPlan.from_dict(p.plan)) for p in req.plans]
    dist = req.disturbances if req.disturbances is not None else cfg.sweep
    report = run_sweep(refs, dist, cfg.sim, jobs=req.jobs, diagnostics=req.diagnostics)
    return s.SweepResponse(report=report.to_dict())


@app.post("/check-gradients", response_model=s.GradientResponse)
def gradients(req: s.GradientRequest):
    cfg = ExperimentConfig.from_dict(req.config)
    problem, results = check_gradients(req.problem, _bc(req.task), cfg, req.points, req.seed)
    worst = max(r["max_rel_error"] for r in results)
    passed = worst <= req.tolerance and all(r["pattern_violations"] == 0 for r in results)
    return s.GradientResponse(problem=req.problem, variables=problem.nlp.n,
                              constraints=problem.nlp.m, results=results,
                              max_rel_error=worst, passed=passed)


@app.post("/report", response_model=s.ReportResponse)
def report(req: s.ReportRequest):
    return s.ReportResponse(files=render_report(SweepReport.from_dict(req.report), req.format))
