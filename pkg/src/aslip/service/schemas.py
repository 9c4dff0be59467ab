"""Request/response models of the planning service."""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

Method = Literal["min-effort", "robust"]
Format = Literal["csv", "json"]


class Task(BaseModel):
    model_config = ConfigDict(extra="forbid")

    y0: float = 1.15
    xd0: float = 0.8
    yf: float = 1.15
    xdf: float = 0.8


class OptimizeRequest(BaseModel):
    task: Task = Task()
    config: dict = Field(default_factory=dict)
    seedless: bool = False


class TaskLog(BaseModel):
    index: int
    method: str
    task: dict
    status: str
    iterations: int
    seconds: float
    violation: Optional[float] = None
    objective: Optional[float] = None
    plan_file: Optional[str] = None
    message: str = ""


class OptimizeResponse(BaseModel):
    log: TaskLog
    plan: Optional[dict] = None


class SimulateRequest(BaseModel):
    plan: dict
    height: Optional[float] = None  # defaults to the plan's own start apex
    speed: Optional[float] = None
    ground: float = 0.0
    config: dict = Field(default_factory=dict)
    series: bool = False
    samples: int = Field(400, ge=2)


class EventModel(BaseModel):
    time: float
    kind: str
    state: dict


class SimulateResponse(BaseModel):
    status: str
    apex: Optional[dict] = None
    events: list[EventModel]
    diagnostics: list[str]
    series: Optional[dict] = None


class GridRequest(BaseModel):
    method: Method
    config: dict = Field(default_factory=dict)
    jobs: int = Field(1, ge=1)
    seedless: bool = False


class GridResponse(BaseModel):
    method: str
    log: dict
    plans: dict[str, dict]  # plan file path -> plan document


class PlanItem(BaseModel):
    index: int
    method: str
    task: Task
    plan: dict


class SweepRequest(BaseModel):
    plans: list[PlanItem]
    disturbances: Optional[list[float]] = None
    config: dict = Field(default_factory=dict)
    jobs: int = Field(1, ge=1)
    diagnostics: list[str] = Field(default_factory=list)


class SweepResponse(BaseModel):
    report: dict


class GradientRequest(BaseModel):
    problem: Method = "min-effort"
    task: Task = Task()
    config: dict = Field(default_factory=dict)
    points: int = Field(10, ge=1)
    seed: int = 0
    tolerance: float = 1e-6


class GradientResponse(BaseModel):
    problem: str
    variables: int
    constraints: int
    results: list[dict]
    max_rel_error: float
    passed: bool


class ReportRequest(BaseModel):
    report: dict
    format: Format = "csv"


class ReportResponse(BaseModel):
    files: dict[str, str]
