"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class Table1Row(BaseModel):
    protocol: str
    kind: str
    header_bytes: int
    tx_delay_s: float


class Table1Response(BaseModel):
    rate_bps: float
    rows: list[Table1Row]


class RunRequest(BaseModel):
    scenario: str = Field(description="bundled scenario name or server-side path")
    seed: Optional[int] = None
    overrides: dict[str, Any] = Field(default_factory=dict)
    include_trace: bool = False
    max_trace_records: int = 10000


class RunResponse(BaseModel):
    scenario: str
    seed: int
    final_time_s: float
    events_executed: int
    metrics: dict[str, Any]
    trace: Optional[list[dict]] = None


class BerSweepRequest(BaseModel):
    modes: list[str] = ["bpsk", "qpsk", "qam8", "qam16", "qam64"]
    methods: list[str] = ["threshold", "analytic"]
    snr_db: list[float] = Field(default_factory=lambda: [float(v) for v in range(0, 21)])
    threshold_db: float = 5.0
    trials: int = 20000
    seed: int = 0


class BerPoint(BaseModel):
    snr_db: float
    mode: str
    method: str
    ber: float


class BerSweepResponse(BaseModel):
    points: list[BerPoint]


class EnvCreateRequest(BaseModel):
    scenario: str = "datacollect3x25"
    seed: int = 0
    overrides: dict[str, Any] = Field(default_factory=dict)


class EnvCreateResponse(BaseModel):
    env_id: str
    observation_spec: dict[str, Any]
    action_spec: dict[str, Any]


class ResetRequest(BaseModel):
    seed: Optional[int] = None


class ResetResponse(BaseModel):
    observations: list[list[float]]


class StepRequest(BaseModel):
    actions: list[int]


class StepResponse(BaseModel):
    observations: list[list[float]]
    rewards: list[float]
    done: bool
    info: dict[str, Any]


class ErrorResponse(BaseModel):
    detail: str
