"""HTTP service wrapping the simulator core.

Stateless endpoints run scenarios and compute reference tables; stateful
``/envs`` sessions hold live environments for step-based clients (training
loops, remote bindings).  Sessions are confined to one worker process and
guarded by a lock: steps within a session are strictly serialized.
"""

from __future__ import annotations

import itertools
import threading

from fastapi import FastAPI, HTTPException

from uansim import __version__
from uansim.ber import PilotChannelSpec, ber_analytic, ber_pilot_estimate, ber_threshold, ebn0_from_snr
from uansim.cli import table1_rows
from uansim.core import ConfigError
from uansim.network import ListTraceSink
from uansim.rlenv import UanEnv, make_env
from uansim.scenario import load_scenario, run_scenario
from uansim.service.models import (BerPoint, BerSweepRequest, BerSweepResponse,
                                   EnvCreateRequest, EnvCreateResponse, HealthResponse,
                                   ResetRequest, ResetResponse, RunRequest, RunResponse,
                                   StepRequest, StepResponse, Table1Response)


class EnvRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._envs: dict[str, UanEnv] = {}
        self._ids = itertools.count(1)

    def create(self, env: UanEnv) -> str:
        with self._lock:
            env_id = f"env-{next(self._ids)}"
            self._envs[env_id] = env
            return env_id

    def get(self, env_id: str) -> UanEnv:
        with self._lock:
            env = self._envs.get(env_id)
        if env is None:
            raise HTTPException(status_code=404, detail=f"no environment {env_id!r}")
        return env

    def drop(self, env_id: str) -> UanEnv:
        with self._lock:
            env = self._envs.pop(env_id, None)
        if env is None:
            raise HTTPException(status_code=404, detail=f"no environment {env_id!r}")
        return env


def create_app() -> FastAPI:
    app = FastAPI(title="uansim", version=__version__,
                  description="underwater acoustic network simulation service")
    registry = EnvRegistry()
    app.state.envs = registry

    @app.exception_handler(ConfigError)
    async def config_error_handler(request, exc):  # noqa: ARG001
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(version=__version__)

    @app.get("/table1", response_model=Table1Response)
    def table1(rate_bps: float = 500.0):
        return Table1Response(rate_bps=rate_bps, rows=table1_rows(rate_bps))

    @app.post("/runs", response_model=RunResponse)
    def run(req: RunRequest):
        overrides = dict(req.overrides)
        if req.seed is not None:
            overrides["scenario.seed"] = req.seed
        cfg = load_scenario(req.scenario, overrides=overrides)
        sink = ListTraceSink() if req.include_trace else None
        _, report = run_scenario(cfg, trace_sink=sink)
        trace = None
        if sink is not None:
            trace = sink.records[:req.max_trace_records]
        return RunResponse(scenario=cfg.name, seed=cfg.seed,
                           final_time_s=report.final_time_s,
                           events_executed=report.events_executed,
                           metrics=report.metrics, trace=trace)

    @app.post("/ber/sweep", response_model=BerSweepResponse)
    def ber_sweep(req: BerSweepRequest):
        spec = PilotChannelSpec(seed=req.seed)
        points = []
        for mode in req.modes:
            for method in req.methods:
                for snr_db in req.snr_db:
                    if method == "threshold":
                        ber = ber_threshold(snr_db, req.threshold_db).ber
                    elif method == "analytic":
                        ber = ber_analytic(mode, ebn0_from_snr(snr_db, mode)).ber
                    elif method in ("ls", "mmse"):
                        ber = ber_pilot_estimate(spec, method, snr_db, req.trials).ber
                    else:
                        raise HTTPException(status_code=400,
                                            detail=f"unknown method {method!r}")
                    points.append(BerPoint(snr_db=snr_db, mode=mode, method=method, ber=ber))
        return BerSweepResponse(points=points)

    @app.post("/envs", response_model=EnvCreateResponse)
    def create_env(req: EnvCreateRequest):
        env = make_env(req.scenario, overrides=req.overrides, seed=req.seed)
        env_id = registry.create(env)
        return EnvCreateResponse(env_id=env_id,
                                 observation_spec=env.observation_spec(),
                                 action_spec=env.action_spec())

    @app.get("/envs/{env_id}/spec", response_model=EnvCreateResponse)
    def env_spec(env_id: str):
        env = registry.get(env_id)
        return EnvCreateResponse(env_id=env_id,
                                 observation_spec=env.observation_spec(),
                                 action_spec=env.action_spec())

    @app.post("/envs/{env_id}/reset", response_model=ResetResponse)
    def reset(env_id: str, req: ResetRequest):
        env = registry.get(env_id)
        return ResetResponse(observations=env.reset(seed=req.seed))

    @app.post("/envs/{env_id}/step", response_model=StepResponse)
    def step(env_id: str, req: StepRequest):
        env = registry.get(env_id)
        obs, rewards, done, info = env.step(req.actions)
        info = dict(info)
        info.pop("exchange_log", None)  # session-internal debugging detail
        return StepResponse(observations=obs, rewards=rewards, done=done, info=info)

    @app.delete("/envs/{env_id}", status_code=204)
    def close(env_id: str):
        registry.drop(env_id).close()

    return app
