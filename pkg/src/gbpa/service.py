"""HTTP service around the run coordinator.

Runs execute at natural speed on the wall clock (duration models are a
simulation concern). State is persisted as an append-only audit trail plus
one spec document per run; restarting the service replays the trail and
adopts every run, so open tickets survive a crash.
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from .clock import WallClock
from .engine import (
    Decision,
    RunCoordinator,
    RunResult,
    Ticket,
    TicketState,
    derive_run_id,
    jsonable,
)
from .errors import (
    AlreadyResolvedError,
    PlannerError,
    RunAbortedError,
    SpecError,
    TicketNotFoundError,
)
from .fixtures import event_log_for
from .optimizer import OptimizerConfig, optimize
from .planner import HttpPlannerProvider, default_library, plan
from .process_spec import parse_spec, serialize_spec
from .replay import load_trail
from .scenarios import build_resources, get_scenario


class RunRequest(BaseModel):
    scenario: str | None = None
    variant: str = "optimized"
    spec: dict[str, Any] | None = None
    text: str | None = None
    seed: int = 0
    inputs: dict[str, Any] = {}


class DecisionRequest(BaseModel):
    decision: str
    value: dict[str, Any] | None = None


class _Store:
    """Flat-file persistence: audit.jsonl plus runs/<id>.json metadata."""

    def __init__(self, data_dir: str | Path | None):
        self.root = Path(data_dir) if data_dir else None
        if self.root:
            self.root.mkdir(parents=True, exist_ok=True)
            (self.root / "runs").mkdir(exist_ok=True)

    @property
    def audit_path(self) -> Path | None:
        return self.root / "audit.jsonl" if self.root else None

    def audit_sink(self):
        if not self.root:
            return None
        path = self.audit_path

        def sink(record: dict[str, Any]) -> None:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")

        return sink

    def save_run_meta(self, run_id: str, meta: dict[str, Any]) -> None:
        if self.root:
            path = self.root / "runs" / f"{run_id}.json"
            path.write_text(json.dumps(meta, sort_keys=True), encoding="utf-8")

    def load_run_meta(self, run_id: str) -> dict[str, Any] | None:
        if not self.root:
            return None
        path = self.root / "runs" / f"{run_id}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))


def _ticket_doc(ticket: Ticket) -> dict[str, Any]:
    # Clients render only the options listed here; a resolved ticket offers none.
    open_ = ticket.state == TicketState.OPEN
    return {
        "id": ticket.id,
        "run": ticket.run_id,
        "node": ticket.node_id,
        "reason": ticket.reason,
        "state": ticket.state.value,
        "decision": ticket.decision.value if ticket.decision else None,
        "value": ticket.value,
        "opened_seq": ticket.opened_seq,
        "options": [d.value for d in Decision] if open_ else [],
    }


def _snapshot(result: RunResult, stages: tuple[tuple[str, ...], ...]) -> dict[str, Any]:
    return {
        "run_id": result.run_id,
        "spec_id": result.spec_id,
        "status": result.status.value,
        "seed": result.seed,
        "makespan_ms": result.makespan_ms,
        "stages": [list(s) for s in stages],
        "nodes": [
            {
                "id": view.id,
                "status": view.status.value,
                "attempts": view.attempts,
                "start_ms": view.start_ms,
                "finish_ms": view.finish_ms,
                "error": view.error,
                "via_fallback": view.via_fallback,
            }
            for view in result.nodes
        ],
        "tickets": [_ticket_doc(t) for t in result.tickets],
        "fields": jsonable(result.fields),
    }


def _resources_for(meta: dict[str, Any]):
    name = meta.get("scenario")
    if name:
        scenario = get_scenario(name)
        return build_resources(event_log_for(scenario, int(meta.get("seed", 0))))
    return build_resources()


def create_app(
    data_dir: str | Path | None = None,
    token: str | None = None,
    planner_url: str | None = None,
) -> FastAPI:
    store = _Store(data_dir)
    coordinator = RunCoordinator(
        clock=WallClock(), threaded=True, audit_sink=store.audit_sink()
    )
    app = FastAPI(title="process-run service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # Every error body carries both keys so clients can branch on code
    # without parsing the HTTP status line.
    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException) -> JSONResponse:
        return JSONResponse(
            {"code": exc.status_code, "detail": exc.detail},
            status_code=exc.status_code,
            headers=getattr(exc, "headers", None),
        )

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse({"code": 422, "detail": str(exc)}, status_code=422)

    # Recover every run recorded in the trail; unfinished ones pick up
    # exactly where the last record left them.
    if store.audit_path and store.audit_path.exists():
        for run_id, replayed in load_trail(store.audit_path).items():
            meta = store.load_run_meta(run_id)
            if meta is None:
                continue
            spec = parse_spec(meta["spec"])
            coordinator.adopt(spec, replayed, resources=_resources_for(meta))

    def require_auth(authorization: str | None = Header(default=None)) -> None:
        if token and authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or bad bearer token")

    guarded = [Depends(require_auth)]

    def snapshot(run_id: str) -> dict[str, Any]:
        return _snapshot(coordinator.result(run_id), coordinator.graph_stages(run_id))

    @app.post("/runs", status_code=202, dependencies=guarded)
    def create_run(request: RunRequest) -> dict[str, Any]:
        inputs: dict[str, Any]
        scenario_name = None
        try:
            if request.spec is not None:
                spec = parse_spec(request.spec)
                inputs = dict(request.inputs)
                resources = build_resources()
            elif request.scenario is not None:
                scenario = get_scenario(request.scenario)
                scenario_name = scenario.name
                if request.variant == "baseline":
                    spec = scenario.baseline_spec()
                elif request.variant == "optimized":
                    spec = optimize(
                        scenario.baseline_spec(),
                        OptimizerConfig.from_doc(scenario.optimizer_doc),
                    ).after
                else:
                    raise HTTPException(400, f"unknown variant: {request.variant}")
                inputs = {**scenario.run_inputs, **request.inputs}
                resources = build_resources(event_log_for(scenario, request.seed))
            elif request.text is not None:
                provider = HttpPlannerProvider(planner_url) if planner_url else None
                outcome = plan(request.text, default_library(), provider)
                spec = outcome.spec
                inputs = {**outcome.run_inputs, **request.inputs}
                resources = build_resources()
            else:
                raise HTTPException(400, "provide one of: scenario, spec, text")
        except KeyError as exc:
            raise HTTPException(400, str(exc.args[0])) from exc
        except SpecError as exc:
            raise HTTPException(400, f"invalid spec: {exc}") from exc
        except PlannerError as exc:
            raise HTTPException(400, f"planning failed: {exc}") from exc

        run_id = derive_run_id(spec.id, request.seed)
        bump = 2
        while coordinator.has_run(run_id):
            run_id = derive_run_id(f"{spec.id}#{bump}", request.seed)
            bump += 1
        store.save_run_meta(run_id, {
            "spec": serialize_spec(spec),
            "scenario": scenario_name,
            "seed": request.seed,
        })
        try:
            coordinator.start(
                spec, inputs, seed=request.seed, run_id=run_id, resources=resources
            )
        except RunAbortedError:
            pass  # the run exists with status aborted; report it as-is
        return snapshot(run_id)

    @app.get("/runs", dependencies=guarded)
    def list_runs() -> dict[str, Any]:
        runs = []
        for run_id in coordinator.run_ids():
            result = coordinator.result(run_id)
            runs.append({
                "run_id": run_id,
                "spec_id": result.spec_id,
                "status": result.status.value,
                "open_tickets": len(result.open_tickets),
            })
        return {"runs": runs}

    @app.get("/runs/{run_id}", dependencies=guarded)
    def get_run(run_id: str) -> dict[str, Any]:
        if not coordinator.has_run(run_id):
            raise HTTPException(404, f"no such run: {run_id}")
        return snapshot(run_id)

    @app.get("/runs/{run_id}/audit", dependencies=guarded)
    def get_audit(run_id: str) -> dict[str, Any]:
        if not coordinator.has_run(run_id):
            raise HTTPException(404, f"no such run: {run_id}")
        result = coordinator.result(run_id)
        return {"run": run_id, "records": list(result.audit)}

    @app.get("/tickets", dependencies=guarded)
    def list_tickets(state: str | None = Query(default=None)) -> dict[str, Any]:
        if state is not None and state not in ("open", "resolved"):
            raise HTTPException(400, f"unknown ticket state: {state}")
        return {"tickets": [_ticket_doc(t) for t in coordinator.tickets(state)]}

    @app.post("/tickets/{ticket_id}/decision", dependencies=guarded)
    def decide(ticket_id: str, request: DecisionRequest) -> dict[str, Any]:
        try:
            decision = Decision(request.decision)
        except ValueError as exc:
            raise HTTPException(400, f"unknown decision: {request.decision}") from exc
        try:
            coordinator.resolve(ticket_id, decision, request.value)
        except TicketNotFoundError as exc:
            raise HTTPException(404, str(exc)) from exc
        except AlreadyResolvedError as exc:
            raise HTTPException(409, str(exc)) from exc
        except RunAbortedError:
            pass
        ticket = coordinator.ticket(ticket_id)
        return {"ticket": _ticket_doc(ticket), "run": snapshot(ticket.run_id)}

    @app.get("/metrics", dependencies=guarded)
    def metrics() -> dict[str, Any]:
        by_status: dict[str, int] = {}
        for run_id in coordinator.run_ids():
            status = coordinator.result(run_id).status.value
            by_status[status] = by_status.get(status, 0) + 1
        open_tickets = len(coordinator.tickets("open"))
        return {
            "runs": len(coordinator.run_ids()),
            "by_status": by_status,
            "tickets_open": open_tickets,
            "tickets_total": len(coordinator.tickets()),
        }

    return app


def app_from_env() -> FastAPI:
    """Factory for `uvicorn gbpa.service:app_from_env --factory`."""
    return create_app(
        data_dir=os.environ.get("GBPA_DATA_DIR"),
        token=os.environ.get("GBPA_TOKEN"),
        planner_url=os.environ.get("GBPA_PLANNER_URL"),
    )
