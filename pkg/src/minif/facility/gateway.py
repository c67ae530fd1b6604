"""Operator gateway: REST + WebSocket face of the supervisor.

The console is a pure view: every route reads or forwards to the services,
and /api/events streams bus events as JSON objects mirroring wire frames so
the browser sees exactly what the bus carries.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
from pathlib import Path

from fastapi import FastAPI, Header, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..errors import MinifError, code_of
from ..shotseq import ShotPlan
from ..values import attrs_to_json, unwrap
from .procbase import FacilityConfig

log = logging.getLogger(__name__)

HTTP_STATUS = {
    "NameNotFound": 404, "UnknownShot": 404, "UnknownAlert": 404,
    "UnknownProcess": 404, "Unknown": 404,
    "AlreadyReserved": 409, "ShotInProgress": 409, "AlreadyResponded": 409,
    "PartialConflict": 409, "Duplicate": 409, "NotPaused": 409,
    "BadChoice": 400, "ValidationFailed": 400, "XmlSyntax": 400,
    "UnknownElement": 400, "BadAttribute": 400, "DepthExceeded": 400,
    "UnknownKey": 404, "NotReserved": 404, "NoActiveShot": 404,
}

EVENT_PREFIXES = ("status.", "alert.", "svc.state", "shot.", "reserve.")


def build_gateway(sup) -> FastAPI:
    app = FastAPI(title="minif operator gateway", docs_url=None, redoc_url=None)

    @app.exception_handler(MinifError)
    async def minif_error(request: Request, exc: MinifError):
        code = code_of(exc)
        return JSONResponse(status_code=HTTP_STATUS.get(code, 500),
                            content={"error": code, "detail": exc.detail})

    # -- status -----------------------------------------------------------

    @app.get("/api/status")
    def status(prefix: str = ""):
        snap = sup.mirror.snapshot(prefix)
        return {ch: {"value": unwrap(u.value), "tag": u.value.tag, "seq": u.seq,
                     "ts": u.ts, "reason": u.reason}
                for ch, u in sorted(snap.items())}

    @app.get("/api/facility")
    def facility():
        return {"panels": sup.config.panels,
                "process_ids": [p["process_id"] for p in sup.config.processes],
                "http_port": sup.config.http_port}

    # -- alerts ------------------------------------------------------------

    @app.get("/api/alerts")
    def alerts():
        return [a.to_json() for a in sup.alerts.pending()]

    @app.post("/api/alerts/{alert_id}/respond")
    async def respond(alert_id: int, request: Request):
        body = await request.json()
        sup.alerts.respond(alert_id, body["choice"],
                           body.get("operator", "console"))
        return {"ok": True}

    @app.get("/api/alerts/history")
    def alert_history():
        return sup.alerts.history()

    # -- reservations ---------------------------------------------------------

    @app.post("/api/reserve")
    async def reserve(request: Request,
                      x_operator: str | None = Header(default=None)):
        body = await request.json()
        holder = body.get("holder") or x_operator or "console"
        lease = body.get("lease_ms")
        if "taxons" in body:
            key = sup.reserve.reserve_group(body["taxons"], holder, lease)
        else:
            key = sup.reserve.reserve(body["taxon"], holder, lease)
        return {"key": key, "holder": holder}

    @app.delete("/api/reserve/{key}")
    def release(key: str, taxon: str | None = None):
        sup.reserve.release(key, taxon)
        return {"ok": True}

    @app.get("/api/reservations")
    def reservations():
        return [{"taxon": e.taxon, "holder": e.holder, "acquired_at": e.acquired_at,
                 "group_id": e.group_id, "lease_ms": e.lease_ms}
                for e in sup.reserve.entries()]

    @app.post("/api/reserve/{taxon}/break")
    async def break_reservation(taxon: str, request: Request,
                                x_operator: str | None = Header(default=None)):
        body = await request.json()
        sup.reserve.break_reservation(taxon, x_operator or "console",
                                      body.get("reason", "operator override"))
        return {"ok": True}

    # -- shots -------------------------------------------------------------------

    @app.post("/api/shots")
    async def start_shot(request: Request):
        body = await request.json()
        participants = body.get("participants") or sorted(sup.coordinator.participants)
        plan = ShotPlan(participants=participants,
                        parameters=body.get("parameters", {}),
                        timeout_per_phase_ms=body.get("timeout_per_phase_ms", 5000))
        shot_id = sup.coordinator.run_shot_async(plan,
                                                 dwell_ms=body.get("dwell_ms", 150))
        return {"shot_id": shot_id}

    @app.post("/api/shots/{shot_id}/abort")
    async def abort_shot(shot_id: int, request: Request):
        body = await request.json() if int(request.headers.get("content-length") or 0) else {}
        outcome = sup.coordinator.abort(body.get("reason", "operator abort"))
        return {"outcome": outcome}

    @app.get("/api/shots/active")
    def active_shot():
        shot = sup.coordinator.current_shot()
        return {"shot": shot.to_json() if shot else None}

    @app.get("/api/shots/{shot_id}")
    def get_shot(shot_id: int):
        return sup.coordinator.get_shot(shot_id).to_json()

    # -- sequences -----------------------------------------------------------------

    @app.post("/api/sequences")
    async def run_sequence(request: Request,
                           x_operator: str | None = Header(default=None)):
        body = await request.json()
        exec_id = sup.sequences.run(body["xml"],
                                    body.get("operatorScript"),
                                    operator=x_operator or "console")
        return {"exec_id": exec_id}

    @app.get("/api/sequences/{exec_id}")
    def sequence_status(exec_id: str):
        return sup.sequences.status(exec_id)

    @app.post("/api/sequences/{exec_id}/resume")
    async def sequence_resume(exec_id: str, request: Request,
                              x_operator: str | None = Header(default=None)):
        body = await request.json()
        sup.sequences.resume(exec_id, body["choice"], x_operator or "console")
        return {"ok": True}

    # -- processes --------------------------------------------------------------------

    @app.get("/api/processes")
    def processes():
        from ..sysmgr.service import SERVICE_NAME as SYSMGR
        out = sup.node.invoke(SYSMGR, "report", timeout_ms=2000)
        return json.loads(out["processes"].value)

    # -- event stream -------------------------------------------------------------------

    @app.websocket("/api/events")
    async def events(ws: WebSocket):
        await ws.accept()
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue(maxsize=2048)

        def sink(topic: str, args: dict):
            args = dict(args)
            ts = args.pop("_ts", None)
            frame = {"v": 1, "kind": "evt", "target": topic, "op": "event",
                     "args": attrs_to_json(args)}
            if ts is not None:
                frame["ts"] = ts.value
            try:
                loop.call_soon_threadsafe(_offer, queue, frame)
            except RuntimeError:
                pass

        subs = [sup.node.subscribe(p, sink) for p in EVENT_PREFIXES]
        try:
            while True:
                frame = await queue.get()
                await ws.send_text(json.dumps(frame, sort_keys=True,
                                              separators=(",", ":")))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            for sub in subs:
                sub.cancel()

    static_dir = _console_dist()
    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    return app


def _offer(queue: asyncio.Queue, item):
    if queue.full():
        try:
            queue.get_nowait()
        except asyncio.QueueEmpty:
            pass
    queue.put_nowait(item)


def _console_dist() -> str | None:
    root = Path(__file__).resolve()
    for parent in root.parents:
        dist = parent / "frontend" / "dist"
        if (dist / "index.html").exists():
            return str(dist)
    return None


def serve_gateway(sup, port: int):
    """Run uvicorn on a daemon thread; returns the server handle."""
    import uvicorn

    app = build_gateway(sup)
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)

    def run():
        try:
            server.run()
        except Exception:
            log.exception("gateway server died")

    threading.Thread(target=run, name="gateway", daemon=True).start()
    return server
