"""HTTP + WebSocket control surface over a running simulation.

The simulation loop owns all mutable state on its own thread. Handlers never
touch it directly: commands go in through a queue and are drained between
ticks, snapshots come out as immutable dicts into a latest-wins slot, so a
slow consumer can only miss frames, never stall the loop.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from pathlib import Path as FsPath

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .ddpg import save_model
from .sim import World


class SimulationService:
    """Background thread stepping a World; command queue in, snapshots out."""

    def __init__(self, world: World, model_dir="models"):
        self.world = world
        self.model_dir = model_dir
        self.tick_hz = world.cfg.tick_hz
        self.broadcast_interval = max(1, world.cfg.broadcast_interval)
        self._commands: queue.Queue = queue.Queue()
        self._cond = threading.Condition()
        self._seq = 0
        self._snap: dict | None = None
        self._paused = False
        self._selected: int | None = None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    # -- lifecycle -------------------------------------------------------

    def start(self):
        self._publish()
        self._thread = threading.Thread(target=self._run, name="sim-loop", daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def _run(self):
        next_deadline = time.monotonic()
        while not self._stop.is_set():
            self._drain_commands()
            if self._paused:
                self._publish()
                time.sleep(0.05)
                continue
            self.world.tick()
            if self.world.tick_no % self.broadcast_interval == 0:
                self._publish()
            if self.tick_hz > 0:
                next_deadline += 1.0 / self.tick_hz
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_deadline = time.monotonic()

    # -- commands (applied between ticks) -----------------------------------

    def _drain_commands(self):
        while True:
            try:
                kind, payload, reply = self._commands.get_nowait()
            except queue.Empty:
                return
            if kind == "flags":
                self.world.set_flags(**payload)
            elif kind == "save":
                files = save_model(self.world.agent, self.model_dir, self.world.tick_no)
                reply.put([str(f) for f in files])
            elif kind == "select":
                self._selected = payload
            elif kind == "pause":
                self._paused = True
            elif kind == "resume":
                self._paused = False
            self._publish()

    def submit_flags(self, training: bool | None, exploration: bool | None):
        self._commands.put(("flags", {"training": training, "exploration": exploration}, None))

    def submit_save(self, timeout: float = 30.0) -> list[str]:
        reply: queue.Queue = queue.Queue(1)
        self._commands.put(("save", None, reply))
        return reply.get(timeout=timeout)

    def submit_select(self, vid: int):
        self._commands.put(("select", vid, None))

    def submit_pause(self):
        self._commands.put(("pause", None, None))

    def submit_resume(self):
        self._commands.put(("resume", None, None))

    # -- snapshots -----------------------------------------------------------

    def _publish(self):
        snap = self.world.snapshot(self._selected)
        snap["flags"]["paused"] = self._paused
        with self._cond:
            self._seq += 1
            self._snap = snap
            self._cond.notify_all()

    def latest(self) -> tuple[int, dict]:
        with self._cond:
            return self._seq, self._snap

    def wait_snapshot(self, last_seq: int, timeout: float) -> tuple[int, dict | None]:
        """Block until a snapshot newer than last_seq exists (latest-wins)."""
        with self._cond:
            self._cond.wait_for(lambda: self._seq > last_seq, timeout)
            if self._seq > last_seq:
                return self._seq, self._snap
            return last_seq, None

    def network_geometry(self) -> dict:
        g = self.world.graph
        return {
            "v": 1,
            "nodes": [
                {"id": i, "lat": p.lat, "lon": p.lon} for i, p in enumerate(g.nodes)
            ],
            "edges": [
                {"id": i, "from": e.frm, "to": e.to, "vmax": e.v_max}
                for i, e in enumerate(g.edges)
            ],
        }


class FlagsBody(BaseModel):
    training: bool | None = None
    exploration: bool | None = None


def create_app(service: SimulationService, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="roadrl control server")

    @app.get("/api/network")
    def network():
        return service.network_geometry()

    @app.get("/api/state")
    def state():
        _seq, snap = service.latest()
        return snap

    @app.get("/api/stats/{vid}")
    def stats(vid: int):
        world = service.world
        if not (0 <= vid < len(world.vehicles)):
            return JSONResponse(
                status_code=404,
                content={"v": 1, "error": f"no vehicle {vid}"},
            )
        return {"v": 1, "id": vid, **world.vehicles[vid].stats.as_dict()}

    @app.post("/api/flags")
    def flags(body: FlagsBody):
        service.submit_flags(body.training, body.exploration)
        return {"v": 1, "ok": True}

    @app.post("/api/save")
    def save():
        files = service.submit_save()
        return {"v": 1, "files": files}

    @app.post("/api/pause")
    def pause():
        service.submit_pause()
        return {"v": 1, "ok": True}

    @app.post("/api/resume")
    def resume():
        service.submit_resume()
        return {"v": 1, "ok": True}

    @app.websocket("/ws/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        seq = 0
        try:
            while True:
                seq, snap = await run_in_threadpool(service.wait_snapshot, seq, 1.0)
                if snap is not None:
                    await ws.send_text(json.dumps(snap))
        except WebSocketDisconnect:
            pass

    if frontend_dir is not None:
        frontend_dir = FsPath(frontend_dir)
        index = frontend_dir / "index.html"
        if index.exists():
            @app.get("/")
            def root():
                return FileResponse(index)

            app.mount("/", StaticFiles(directory=str(frontend_dir)), name="ui")
    return app
