"""Live steering sessions over a WebSocket.

Each client connection owns one session: an independent world plus an
evolving copy of the checkpoint model.  The server streams one frame per
simulation step and accepts instruction / pause / resume / reset messages;
instructions run the same label-and-update path as headless episodes.  All
messages are JSON, tagged with a type, a schema version and the session id.
Within a session everything is serialized through one ordered event queue,
so a frame never interleaves with a half-applied instruction.
"""

from __future__ import annotations

import asyncio
import itertools
import json
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .network import load_checkpoint
from .runtime import EpisodeEngine, RuntimeConfig, phases_from_steps
from .users import Instruction
from .world import BEHAVIORS, Arena, arena_from_dict, default_scenario, load_scenario

SCHEMA_VERSION = "1"

_MALFORMED = {"type": "__malformed__"}


def _pref_dict(values: np.ndarray) -> dict:
    return {name: float(values[i]) for i, name in enumerate(BEHAVIORS)}


class Session:
    """One client's world, model copy and phase bookkeeping."""

    def __init__(self, session_id: str, params, algo: str, arena: Arena, cfg: RuntimeConfig):
        self.id = session_id
        self.algo = algo
        self.arena = arena
        self.cfg = cfg
        self.initial_params = params
        self.engine = EpisodeEngine(params, arena, cfg)
        self.paused = False

    def reset(self) -> None:
        self.engine = EpisodeEngine(self.initial_params, self.arena, self.cfg)

    def arena_message(self) -> dict:
        return {
            "type": "arena",
            "schema_version": SCHEMA_VERSION,
            "session_id": self.id,
            "algo": self.algo,
            "width": self.arena.width,
            "depth": self.arena.depth,
            "max_altitude": self.arena.max_altitude,
            "obstacles": [
                {"center": ob.center.tolist(), "half_extents": ob.half_extents.tolist()}
                for ob in self.arena.obstacles
            ],
            "targets": [
                {"center": tz.center.tolist(), "radius": tz.radius} for tz in self.arena.targets
            ],
        }

    def frame_message(self) -> dict:
        frame = self.engine.tick()
        steps = self.engine.feedback_steps
        phases = phases_from_steps(steps, self.cfg.phase_gap)
        phase_active = bool(steps) and frame.step - steps[-1] <= self.cfg.phase_gap
        current_len = (frame.step - phases[-1].start_step + 1) if phase_active else 0
        return {
            "type": "frame",
            "schema_version": SCHEMA_VERSION,
            "session_id": self.id,
            "algo": self.algo,
            "step": frame.step,
            "robots": [
                {"p": r.position.tolist(), "v": r.velocity.tolist()} for r in frame.robots
            ],
            "H_hat": _pref_dict(frame.h_hat),
            "R": _pref_dict(frame.r),
            "situation": frame.situation,
            "phase_active": phase_active,
            "metrics": {"n_phases": len(phases), "current_phase_len": current_len},
        }

    def error_message(self, message: str) -> dict:
        return {
            "type": "error",
            "schema_version": SCHEMA_VERSION,
            "session_id": self.id,
            "message": message,
        }

    def ack_message(self, command: str, h_hat: np.ndarray | None = None) -> dict:
        msg = {
            "type": "ack",
            "schema_version": SCHEMA_VERSION,
            "session_id": self.id,
            "command": command,
        }
        if h_hat is not None:
            msg["H_hat"] = _pref_dict(h_hat)
        return msg

    def apply_instruction(self, payload) -> dict:
        """Validate and fold one instruction message into the model."""
        if not isinstance(payload, dict):
            return self.error_message("invalid instruction")
        try:
            ins = Instruction(**{name: payload.get(name, 0) for name in BEHAVIORS})
        except (ValueError, TypeError):
            return self.error_message("invalid instruction")
        try:
            h_hat = self.engine.feedback(ins)
        except RuntimeError:
            return self.error_message("session not started")
        return self.ack_message("instruction", h_hat)

    def handle(self, msg: dict) -> dict:
        """Process one client message, returning the reply to send."""
        if msg is _MALFORMED or not isinstance(msg, dict):
            return self.error_message("malformed message")
        mtype = msg.get("type")
        if mtype == "instruction":
            return self.apply_instruction(msg.get("ins"))
        if mtype == "pause":
            self.paused = True
            return self.ack_message("pause")
        if mtype == "resume":
            self.paused = False
            return self.ack_message("resume")
        if mtype == "reset":
            self.reset()
            return self.ack_message("reset")
        return self.error_message("unknown command")


async def _read_into_queue(ws: WebSocket, queue: asyncio.Queue, closed: asyncio.Event):
    try:
        while True:
            text = await ws.receive_text()
            try:
                msg = json.loads(text)
            except json.JSONDecodeError:
                msg = _MALFORMED
            await queue.put(msg)
    except (WebSocketDisconnect, RuntimeError):
        closed.set()


def create_app(
    params,
    algo: str,
    arena: Arena,
    cfg: RuntimeConfig | None = None,
    speedup: float = 1.0,
    ui_dir=None,
) -> FastAPI:
    """Build the session service around a loaded checkpoint and arena."""
    cfg = cfg or RuntimeConfig()
    interval = cfg.flock.dt / speedup
    session_counter = itertools.count()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.loop = asyncio.get_running_loop()
        yield
        app.state.shutdown_event.set()
        # Give session loops a beat to flush their shutdown frames.
        await asyncio.sleep(min(interval * 2, 0.2))

    app = FastAPI(lifespan=lifespan)
    app.state.shutdown_event = asyncio.Event()

    @app.websocket("/ws")
    async def ws_session(ws: WebSocket):
        await ws.accept()
        seed = next(session_counter)
        session = Session(f"s{seed:04d}", params, algo, arena, cfg.with_seed(seed))
        queue: asyncio.Queue = asyncio.Queue()
        closed = asyncio.Event()
        reader = asyncio.ensure_future(_read_into_queue(ws, queue, closed))
        try:
            await ws.send_json(session.arena_message())
            while not closed.is_set():
                if app.state.shutdown_event.is_set():
                    await ws.send_json(
                        {
                            "type": "server_shutdown",
                            "schema_version": SCHEMA_VERSION,
                            "session_id": session.id,
                        }
                    )
                    break
                while not queue.empty():
                    await ws.send_json(session.handle(queue.get_nowait()))
                if not session.paused:
                    await ws.send_json(session.frame_message())
                await asyncio.sleep(interval)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            reader.cancel()
            try:
                await ws.close()
            except RuntimeError:
                pass

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def app_from_files(
    checkpoint_path,
    scenario_path=None,
    cfg: RuntimeConfig | None = None,
    speedup: float = 1.0,
    ui_dir=None,
) -> FastAPI:
    params, meta_info = load_checkpoint(checkpoint_path)
    if scenario_path is not None:
        arena, raw = load_scenario(scenario_path)
        if cfg is None and "flock_params" in raw:
            from .flocking import FlockParams

            cfg = RuntimeConfig(flock=FlockParams.from_dict(raw["flock_params"]))
    else:
        arena = arena_from_dict(default_scenario())
    return create_app(
        params,
        algo=meta_info.get("trained_with", "unknown"),
        arena=arena,
        cfg=cfg,
        speedup=speedup,
        ui_dir=ui_dir,
    )
