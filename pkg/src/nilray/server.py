"""Single-session WebSocket server for interactive navigation.

Protocol (JSON text messages, documented bit-exactly in docs/protocol.md):

  client -> server
    {"type": "move", "v": [x, y, z], "t": s}
    {"type": "rotate", "axis": [x, y, z], "angle": r}
    {"type": "config", ...}              # march/camera overrides
  server -> client
    {"type": "frame", "seq": n, "png": base64}
    {"type": "pose", "seq": n, "p": [x, y, z], "chart": "rot", "frame": [9 reals]}
    {"type": "error", "msg": ...}

Commands are handled strictly in arrival order; each accepted move/rotate or
config advances the sequence number exactly once and triggers exactly one
render. A second concurrent connection is refused with an explanatory error.
"""

from __future__ import annotations

import asyncio
import base64
import dataclasses
import hashlib
import json

import numpy as np

from .geodesic import CameraState, flow_state, orthonormalize
from .march import MarchConfig
from .render import png_bytes, render
from .scene import Scene

__all__ = ["Session", "serve_session"]


def _rodrigues(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0:
        raise ValueError("rotation axis must be nonzero")
    k = axis / n
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)


class Session:
    """Serialized session state: camera, scene, config, frame counter."""

    def __init__(self, scene: Scene, camera: CameraState, cfg: MarchConfig):
        self.scene = scene
        self.camera = camera
        self.cfg = cfg
        self.seq = 0

    def handle(self, msg: dict) -> list:
        """Apply one command; returns the reply messages in send order."""
        kind = msg.get("type")
        if kind == "move":
            v = np.asarray(msg["v"], dtype=float)
            t = float(msg["t"])
            if v.shape != (3,) or not np.all(np.isfinite(v)) or not np.isfinite(t):
                raise ValueError("move: v must be three finite numbers, t finite")
            self.camera = flow_state(self.camera, v, t)
        elif kind == "rotate":
            rot = _rodrigues(msg["axis"], float(msg["angle"]))
            self.camera = CameraState(self.camera.p,
                                      orthonormalize(self.camera.frame @ rot))
        elif kind == "config":
            allowed = {"width", "height", "fov_degrees", "max_steps", "t_max",
                       "eps_hit", "min_step"}
            fields = {k: v for k, v in msg.items() if k in allowed}
            unknown = set(msg) - allowed - {"type"}
            if unknown:
                raise ValueError(f"config: unknown keys {sorted(unknown)}")
            self.cfg = dataclasses.replace(self.cfg, **fields)
        else:
            raise ValueError(f"unknown message type: {kind!r}")

        self.seq += 1
        img, _ = render(self.scene, self.camera, self.cfg)
        png = png_bytes(img)
        pose = {
            "type": "pose",
            "seq": self.seq,
            "p": [float(x) for x in self.camera.p],
            "chart": "rot",
            "frame": [float(x) for x in self.camera.frame.reshape(-1)],
        }
        frame = {
            "type": "frame",
            "seq": self.seq,
            "png": base64.b64encode(png).decode("ascii"),
        }
        print(f"frame seq={self.seq} sha256={hashlib.sha256(png).hexdigest()}",
              flush=True)
        return [pose, frame]

    def initial_messages(self) -> list:
        img, _ = render(self.scene, self.camera, self.cfg)
        png = png_bytes(img)
        print(f"frame seq={self.seq} sha256={hashlib.sha256(png).hexdigest()}",
              flush=True)
        return [
            {
                "type": "pose",
                "seq": self.seq,
                "p": [float(x) for x in self.camera.p],
                "chart": "rot",
                "frame": [float(x) for x in self.camera.frame.reshape(-1)],
            },
            {
                "type": "frame",
                "seq": self.seq,
                "png": base64.b64encode(png).decode("ascii"),
            },
        ]


async def serve_session(scene: Scene, camera: CameraState, cfg: MarchConfig,
                        host: str = "127.0.0.1", port: int = 8765,
                        ready_event: asyncio.Event | None = None):
    """Run the server until cancelled; one active session at a time."""
    import websockets

    session = Session(scene, camera, cfg)
    busy = {"conn": None}

    async def handler(ws):
        if busy["conn"] is not None:
            await ws.send(json.dumps({
                "type": "error",
                "msg": "session in use: this server supports one client at a time",
            }))
            await ws.close()
            return
        busy["conn"] = ws
        try:
            for m in session.initial_messages():
                await ws.send(json.dumps(m))
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                    replies = session.handle(msg)
                except Exception as exc:  # malformed input: report, keep state
                    await ws.send(json.dumps({"type": "error", "msg": str(exc)}))
                    continue
                for m in replies:
                    await ws.send(json.dumps(m))
        finally:
            busy["conn"] = None

    async with websockets.serve(handler, host, port):
        print(f"serving on ws://{host}:{port}", flush=True)
        if ready_event is not None:
            ready_event.set()
        await asyncio.Future()
