"""Session server: state machine semantics and the wire protocol."""

import asyncio
import base64
import json

import numpy as np
import pytest

from nilray.geodesic import CameraState, flow_state
from nilray.march import MarchConfig
from nilray.scene import Light, Scene, SceneObject
from nilray.server import Session, serve_session


def make_session(width=16):
    scene = Scene(objects=[SceneObject(center=np.zeros(3), radius=0.5)],
                  lights=[Light(position=np.array([2.0, 0.0, 2.0]))])
    cam = CameraState(np.array([0.0, 0.0, 3.0]), np.eye(3))
    cfg = MarchConfig(width=width, height=width)
    return Session(scene, cam, cfg)


def test_move_and_reverse_returns_to_start():
    s = make_session()
    p0 = s.camera.p.copy()
    f0 = s.camera.frame.copy()
    s.handle({"type": "move", "v": [0.0, 0.0, -1.0], "t": 1.0})
    s.handle({"type": "move", "v": [0.0, 0.0, 1.0], "t": 1.0})
    assert np.linalg.norm(s.camera.p - p0) < 1e-6
    assert np.max(np.abs(s.camera.frame - f0)) < 1e-6


def test_rotate_full_turn_identity():
    s = make_session()
    f0 = s.camera.frame.copy()
    s.handle({"type": "rotate", "axis": [0.3, 0.5, 0.81], "angle": 2.0 * np.pi})
    assert np.max(np.abs(s.camera.frame - f0)) < 1e-9


def test_two_moves_match_flow_state():
    s = make_session()
    cam = CameraState(s.camera.p.copy(), s.camera.frame.copy())
    s.handle({"type": "move", "v": [0.2, -0.1, -0.9], "t": 0.7})
    s.handle({"type": "move", "v": [-0.4, 0.0, -0.3], "t": 0.5})
    cam = flow_state(cam, [0.2, -0.1, -0.9], 0.7)
    cam = flow_state(cam, [-0.4, 0.0, -0.3], 0.5)
    assert np.allclose(s.camera.p, cam.p, atol=1e-12)
    assert np.allclose(s.camera.frame, cam.frame, atol=1e-12)


def test_sequence_numbers_strictly_increase():
    s = make_session()
    seqs = []
    for _ in range(3):
        msgs = s.handle({"type": "move", "v": [0, 0, -1.0], "t": 0.1})
        seqs.extend(m["seq"] for m in msgs)
        assert {m["type"] for m in msgs} == {"pose", "frame"}
    assert seqs == [1, 1, 2, 2, 3, 3]


def test_malformed_message_keeps_state():
    s = make_session()
    p0 = s.camera.p.copy()
    seq0 = s.seq
    with pytest.raises(Exception):
        s.handle({"type": "move", "v": [0, 0], "t": 1.0})
    with pytest.raises(Exception):
        s.handle({"type": "warp"})
    assert np.array_equal(s.camera.p, p0)
    assert s.seq == seq0


def test_config_message_changes_render_size():
    s = make_session(width=16)
    msgs = s.handle({"type": "config", "width": 8, "height": 8})
    frame = next(m for m in msgs if m["type"] == "frame")
    png = base64.b64decode(frame["png"])
    from PIL import Image
    import io

    im = Image.open(io.BytesIO(png))
    assert im.size == (8, 8)


def test_pose_message_format():
    s = make_session()
    msgs = s.handle({"type": "move", "v": [0, 0, -1.0], "t": 0.2})
    pose = next(m for m in msgs if m["type"] == "pose")
    assert pose["chart"] == "rot"
    assert len(pose["p"]) == 3
    assert len(pose["frame"]) == 9
    f = np.asarray(pose["frame"]).reshape(3, 3)
    assert np.allclose(f.T @ f, np.eye(3), atol=1e-9)


@pytest.mark.parametrize("port", [8791])
def test_websocket_round_trip(port):
    """End to end: connect, move forward and back, second client refused."""
    import websockets

    async def run():
        scene = Scene(objects=[SceneObject(center=np.zeros(3), radius=0.5)],
                      lights=[Light(position=np.array([2.0, 0.0, 2.0]))])
        cam = CameraState(np.array([0.0, 0.0, 3.0]), np.eye(3))
        cfg = MarchConfig(width=12, height=12)
        ready = asyncio.Event()
        server = asyncio.create_task(
            serve_session(scene, cam, cfg, port=port, ready_event=ready))
        await asyncio.wait_for(ready.wait(), timeout=10)
        try:
            async with websockets.connect(f"ws://127.0.0.1:{port}") as ws:
                first_pose = json.loads(await ws.recv())
                first_frame = json.loads(await ws.recv())
                assert first_pose["type"] == "pose"
                assert first_frame["type"] == "frame"
                p_start = np.asarray(first_pose["p"])

                # a second client must be refused while we hold the session
                async with websockets.connect(f"ws://127.0.0.1:{port}") as ws2:
                    refusal = json.loads(await ws2.recv())
                    assert refusal["type"] == "error"
                    assert "one client" in refusal["msg"]

                seqs = [first_frame["seq"]]
                await ws.send(json.dumps({"type": "move", "v": [0, 0, -1], "t": 0.8}))
                pose1 = json.loads(await ws.recv())
                frame1 = json.loads(await ws.recv())
                seqs.append(frame1["seq"])
                await ws.send(json.dumps({"type": "move", "v": [0, 0, 1], "t": 0.8}))
                pose2 = json.loads(await ws.recv())
                frame2 = json.loads(await ws.recv())
                seqs.append(frame2["seq"])
                assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
                assert np.linalg.norm(np.asarray(pose2["p"]) - p_start) < 1e-6

                # malformed message: error reply, state unchanged
                await ws.send("not json at all")
                err = json.loads(await ws.recv())
                assert err["type"] == "error"
                await ws.send(json.dumps({"type": "rotate", "axis": [0, 1, 0],
                                          "angle": 2 * np.pi}))
                pose3 = json.loads(await ws.recv())
                await ws.recv()
                assert np.linalg.norm(np.asarray(pose3["p"]) - p_start) < 1e-6
        finally:
            server.cancel()
            try:
                await server
            except asyncio.CancelledError:
                pass

    asyncio.run(asyncio.wait_for(run(), timeout=60))
