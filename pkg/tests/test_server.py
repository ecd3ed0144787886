import asyncio
import json
import socket
import threading

import numpy as np
import pytest

import softmpm as sm
from softmpm.server import (ColliderPose, FrameTooLarge, Session, decode_frame,
                            encode_frame, parse_control, serve_async)
from softmpm.surfacing import SurfaceMesh


def random_mesh(rng, n_verts=50, n_tris=80):
    return SurfaceMesh(
        vertices=rng.normal(size=(n_verts, 3)).astype(np.float32).astype(np.float64),
        indices=rng.integers(0, n_verts, (n_tris, 3)).astype(np.int32),
        uvs=rng.random((n_verts, 2)).astype(np.float32).astype(np.float64),
        normals=rng.normal(size=(n_verts, 3)).astype(np.float32).astype(np.float64))


def random_colliders(rng, k=2):
    out = []
    for i in range(k):
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        out.append(ColliderPose(id=i, translation=rng.normal(size=3),
                                quaternion=q, jaw_closed=bool(rng.integers(2))))
    return out


def test_round_trip_exact(rng):
    for _ in range(10):
        mesh = random_mesh(rng)
        cols = random_colliders(rng)
        data = encode_frame(mesh, cols, frame_index=7, sim_time=1.25)
        out = decode_frame(data)
        assert out.frame_index == 7
        assert out.sim_time == 1.25
        assert np.array_equal(out.vertices, mesh.vertices.astype(np.float32))
        assert np.array_equal(out.normals, mesh.normals.astype(np.float32))
        assert np.array_equal(out.uvs, mesh.uvs.astype(np.float32))
        assert np.array_equal(out.indices, mesh.indices.astype(np.uint32))
        for a, b in zip(out.colliders, cols):
            assert a.id == b.id
            assert np.array_equal(a.translation, b.translation.astype(np.float32))
            assert np.array_equal(a.quaternion, b.quaternion.astype(np.float32))
            assert a.jaw_closed == b.jaw_closed


def test_byte_length_formula(rng):
    mesh = random_mesh(rng, n_verts=33, n_tris=21)
    cols = random_colliders(rng, k=3)
    data = encode_frame(mesh, cols, 0, 0.0)
    assert len(data) == 20 + 32 * 33 + 12 * 21 + 4 + 33 * 3


def test_empty_mesh_header_only():
    data = encode_frame(SurfaceMesh.empty(), [], 3, 0.5)
    assert len(data) == 24  # fixed-size header + zero collider count
    out = decode_frame(data)
    assert out.frame_index == 3
    assert len(out.vertices) == 0
    assert len(out.colliders) == 0


def test_oversized_mesh_rejected():
    n = (1 << 24) + 1
    huge = SurfaceMesh(
        vertices=np.broadcast_to(np.zeros(3), (n, 3)),
        indices=np.zeros((0, 3), dtype=np.int32),
        uvs=np.broadcast_to(np.zeros(2), (n, 2)),
        normals=np.broadcast_to(np.zeros(3), (n, 3)))
    with pytest.raises(FrameTooLarge):
        encode_frame(huge, [], 0, 0.0)


def test_parse_control_accepts_valid():
    msg = parse_control(json.dumps({
        "type": "set_tool_target", "collider_group": "gripper",
        "position": [0.1, 0.2, 0.3], "orientation": [0.0, 0.0, 0.0, 1.0],
        "jaw": "closed"}))
    assert msg is not None
    assert np.allclose(msg["position"], (0.1, 0.2, 0.3))
    assert parse_control(json.dumps({"type": "pause"})) == {"type": "pause"}
    assert parse_control(json.dumps({"type": "set_material",
                                     "young_modulus": 2.0e4})) is not None


def test_parse_control_rejects_malformed():
    assert parse_control("not json") is None
    assert parse_control(json.dumps({"no_type": 1})) is None
    assert parse_control(json.dumps({"type": "warp_core_breach"})) is None
    assert parse_control(json.dumps({"type": "set_tool_target"})) is None
    assert parse_control(json.dumps({
        "type": "set_tool_target", "collider_group": "g",
        "position": [0, 0, 0], "orientation": [3.0, 0.0, 0.0, 0.0]})) is None
    assert parse_control(json.dumps({"type": "reset",
                                     "scenario": "nonsense"})) is None


def interactive_session(**kw):
    config = sm.builtin_scenario("pull", particles=400)
    config.resolution = (32, 32, 32)
    return Session(config, **kw)


def test_session_streams_and_steers():
    session = interactive_session()
    frame = session.run_frame()
    assert frame is not None
    decoded = decode_frame(frame)
    assert decoded.frame_index == 0
    assert len(decoded.colliders) == 2

    start = session.groups["gripper"].position.copy()
    target = start + np.array([0.2, 0.0, 0.0])
    session.mailbox.put({"type": "set_tool_target", "collider_group": "gripper",
                         "position": target})
    moved = 0.0
    per_frame = []
    for _ in range(5):
        before = session.groups["gripper"].position.copy()
        session.run_frame()
        after = session.groups["gripper"].position.copy()
        per_frame.append(np.linalg.norm(after - before))
        moved = np.linalg.norm(after - start)
    assert moved > 0.01  # responded within 5 frames
    limit = session.v_max * session.frame_dt
    assert all(step <= limit + 1e-12 for step in per_frame)


def test_session_pause_resume_reset():
    session = interactive_session()
    session.run_frame()
    session.run_frame()
    assert session.frame_index == 2
    t_before = session.instance.state.time
    session.mailbox.put({"type": "pause"})
    assert session.run_frame() is None
    assert session.instance.state.time == t_before
    session.mailbox.put({"type": "resume"})
    assert session.run_frame() is not None
    session.mailbox.put({"type": "reset"})
    frame = session.run_frame()  # first frame after the reset
    assert decode_frame(frame).frame_index == 0
    fresh = interactive_session()
    fresh.run_frame()
    assert np.array_equal(session.instance.state.x, fresh.instance.state.x)


def test_session_set_material():
    session = interactive_session()
    session.mailbox.put({"type": "set_material", "young_modulus": 3.3e4})
    session.run_frame()
    assert session.instance.materials[0].young_modulus == 3.3e4


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_live_socket_round_trip():
    """End-to-end: connect, receive frames, steer, observe the tool move."""
    import websockets.sync.client as ws_client

    config = sm.builtin_scenario("pull", particles=400)
    config.resolution = (32, 32, 32)
    port = free_port()
    stop_holder = {}
    ready = threading.Event()

    def run_server():
        async def amain():
            stop = asyncio.Event()
            stop_holder["stop"] = stop
            stop_holder["loop"] = asyncio.get_running_loop()
            bound = []
            ev = asyncio.Event()

            async def notify():
                await ev.wait()
                ready.set()

            task = asyncio.create_task(notify())
            await serve_async(config, "127.0.0.1", port, frame_rate=30.0,
                              ready=ev, bound=bound, stop=stop)
            task.cancel()
        asyncio.run(amain())

    thread = threading.Thread(target=run_server, daemon=True)
    thread.start()
    assert ready.wait(timeout=60.0)
    try:
        with ws_client.connect(f"ws://127.0.0.1:{port}", open_timeout=30) as ws:
            hello = json.loads(ws.recv(timeout=30))
            assert hello["type"] == "hello"
            assert "gripper" in hello["groups"]

            first = None
            while first is None:
                msg = ws.recv(timeout=30)
                if isinstance(msg, bytes):
                    first = decode_frame(msg)
            jaw0 = first.colliders[0]
            target = jaw0.translation + np.array([0.0, 0.25, 0.0])
            ws.send(json.dumps({"type": "set_tool_target",
                                "collider_group": "gripper",
                                "position": [float(v) for v in target],
                                "jaw": "closed"}))
            moved = 0.0
            for _ in range(8):
                msg = ws.recv(timeout=30)
                if not isinstance(msg, bytes):
                    continue
                frame = decode_frame(msg)
                moved = max(moved, abs(float(frame.colliders[0].translation[1])
                                       - float(jaw0.translation[1])))
            assert moved > 1e-4
    finally:
        stop_holder["loop"].call_soon_threadsafe(stop_holder["stop"].set)
        thread.join(timeout=10.0)


def test_golden_fixture_matches_current_encoder():
    """The checked-in viewer fixture must track the live encoder byte-for-byte."""
    import importlib.util
    from pathlib import Path

    gen_path = Path(__file__).parent.parent / "frontend" / "test" / "fixtures" / "generate.py"
    spec = importlib.util.spec_from_file_location("golden_gen", gen_path)
    gen = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(gen)
    payload = encode_frame(gen.build_mesh(), gen.build_colliders(),
                           frame_index=42, sim_time=0.625)
    stored = (gen_path.parent / "golden_frame.bin").read_bytes()
    assert payload == stored
