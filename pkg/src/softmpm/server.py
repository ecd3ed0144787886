"""Interactive session host: real-time stepping + WebSocket mesh streaming.

The physics loop owns the simulation and runs sequentially in its own thread
at a fixed wall-clock frame rate. Network I/O lives on an asyncio loop:
control messages land in a single-slot mailbox (freshest wins), and encoded
frames go to per-client single-slot outboxes so a slow client can never stall
physics. Binary frames carry the surface mesh and tool poses; control runs as
JSON text messages. The first connected client steers; later clients spectate
until the controller leaves.
"""

from __future__ import annotations

import asyncio
import json
import logging
import struct
import threading
import time
from dataclasses import dataclass, field
from http import HTTPStatus
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .core import step
from .errors import SimError
from .materials import Material
from .scene import SceneConfig, build_scene, pose_at
from .scenarios import SCENARIO_NAMES, builtin_scenario
from .surfacing import SurfaceMesh, extract_surface

log = logging.getLogger(__name__)

MAGIC = b"MPMF"
HEADER = struct.Struct("<4sIfII")
COLLIDER_REC = struct.Struct("<I3f4fB")
MAX_VERTICES = 1 << 24


class FrameTooLarge(SimError):
    """Mesh exceeds the wire format's vertex budget; the frame is skipped."""


@dataclass
class ColliderPose:
    id: int
    translation: np.ndarray
    quaternion: np.ndarray  # (x, y, z, w)
    jaw_closed: bool


@dataclass
class DecodedFrame:
    frame_index: int
    sim_time: float
    vertices: np.ndarray
    normals: np.ndarray
    uvs: np.ndarray
    indices: np.ndarray
    colliders: list[ColliderPose]


def encode_frame(mesh: SurfaceMesh, colliders: list[ColliderPose],
                 frame_index: int, sim_time: float) -> bytes:
    """Serialize one frame; layout is little-endian and padding-free.

    index_count counts triangles (u32 triples), so the payload length is
    header + 32*V + 12*index_count + 4 + 33*collider_count bytes.
    """
    v = np.ascontiguousarray(mesh.vertices, dtype="<f4")
    n_verts = len(v)
    if n_verts > MAX_VERTICES:
        raise FrameTooLarge(f"{n_verts} vertices exceeds the {MAX_VERTICES} cap")
    normals = mesh.normals if mesh.normals is not None else np.zeros((n_verts, 3))
    uvs = mesh.uvs if mesh.uvs is not None else np.zeros((n_verts, 2))
    tris = np.ascontiguousarray(mesh.indices, dtype="<u4")
    parts = [
        HEADER.pack(MAGIC, frame_index, sim_time, n_verts, len(tris)),
        v.tobytes(),
        np.ascontiguousarray(normals, dtype="<f4").tobytes(),
        np.ascontiguousarray(uvs, dtype="<f4").tobytes(),
        tris.tobytes(),
        struct.pack("<I", len(colliders)),
    ]
    for c in colliders:
        parts.append(COLLIDER_REC.pack(c.id, *np.asarray(c.translation, dtype=float),
                                       *np.asarray(c.quaternion, dtype=float),
                                       1 if c.jaw_closed else 0))
    return b"".join(parts)


def decode_frame(data: bytes) -> DecodedFrame:
    """Exact inverse of encode_frame."""
    magic, frame_index, sim_time, n_verts, n_tris = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SimError("bad frame magic")
    off = HEADER.size

    def take(count, dtype, cols):
        nonlocal off
        arr = np.frombuffer(data, dtype=dtype, count=count * cols, offset=off)
        off += arr.nbytes
        return arr.reshape(count, cols)

    vertices = take(n_verts, "<f4", 3)
    normals = take(n_verts, "<f4", 3)
    uvs = take(n_verts, "<f4", 2)
    indices = take(n_tris, "<u4", 3)
    (n_col,) = struct.unpack_from("<I", data, off)
    off += 4
    colliders = []
    for _ in range(n_col):
        rec = COLLIDER_REC.unpack_from(data, off)
        off += COLLIDER_REC.size
        colliders.append(ColliderPose(id=rec[0],
                                      translation=np.array(rec[1:4]),
                                      quaternion=np.array(rec[4:8]),
                                      jaw_closed=bool(rec[8])))
    if off != len(data):
        raise SimError(f"frame has {len(data) - off} trailing bytes")
    return DecodedFrame(frame_index, sim_time, vertices, normals, uvs, indices,
                        colliders)


# ---------------------------------------------------------------------------
# control messages
# ---------------------------------------------------------------------------

def parse_control(text: str) -> dict | None:
    """Validate one client control message; None (with a warning) if malformed."""
    try:
        msg = json.loads(text)
    except json.JSONDecodeError:
        log.warning("ignoring malformed control message (bad JSON)")
        return None
    if not isinstance(msg, dict) or "type" not in msg:
        log.warning("ignoring malformed control message (no type)")
        return None
    kind = msg["type"]
    if kind in ("pause", "resume"):
        return msg
    if kind == "reset":
        scenario = msg.get("scenario")
        if scenario is not None and scenario not in SCENARIO_NAMES:
            log.warning("ignoring reset to unknown scenario %r", scenario)
            return None
        return msg
    if kind == "set_material":
        try:
            float(msg["young_modulus"])
        except (KeyError, TypeError, ValueError):
            log.warning("ignoring set_material without a numeric young_modulus")
            return None
        return msg
    if kind == "set_tool_target":
        try:
            pos = np.asarray(msg["position"], dtype=np.float64).reshape(3)
        except (KeyError, TypeError, ValueError):
            log.warning("ignoring set_tool_target without a valid position")
            return None
        msg["position"] = pos
        if "orientation" in msg:
            try:
                q = np.asarray(msg["orientation"], dtype=np.float64).reshape(4)
            except (TypeError, ValueError):
                log.warning("ignoring set_tool_target with a bad orientation")
                return None
            norm = float(np.linalg.norm(q))
            if abs(norm - 1.0) > 1.0e-3:
                log.warning("ignoring set_tool_target with non-unit quaternion "
                            "(|q| = %.4f)", norm)
                return None
            msg["orientation"] = q / norm
        if msg.get("jaw") not in (None, "open", "closed"):
            log.warning("ignoring set_tool_target with bad jaw state %r", msg.get("jaw"))
            return None
        return msg
    log.warning("ignoring unknown control type %r", kind)
    return None


class Mailbox:
    """Single-slot latest-value channel between network and physics threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = None

    def put(self, value) -> None:
        with self._lock:
            self._value = value

    def take(self):
        with self._lock:
            value, self._value = self._value, None
            return value


# ---------------------------------------------------------------------------
# physics session
# ---------------------------------------------------------------------------

@dataclass
class _GroupDrive:
    """Current and commanded pose of one steerable tool group."""

    name: str
    collider_ids: list[int]
    jaw_axis: np.ndarray
    open_gap: float
    closed_gap: float
    jaw_half: float
    position: np.ndarray
    rotation: Rotation
    gap: float
    jaw: str = "open"
    target_position: np.ndarray | None = None
    target_rotation: Rotation | None = None


class Session:
    """Owns simulation state; runs the fixed-rate loop on its own thread."""

    def __init__(self, config: SceneConfig, base_dir: Path | None = None,
                 particle_override: int | None = None, frame_rate: float = 20.0,
                 v_max: float = 0.5):
        self.config = config
        self.base_dir = base_dir
        self.particle_override = particle_override
        self.frame_rate = frame_rate
        self.v_max = v_max
        self.mailbox = Mailbox()
        self.frame_sink = None  # callable(bytes), set by the network side
        self.paused = False
        self.frame_index = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._build(config)

    # -- construction ------------------------------------------------------

    def _build(self, config: SceneConfig) -> None:
        self.config = config
        self.instance = build_scene(config, self.base_dir,
                                    particle_override=self.particle_override)
        self.frame_dt = config.params.dt * config.params.substeps_per_frame
        self.frame_index = 0
        self.groups: dict[str, _GroupDrive] = {}
        colliders = self.instance.colliders
        by_id = {c.id: c for c in colliders}
        jaw0 = "open"
        if config.trajectory:
            poses, jaw0 = pose_at(config.trajectory, 0.0)
        grouped: set[int] = set()
        for g in config.groups:
            grouped.update(g.colliders)
            a, b = (by_id[g.colliders[0]], by_id[g.colliders[1]]) \
                if len(g.colliders) == 2 else (by_id[g.colliders[0]],) * 2
            center = 0.5 * (a.translation + b.translation)
            gap = float(np.linalg.norm(b.translation - a.translation))
            jaw_half = self._jaw_half(a, g.jaw_axis)
            self.groups[g.name] = _GroupDrive(
                name=g.name, collider_ids=list(g.colliders),
                jaw_axis=np.asarray(g.jaw_axis, dtype=np.float64),
                open_gap=g.open_gap, closed_gap=g.closed_gap, jaw_half=jaw_half,
                position=center, rotation=Rotation.from_matrix(a.rotation),
                gap=max(0.0, gap - 2.0 * jaw_half), jaw=jaw0)
        for c in colliders:
            if c.id not in grouped:
                name = f"collider{c.id}"
                self.groups[name] = _GroupDrive(
                    name=name, collider_ids=[c.id], jaw_axis=np.zeros(3),
                    open_gap=0.0, closed_gap=0.0, jaw_half=0.0,
                    position=c.translation.copy(),
                    rotation=Rotation.from_matrix(c.rotation), gap=0.0)
        self._base_mode = {c.id: spec.mode for c, spec in
                           zip(colliders, config.colliders)}

    @staticmethod
    def _jaw_half(collider, axis) -> float:
        from .collision import Box
        if isinstance(collider.shape, Box):
            return float(np.abs(np.asarray(axis, dtype=float))
                         @ collider.shape.half_extents)
        return 0.0

    # -- control -----------------------------------------------------------

    def _handle(self, msg: dict) -> None:
        kind = msg["type"]
        if kind == "pause":
            self.paused = True
        elif kind == "resume":
            self.paused = False
        elif kind == "reset":
            name = msg.get("scenario")
            config = builtin_scenario(name) if name else self.config
            self._build(config)
            self.paused = False
        elif kind == "set_material":
            try:
                old = self.instance.materials[0]
                self.instance.materials[0] = Material(
                    float(msg["young_modulus"]),
                    float(msg.get("poisson_ratio", old.poisson_ratio)),
                    old.density)
            except SimError as exc:
                log.warning("ignoring set_material: %s", exc)
        elif kind == "set_tool_target":
            group = self.groups.get(msg.get("collider_group", ""))
            if group is None:
                log.warning("ignoring set_tool_target for unknown group %r",
                            msg.get("collider_group"))
                return
            group.target_position = msg["position"]
            if "orientation" in msg:
                group.target_rotation = Rotation.from_quat(msg["orientation"])
            if msg.get("jaw"):
                group.jaw = msg["jaw"]

    # -- per-frame kinematics ----------------------------------------------

    def _plan_motion(self):
        """Advance each group toward its target, clamped to v_max per frame."""
        plans = []
        for g in self.groups.values():
            start_pos = g.position.copy()
            start_rot = g.rotation
            start_gap = g.gap
            if g.target_position is not None:
                delta = g.target_position - g.position
                dist = float(np.linalg.norm(delta))
                max_step = self.v_max * self.frame_dt
                if dist > max_step:
                    delta = delta * (max_step / dist)
                g.position = g.position + delta
            if g.target_rotation is not None:
                g.rotation = g.target_rotation
            gap_target = g.closed_gap if g.jaw == "closed" else g.open_gap
            max_gap_step = max(4.0 * (g.open_gap - g.closed_gap), 1.0e-6) \
                * self.frame_dt
            g.gap = float(np.clip(gap_target, g.gap - max_gap_step,
                                  g.gap + max_gap_step))
            plans.append((g, start_pos, start_rot, start_gap))
        return plans

    def _pose_fn_for(self, plans, t0: float):
        """Per-substep interpolated poses along this frame's planned motion."""
        frame_dt = self.frame_dt
        by_id = {c.id: c for c in self.instance.colliders}

        def pose_fn(colliders, t):
            s = min(max((t - t0) / frame_dt, 0.0), 1.0)
            for g, p0, r0, gap0 in plans:
                pos = p0 + (g.position - p0) * s
                lin_vel = (g.position - p0) / frame_dt
                rel = (r0.inv() * g.rotation).as_rotvec()
                rot = r0 * Rotation.from_rotvec(rel * s)
                ang_vel = r0.apply(rel) / frame_dt
                gap = gap0 + (g.gap - gap0) * s
                gap_rate = (g.gap - gap0) / frame_dt
                rmat = rot.as_matrix()
                if len(g.collider_ids) == 2:
                    axis_w = rmat @ g.jaw_axis
                    for sign, cid in zip((-1.0, 1.0), g.collider_ids):
                        off = sign * (0.5 * gap + g.jaw_half)
                        col = by_id[cid]
                        col.set_pose(rmat, pos + axis_w * off,
                                     lin_vel + axis_w * (sign * 0.5 * gap_rate)
                                     + np.cross(ang_vel, axis_w * off),
                                     ang_vel)
                        col.mode = "sticky" if g.jaw == "closed" \
                            else self._base_mode[cid]
                else:
                    col = by_id[g.collider_ids[0]]
                    col.set_pose(rmat, pos, lin_vel, ang_vel)
                    col.mode = "sticky" if g.jaw == "closed" \
                        else self._base_mode[col.id]

        return pose_fn

    # -- frame payload -------------------------------------------------------

    def collider_poses(self) -> list[ColliderPose]:
        out = []
        closed_ids = {cid for g in self.groups.values() if g.jaw == "closed"
                      for cid in g.collider_ids}
        for c in self.instance.colliders:
            out.append(ColliderPose(
                id=c.id, translation=c.translation.copy(),
                quaternion=Rotation.from_matrix(c.rotation).as_quat(),
                jaw_closed=c.id in closed_ids))
        return out

    def run_frame(self) -> bytes | None:
        """One fixed-rate iteration: control, physics, surfacing, encoding."""
        msg = self.mailbox.take()
        if msg is not None:
            self._handle(msg)
        if self.paused:
            return None
        plans = self._plan_motion()
        pose_fn = self._pose_fn_for(plans, self.instance.state.time) \
            if self.instance.colliders else None
        step(self.instance.state, self.instance.materials, self.config.params,
             self.instance.colliders, pose_fn)
        if self.instance.state.has_nan():
            log.error("NaN state at frame %d; resetting scene", self.frame_index)
            self._build(self.config)
            return None
        mesh = extract_surface(self.instance.state, self.config.surface_iso)
        try:
            payload = encode_frame(mesh, self.collider_poses(),
                                   self.frame_index, self.instance.state.time)
        except FrameTooLarge as exc:
            log.warning("skipping frame %d: %s", self.frame_index, exc)
            self.frame_index += 1
            return None
        self.frame_index += 1
        return payload

    # -- thread loop ---------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, name="softmpm-physics",
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def _loop(self) -> None:
        period = 1.0 / self.frame_rate
        next_t = time.monotonic()
        while not self._stop.is_set():
            payload = self.run_frame()
            if payload is not None and self.frame_sink is not None:
                self.frame_sink(payload)
            next_t += period
            now = time.monotonic()
            if next_t < now - 2.0 * period:
                next_t = now  # fell behind; don't try to catch up
            else:
                time.sleep(max(0.0, next_t - now))

    def hello(self) -> str:
        from .collision import Box
        collider_meta = []
        for c in self.instance.colliders:
            if isinstance(c.shape, Box):
                half = list(c.shape.half_extents)
            else:
                half = [0.5 * c.shape.grid.extent] * 3
            collider_meta.append({"id": c.id, "half_extents": half})
        return json.dumps({
            "type": "hello",
            "scene": self.config.name,
            "groups": sorted(self.groups),
            "domain": list(self.config.domain_extent),
            "frame_rate": self.frame_rate,
            "v_max": self.v_max,
            "colliders": collider_meta,
        })


# ---------------------------------------------------------------------------
# network front end
# ---------------------------------------------------------------------------

class _ClientSlot:
    """Latest-frame outbox; overwrites under pressure, never queues."""

    def __init__(self):
        self.event = asyncio.Event()
        self.payload: bytes | None = None

    def offer(self, payload: bytes) -> None:
        self.payload = payload
        self.event.set()


_MIME = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
         ".map": "application/json", ".png": "image/png"}


async def serve_async(config: SceneConfig, host: str, port: int,
                      base_dir: Path | None = None,
                      static_dir: Path | None = None,
                      particle_override: int | None = None,
                      frame_rate: float = 20.0, v_max: float = 0.5,
                      ready: asyncio.Event | None = None,
                      bound: list | None = None,
                      stop: asyncio.Event | None = None) -> None:
    """Run the streaming session until cancelled (or ``stop`` is set)."""
    from websockets.asyncio.server import serve as ws_serve

    session = Session(config, base_dir, particle_override, frame_rate, v_max)
    loop = asyncio.get_running_loop()
    clients: dict = {}
    controllers: list = []  # connection order; first is the controller

    def broadcast(payload: bytes) -> None:
        for slot in clients.values():
            slot.offer(payload)

    session.frame_sink = lambda payload: loop.call_soon_threadsafe(broadcast, payload)

    async def handler(ws):
        slot = _ClientSlot()
        clients[ws] = slot
        controllers.append(ws)
        await ws.send(session.hello())

        async def sender():
            while True:
                await slot.event.wait()
                slot.event.clear()
                payload = slot.payload
                if payload is not None:
                    await ws.send(payload)

        send_task = asyncio.create_task(sender())
        try:
            async for text in ws:
                if isinstance(text, bytes):
                    continue
                msg = parse_control(text)
                if msg is None:
                    continue
                if controllers and controllers[0] is not ws:
                    log.info("ignoring control from spectator")
                    continue
                session.mailbox.put(msg)
        finally:
            send_task.cancel()
            clients.pop(ws, None)
            if ws in controllers:
                controllers.remove(ws)

    def process_request(connection, request):
        from websockets.http11 import Response
        if "Upgrade" in request.headers:
            return None
        path = request.path.split("?")[0]
        if static_dir is not None:
            name = "index.html" if path == "/" else path.lstrip("/")
            target = (static_dir / name).resolve()
            if target.is_file() and str(target).startswith(str(static_dir.resolve())):
                body = target.read_bytes()
                mime = _MIME.get(target.suffix, "application/octet-stream")
                return Response(HTTPStatus.OK, "OK",
                                _static_headers(mime, len(body)), body)
        return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")

    session.start()
    try:
        async with ws_serve(handler, host, port,
                            process_request=process_request) as server:
            actual = server.sockets[0].getsockname()
            if bound is not None:
                bound.append(actual)
            log.info("listening on ws://%s:%d (%s)", actual[0], actual[1],
                     config.name)
            print(f"serving scenario {config.name!r} on ws://{actual[0]}:{actual[1]}"
                  + (f" (viewer at http://{actual[0]}:{actual[1]}/)"
                     if static_dir else ""), flush=True)
            if ready is not None:
                ready.set()
            if stop is None:
                await asyncio.Future()
            else:
                await stop.wait()
    finally:
        session.stop()


def _static_headers(mime: str, length: int):
    from websockets.datastructures import Headers
    return Headers([("Content-Type", mime), ("Content-Length", str(length)),
                    ("Connection", "close")])


def serve(config: SceneConfig, host: str, port: int,
          base_dir: Path | None = None, static_dir: Path | None = None,
          particle_override: int | None = None, frame_rate: float = 20.0,
          v_max: float = 0.5) -> None:
    try:
        asyncio.run(serve_async(config, host, port, base_dir, static_dir,
                                particle_override, frame_rate, v_max))
    except KeyboardInterrupt:
        pass
