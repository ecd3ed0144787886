/**
 * Wire protocol: binary frame decoding and JSON control messages.
 *
 * Frame layout (little-endian, no padding):
 *   "MPMF" | u32 frameIndex | f32 simTime | u32 vertexCount | u32 indexCount
 *   f32x3 * V vertices | f32x3 * V normals | f32x2 * V uvs
 *   u32x3 * indexCount triangles
 *   u32 colliderCount | per collider: u32 id, f32x3 T, f32x4 quat(xyzw), u8 jaw
 */

export interface ColliderPose {
  id: number;
  translation: [number, number, number];
  quaternion: [number, number, number, number];
  jawClosed: boolean;
}

export interface WireFrame {
  frameIndex: number;
  simTime: number;
  vertices: Float32Array;
  normals: Float32Array;
  uvs: Float32Array;
  indices: Uint32Array;
  colliders: ColliderPose[];
}

export interface ColliderMeta {
  id: number;
  half_extents: [number, number, number];
}

export interface HelloMsg {
  type: "hello";
  scene: string;
  groups: string[];
  domain: [number, number, number];
  frame_rate: number;
  v_max: number;
  colliders: ColliderMeta[];
}

const MAGIC = 0x4d504d46; // "MPMF" read big-endian as bytes M,P,M,F

export function decodeFrame(data: ArrayBuffer | Uint8Array): WireFrame {
  const bytes =
    data instanceof Uint8Array
      ? data
      : new Uint8Array(data);
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (bytes.byteLength < 24) {
    throw new Error("frame too short");
  }
  const magic =
    (bytes[0] << 24) | (bytes[1] << 16) | (bytes[2] << 8) | bytes[3];
  if (magic !== MAGIC) {
    throw new Error("bad frame magic");
  }
  const frameIndex = view.getUint32(4, true);
  const simTime = view.getFloat32(8, true);
  const vertexCount = view.getUint32(12, true);
  const indexCount = view.getUint32(16, true);
  let off = 20;

  const takeF32 = (count: number): Float32Array => {
    const out = new Float32Array(
      bytes.buffer.slice(bytes.byteOffset + off, bytes.byteOffset + off + count * 4),
    );
    off += count * 4;
    return out;
  };

  const vertices = takeF32(vertexCount * 3);
  const normals = takeF32(vertexCount * 3);
  const uvs = takeF32(vertexCount * 2);
  const indices = new Uint32Array(
    bytes.buffer.slice(bytes.byteOffset + off, bytes.byteOffset + off + indexCount * 12),
  );
  off += indexCount * 12;

  const colliderCount = view.getUint32(off, true);
  off += 4;
  const colliders: ColliderPose[] = [];
  for (let i = 0; i < colliderCount; i++) {
    const id = view.getUint32(off, true);
    const translation: [number, number, number] = [
      view.getFloat32(off + 4, true),
      view.getFloat32(off + 8, true),
      view.getFloat32(off + 12, true),
    ];
    const quaternion: [number, number, number, number] = [
      view.getFloat32(off + 16, true),
      view.getFloat32(off + 20, true),
      view.getFloat32(off + 24, true),
      view.getFloat32(off + 28, true),
    ];
    const jawClosed = view.getUint8(off + 32) !== 0;
    colliders.push({ id, translation, quaternion, jawClosed });
    off += 33;
  }
  if (off !== bytes.byteLength) {
    throw new Error(`frame has ${bytes.byteLength - off} trailing bytes`);
  }
  return { frameIndex, simTime, vertices, normals, uvs, indices, colliders };
}

export function parseHello(text: string): HelloMsg | null {
  try {
    const msg = JSON.parse(text);
    if (msg && msg.type === "hello" && Array.isArray(msg.groups)) {
      return msg as HelloMsg;
    }
  } catch {
    /* not a hello */
  }
  return null;
}

// ---------------------------------------------------------------------------
// control messages (client -> server)
// ---------------------------------------------------------------------------

export type JawState = "open" | "closed";

export function setToolTarget(
  group: string,
  position: [number, number, number],
  orientation?: [number, number, number, number],
  jaw?: JawState,
): string {
  const msg: Record<string, unknown> = {
    type: "set_tool_target",
    collider_group: group,
    position,
  };
  if (orientation) {
    const n = Math.hypot(...orientation);
    msg.orientation = orientation.map((v) => v / n);
  }
  if (jaw) {
    msg.jaw = jaw;
  }
  return JSON.stringify(msg);
}

export const pauseMsg = (): string => JSON.stringify({ type: "pause" });
export const resumeMsg = (): string => JSON.stringify({ type: "resume" });

export function resetMsg(scenario?: string): string {
  return JSON.stringify(scenario ? { type: "reset", scenario } : { type: "reset" });
}

export function setMaterialMsg(youngModulus: number, poissonRatio?: number): string {
  const msg: Record<string, unknown> = {
    type: "set_material",
    young_modulus: youngModulus,
  };
  if (poissonRatio !== undefined) {
    msg.poisson_ratio = poissonRatio;
  }
  return JSON.stringify(msg);
}
