/**
 * Scripted steer session against the real Python server: connect, grab the
 * tool, command it upward, and watch the received mesh's bounding box move
 * within five frames of the command.
 */

import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { decodeFrame, parseHello, setToolTarget, type WireFrame } from "../src/protocol.js";

const REPO_ROOT = join(__dirname, "..", "..");

// small interactive scene: a slab with a tool box embedded at its middle so a
// sticky grab-and-lift visibly moves the surface within a few frames
const SCENE = {
  name: "steer-e2e",
  domain: { extent: [1.0, 1.0, 1.0], resolution: [32, 32, 32] },
  params: {
    dt: 0.0005,
    substeps_per_frame: 25,
    gravity: [0.0, -9.8, 0.0],
    boundary_width: 3,
    boundary: "clamp",
  },
  duration: 5.0,
  materials: [{ young_modulus: 5000.0, poisson_ratio: 0.3, density: 1000.0 }],
  bodies: [
    {
      type: "box",
      center: [0.5, 0.13, 0.5],
      size: [0.4, 0.12, 0.4],
      count: 2000,
      material: 0,
      seed: 11,
    },
  ],
  colliders: [
    {
      id: 0,
      shape: { type: "box", half_extents: [0.06, 0.03, 0.06] },
      friction: 0.4,
      mode: "coulomb",
    },
  ],
  trajectory: [
    {
      time: 0.0,
      jaw: "open",
      poses: [{ t: [0.5, 0.16, 0.5], q: [0, 0, 0, 1] }],
    },
  ],
};

function bboxY(frame: WireFrame): { min: number; max: number } {
  let min = Infinity;
  let max = -Infinity;
  for (let i = 1; i < frame.vertices.length; i += 3) {
    const y = frame.vertices[i];
    if (y < min) min = y;
    if (y > max) max = y;
  }
  return { min, max };
}

describe("scripted steer session", () => {
  let server: ChildProcess;
  let url = "";
  const logs: string[] = [];

  beforeAll(async () => {
    const dir = mkdtempSync(join(tmpdir(), "softmpm-e2e-"));
    const scenePath = join(dir, "scene.json");
    writeFileSync(scenePath, JSON.stringify(SCENE));
    server = spawn(
      "python3",
      [
        "-m",
        "softmpm.cli",
        "serve",
        "--scene",
        scenePath,
        "--bind",
        "127.0.0.1:0",
        "--frame-rate",
        "30",
        "--v-max",
        "2.0",
      ],
      { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
    );
    url = await new Promise<string>((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error(`server never came up:\n${logs.join("")}`)),
        90_000,
      );
      server.stdout!.on("data", (chunk: Buffer) => {
        const text = chunk.toString();
        logs.push(text);
        const m = text.match(/on (ws:\/\/[\d.]+:\d+)/);
        if (m) {
          clearTimeout(timer);
          resolve(m[1]);
        }
      });
      server.stderr!.on("data", (chunk: Buffer) => logs.push(chunk.toString()));
      server.on("exit", (code) =>
        reject(new Error(`server exited early (${code}):\n${logs.join("")}`)),
      );
    });
  }, 120_000);

  afterAll(() => {
    server?.kill("SIGTERM");
  });

  it("moves the tool and the mesh bounding box within 5 frames", async () => {
    const ws = new WebSocket(url);
    ws.binaryType = "arraybuffer";

    const frames: WireFrame[] = [];
    let helloGroups: string[] = [];
    let commandFrame = -1;
    let commandSent = false;
    let baseline: { min: number; max: number } | null = null;
    let baselineTool = 0;

    const outcome = await new Promise<{
      movedAt: number;
      toolMoved: number;
      bboxDelta: number;
    }>((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error(`timed out; got ${frames.length} frames`)),
        90_000,
      );
      ws.on("message", (data: Buffer | ArrayBuffer, isBinary: boolean) => {
        if (!isBinary) {
          const hello = parseHello(data.toString());
          if (hello) helloGroups = hello.groups;
          return;
        }
        const frame = decodeFrame(
          data instanceof ArrayBuffer ? new Uint8Array(data) : new Uint8Array(data.buffer, data.byteOffset, data.byteLength),
        );
        frames.push(frame);
        if (!commandSent && frames.length >= 3) {
          // settled baseline, now command a sticky grab-and-lift
          baseline = bboxY(frame);
          baselineTool = frame.colliders[0].translation[1];
          commandFrame = frame.frameIndex;
          ws.send(
            setToolTarget(helloGroups[0] ?? "collider0", [0.5, 0.45, 0.5], undefined, "closed"),
          );
          commandSent = true;
          return;
        }
        if (commandSent && baseline) {
          const box = bboxY(frame);
          const bboxDelta = Math.max(
            Math.abs(box.max - baseline.max),
            Math.abs(box.min - baseline.min),
          );
          const toolMoved = Math.abs(
            frame.colliders[0].translation[1] - baselineTool,
          );
          if (bboxDelta > 0.01 && toolMoved > 1e-4) {
            clearTimeout(timer);
            resolve({ movedAt: frame.frameIndex, toolMoved, bboxDelta });
          } else if (frame.frameIndex > commandFrame + 5) {
            clearTimeout(timer);
            reject(
              new Error(
                `no motion within 5 frames (bbox delta ${bboxDelta.toFixed(4)}, ` +
                  `tool ${toolMoved.toFixed(4)})`,
              ),
            );
          }
        }
      });
      ws.on("error", reject);
    }).finally(() => ws.close());

    expect(helloGroups.length).toBeGreaterThan(0);
    expect(outcome.movedAt - commandFrame).toBeLessThanOrEqual(5);
    expect(outcome.toolMoved).toBeGreaterThan(1e-4);
    expect(outcome.bboxDelta).toBeGreaterThan(0.01);
  }, 120_000);
});
