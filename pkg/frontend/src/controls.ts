/**
 * Input handling: orbit camera (right-drag / wheel) and tool steering
 * (left-drag on the ground plane, shift-drag for height, Q/E to rotate,
 * space toggles the jaw). Steering messages are rate-limited to the server
 * frame rate.
 */

import * as THREE from "three";
import { setToolTarget, type JawState } from "./protocol.js";

export class OrbitCamera {
  readonly camera: THREE.PerspectiveCamera;
  private theta = Math.PI / 4;
  private phi = Math.PI / 3;
  private radius: number;
  private readonly target = new THREE.Vector3();

  constructor(aspect: number, domain: [number, number, number]) {
    this.camera = new THREE.PerspectiveCamera(50, aspect, 0.01, 100);
    this.target.set(domain[0] / 2, domain[1] / 4, domain[2] / 2);
    this.radius = Math.max(...domain) * 1.4;
    this.update();
  }

  rotate(dTheta: number, dPhi: number): void {
    this.theta += dTheta;
    this.phi = Math.min(Math.PI - 0.05, Math.max(0.05, this.phi + dPhi));
    this.update();
  }

  zoom(factor: number): void {
    this.radius = Math.min(20, Math.max(0.1, this.radius * factor));
    this.update();
  }

  private update(): void {
    const sp = Math.sin(this.phi);
    this.camera.position.set(
      this.target.x + this.radius * sp * Math.sin(this.theta),
      this.target.y + this.radius * Math.cos(this.phi),
      this.target.z + this.radius * sp * Math.cos(this.theta),
    );
    this.camera.lookAt(this.target);
  }
}

export interface SteerEvents {
  send: (text: string) => void;
  onTarget: (position: [number, number, number] | null) => void;
  onJaw: (jaw: JawState) => void;
}

export class SteeringController {
  jaw: JawState = "open";
  group = "";
  private targetPos: THREE.Vector3 | null = null;
  private yaw = 0;
  private dirty = false;
  private lastSent = 0;
  private sendPeriodMs = 50;
  private dragging = false;
  private heightDrag = false;
  private lastPointer = { x: 0, y: 0 };
  private readonly raycaster = new THREE.Raycaster();

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly orbit: OrbitCamera,
    private readonly events: SteerEvents,
  ) {
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", () => {
      this.dragging = false;
    });
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.orbit.zoom(e.deltaY > 0 ? 1.1 : 0.9);
    });
    window.addEventListener("keydown", (e) => this.keyDown(e));
    canvas.addEventListener("contextmenu", (e) => e.preventDefault());
  }

  setFrameRate(fps: number): void {
    this.sendPeriodMs = 1000 / Math.max(1, fps);
  }

  /** Seed the target from the tool's streamed pose so steering is relative. */
  adoptPose(position: [number, number, number]): void {
    if (this.targetPos === null) {
      this.targetPos = new THREE.Vector3(...position);
    }
  }

  private pointerDown(e: PointerEvent): void {
    this.lastPointer = { x: e.clientX, y: e.clientY };
    if (e.button === 0 && this.group) {
      this.dragging = true;
      this.heightDrag = e.shiftKey;
      if (!this.heightDrag) {
        this.dragToGround(e);
      }
    } else if (e.button === 2) {
      this.dragging = false;
      this.canvas.setPointerCapture(e.pointerId);
    }
  }

  private pointerMove(e: PointerEvent): void {
    const dx = e.clientX - this.lastPointer.x;
    const dy = e.clientY - this.lastPointer.y;
    this.lastPointer = { x: e.clientX, y: e.clientY };
    if (e.buttons & 2) {
      this.orbit.rotate(-dx * 0.005, -dy * 0.005);
      return;
    }
    if (!this.dragging || !(e.buttons & 1) || this.targetPos === null) {
      return;
    }
    if (this.heightDrag) {
      this.targetPos.y = Math.max(0, this.targetPos.y - dy * 0.002);
      this.markDirty();
    } else {
      this.dragToGround(e);
    }
  }

  private dragToGround(e: PointerEvent): void {
    if (this.targetPos === null) {
      return;
    }
    const rect = this.canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((e.clientX - rect.left) / rect.width) * 2 - 1,
      -((e.clientY - rect.top) / rect.height) * 2 + 1,
    );
    this.raycaster.setFromCamera(ndc, this.orbit.camera);
    // intersect the horizontal plane at the tool's current height
    const plane = new THREE.Plane(new THREE.Vector3(0, 1, 0), -this.targetPos.y);
    const hit = new THREE.Vector3();
    if (this.raycaster.ray.intersectPlane(plane, hit)) {
      this.targetPos.x = hit.x;
      this.targetPos.z = hit.z;
      this.markDirty();
    }
  }

  private keyDown(e: KeyboardEvent): void {
    if (e.code === "Space") {
      e.preventDefault();
      this.jaw = this.jaw === "open" ? "closed" : "open";
      this.events.onJaw(this.jaw);
      this.markDirty();
    } else if (e.key === "q" || e.key === "Q") {
      this.yaw += 0.1;
      this.markDirty();
    } else if (e.key === "e" || e.key === "E") {
      this.yaw -= 0.1;
      this.markDirty();
    }
  }

  private markDirty(): void {
    this.dirty = true;
    if (this.targetPos) {
      this.events.onTarget([this.targetPos.x, this.targetPos.y, this.targetPos.z]);
    }
    this.flush();
  }

  /** Called per animation frame; sends at most one message per server frame. */
  flush(): void {
    if (!this.dirty || !this.group || this.targetPos === null) {
      return;
    }
    const now = performance.now();
    if (now - this.lastSent < this.sendPeriodMs) {
      return;
    }
    const half = this.yaw / 2;
    const orientation: [number, number, number, number] = [
      0,
      Math.sin(half),
      0,
      Math.cos(half),
    ];
    this.events.send(
      setToolTarget(
        this.group,
        [this.targetPos.x, this.targetPos.y, this.targetPos.z],
        orientation,
        this.jaw,
      ),
    );
    this.lastSent = now;
    this.dirty = false;
  }
}
