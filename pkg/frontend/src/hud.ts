/** Status overlay: FPS, mesh size, sim time, connection, jaw state. */

import type { ConnectionStatus } from "./connection.js";

export class Hud {
  private readonly el: HTMLElement;
  private frames = 0;
  private fps = 0;
  private lastTick = performance.now();
  status: ConnectionStatus = "connecting";
  simTime = 0;
  vertexCount = 0;
  jaw = "open";
  group = "";

  constructor(parent: HTMLElement) {
    this.el = document.createElement("div");
    this.el.style.cssText =
      "position:absolute;top:10px;left:10px;color:#cfd8ea;font:12px monospace;" +
      "background:rgba(10,12,18,.65);padding:8px 10px;border-radius:6px;" +
      "pointer-events:none;white-space:pre;line-height:1.5";
    parent.appendChild(this.el);
  }

  frameArrived(simTime: number, vertexCount: number): void {
    this.frames += 1;
    this.simTime = simTime;
    this.vertexCount = vertexCount;
    const now = performance.now();
    if (now - this.lastTick >= 1000) {
      this.fps = (this.frames * 1000) / (now - this.lastTick);
      this.frames = 0;
      this.lastTick = now;
    }
  }

  render(): void {
    this.el.textContent =
      `${this.status}  ${this.fps.toFixed(1)} fps\n` +
      `sim t = ${this.simTime.toFixed(3)} s\n` +
      `vertices: ${this.vertexCount}\n` +
      `tool: ${this.group || "-"}  jaw: ${this.jaw}\n` +
      `drag: move | shift-drag: height | Q/E: rotate | space: jaw`;
  }
}
