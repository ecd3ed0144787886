/** three.js scene: streamed tissue mesh, tool boxes, ghost target marker. */

import * as THREE from "three";
import type { ColliderMeta, WireFrame } from "./protocol.js";

function checkerTexture(): THREE.Texture {
  const size = 256;
  const tile = 32;
  const canvas = document.createElement("canvas");
  canvas.width = size;
  canvas.height = size;
  const ctx = canvas.getContext("2d")!;
  for (let y = 0; y < size / tile; y++) {
    for (let x = 0; x < size / tile; x++) {
      ctx.fillStyle = (x + y) % 2 ? "#b5506a" : "#d98a9e";
      ctx.fillRect(x * tile, y * tile, tile, tile);
    }
  }
  const tex = new THREE.CanvasTexture(canvas);
  tex.colorSpace = THREE.SRGBColorSpace;
  return tex;
}

export class Viewer {
  readonly scene = new THREE.Scene();
  readonly renderer: THREE.WebGLRenderer;
  private tissue: THREE.Mesh;
  private readonly tissueMaterial: THREE.MeshStandardMaterial;
  private readonly colliderMeshes = new Map<number, THREE.Mesh>();
  private readonly ghost: THREE.Mesh;
  private domain: [number, number, number] = [1, 1, 1];

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.scene.background = new THREE.Color(0x1a1d24);

    const key = new THREE.DirectionalLight(0xffffff, 2.2);
    key.position.set(1.5, 3, 2);
    this.scene.add(key);
    const fill = new THREE.DirectionalLight(0x8899bb, 0.8);
    fill.position.set(-2, 1.5, -1);
    this.scene.add(fill);
    this.scene.add(new THREE.AmbientLight(0x404040, 1.2));

    this.tissueMaterial = new THREE.MeshStandardMaterial({
      map: checkerTexture(),
      roughness: 0.65,
      metalness: 0.02,
      side: THREE.DoubleSide,
    });
    this.tissue = new THREE.Mesh(new THREE.BufferGeometry(), this.tissueMaterial);
    this.scene.add(this.tissue);

    this.ghost = new THREE.Mesh(
      new THREE.BoxGeometry(1, 1, 1),
      new THREE.MeshBasicMaterial({ color: 0x44ddff, wireframe: true }),
    );
    this.ghost.visible = false;
    this.scene.add(this.ghost);
  }

  setDomain(domain: [number, number, number]): void {
    this.domain = domain;
    const [ex, , ez] = domain;
    const floor = new THREE.Mesh(
      new THREE.PlaneGeometry(ex, ez),
      new THREE.MeshStandardMaterial({ color: 0x2c3140, roughness: 0.9 }),
    );
    floor.rotation.x = -Math.PI / 2;
    floor.position.set(ex / 2, 0, ez / 2);
    this.scene.add(floor);
    const grid = new THREE.GridHelper(Math.max(ex, ez), 16, 0x4a5268, 0x3a4054);
    grid.position.set(ex / 2, 0.001, ez / 2);
    this.scene.add(grid);
  }

  get domainExtent(): [number, number, number] {
    return this.domain;
  }

  setColliders(meta: ColliderMeta[]): void {
    for (const mesh of this.colliderMeshes.values()) {
      this.scene.remove(mesh);
    }
    this.colliderMeshes.clear();
    for (const c of meta) {
      const [hx, hy, hz] = c.half_extents;
      const mesh = new THREE.Mesh(
        new THREE.BoxGeometry(2 * hx, 2 * hy, 2 * hz),
        new THREE.MeshStandardMaterial({ color: 0x8fa3c8, roughness: 0.3, metalness: 0.7 }),
      );
      this.colliderMeshes.set(c.id, mesh);
      this.scene.add(mesh);
    }
    const ghostSize = meta.length ? meta[0].half_extents : [0.02, 0.02, 0.02];
    this.ghost.scale.set(ghostSize[0] * 3, ghostSize[1] * 3, ghostSize[2] * 3);
  }

  /** Ghost marker shows the commanded pose so command latency is visible. */
  setGhostTarget(position: [number, number, number] | null): void {
    if (position === null) {
      this.ghost.visible = false;
      return;
    }
    this.ghost.visible = true;
    this.ghost.position.set(position[0], position[1], position[2]);
  }

  applyFrame(frame: WireFrame): void {
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(frame.vertices, 3));
    geometry.setAttribute("normal", new THREE.BufferAttribute(frame.normals, 3));
    geometry.setAttribute("uv", new THREE.BufferAttribute(frame.uvs, 2));
    geometry.setIndex(new THREE.BufferAttribute(frame.indices, 1));
    this.tissue.geometry.dispose();
    this.tissue.geometry = geometry;

    for (const pose of frame.colliders) {
      const mesh = this.colliderMeshes.get(pose.id);
      if (!mesh) {
        continue;
      }
      mesh.position.set(...pose.translation);
      mesh.quaternion.set(...pose.quaternion);
      (mesh.material as THREE.MeshStandardMaterial).color.setHex(
        pose.jawClosed ? 0xe8b34a : 0x8fa3c8,
      );
    }
  }

  render(camera: THREE.PerspectiveCamera): void {
    const canvas = this.renderer.domElement;
    const w = canvas.clientWidth;
    const h = canvas.clientHeight;
    if (canvas.width !== w * window.devicePixelRatio || canvas.height !== h * window.devicePixelRatio) {
      this.renderer.setSize(w, h, false);
      camera.aspect = w / h;
      camera.updateProjectionMatrix();
    }
    this.renderer.render(this.scene, camera);
  }
}
