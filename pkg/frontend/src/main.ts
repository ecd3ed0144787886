import { ViewerConnection } from "./connection.js";
import { OrbitCamera, SteeringController } from "./controls.js";
import { Hud } from "./hud.js";
import { Viewer } from "./viewer.js";

const params = new URLSearchParams(location.search);
const wsUrl =
  params.get("ws") ??
  `ws://${location.hostname || "127.0.0.1"}:${location.port || "8765"}/`;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const viewer = new Viewer(canvas);
const hud = new Hud(document.body);
let orbit = new OrbitCamera(canvas.clientWidth / canvas.clientHeight, [1, 1, 1]);

const connection = new ViewerConnection(wsUrl, {
  onHello(hello) {
    viewer.setDomain(hello.domain);
    viewer.setColliders(hello.colliders);
    orbit = new OrbitCamera(canvas.clientWidth / canvas.clientHeight, hello.domain);
    steer.group = hello.groups[0] ?? "";
    steer.setFrameRate(hello.frame_rate);
    hud.group = steer.group;
  },
  onFrame(frame) {
    viewer.applyFrame(frame);
    hud.frameArrived(frame.simTime, frame.vertices.length / 3);
    if (frame.colliders.length > 0) {
      steer.adoptPose(frame.colliders[0].translation);
    }
  },
  onStatus(status) {
    hud.status = status;
  },
});

const steer = new SteeringController(canvas, orbit, {
  send: (text) => void connection.send(text),
  onTarget: (position) => viewer.setGhostTarget(position),
  onJaw: (jaw) => {
    hud.jaw = jaw;
  },
});

connection.start();

function tick(): void {
  steer.flush();
  viewer.render(orbit.camera);
  hud.render();
  requestAnimationFrame(tick);
}
tick();
