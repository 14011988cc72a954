// Entry point: connect to the engine, render telemetry, publish user input.

import { defaultCamera } from "./camera.js";
import { SphereControl } from "./drag.js";
import { defaultWsUrl, WsClient } from "./net.js";
import { commandMsg, isPlaybackEvent, sphereMsg, TOPICS } from "./protocol.js";
import { drawFrame, hitTestSphere } from "./render.js";
import { applyMessage, buttonStates, initialState, pushToast, setConnection } from "./state.js";
import { buildUi, updateChrome } from "./ui.js";

const root = document.getElementById("app")!;
const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const cam = defaultCamera(canvas.width, canvas.height);

let state = initialState();

const client = new WsClient(
  defaultWsUrl(),
  [TOPICS.telemetry, TOPICS.scene, TOPICS.playback],
  {
    onMessage(msg) {
      state = applyMessage(state, msg, Date.now());
      if (isPlaybackEvent(msg) && msg.event === "playback_finished") {
        const stacked = msg.stacked ?? "?";
        state = pushToast(state, `playback finished: ${stacked} cube(s) stacked`,
                          "info", Date.now());
      }
      if (!sphere.dragging && msg.type === "telemetry" && "sphere_position" in msg) {
        const p = (msg as { sphere_position?: [number, number, number] }).sphere_position;
        if (p) sphere.sync(p);
      }
    },
    onStatus(open) {
      state = setConnection(state, open ? "open" : "closed", Date.now());
    },
  });

const sphere = new SphereControl((pose) => client.send(sphereMsg(pose)),
                                 [0.42, 0.0, 0.3]);

const ui = buildUi(root, (kind) => {
  client.send(commandMsg(kind));
});

let lastPointer: [number, number] | null = null;
canvas.addEventListener("pointerdown", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const px = ev.clientX - rect.left, py = ev.clientY - rect.top;
  if (hitTestSphere(cam, sphere, px, py)) {
    canvas.setPointerCapture(ev.pointerId);
    sphere.beginDrag(ev.shiftKey);
    lastPointer = [px, py];
  }
});
canvas.addEventListener("pointermove", (ev) => {
  if (!sphere.dragging || lastPointer === null) return;
  const rect = canvas.getBoundingClientRect();
  const px = ev.clientX - rect.left, py = ev.clientY - rect.top;
  sphere.moveBy(cam, px - lastPointer[0], py - lastPointer[1], ev.shiftKey);
  lastPointer = [px, py];
});
const stopDrag = () => {
  if (sphere.dragging) sphere.endDrag();
  lastPointer = null;
};
canvas.addEventListener("pointerup", stopDrag);
canvas.addEventListener("pointercancel", stopDrag);
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  sphere.rotate(ev.deltaY, ev.shiftKey);
}, { passive: false });

function frame(): void {
  const now = Date.now();
  const telemetry = state.telemetry;
  drawFrame(ctx, cam, telemetry, state.scene, sphere);
  updateChrome(ui, telemetry?.mode, telemetry?.gripper, telemetry?.recorded_states,
               state.connection, buttonStates(state),
               state.toasts.filter((t) => t.until > now));
  requestAnimationFrame(frame);
}

client.connect();
requestAnimationFrame(frame);
