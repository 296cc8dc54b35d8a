// Panel wiring: socket, keyboard + virtual joystick, render loop.

import { CommandInput, EMIT_PERIOD_MS } from "./input";
import { Bridge } from "./net";
import { makeCtrlFrame } from "./protocol";
import { renderHeatmap, renderFrame } from "./render";
import { UiState } from "./state";

const params = new URLSearchParams(window.location.search);
const wsUrl = params.get("ws") ?? "ws://127.0.0.1:8765";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const ui = new UiState();
const bridge = new Bridge(wsUrl, ui);
const input = new CommandInput();

let heatmap: any | null = null;
bridge.onMapChanged = () => {
  if (ui.map) {
    heatmap = renderHeatmap(ui.map, (w, h) => {
      const c = document.createElement("canvas");
      c.width = w;
      c.height = h;
      return c;
    });
  }
};
bridge.connect();

// keyboard
window.addEventListener("keydown", (e) => {
  if (["KeyW", "KeyA", "KeyS", "KeyD", "KeyQ", "KeyE", "ArrowUp", "ArrowDown",
       "ArrowLeft", "ArrowRight"].includes(e.code)) {
    input.keyDown(e.code);
    e.preventDefault();
  }
});
window.addEventListener("keyup", (e) => input.keyUp(e.code));

// virtual joystick
const joy = document.getElementById("joystick") as HTMLDivElement;
const knob = document.getElementById("knob") as HTMLDivElement;
let joyActive = false;

function joyUpdate(ev: PointerEvent): void {
  const rect = joy.getBoundingClientRect();
  const cx = rect.left + rect.width / 2;
  const cy = rect.top + rect.height / 2;
  const dx = (ev.clientX - cx) / (rect.width / 2);
  const dy = (ev.clientY - cy) / (rect.height / 2);
  const r = Math.min(1, Math.hypot(dx, dy));
  const ang = Math.atan2(dy, dx);
  const x = r * Math.cos(ang);
  const y = r * Math.sin(ang);
  input.setJoystick(x, y);
  knob.style.left = `${50 + x * 35}%`;
  knob.style.top = `${50 + y * 35}%`;
}

joy.addEventListener("pointerdown", (ev) => {
  joyActive = true;
  joy.setPointerCapture(ev.pointerId);
  joyUpdate(ev);
});
joy.addEventListener("pointermove", (ev) => {
  if (joyActive) joyUpdate(ev);
});
for (const evName of ["pointerup", "pointercancel"]) {
  joy.addEventListener(evName, () => {
    joyActive = false;
    input.releaseJoystick();
    knob.style.left = "50%";
    knob.style.top = "50%";
  });
}

// control buttons
for (const action of ["pause", "resume", "reset"] as const) {
  document.getElementById(`btn-${action}`)!.addEventListener("click", () => {
    bridge.send(makeCtrlFrame(action));
  });
}
const scenarioSelect = document.getElementById("scenario") as HTMLSelectElement;
document.getElementById("btn-scenario")!.addEventListener("click", () => {
  bridge.send(makeCtrlFrame("scenario", scenarioSelect.value));
});

// 10 Hz command emission while input is active; one zero frame on release
setInterval(() => {
  const frame = input.tick(ui.limits());
  if (frame) {
    if (bridge.send(frame)) {
      ui.activeCmd = { vx: frame.vx, vy: frame.vy, yaw_rate: frame.yaw_rate };
    }
  }
}, EMIT_PERIOD_MS);

// render loop on animation ticks
function tick(): void {
  renderFrame(ctx, ui, heatmap, performance.now() / 1000);
  const status = document.getElementById("status")!;
  status.textContent = ui.connected
    ? `connected (${ui.hello?.scenario ?? "?"})` : "disconnected";
  status.className = ui.connected ? "ok" : "bad";
  if (ui.lastError) {
    document.getElementById("error")!.textContent = ui.lastError;
  }
  requestAnimationFrame(tick);
}
requestAnimationFrame(tick);
