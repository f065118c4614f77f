// Entry point: canvas wiring, pointer capture, fixed-interval target streaming,
// and keyboard shortcuts (R = reset, Space = toggle record, digits = task select,
// V = velocity overlay).

import { TeleopSocket } from "./client.js";
import { renderDisconnected, renderState, TableGeometry } from "./render.js";
import { acceptBroadcast, initialUiState, TargetStream } from "./state.js";
import { makeViewTransform, pointerToTable, ViewTransform } from "./transform.js";

const canvas = document.getElementById("table") as HTMLCanvasElement;
const ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
const statusEl = document.getElementById("status") as HTMLElement;

const ui = initialUiState();
let geometry: TableGeometry = { halfWidth: 0.3048, halfLength: 0.8382, paddleRegionYMax: -0.4382 };
let view: ViewTransform = makeViewTransform(canvas.width, canvas.height,
                                            geometry.halfWidth, geometry.halfLength);
let stream = new TargetStream(50);
let tasks: string[] = [];

function refit(): void {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  view = makeViewTransform(canvas.width, canvas.height,
                           geometry.halfWidth, geometry.halfLength);
}

const socket = new TeleopSocket({
  onHello(msg) {
    ui.role = msg.role;
    ui.selectedTask = msg.task_id;
    tasks = msg.tasks;
    geometry = {
      halfWidth: msg.bounds.half_width,
      halfLength: msg.bounds.half_length,
      paddleRegionYMax: msg.bounds.paddle_region_y_max,
    };
    stream = new TargetStream(msg.control_dt * 1000);
    refit();
    statusEl.textContent = `${msg.role} — ${msg.task_id}`;
  },
  onState(msg) {
    acceptBroadcast(ui, msg);
  },
  onAck(msg) {
    if (!msg.ok) statusEl.textContent = `rejected: ${msg.detail}`;
  },
  onStatus(status) {
    ui.status = status;
    if (status === "disconnected") statusEl.textContent = "disconnected";
  },
});

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/teleop`;
socket.connect(wsUrl);

canvas.addEventListener("pointermove", (event: PointerEvent) => {
  const rect = canvas.getBoundingClientRect();
  const px = (event.clientX - rect.left) * (canvas.width / rect.width);
  const py = (event.clientY - rect.top) * (canvas.height / rect.height);
  const [x, y] = pointerToTable(px, py, view);
  stream.setSample(x, y);
});

// one target per control period, latest pointer sample wins, none while disconnected
setInterval(() => {
  const due = stream.takeDue(performance.now());
  if (due && socket.connected) socket.sendTarget(due[0], due[1]);
}, 10);

window.addEventListener("keydown", (event: KeyboardEvent) => {
  if (event.key === "r" || event.key === "R") socket.sendControl("reset");
  else if (event.key === " ") {
    event.preventDefault();
    const recording = ui.latest?.recording ?? false;
    socket.sendControl(recording ? "stop_record" : "start_record");
    if (!recording) socket.sendControl("reset");
  } else if (event.key === "v" || event.key === "V") {
    ui.showVelocities = !ui.showVelocities;
  } else if (/^[0-9]$/.test(event.key)) {
    const idx = (parseInt(event.key, 10) + 9) % 10; // 1..9 -> 0..8, 0 -> 9
    if (idx < tasks.length) socket.sendControl("set_task", { task_id: tasks[idx] });
  }
});

window.addEventListener("resize", refit);

function frame(): void {
  if (ui.status !== "connected") {
    renderDisconnected(ctx, view);
  } else if (ui.latest) {
    renderState(ui.latest, view, ctx, geometry, ui.showVelocities);
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
