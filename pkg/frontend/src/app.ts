import { ApiClient, SessionMeta } from "./api.js";
import { SessionController } from "./controller.js";
import { paintOutlines, planOverlay } from "./overlay.js";
import { nearestCorner } from "./quad.js";
import { frameToDisplay } from "./transform.js";

const api = new ApiClient("");

const sessionSelect = document.getElementById("session") as HTMLSelectElement;
const modeSelect = document.getElementById("mode") as HTMLSelectElement;
const lockBtn = document.getElementById("lock") as HTMLButtonElement;
const unlockBtn = document.getElementById("unlock") as HTMLButtonElement;
const backBtn = document.getElementById("back") as HTMLButtonElement;
const centerLockBox = document.getElementById("center-lock") as HTMLInputElement;
const statusEl = document.getElementById("status") as HTMLElement;
const canvas = document.getElementById("preview") as HTMLCanvasElement;
const viewerImg = document.getElementById("viewer") as HTMLImageElement;

const ctx2d = canvas.getContext("2d")!;
const previewImg = new Image();
const thumbImg = new Image();

let controller: SessionController | null = null;
let dragging = false;

function redraw(meta: SessionMeta): void {
  if (!controller) return;
  if (previewImg.naturalWidth > 0) {
    controller.setFrameSize(previewImg.naturalWidth, previewImg.naturalHeight);
  }
  controller.setDisplaySize(canvas.width, canvas.height);
  const t = controller.transform;
  ctx2d.clearRect(0, 0, canvas.width, canvas.height);
  ctx2d.fillStyle = "#111";
  ctx2d.fillRect(0, 0, canvas.width, canvas.height);
  if (previewImg.naturalWidth > 0) {
    const [x0, y0] = frameToDisplay(t, 0, 0);
    ctx2d.drawImage(
      previewImg,
      x0,
      y0,
      controller.frame.width * t.scale,
      controller.frame.height * t.scale,
    );
  }
  const plan = planOverlay(meta, t, controller.display);
  paintOutlines(ctx2d, plan);
  if (plan.thumbnail && thumbImg.naturalWidth > 0) {
    ctx2d.save();
    ctx2d.globalAlpha = plan.thumbnail.alpha;
    ctx2d.drawImage(
      thumbImg,
      plan.thumbnail.x,
      plan.thumbnail.y,
      plan.thumbnail.width,
      plan.thumbnail.height,
    );
    ctx2d.restore();
  }
  statusEl.textContent = plan.statusText;
}

function onUpdate(meta: SessionMeta): void {
  if (!controller) return;
  previewImg.src = controller.previewUrl();
  const latest = controller.latestUrl();
  thumbImg.src = latest;
  viewerImg.src = latest;
  redraw(meta);
}

function attachSession(sessionId: string): void {
  controller?.stop();
  controller = new SessionController(api, sessionId, {
    config: { centerTapLock: centerLockBox.checked },
  });
  controller.start(onUpdate, (err) => {
    statusEl.textContent = `error: ${String(err)}`;
  });
}

async function refreshSessions(): Promise<void> {
  try {
    const sessions = await api.sessions();
    const current = sessionSelect.value;
    sessionSelect.innerHTML = "";
    for (const s of sessions) {
      const opt = document.createElement("option");
      opt.value = s.session_id;
      opt.textContent = `${s.session_id} (#${s.seq}, ${s.mode})`;
      sessionSelect.appendChild(opt);
    }
    if (sessions.length && !sessions.some((s) => s.session_id === current)) {
      sessionSelect.value = sessions[0].session_id;
      attachSession(sessions[0].session_id);
    } else if (current) {
      sessionSelect.value = current;
    }
  } catch {
    statusEl.textContent = "server unreachable";
  }
}

previewImg.onload = () => {
  if (controller?.meta) redraw(controller.meta);
};

sessionSelect.addEventListener("change", () => attachSession(sessionSelect.value));
modeSelect.addEventListener("change", () => controller?.setMode(modeSelect.value));
lockBtn.addEventListener("click", () => controller?.lock());
unlockBtn.addEventListener("click", () => controller?.unlock());
backBtn.addEventListener("click", () => controller?.relockPrevious());
centerLockBox.addEventListener("change", () => {
  if (controller) controller.config = { centerTapLock: centerLockBox.checked };
});

function canvasPos(ev: MouseEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  return [
    ((ev.clientX - rect.left) / rect.width) * canvas.width,
    ((ev.clientY - rect.top) / rect.height) * canvas.height,
  ];
}

canvas.addEventListener("mousedown", (ev) => {
  if (!controller?.meta) return;
  const quad = controller.meta.locked ?? controller.meta.candidate;
  if (!quad) return;
  const [dx, dy] = canvasPos(ev);
  const t = controller.transform;
  const corners = quad.map(([x, y]) => frameToDisplay(t, x, y));
  const idx = nearestCorner(corners as never, dx, dy);
  const [cx, cy] = corners[idx];
  if (Math.hypot(cx - dx, cy - dy) <= 12) dragging = true;
});

canvas.addEventListener("mouseup", (ev) => {
  if (!controller) return;
  const [dx, dy] = canvasPos(ev);
  if (dragging) {
    dragging = false;
    controller.dragEnd(dx, dy);
  } else {
    controller.tap(dx, dy);
  }
});

refreshSessions();
setInterval(refreshSessions, 2000);
