/** Top-down canvas painter for the live snapshot. */

import type { SnapshotState } from "./protocol.js";

export interface ViewBox {
  minX: number;
  minY: number;
  maxX: number;
  maxY: number;
}

/** World box covering everything visible this frame, padded a little. */
export function frameBounds(state: SnapshotState): ViewBox {
  const xs = [state.player.x];
  const ys = [state.player.y];
  for (const [, x, y] of state.agents) {
    xs.push(x);
    ys.push(y);
  }
  for (const [, x, y] of state.balls) {
    xs.push(x);
    ys.push(y);
  }
  for (const [x, y] of state.cars) {
    xs.push(x);
    ys.push(y);
  }
  const pad = 6;
  return {
    minX: Math.min(...xs) - pad,
    minY: Math.min(...ys) - pad,
    maxX: Math.max(...xs) + pad,
    maxY: Math.max(...ys) + pad,
  };
}

export function drawSnapshot(
  ctx: CanvasRenderingContext2D,
  state: SnapshotState,
  width: number,
  height: number,
): void {
  const box = frameBounds(state);
  const scale = Math.min(
    width / (box.maxX - box.minX),
    height / (box.maxY - box.minY),
  );
  const toX = (x: number) => (x - box.minX) * scale;
  const toY = (y: number) => height - (y - box.minY) * scale; // y up

  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#11151c";
  ctx.fillRect(0, 0, width, height);

  const dot = (x: number, y: number, r: number, color: string) => {
    ctx.beginPath();
    ctx.arc(toX(x), toY(y), Math.max(2, r * scale), 0, Math.PI * 2);
    ctx.fillStyle = color;
    ctx.fill();
  };

  for (const [x, y] of state.cars) {
    dot(x, y, 0.9, "#b08a3e");
  }
  for (const [, x, y, , , waiting] of state.agents) {
    dot(x, y, 0.3, waiting ? "#7a6f8f" : "#5a8dc8");
  }
  for (const [, x, y] of state.balls) {
    dot(x, y, 0.2, "#d4574e");
  }
  if (state.plane) {
    dot(state.plane[0], state.plane[1], 1.2, "#4e6e5a");
  }

  // player: disc plus a heading tick
  const p = state.player;
  dot(p.x, p.y, 0.3, "#e8e4d8");
  ctx.beginPath();
  ctx.moveTo(toX(p.x), toY(p.y));
  ctx.lineTo(
    toX(p.x - Math.sin(p.yaw) * 1.2),
    toY(p.y + Math.cos(p.yaw) * 1.2),
  );
  ctx.strokeStyle = "#e8e4d8";
  ctx.lineWidth = 1.5;
  ctx.stroke();

  ctx.fillStyle = "#9aa3ad";
  ctx.font = "12px system-ui";
  ctx.fillText(
    `tick ${state.tick}  t=${state.sim_time.toFixed(2)}s  ` +
      `${state.agents.length} agents  ${state.cues.length} cues`,
    8,
    16,
  );
}
