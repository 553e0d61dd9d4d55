/** Clinician console: schema-driven controls over the live engine. */

import { ConsoleClient } from "./client.js";
import type { ControlSchema, Reply, SceneName } from "./protocol.js";
import { controlsFor, fetchSchema, maskMachineIds } from "./schema.js";
import { drawSnapshot } from "./render.js";
import { ConsoleState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function serviceEndpoints() {
  const q = new URLSearchParams(location.search);
  const host = q.get("host") ?? location.hostname ?? "127.0.0.1";
  const wsPort = q.get("ws") ?? "7777";
  const httpPort = q.get("http") ?? (location.port || "7780");
  return {
    wsUrl: `ws://${host}:${wsPort}`,
    httpUrl: `http://${host}:${httpPort}`,
  };
}

class ConsoleApp {
  state = new ConsoleState();
  scene: SceneName | null = null;
  private maskSelection = new Set<number>();

  constructor(
    private client: ConsoleClient,
    private schema: ControlSchema,
    private root: HTMLElement,
  ) {}

  mount(): void {
    const top = el("div", "toolbar");
    for (const [label, msg] of [
      ["start", { type: "start" }],
      ["pause", { type: "pause" }],
      ["stop", { type: "stop" }],
    ] as const) {
      const b = el("button", "", label);
      b.onclick = () => void this.send({ ...msg });
      top.append(b);
    }
    const scenePick = el("select");
    for (const s of this.schema.scenes) {
      scenePick.append(new Option(s, s));
    }
    scenePick.onchange = () =>
      void this.send({ type: "load_scene", scene: scenePick.value });
    top.append(scenePick);
    const exportBtn = el("button", "", "export log");
    exportBtn.onclick = () => this.downloadLog();
    top.append(exportBtn);
    this.root.append(top);

    this.root.append(el("div", "badge", "no data"));
    this.root.append(el("form", "controls"));
    const canvas = el("canvas");
    canvas.width = 640;
    canvas.height = 480;
    this.root.append(canvas);
    this.root.append(el("ul", "feed"));

    this.client.onSnapshot = (frame) => {
      this.state.applySnapshot(frame, performance.now());
      if (frame.state.scene !== this.scene) {
        this.scene = frame.state.scene;
        this.rebuildControls();
      }
      this.refreshControlValues();
      this.renderFeed();
    };

    setInterval(() => this.renderBadge(), 250);
    const paint = () => {
      const snap = this.state.lastSnapshot;
      const ctx = canvas.getContext("2d");
      if (snap && ctx) {
        drawSnapshot(ctx, snap.state, canvas.width, canvas.height);
      }
      requestAnimationFrame(paint);
    };
    requestAnimationFrame(paint);
  }

  private async send(msg: Record<string, unknown>): Promise<Reply> {
    const reply = await this.client.request(msg);
    if (reply.type === "error") {
      this.state.pushFeed({
        tick: this.state.lastSnapshot?.tick ?? 0,
        text: `rejected ${String(msg.type)}: ${reply.code} ${reply.message}`,
      });
      this.renderFeed();
    }
    return reply;
  }

  /** Optimistic set_param: show at once, roll back if the engine refuses. */
  async setParam(name: string, value: unknown): Promise<Reply> {
    const editId = this.state.stageEdit(name, value);
    this.refreshControlValues();
    const reply = await this.send({ type: "set_param", name, value });
    if (reply.type === "ack") {
      this.state.confirmEdit(name, editId);
    } else {
      this.state.rollbackEdit(name, editId);
    }
    this.refreshControlValues();
    return reply;
  }

  private rebuildControls(): void {
    const form = this.root.querySelector("form.controls");
    if (!(form instanceof HTMLFormElement) || this.scene === null) return;
    form.textContent = "";
    this.maskSelection.clear();
    for (const { name, field, choices } of controlsFor(
      this.schema,
      this.scene,
    )) {
      const row = el("label", "control");
      row.append(el("span", "name", name));
      if (field.kind === "int") {
        const slider = el("input");
        slider.type = "range";
        slider.min = String(field.min);
        slider.max = String(field.max);
        slider.step = "1";
        slider.name = name;
        slider.onchange = () => void this.setParam(name, Number(slider.value));
        row.append(slider, el("span", "value"));
      } else if (field.kind === "bool") {
        const box = el("input");
        box.type = "checkbox";
        box.name = name;
        box.onchange = () => void this.setParam(name, box.checked);
        row.append(box);
      } else if (field.kind === "choice") {
        const pick = el("select");
        pick.name = name;
        for (const c of choices ?? []) {
          pick.append(new Option(c, c));
        }
        pick.onchange = () => void this.setParam(name, pick.value);
        row.append(pick);
      } else {
        for (const m of maskMachineIds(field)) {
          const box = el("input");
          box.type = "checkbox";
          box.dataset.machine = String(m);
          box.onchange = () => {
            if (box.checked) this.maskSelection.add(m);
            else this.maskSelection.delete(m);
            void this.setParam(name, [...this.maskSelection].sort());
          };
          row.append(box, el("span", "", `#${m}`));
        }
        const clear = el("button", "", "auto");
        clear.type = "button";
        clear.onclick = () => {
          this.maskSelection.clear();
          row
            .querySelectorAll("input")
            .forEach((b) => ((b as HTMLInputElement).checked = false));
          void this.setParam(name, null);
        };
        row.append(clear);
      }
      form.append(row);
    }
  }

  private refreshControlValues(): void {
    const form = this.root.querySelector("form.controls");
    if (!form) return;
    for (const input of form.querySelectorAll("input[type=range]")) {
      const slider = input as HTMLInputElement;
      const value = this.state.paramValue(slider.name);
      if (typeof value === "number") {
        slider.value = String(value);
        const label = slider.parentElement?.querySelector(".value");
        if (label) label.textContent = String(value);
      }
    }
    for (const input of form.querySelectorAll("input[type=checkbox]")) {
      const box = input as HTMLInputElement;
      if (box.dataset.machine !== undefined) continue; // mask boxes are local
      const value = this.state.paramValue(box.name);
      if (typeof value === "boolean") box.checked = value;
    }
    for (const select of form.querySelectorAll("select")) {
      const pick = select as HTMLSelectElement;
      const value = this.state.paramValue(pick.name);
      if (typeof value === "string" && value) pick.value = value;
    }
  }

  private renderBadge(): void {
    const badge = this.root.querySelector(".badge");
    if (!badge) return;
    const stale = this.state.isStale(performance.now());
    badge.textContent = stale
      ? "STALE: no snapshot for over a second"
      : `live, tick ${this.state.lastSnapshot?.tick ?? 0}`;
    badge.className = stale ? "badge stale" : "badge live";
  }

  private renderFeed(): void {
    const feed = this.root.querySelector("ul.feed");
    if (!feed) return;
    feed.textContent = "";
    const entries = this.state.feedEntries();
    for (const entry of entries.slice(-30)) {
      feed.append(el("li", "", `[${entry.tick}] ${entry.text}`));
    }
  }

  private downloadLog(): void {
    const blob = new Blob([this.state.exportLog()], {
      type: "application/jsonl",
    });
    const a = el("a");
    a.href = URL.createObjectURL(blob);
    a.download = "console-events.jsonl";
    a.click();
    URL.revokeObjectURL(a.href);
  }
}

async function boot(): Promise<void> {
  const { wsUrl, httpUrl } = serviceEndpoints();
  const schema = await fetchSchema(httpUrl);
  const socket = new WebSocket(wsUrl);
  await new Promise((resolve, reject) => {
    socket.addEventListener("open", resolve);
    socket.addEventListener("error", () =>
      reject(new Error(`cannot reach ${wsUrl}`)),
    );
  });
  const client = new ConsoleClient(socket);
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const app = new ConsoleApp(client, schema, root);
  app.mount();
  await client.request({
    type: "subscribe",
    rate: schema.protocol.default_snapshot_rate,
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot().catch((err) => {
    document.body.prepend(el("pre", "boot-error", String(err)));
  });
}

export { ConsoleApp, serviceEndpoints };
