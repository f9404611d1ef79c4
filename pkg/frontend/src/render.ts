// Canvas graph renderer + DOM panels. Browser-only; all state transitions go
// through the ExplorerStore, this module just draws and forwards events.

import { ForceLayout } from "./force.js";
import type { ExplorerStore, GraphEdge, ViewState } from "./state.js";

const NODE_RADIUS = 9;
const EDGE_HIT_DISTANCE = 8;

const KIND_COLORS: Record<string, string> = {
  section: "#2563eb",
  entity: "#6b7280",
  qualifier: "#d97706",
};

export class GraphView {
  private layout: ForceLayout;
  private ctx: CanvasRenderingContext2D;
  private animating = false;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly store: ExplorerStore,
  ) {
    this.layout = new ForceLayout(canvas.width, canvas.height);
    this.ctx = canvas.getContext("2d")!;
    canvas.addEventListener("click", (ev) => this.onClick(ev));
    canvas.addEventListener("dblclick", (ev) => this.onDoubleClick(ev));
  }

  sync(state: ViewState): void {
    this.layout.setGraph(
      [...state.nodes.keys()],
      [...state.edges.values()].map((e) => ({ a: e.s, b: e.o })),
    );
    if (!this.animating) {
      this.animating = true;
      this.tick(0);
    }
  }

  private tick = (frame: number): void => {
    this.layout.step(2);
    this.draw();
    if (frame < 150) {
      requestAnimationFrame(() => this.tick(frame + 1));
    } else {
      this.animating = false;
    }
  };

  private canvasPoint(ev: MouseEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    return {
      x: ((ev.clientX - rect.left) / rect.width) * this.canvas.width,
      y: ((ev.clientY - rect.top) / rect.height) * this.canvas.height,
    };
  }

  private nodeAt(x: number, y: number): string | null {
    for (const [id, pos] of this.layout.positions) {
      const dx = pos.x - x;
      const dy = pos.y - y;
      if (dx * dx + dy * dy <= NODE_RADIUS * NODE_RADIUS * 4) return id;
    }
    return null;
  }

  private edgeAt(x: number, y: number): GraphEdge | null {
    for (const edge of this.store.view.edges.values()) {
      const a = this.layout.positions.get(edge.s);
      const b = this.layout.positions.get(edge.o);
      if (!a || !b) continue;
      const mx = (a.x + b.x) / 2;
      const my = (a.y + b.y) / 2;
      const dx = mx - x;
      const dy = my - y;
      if (dx * dx + dy * dy <= EDGE_HIT_DISTANCE * EDGE_HIT_DISTANCE * 4) return edge;
    }
    return null;
  }

  private onClick(ev: MouseEvent): void {
    const { x, y } = this.canvasPoint(ev);
    const nodeId = this.nodeAt(x, y);
    if (nodeId) {
      this.store.select({ type: "node", id: nodeId });
      return;
    }
    const edge = this.edgeAt(x, y);
    if (edge) {
      this.store.select({ type: "edge", id: edge.key });
      return;
    }
    this.store.select(null);
  }

  private onDoubleClick(ev: MouseEvent): void {
    const { x, y } = this.canvasPoint(ev);
    const nodeId = this.nodeAt(x, y);
    if (nodeId) void this.store.expandNode(nodeId);
  }

  draw(): void {
    const state = this.store.view;
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);

    ctx.strokeStyle = "#cbd5e1";
    ctx.fillStyle = "#475569";
    ctx.font = "10px sans-serif";
    for (const edge of state.edges.values()) {
      const a = this.layout.positions.get(edge.s);
      const b = this.layout.positions.get(edge.o);
      if (!a || !b) continue;
      const selected = state.selected?.type === "edge" && state.selected.id === edge.key;
      ctx.strokeStyle = selected ? "#dc2626" : "#cbd5e1";
      ctx.lineWidth = selected ? 2.5 : 1;
      ctx.beginPath();
      ctx.moveTo(a.x, a.y);
      ctx.lineTo(b.x, b.y);
      ctx.stroke();
      ctx.fillText(edge.p, (a.x + b.x) / 2 + 4, (a.y + b.y) / 2 - 4);
    }

    ctx.font = "11px sans-serif";
    for (const node of state.nodes.values()) {
      const pos = this.layout.positions.get(node.id);
      if (!pos) continue;
      const selected = state.selected?.type === "node" && state.selected.id === node.id;
      ctx.beginPath();
      ctx.arc(pos.x, pos.y, NODE_RADIUS, 0, Math.PI * 2);
      ctx.fillStyle = KIND_COLORS[node.kind] ?? KIND_COLORS.entity;
      ctx.fill();
      if (selected) {
        ctx.strokeStyle = "#dc2626";
        ctx.lineWidth = 3;
        ctx.stroke();
      }
      ctx.fillStyle = "#111827";
      const label = node.id.length > 28 ? `${node.id.slice(0, 27)}…` : node.id;
      ctx.fillText(label, pos.x + NODE_RADIUS + 3, pos.y + 3);
    }
  }
}

export function renderAnswerPanel(
  container: HTMLElement,
  state: ViewState,
  store: ExplorerStore,
): void {
  container.replaceChildren();
  if (state.answer === null) {
    const hint = document.createElement("p");
    hint.className = "hint";
    hint.textContent = "Ask a question to see the answer and its evidence.";
    container.appendChild(hint);
    return;
  }
  const answer = document.createElement("p");
  answer.className = "answer-text";
  answer.textContent = state.answer.text;
  container.appendChild(answer);

  const meta = document.createElement("p");
  meta.className = "answer-meta";
  meta.textContent =
    `${state.answer.mode}${state.answer.degraded ? " (degraded)" : ""}` +
    ` · snapshot ${state.answer.snapshotVersion}`;
  container.appendChild(meta);

  if (state.answer.citations.length) {
    const list = document.createElement("ul");
    list.className = "citations";
    for (const sid of state.answer.citations) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = store.sectionUrl(sid);
      link.target = "_blank";
      link.textContent = `§ ${sid}`;
      item.appendChild(link);
      list.appendChild(item);
    }
    container.appendChild(list);
  }
}

export function renderHistory(container: HTMLElement, state: ViewState, store: ExplorerStore): void {
  container.replaceChildren();
  state.history.forEach((entry, index) => {
    const item = document.createElement("li");
    const button = document.createElement("button");
    button.textContent = entry.question;
    button.title = entry.answerText;
    button.addEventListener("click", () => void store.replayHistory(index));
    item.appendChild(button);
    container.appendChild(item);
  });
}
