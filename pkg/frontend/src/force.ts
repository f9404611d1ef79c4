// Small force-directed layout: spring attraction along edges, pairwise
// repulsion, gentle centering. Deterministic: initial positions derive from a
// hash of the node id, so the same graph always lays out the same way.

export interface Point {
  x: number;
  y: number;
}

export interface LayoutEdge {
  a: string;
  b: string;
}

const SPRING_LENGTH = 120;
const SPRING_STRENGTH = 0.02;
const REPULSION = 6000;
const CENTERING = 0.005;
const DAMPING = 0.85;

function hash32(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

export function seededPosition(id: string, width: number, height: number): Point {
  const h = hash32(id);
  return {
    x: (h % 1000) / 1000 * width * 0.8 + width * 0.1,
    y: ((h >>> 10) % 1000) / 1000 * height * 0.8 + height * 0.1,
  };
}

export class ForceLayout {
  readonly positions = new Map<string, Point>();
  private velocities = new Map<string, Point>();
  private edges: LayoutEdge[] = [];

  constructor(
    private readonly width: number,
    private readonly height: number,
  ) {}

  /** Keep positions for surviving nodes, seed new ones deterministically. */
  setGraph(nodeIds: string[], edges: LayoutEdge[]): void {
    this.edges = edges;
    const alive = new Set(nodeIds);
    for (const id of [...this.positions.keys()]) {
      if (!alive.has(id)) {
        this.positions.delete(id);
        this.velocities.delete(id);
      }
    }
    for (const id of nodeIds) {
      if (!this.positions.has(id)) {
        this.positions.set(id, seededPosition(id, this.width, this.height));
        this.velocities.set(id, { x: 0, y: 0 });
      }
    }
  }

  step(iterations = 1): void {
    const ids = [...this.positions.keys()];
    for (let it = 0; it < iterations; it++) {
      const forces = new Map<string, Point>(ids.map((id) => [id, { x: 0, y: 0 }]));

      for (let i = 0; i < ids.length; i++) {
        for (let j = i + 1; j < ids.length; j++) {
          const a = this.positions.get(ids[i])!;
          const b = this.positions.get(ids[j])!;
          let dx = a.x - b.x;
          let dy = a.y - b.y;
          let distSq = dx * dx + dy * dy;
          if (distSq < 1) {
            // coincident nodes: nudge apart deterministically by index
            dx = 0.5 + i * 0.01;
            dy = 0.5 + j * 0.01;
            distSq = dx * dx + dy * dy;
          }
          const force = REPULSION / distSq;
          const dist = Math.sqrt(distSq);
          const fx = (dx / dist) * force;
          const fy = (dy / dist) * force;
          const fa = forces.get(ids[i])!;
          const fb = forces.get(ids[j])!;
          fa.x += fx;
          fa.y += fy;
          fb.x -= fx;
          fb.y -= fy;
        }
      }

      for (const edge of this.edges) {
        const a = this.positions.get(edge.a);
        const b = this.positions.get(edge.b);
        if (!a || !b) continue;
        const dx = b.x - a.x;
        const dy = b.y - a.y;
        const dist = Math.max(1, Math.sqrt(dx * dx + dy * dy));
        const stretch = (dist - SPRING_LENGTH) * SPRING_STRENGTH;
        const fx = (dx / dist) * stretch;
        const fy = (dy / dist) * stretch;
        const fa = forces.get(edge.a)!;
        const fb = forces.get(edge.b)!;
        fa.x += fx;
        fa.y += fy;
        fb.x -= fx;
        fb.y -= fy;
      }

      for (const id of ids) {
        const pos = this.positions.get(id)!;
        const force = forces.get(id)!;
        force.x += (this.width / 2 - pos.x) * CENTERING;
        force.y += (this.height / 2 - pos.y) * CENTERING;
        const vel = this.velocities.get(id)!;
        vel.x = (vel.x + force.x) * DAMPING;
        vel.y = (vel.y + force.y) * DAMPING;
        pos.x += vel.x;
        pos.y += vel.y;
      }
    }
  }
}
