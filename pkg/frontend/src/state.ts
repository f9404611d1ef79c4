// Single state container for the explorer. All transitions run through this
// store, one query in flight at a time; the graph view only ever holds nodes
// and edges that came back from the service this session.

import { ServiceClient, ServiceError } from "./api.js";
import type { QueryResponse, SubgraphPayload, TripletPayload } from "./types.js";

export interface GraphNode {
  id: string;
  kind: "section" | "entity";
}

export interface GraphEdge {
  key: string;
  s: string;
  p: string;
  o: string;
  sections: string[];
}

export interface Selection {
  type: "node" | "edge";
  id: string; // node id or edge key
}

export interface AnswerPanel {
  question: string;
  text: string;
  mode: string;
  degraded: boolean;
  citations: string[];
  snapshotVersion: number;
}

export interface HistoryEntry {
  question: string;
  answerText: string;
  citations: string[];
  snapshotVersion: number;
}

export interface ViewState {
  question: string;
  answer: AnswerPanel | null;
  nodes: Map<string, GraphNode>;
  edges: Map<string, GraphEdge>;
  selected: Selection | null;
  hopDepth: number;
  banner: string | null;
  notice: string | null;
  busy: boolean;
  history: HistoryEntry[];
}

interface GraphSnapshot {
  nodes: Map<string, GraphNode>;
  edges: Map<string, GraphEdge>;
}

export const MAX_HOP_DEPTH = 3;

type Listener = (state: ViewState) => void;

export class ExplorerStore {
  private state: ViewState = {
    question: "",
    answer: null,
    nodes: new Map(),
    edges: new Map(),
    selected: null,
    hopDepth: 1,
    banner: null,
    notice: null,
    busy: false,
    history: [],
  };

  private undoStack: GraphSnapshot[] = [];
  private listeners: Listener[] = [];

  constructor(private readonly client: ServiceClient) {}

  // -- subscriptions ---------------------------------------------------------

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  get view(): ViewState {
    return this.state;
  }

  // -- question box ----------------------------------------------------------

  setQuestion(question: string): void {
    this.state.question = question;
    this.emit();
  }

  setHopDepth(depth: number): void {
    this.state.hopDepth = Math.max(1, Math.min(MAX_HOP_DEPTH, depth));
    this.emit();
  }

  canSubmit(): boolean {
    return this.state.question.trim().length > 0 && !this.state.busy;
  }

  // -- query flow --------------------------------------------------------------

  async submitQuery(question?: string): Promise<boolean> {
    if (question !== undefined) this.state.question = question;
    if (!this.canSubmit()) return false;
    const asked = this.state.question.trim();
    this.state.busy = true;
    this.state.banner = null;
    this.state.notice = null;
    this.emit();
    try {
      const response = await this.client.query(asked, 5, 0);
      this.applyQueryResponse(asked, response);
      return true;
    } catch (err) {
      // prior answer and graph stay untouched on failure
      this.state.banner = err instanceof ServiceError ? err.message : String(err);
      return false;
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  private applyQueryResponse(question: string, response: QueryResponse): void {
    this.state.answer = {
      question,
      text: response.answer,
      mode: response.mode,
      degraded: response.degraded,
      citations: response.citations,
      snapshotVersion: response.snapshot_version,
    };
    this.state.nodes = new Map();
    this.state.edges = new Map();
    this.undoStack = [];
    this.state.selected = null;
    this.mergeSubgraph(response.subgraph);
    this.state.history.push({
      question,
      answerText: response.answer,
      citations: [...response.citations],
      snapshotVersion: response.snapshot_version,
    });
  }

  private mergeSubgraph(subgraph: SubgraphPayload): number {
    let added = 0;
    for (const node of subgraph.nodes) {
      if (!this.state.nodes.has(node.id)) {
        this.state.nodes.set(node.id, { id: node.id, kind: node.kind });
        added += 1;
      }
    }
    for (const edge of subgraph.edges) {
      if (!this.state.edges.has(edge.key)) {
        this.state.edges.set(edge.key, this.toEdge(edge));
        added += 1;
      }
    }
    return added;
  }

  private toEdge(payload: TripletPayload): GraphEdge {
    return {
      key: payload.key,
      s: payload.s,
      p: payload.p,
      o: payload.o,
      sections: payload.sections,
    };
  }

  // -- graph expansion -----------------------------------------------------------

  incidentEdgeOf(nodeId: string): GraphEdge | null {
    const keys = [...this.state.edges.keys()].sort();
    for (const key of keys) {
      const edge = this.state.edges.get(key)!;
      if (edge.s === nodeId || edge.o === nodeId) return edge;
    }
    return null;
  }

  async expandNode(nodeId: string): Promise<boolean> {
    if (!this.state.nodes.has(nodeId)) {
      this.state.banner = `node '${nodeId}' is not in the current view`;
      this.emit();
      return false;
    }
    const incident = this.incidentEdgeOf(nodeId);
    if (incident === null) {
      this.state.banner = `node '${nodeId}' has no incident triplet to expand from`;
      this.emit();
      return false;
    }
    const snapshot: GraphSnapshot = {
      nodes: new Map(this.state.nodes),
      edges: new Map(this.state.edges),
    };
    this.state.notice = null;
    this.state.banner = null;
    try {
      const subgraph = await this.client.subgraph([incident.key], 1);
      const added = this.mergeSubgraph(subgraph);
      if (added === 0) {
        this.state.notice = `no new neighbors around '${nodeId}'`;
        this.emit();
        return true; // view unchanged, notice shown; nothing to undo
      }
      this.undoStack.push(snapshot);
      this.emit();
      return true;
    } catch (err) {
      this.state.banner = err instanceof ServiceError ? err.message : String(err);
      this.emit();
      return false;
    }
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  undoExpansion(): boolean {
    const snapshot = this.undoStack.pop();
    if (!snapshot) return false;
    this.state.nodes = snapshot.nodes;
    this.state.edges = snapshot.edges;
    if (this.state.selected) {
      const { type, id } = this.state.selected;
      const stillThere =
        type === "node" ? this.state.nodes.has(id) : this.state.edges.has(id);
      if (!stillThere) this.state.selected = null;
    }
    this.emit();
    return true;
  }

  // -- selection ---------------------------------------------------------------

  select(selection: Selection | null): void {
    if (selection) {
      const exists =
        selection.type === "node"
          ? this.state.nodes.has(selection.id)
          : this.state.edges.has(selection.id);
      if (!exists) return;
    }
    this.state.selected = selection;
    this.emit();
  }

  canAskAboutSelection(): boolean {
    return this.state.selected !== null;
  }

  askAboutSelection(): string | null {
    const selected = this.state.selected;
    if (!selected) return null;
    let template: string;
    if (selected.type === "node") {
      template = `What does ${selected.id} require?`;
    } else {
      const edge = this.state.edges.get(selected.id)!;
      template = `Explain the relationship ${edge.s} ${edge.p} ${edge.o}.`;
    }
    this.state.question = template;
    this.emit();
    return template;
  }

  // -- history -------------------------------------------------------------------

  async replayHistory(index: number): Promise<boolean> {
    const entry = this.state.history[index];
    if (!entry) return false;
    return this.submitQuery(entry.question);
  }

  sectionUrl(id: string): string {
    return this.client.sectionUrl(id);
  }
}
