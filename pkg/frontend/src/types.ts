// Wire types for the regkg HTTP API.

export interface TripletPayload {
  key: string;
  s: string;
  p: string;
  o: string;
  qualifiers: Record<string, string>;
  confidence: number;
  extractor: string;
  sections: string[];
  score?: number;
}

export interface SubgraphNodePayload {
  id: string;
  kind: "section" | "entity";
}

export interface SubgraphPayload {
  nodes: SubgraphNodePayload[];
  edges: TripletPayload[];
  seed_keys: string[];
  hop_limit: number;
  truncated: boolean;
  snapshot_version?: number;
}

export interface QueryResponse {
  answer: string;
  mode: "extractive" | "generated";
  degraded: boolean;
  citations: string[];
  triplets: TripletPayload[];
  evidence: string[];
  subgraph: SubgraphPayload;
  subgraph_ref: string;
  snapshot_version: number;
}

export interface SectionPayload {
  id: string;
  heading: string;
  text: string;
  parent_id: string | null;
  metadata: Record<string, string>;
  snapshot_version: number;
}

export interface StatsPayload {
  avg_degree: number;
  component_count: number;
  unconnected_sections: number;
  avg_shortest_path: number;
  avg_shortest_path_defined: boolean;
  sampled: boolean;
  mode: string;
  snapshot_version: number;
}

export interface HealthPayload {
  status: string;
  snapshot_version: number;
}
