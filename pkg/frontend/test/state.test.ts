// Store behavior against a scripted client: submit/expand/ask flows,
// error banners, undo, and the no-fabricated-content invariant.

import { describe, expect, it } from "vitest";
import { ServiceClient, ServiceError } from "../src/api.js";
import { ExplorerStore } from "../src/state.js";
import type { QueryResponse, SubgraphPayload, TripletPayload } from "../src/types.js";

function triplet(s: string, p: string, o: string, sections: string[] = ["117.257"]): TripletPayload {
  return { key: `${s}|${p}|${o}`, s, p, o, qualifiers: {}, confidence: 1, extractor: "reference", sections };
}

const REF = triplet("§117.257", "references", "§117.264");
const TIME = triplet("§117.264", "hasTimeframe", "15 days to appeal the order", ["117.264"]);

const QUERY_RESPONSE: QueryResponse = {
  answer: "The facility has 15 days to appeal the order.",
  mode: "extractive",
  degraded: false,
  citations: ["117.264"],
  triplets: [REF],
  evidence: ["117.257", "117.264"],
  subgraph: {
    nodes: [
      { id: "§117.257", kind: "section" },
      { id: "§117.264", kind: "section" },
    ],
    edges: [REF],
    seed_keys: [REF.key],
    hop_limit: 0,
    truncated: false,
  },
  subgraph_ref: "/subgraph?seed=x&hops=1",
  snapshot_version: 3,
};

const EXPANSION: SubgraphPayload = {
  nodes: [
    { id: "§117.257", kind: "section" },
    { id: "§117.264", kind: "section" },
    { id: "15 days to appeal the order", kind: "entity" },
  ],
  edges: [REF, TIME],
  seed_keys: [REF.key],
  hop_limit: 1,
  truncated: false,
};

interface Script {
  query?: () => Promise<QueryResponse>;
  subgraph?: () => Promise<SubgraphPayload>;
}

function scriptedClient(script: Script): ServiceClient {
  const client = new ServiceClient({ baseUrl: "http://scripted" });
  if (script.query) (client as unknown as { query: Script["query"] }).query = script.query;
  if (script.subgraph)
    (client as unknown as { subgraph: Script["subgraph"] }).subgraph = script.subgraph;
  return client;
}

describe("submitQuery", () => {
  it("is disabled for empty questions", async () => {
    const store = new ExplorerStore(scriptedClient({ query: async () => QUERY_RESPONSE }));
    store.setQuestion("   ");
    expect(store.canSubmit()).toBe(false);
    expect(await store.submitQuery()).toBe(false);
    expect(store.view.answer).toBeNull();
  });

  it("renders answer, citations, and seed graph", async () => {
    const store = new ExplorerStore(scriptedClient({ query: async () => QUERY_RESPONSE }));
    expect(await store.submitQuery("Which sections reference §117.264?")).toBe(true);
    expect(store.view.answer?.text).toContain("15 days");
    expect(store.view.answer?.citations).toEqual(["117.264"]);
    expect([...store.view.nodes.keys()].sort()).toEqual(["§117.257", "§117.264"]);
    expect(store.view.history).toHaveLength(1);
  });

  it("keeps prior state and shows a banner on service failure", async () => {
    let fail = false;
    const store = new ExplorerStore(
      scriptedClient({
        query: async () => {
          if (fail) throw new ServiceError("boom", 500);
          return QUERY_RESPONSE;
        },
      }),
    );
    await store.submitQuery("first question");
    fail = true;
    expect(await store.submitQuery("second question")).toBe(false);
    expect(store.view.banner).toBe("boom");
    expect(store.view.answer?.question).toBe("first question");
    expect(store.view.history).toHaveLength(1);
  });

  it("serializes: refuses while a query is in flight", async () => {
    let release: (() => void) | undefined;
    const gate = new Promise<void>((resolve) => (release = resolve));
    const store = new ExplorerStore(
      scriptedClient({
        query: async () => {
          await gate;
          return QUERY_RESPONSE;
        },
      }),
    );
    const first = store.submitQuery("q1");
    expect(store.view.busy).toBe(true);
    expect(await store.submitQuery("q2")).toBe(false);
    release!();
    expect(await first).toBe(true);
  });
});

describe("expandNode", () => {
  async function loadedStore(script: Script = {}): Promise<ExplorerStore> {
    const store = new ExplorerStore(
      scriptedClient({ query: async () => QUERY_RESPONSE, subgraph: async () => EXPANSION, ...script }),
    );
    await store.submitQuery("q");
    return store;
  }

  it("merges new neighbors without duplicating nodes", async () => {
    const store = await loadedStore();
    expect(await store.expandNode("§117.264")).toBe(true);
    expect(store.view.nodes.size).toBe(3);
    expect(store.view.edges.size).toBe(2);
    expect(store.view.nodes.has("15 days to appeal the order")).toBe(true);
  });

  it("is undoable", async () => {
    const store = await loadedStore();
    const before = [...store.view.nodes.keys()].sort();
    await store.expandNode("§117.264");
    expect(store.canUndo()).toBe(true);
    store.undoExpansion();
    expect([...store.view.nodes.keys()].sort()).toEqual(before);
    expect(store.canUndo()).toBe(false);
  });

  it("notices when nothing new arrives", async () => {
    const store = await loadedStore({
      subgraph: async () => ({ ...QUERY_RESPONSE.subgraph }),
    });
    const nodesBefore = store.view.nodes.size;
    expect(await store.expandNode("§117.264")).toBe(true);
    expect(store.view.notice).toContain("no new neighbors");
    expect(store.view.nodes.size).toBe(nodesBefore);
    expect(store.canUndo()).toBe(false);
  });

  it("banners on unknown node and on service error", async () => {
    const store = await loadedStore();
    expect(await store.expandNode("nowhere")).toBe(false);
    expect(store.view.banner).toContain("nowhere");

    const failing = await loadedStore({
      subgraph: async () => {
        throw new ServiceError("unknown seed keys: [x]", 422);
      },
    });
    expect(await failing.expandNode("§117.264")).toBe(false);
    expect(failing.view.banner).toContain("unknown seed");
  });
});

describe("selection and templates", () => {
  it("node selection fills the question template", async () => {
    const store = new ExplorerStore(scriptedClient({ query: async () => QUERY_RESPONSE }));
    await store.submitQuery("q");
    store.select({ type: "node", id: "§117.264" });
    expect(store.askAboutSelection()).toBe("What does §117.264 require?");
    expect(store.view.question).toBe("What does §117.264 require?");
  });

  it("edge selection names subject, predicate, object", async () => {
    const store = new ExplorerStore(scriptedClient({ query: async () => QUERY_RESPONSE }));
    await store.submitQuery("q");
    store.select({ type: "edge", id: REF.key });
    expect(store.askAboutSelection()).toBe(
      "Explain the relationship §117.257 references §117.264.",
    );
  });

  it("is disabled with nothing selected", async () => {
    const store = new ExplorerStore(scriptedClient({ query: async () => QUERY_RESPONSE }));
    expect(store.canAskAboutSelection()).toBe(false);
    expect(store.askAboutSelection()).toBeNull();
  });

  it("cannot select content the service never returned", async () => {
    const store = new ExplorerStore(scriptedClient({ query: async () => QUERY_RESPONSE }));
    await store.submitQuery("q");
    store.select({ type: "node", id: "fabricated" });
    expect(store.view.selected).toBeNull();
  });
});

describe("view provenance invariant", () => {
  it("every rendered node and edge came from a service response", async () => {
    const served = new Set<string>();
    for (const n of QUERY_RESPONSE.subgraph.nodes) served.add(n.id);
    for (const e of QUERY_RESPONSE.subgraph.edges) served.add(e.key);
    for (const n of EXPANSION.nodes) served.add(n.id);
    for (const e of EXPANSION.edges) served.add(e.key);

    const store = new ExplorerStore(
      scriptedClient({ query: async () => QUERY_RESPONSE, subgraph: async () => EXPANSION }),
    );
    await store.submitQuery("q");
    await store.expandNode("§117.264");
    for (const id of store.view.nodes.keys()) expect(served.has(id)).toBe(true);
    for (const key of store.view.edges.keys()) expect(served.has(key)).toBe(true);
  });
});
