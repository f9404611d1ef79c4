// Bootstraps the console: wires the DOM to the store and renderers.

import { ServiceClient } from "./api.js";
import { GraphView, renderAnswerPanel, renderHistory } from "./render.js";
import { ExplorerStore } from "./state.js";

function requireEl<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("service") ?? "http://127.0.0.1:8899";
  const apiToken = params.get("token") ?? undefined;

  const client = new ServiceClient({ baseUrl, apiToken });
  const store = new ExplorerStore(client);

  const questionInput = requireEl<HTMLInputElement>("question");
  const submitButton = requireEl<HTMLButtonElement>("submit");
  const askButton = requireEl<HTMLButtonElement>("ask-selection");
  const expandButton = requireEl<HTMLButtonElement>("expand");
  const undoButton = requireEl<HTMLButtonElement>("undo");
  const banner = requireEl<HTMLDivElement>("banner");
  const notice = requireEl<HTMLDivElement>("notice");
  const answerPanel = requireEl<HTMLDivElement>("answer-panel");
  const historyList = requireEl<HTMLUListElement>("history");
  const selectionLabel = requireEl<HTMLSpanElement>("selection");
  const canvas = requireEl<HTMLCanvasElement>("graph");

  const graphView = new GraphView(canvas, store);

  store.subscribe((state) => {
    submitButton.disabled = !store.canSubmit();
    askButton.disabled = !store.canAskAboutSelection();
    expandButton.disabled = !(state.selected?.type === "node");
    undoButton.disabled = !store.canUndo();
    if (questionInput.value !== state.question) questionInput.value = state.question;

    banner.textContent = state.banner ?? "";
    banner.hidden = state.banner === null;
    notice.textContent = state.notice ?? "";
    notice.hidden = state.notice === null;
    selectionLabel.textContent = state.selected
      ? `${state.selected.type}: ${state.selected.id}`
      : "nothing selected";

    renderAnswerPanel(answerPanel, state, store);
    renderHistory(historyList, state, store);
    graphView.sync(state);
  });

  questionInput.addEventListener("input", () => store.setQuestion(questionInput.value));
  questionInput.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") void store.submitQuery();
  });
  submitButton.addEventListener("click", () => void store.submitQuery());
  askButton.addEventListener("click", () => {
    if (store.askAboutSelection() !== null) void store.submitQuery();
  });
  expandButton.addEventListener("click", () => {
    const selected = store.view.selected;
    if (selected?.type === "node") void store.expandNode(selected.id);
  });
  undoButton.addEventListener("click", () => store.undoExpansion());

  void client
    .healthz()
    .then((health) => {
      requireEl<HTMLSpanElement>("status").textContent =
        `connected · snapshot ${health.snapshot_version}`;
    })
    .catch(() => {
      requireEl<HTMLSpanElement>("status").textContent = `service unreachable at ${baseUrl}`;
    });

  store.setQuestion("");
}

main();
