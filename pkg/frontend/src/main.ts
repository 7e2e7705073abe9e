// Session driver: create a session, walk its sub-graph queue, collect drafts,
// submit, advance. Drafts survive a failed submit so nothing is lost on
// network errors.

import { ApiClient, ApiError } from "./api.js";
import { Renderer } from "./render.js";
import { CanvasState } from "./state.js";
import type { SubgraphNode } from "./types.js";

const api = new ApiClient("");
const state = new CanvasState();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

let sessionId: string | null = null;
let renderer: Renderer | null = null;

function setStatus(text: string, isError = false): void {
  const status = el<HTMLDivElement>("status");
  status.textContent = text;
  status.className = isError ? "status error" : "status";
}

function showMetadata(node: SubgraphNode): void {
  const panel = el<HTMLDivElement>("metadata");
  const rows = Object.entries(node.metadata)
    .map(([k, v]) => `<tr><th>${k}</th><td>${v}</td></tr>`)
    .join("");
  const predicted = node.predicted_label
    ? `<tr><th>predicted label</th><td>${node.predicted_label}</td></tr>`
    : "";
  panel.innerHTML = `<h3>${node.id} (${node.role})</h3><table>${rows}${predicted}</table>`;
}

function renderQuestions(): void {
  const list = el<HTMLOListElement>("questions");
  list.replaceChildren();
  for (const question of state.subgraph?.questions ?? []) {
    const item = document.createElement("li");
    item.textContent = question;
    list.appendChild(item);
  }
}

function updateDraftList(): void {
  const list = el<HTMLUListElement>("drafts");
  list.replaceChildren();
  for (const draft of state.drafts) {
    const item = document.createElement("li");
    item.textContent = `${draft.src} -> ${draft.dst} (${draft.relation})`;
    list.appendChild(item);
  }
  el<HTMLButtonElement>("submit").disabled = state.subgraph === null || state.submitted;
}

async function advance(): Promise<void> {
  if (sessionId === null) return;
  const subgraph = await api.nextSubgraph(sessionId);
  if (subgraph === null) {
    setStatus("Session complete: every sub-graph has been reviewed.");
    el<HTMLButtonElement>("submit").disabled = true;
    state.subgraph = null;
    renderer?.render();
    return;
  }
  state.load(subgraph);
  renderQuestions();
  updateDraftList();
  renderer?.render();
  setStatus(`Sub-graph ${subgraph.id}: focal pair ${subgraph.focal.join(" and ")}.`);
}

async function startSession(): Promise<void> {
  const split = el<HTMLSelectElement>("split").value;
  const criterion = el<HTMLSelectElement>("criterion").value;
  const count = Number(el<HTMLInputElement>("count").value) || 10;
  const interactor = el<HTMLInputElement>("interactor").value || "anonymous";
  try {
    const info = await api.createSession(split, criterion, count, interactor);
    sessionId = info.session_id;
    setStatus(`Session ${info.session_id} started with ${info.queued} sub-graphs.`);
    await advance();
  } catch (err) {
    setStatus(String(err), true);
  }
}

async function submit(): Promise<void> {
  if (sessionId === null || state.subgraph === null) return;
  const proposals = state.proposalsForSubmit();
  try {
    const counts = await api.submitEdges(sessionId, proposals);
    state.markSubmitted();
    setStatus(
      `Submitted: ${counts.accepted} accepted, ${counts.duplicate} duplicate, ` +
        `${counts.rejected} rejected.`,
    );
    await advance();
  } catch (err) {
    if (err instanceof ApiError) {
      // drafts stay on the canvas so they can be corrected and resubmitted
      setStatus(`Submit failed (${err.status}): ${err.detail}`, true);
    } else {
      setStatus(`Network failure, drafts kept locally: ${err}`, true);
    }
  }
}

function init(): void {
  renderer = new Renderer(
    el<HTMLDivElement>("canvas").querySelector("svg") as SVGSVGElement,
    state,
    {
      onNodeClick: showMetadata,
      onDraft: (ok, message) => {
        if (!ok) setStatus(`Rejected: ${message}`, true);
        updateDraftList();
      },
    },
  );
  el<HTMLButtonElement>("start").addEventListener("click", () => void startSession());
  el<HTMLButtonElement>("submit").addEventListener("click", () => void submit());
  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    state.undo();
    updateDraftList();
    renderer?.render();
  });
  el<HTMLButtonElement>("skip").addEventListener("click", () => void advance());
}

init();
