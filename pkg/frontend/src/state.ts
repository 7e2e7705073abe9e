// Canvas state: one sub-graph at a time, local draft edges, client-side
// validation mirroring the server's 422 rules so bad drafts never leave the
// browser.

import type { DraftEdge, NodeKind, ProposalBody, SubgraphPayload } from "./types.js";

// relation chosen from the endpoint kinds; anything not listed is invalid
const SIGNATURES: Record<string, string> = {
  "user|user": "interact_uu",
  "user|article": "interact_ua",
  "article|article": "interact_aa",
  "user|source": "interact_us",
};

export type DraftResult = { ok: true; draft: DraftEdge } | { ok: false; reason: string };

export function kindOf(id: string): NodeKind {
  return id.split(":")[0] as NodeKind;
}

/** Pick the interaction relation for a node pair, orienting user-first.
 * Returns null when no interaction question covers the pair. */
export function relationFor(a: string, b: string): { src: string; dst: string; relation: string } | null {
  const ka = kindOf(a);
  const kb = kindOf(b);
  if (SIGNATURES[`${ka}|${kb}`]) return { src: a, dst: b, relation: SIGNATURES[`${ka}|${kb}`] };
  if (SIGNATURES[`${kb}|${ka}`]) return { src: b, dst: a, relation: SIGNATURES[`${kb}|${ka}`] };
  return null;
}

export class CanvasState {
  subgraph: SubgraphPayload | null = null;
  selected: string | null = null;
  drafts: DraftEdge[] = [];
  submitted = false;

  load(subgraph: SubgraphPayload): void {
    this.subgraph = subgraph;
    this.selected = null;
    this.drafts = [];
    this.submitted = false;
  }

  nodeIds(): Set<string> {
    return new Set((this.subgraph?.nodes ?? []).map((n) => n.id));
  }

  /** Select a node, or draft an edge from the previous selection to it. */
  clickNode(id: string): DraftResult | null {
    if (this.selected === null || this.selected === id) {
      this.selected = this.selected === id ? null : id;
      return null;
    }
    const result = this.draftEdge(this.selected, id);
    this.selected = null;
    return result;
  }

  draftEdge(a: string, b: string): DraftResult {
    if (this.subgraph === null) return { ok: false, reason: "no sub-graph loaded" };
    if (this.submitted) return { ok: false, reason: "sub-graph already submitted" };
    if (a === b) return { ok: false, reason: "cannot connect a node to itself" };
    const ids = this.nodeIds();
    if (!ids.has(a) || !ids.has(b)) {
      return { ok: false, reason: "both endpoints must be in the sub-graph" };
    }
    const oriented = relationFor(a, b);
    if (oriented === null) {
      return { ok: false, reason: `no interaction connects ${kindOf(a)} and ${kindOf(b)}` };
    }
    if (this.hasDraft(a, b)) return { ok: false, reason: "edge already drafted" };
    const exists = (this.subgraph.edges ?? []).some(
      ([s, d, r]) => r === oriented.relation && ((s === oriented.src && d === oriented.dst) || (s === oriented.dst && d === oriented.src)),
    );
    if (exists) return { ok: false, reason: "edge already exists in the graph" };
    const draft: DraftEdge = { ...oriented };
    this.drafts.push(draft);
    return { ok: true, draft };
  }

  hasDraft(a: string, b: string): boolean {
    return this.drafts.some(
      (d) => (d.src === a && d.dst === b) || (d.src === b && d.dst === a),
    );
  }

  undo(): DraftEdge | null {
    return this.drafts.pop() ?? null;
  }

  proposalsForSubmit(): ProposalBody[] {
    if (this.subgraph === null) return [];
    const id = this.subgraph.id;
    return this.drafts.map((d) => ({ subgraph_id: id, ...d }));
  }

  markSubmitted(): void {
    this.submitted = true;
  }
}
