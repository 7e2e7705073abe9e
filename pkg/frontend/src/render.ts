// SVG renderer: role-colored nodes, existing edges solid, drafts dashed.
// Clicking two nodes in a row drafts an edge between them.

import { forceLayout, type LayoutNode } from "./layout.js";
import type { CanvasState } from "./state.js";
import type { Role, SubgraphNode, SubgraphPayload } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export const ROLE_COLORS: Record<Role, string> = {
  focal_user: "#d62728",
  article: "#ff9e1b",
  co_propagator: "#1f77b4",
  publisher: "#9467bd",
  influencer: "#e4b414",
};

export interface RendererCallbacks {
  onNodeClick: (node: SubgraphNode) => void;
  onDraft: (ok: boolean, message: string) => void;
}

export class Renderer {
  private positions = new Map<string, LayoutNode>();

  constructor(
    private svg: SVGSVGElement,
    private state: CanvasState,
    private callbacks: RendererCallbacks,
  ) {}

  render(): void {
    const sg = this.state.subgraph;
    this.svg.replaceChildren();
    if (sg === null) return;
    const width = this.svg.clientWidth || 760;
    const height = this.svg.clientHeight || 520;
    this.positions = forceLayout(
      sg.nodes.map((n) => n.id),
      sg.edges.map(([s, d]) => [s, d] as [string, string]),
      width,
      height,
    );
    for (const [src, dst] of sg.edges) {
      this.drawEdge(src, dst, false);
    }
    for (const draft of this.state.drafts) {
      this.drawEdge(draft.src, draft.dst, true);
    }
    for (const node of sg.nodes) {
      this.drawNode(node);
    }
  }

  private drawEdge(src: string, dst: string, draft: boolean): void {
    const a = this.positions.get(src);
    const b = this.positions.get(dst);
    if (!a || !b) return;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("stroke", draft ? "#2ca02c" : "#bbbbbb");
    line.setAttribute("stroke-width", draft ? "2.5" : "1.2");
    if (draft) line.setAttribute("stroke-dasharray", "6 4");
    line.classList.add(draft ? "draft-edge" : "graph-edge");
    this.svg.appendChild(line);
  }

  private drawNode(node: SubgraphNode): void {
    const pos = this.positions.get(node.id);
    if (!pos) return;
    const group = document.createElementNS(SVG_NS, "g");
    group.classList.add("node");
    group.dataset.nodeId = node.id;

    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(pos.x));
    circle.setAttribute("cy", String(pos.y));
    circle.setAttribute("r", node.role === "focal_user" ? "14" : "10");
    circle.setAttribute("fill", ROLE_COLORS[node.role] ?? "#777777");
    circle.setAttribute(
      "stroke",
      this.state.selected === node.id ? "#000000" : "#ffffff",
    );
    circle.setAttribute("stroke-width", this.state.selected === node.id ? "3" : "1.5");
    group.appendChild(circle);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(pos.x));
    label.setAttribute("y", String(pos.y - 16));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("font-size", "10");
    label.textContent = node.metadata["username"] ?? node.metadata["name"] ?? node.id;
    group.appendChild(label);

    group.addEventListener("click", () => {
      const result = this.state.clickNode(node.id);
      this.callbacks.onNodeClick(node);
      if (result !== null) {
        if (result.ok) {
          this.callbacks.onDraft(true, `drafted ${result.draft.relation}`);
        } else {
          this.callbacks.onDraft(false, result.reason);
        }
      }
      this.render();
    });
    this.svg.appendChild(group);
  }
}
