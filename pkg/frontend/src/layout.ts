// Small deterministic force layout: spring edges, pairwise repulsion, light
// centering. Enough for a dozen nodes; no external dependencies.

export interface LayoutNode {
  id: string;
  x: number;
  y: number;
}

export function forceLayout(
  ids: string[],
  edges: [string, string][],
  width: number,
  height: number,
  iterations = 250,
): Map<string, LayoutNode> {
  const nodes = new Map<string, LayoutNode>();
  // deterministic ring start so reruns render identically
  ids.forEach((id, i) => {
    const angle = (2 * Math.PI * i) / Math.max(1, ids.length);
    nodes.set(id, {
      id,
      x: width / 2 + Math.cos(angle) * width * 0.3,
      y: height / 2 + Math.sin(angle) * height * 0.3,
    });
  });
  const springLength = Math.min(width, height) / 4;
  const repulsion = springLength * springLength * 0.9;

  for (let iter = 0; iter < iterations; iter++) {
    const step = 0.02 * (1 - iter / iterations) + 0.002;
    const fx = new Map<string, number>();
    const fy = new Map<string, number>();
    ids.forEach((id) => {
      fx.set(id, 0);
      fy.set(id, 0);
    });

    for (let i = 0; i < ids.length; i++) {
      for (let j = i + 1; j < ids.length; j++) {
        const a = nodes.get(ids[i])!;
        const b = nodes.get(ids[j])!;
        const dx = a.x - b.x;
        const dy = a.y - b.y;
        const d2 = Math.max(25, dx * dx + dy * dy);
        const f = repulsion / d2;
        const d = Math.sqrt(d2);
        fx.set(a.id, fx.get(a.id)! + (f * dx) / d);
        fy.set(a.id, fy.get(a.id)! + (f * dy) / d);
        fx.set(b.id, fx.get(b.id)! - (f * dx) / d);
        fy.set(b.id, fy.get(b.id)! - (f * dy) / d);
      }
    }
    for (const [s, d] of edges) {
      const a = nodes.get(s);
      const b = nodes.get(d);
      if (!a || !b) continue;
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const dist = Math.max(5, Math.sqrt(dx * dx + dy * dy));
      const f = (dist - springLength) * 0.7;
      fx.set(a.id, fx.get(a.id)! + (f * dx) / dist);
      fy.set(a.id, fy.get(a.id)! + (f * dy) / dist);
      fx.set(b.id, fx.get(b.id)! - (f * dx) / dist);
      fy.set(b.id, fy.get(b.id)! - (f * dy) / dist);
    }
    const margin = 30;
    for (const id of ids) {
      const n = nodes.get(id)!;
      n.x += (width / 2 - n.x) * 0.002 + fx.get(id)! * step * 50;
      n.y += (height / 2 - n.y) * 0.002 + fy.get(id)! * step * 50;
      n.x = Math.min(width - margin, Math.max(margin, n.x));
      n.y = Math.min(height - margin, Math.max(margin, n.y));
    }
  }
  return nodes;
}
