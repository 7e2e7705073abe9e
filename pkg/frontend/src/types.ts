// Payload shapes exchanged with the interaction service.

export type NodeKind = "source" | "article" | "user";

export type Role =
  | "focal_user"
  | "article"
  | "co_propagator"
  | "publisher"
  | "influencer";

export interface SubgraphNode {
  id: string;
  kind: NodeKind;
  role: Role;
  metadata: Record<string, string>;
  predicted_label?: string;
}

export interface SubgraphPayload {
  id: string;
  focal: [string, string];
  criterion: string;
  nodes: SubgraphNode[];
  edges: [string, string, string][];
  questions: string[];
}

export interface ProposalBody {
  subgraph_id: string;
  src: string;
  dst: string;
  relation: string;
}

export interface SubmitCounts {
  accepted: number;
  duplicate: number;
  rejected: number;
}

export interface SessionInfo {
  session_id: string;
  queued: number;
}

export interface DraftEdge {
  src: string;
  dst: string;
  relation: string;
}
