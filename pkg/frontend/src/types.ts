// Payload shapes, mirrored one-to-one from the service's response models.
// The console never derives numbers of its own; everything rendered comes
// from one of these.

export interface Objectives {
  merit: number;
  diversity: number;
  preference: number;
}

export interface FrontMember {
  index: number;
  assignments: Record<string, string>;
  objectives: Objectives;
  violations: [string, number][];
  feasible: boolean;
}

export interface HistoryRow {
  generation: number;
  front1_size: number;
  hypervolume: number;
  diversity_weight: number;
  violations: number;
}

export interface FrontPayload {
  job_id: string;
  diversity_weight: number;
  escalations: number[];
  members: FrontMember[];
  history: HistoryRow[];
}

export interface SelectionPayload {
  job_id: string;
  policy_weights: [number, number, number];
  mandatory: string[];
  selection_epoch: number;
  assignments: Record<string, string>;
  objectives: Objectives;
  violations: [string, number][];
  overrides_applied: number;
}

export interface OverrideAck {
  applied: boolean;
  record: Record<string, unknown>;
  selection: SelectionPayload;
}

export interface FairnessPayload {
  job_id: string;
  per_category: Record<string, Record<string, number>>;
  demographic_parity: number;
  equalized_opportunity: number;
  calibration: number;
  composite: number;
}

export interface FeedbackPayload {
  weights: [number, number, number];
  eta: number;
  override_counts: Record<string, number>;
}

export interface ExplanationPayload {
  candidate_id: string;
  role_id: string;
  shap: {
    baseline: number;
    score: number;
    attributions: Record<string, number>;
  };
  executive_summary: string[];
  comparative: Record<string, { feature: string; delta_phi: number }[]>;
  counterfactual: {
    achievable: boolean;
    target_rank: number;
    edits: { kind: string; detail: string; resulting_rank: number }[];
  };
}

export interface JobStatus {
  job_id: string;
  dataset_id: string;
  status: string;
  error: string | null;
  created_at: string;
  finished_at: string | null;
}

export interface OverrideBody {
  candidate_id: string;
  to_role: string | null;
  justification: string;
  actor?: string;
  reason?: string;
}

export interface AllocationBody {
  dataset_id: string;
  population?: number;
  max_generations?: number;
  seed?: number;
  embed_dim?: number;
  [key: string]: unknown;
}
