/** Wire types mirroring the causal-loop service JSON shapes. */

export type Phase = "Editing" | "Ready" | "Executing" | "AwaitingOperator";

export type EventKind =
  | "phase_changed"
  | "trial_result"
  | "batch_progress"
  | "notify_failure"
  | "ask_continue"
  | "graph_committed";

export interface SessionEvent {
  seq: number;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export interface VariableDoc {
  id: string;
  domain: string[];
  note: string;
  prominence: number;
}

export interface EdgeDoc {
  src: string;
  dst: string;
  strength: number;
}

export interface MechanismRow {
  given: Record<string, string>;
  p: number[];
}

export interface GraphDoc {
  version: number;
  variables: VariableDoc[];
  edges: EdgeDoc[];
  mechanisms: Record<string, { rows: MechanismRow[] }>;
  layout: Record<string, [number, number]>;
  [extra: string]: unknown;
}

export interface SessionView {
  id: string;
  scenario: string;
  phase: Phase;
  version: number;
  last_seq: number;
  pending_prompt: PromptPayload | null;
  open_transaction: boolean;
}

export interface TrialPayload {
  index: number;
  world: Record<string, string>;
  gripper_mode: string;
  success: boolean;
  failure_reason: string | null;
}

export interface PromptPayload {
  question: string;
  trial: TrialPayload;
  progress: { completed: number; total: number; successes: number; failures: number };
}

export interface BatchSummaryPayload {
  n: number;
  successes: number;
  success_rate: number;
  per_type: Record<string, { n: number; successes: number; rate: number }>;
  seed: number;
  aborted: boolean;
}

export interface DistributionView {
  variable: string;
  domain: string[];
  p: number[];
  meta: Record<string, unknown>;
  graph_version: number;
}

export interface EdgeInfluence {
  src: string;
  dst: string;
  strength: number;
  influence: number;
}

export interface QueryRequest {
  kind: "query" | "counterfactual";
  target: string;
  do: Record<string, string>;
  given: Record<string, string>;
  seed?: number;
}

export interface ValidationIssue {
  severity: "error" | "warning";
  subject: string;
  message: string;
}

export interface ValidationReport {
  is_valid: boolean;
  issues: ValidationIssue[];
}

export interface ApiError {
  code: string;
  detail: string;
  report?: ValidationReport;
}

export type EditOp =
  | { op: "add_node"; id: string; domain: string[]; note?: string; prominence?: number }
  | { op: "add_edge"; src: string; dst: string; strength?: number }
  | { op: "remove"; id: string }
  | { op: "set_mechanism"; node: string; rows: MechanismRow[] }
  | { op: "annotate"; id: string; note?: string; prominence?: number;
      strength?: number; position?: [number, number] };
