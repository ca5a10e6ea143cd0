/** Session view state: a pure fold over the event stream.
 *
 * Every piece of rendered state is derived from events up to `appliedSeq`;
 * replaying a recorded log therefore reconstructs exactly the live view.
 * Events at or below `appliedSeq` are ignored, which makes delivery
 * idempotent across reconnects.
 */

import type {
  BatchSummaryPayload,
  GraphDoc,
  Phase,
  PromptPayload,
  SessionEvent,
  TrialPayload,
} from "./protocol.js";

export interface PromptState extends PromptPayload {
  seq: number; // the ask_continue event that raised this prompt
}

export interface BatchState {
  plan: { trials: number; seed: number; forced: Record<string, string> } | null;
  trials: TrialPayload[];
  summary: BatchSummaryPayload | null;
}

export interface SessionViewState {
  appliedSeq: number;
  phase: Phase;
  graphVersion: number;
  graph: GraphDoc | null;
  currentBatch: BatchState | null;
  finishedBatches: BatchState[];
  prompt: PromptState | null;
  lastFailure: TrialPayload | null;
}

export function initialState(): SessionViewState {
  return {
    appliedSeq: 0,
    phase: "Editing",
    graphVersion: 0,
    graph: null,
    currentBatch: null,
    finishedBatches: [],
    prompt: null,
    lastFailure: null,
  };
}

export function applyEvent(state: SessionViewState, event: SessionEvent): SessionViewState {
  if (event.seq <= state.appliedSeq) return state;
  const next: SessionViewState = { ...state, appliedSeq: event.seq };
  const payload = event.payload as Record<string, never>;
  switch (event.kind) {
    case "graph_committed": {
      next.graph = payload["graph"] as GraphDoc;
      next.graphVersion = payload["version"] as number;
      next.phase = "Ready";
      break;
    }
    case "phase_changed": {
      next.phase = payload["phase"] as Phase;
      if (next.phase === "Executing" && payload["plan"] !== undefined) {
        next.currentBatch = { plan: payload["plan"], trials: [], summary: null };
        next.lastFailure = null;
      }
      if (next.phase === "Ready" && next.currentBatch !== null) {
        const summary = (payload["summary"] ?? null) as BatchSummaryPayload | null;
        const finished = { ...next.currentBatch, summary };
        next.finishedBatches = [...next.finishedBatches, finished];
        next.currentBatch = null;
      }
      if (next.phase !== "AwaitingOperator") next.prompt = null;
      break;
    }
    case "trial_result": {
      const trial = event.payload as unknown as TrialPayload;
      if (next.currentBatch !== null) {
        next.currentBatch = {
          ...next.currentBatch,
          trials: [...next.currentBatch.trials, trial],
        };
      }
      if (!trial.success) next.lastFailure = trial;
      break;
    }
    case "notify_failure": {
      next.lastFailure = payload["trial"] as TrialPayload;
      break;
    }
    case "ask_continue": {
      next.prompt = { seq: event.seq, ...(event.payload as unknown as PromptPayload) };
      break;
    }
    case "batch_progress":
      break;
  }
  return next;
}

export function applyAll(state: SessionViewState, events: SessionEvent[]): SessionViewState {
  let cur = state;
  for (const event of events) cur = applyEvent(cur, event);
  return cur;
}

/** Variables the active prompt refers to (they pulse on the canvas). */
export function promptNodeIds(state: SessionViewState): string[] {
  if (state.prompt === null || state.phase !== "AwaitingOperator") return [];
  return Object.keys(state.prompt.trial.world);
}

export function promptVisible(state: SessionViewState): boolean {
  return state.phase === "AwaitingOperator" && state.prompt !== null;
}
