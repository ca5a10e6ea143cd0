import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import type { SessionEvent } from "../src/protocol.js";
import {
  applyAll,
  applyEvent,
  initialState,
  promptNodeIds,
  promptVisible,
} from "../src/state.js";

const GOLDEN: SessionEvent[] = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "events-100.json"), "utf-8"));

describe("event reducer", () => {
  it("replaying the recorded 100-event log equals live one-by-one delivery", () => {
    const batch = applyAll(initialState(), GOLDEN);
    let live = initialState();
    for (const event of GOLDEN) live = applyEvent(live, event);
    expect(batch).toEqual(live);
    expect(batch.appliedSeq).toBe(100);
  });

  it("chunked delivery with overlapping retransmits matches batch replay", () => {
    const batch = applyAll(initialState(), GOLDEN);
    let state = initialState();
    let at = 0;
    const chunkSizes = [7, 1, 23, 5, 40, 2, 60, 100];
    for (const size of chunkSizes) {
      const from = Math.max(0, at - 3); // overlap: duplicates must be ignored
      state = applyAll(state, GOLDEN.slice(from, Math.min(at + size, GOLDEN.length)));
      at = Math.min(at + size, GOLDEN.length);
    }
    expect(state).toEqual(batch);
  });

  it("duplicate and stale events are ignored", () => {
    const once = applyAll(initialState(), GOLDEN.slice(0, 10));
    const twice = applyAll(once, GOLDEN.slice(0, 10));
    expect(twice).toBe(once); // applyEvent returns the same object untouched
  });

  it("graph_committed carries the committed document and bumps the version", () => {
    const state = applyAll(initialState(), GOLDEN.slice(0, 1));
    expect(state.graphVersion).toBe(1);
    expect(state.graph?.variables.length).toBe(10);
    expect(state.phase).toBe("Ready");
  });

  it("a failure raises the prompt and AwaitingOperator shows it", () => {
    let state = initialState();
    for (const event of GOLDEN) {
      state = applyEvent(state, event);
      if (promptVisible(state)) break;
    }
    expect(state.phase).toBe("AwaitingOperator");
    expect(state.prompt?.question).toBe("Continue?");
    expect(promptNodeIds(state).length).toBeGreaterThan(0);
    expect(state.lastFailure?.success).toBe(false);
  });

  it("prompt clears when the phase leaves AwaitingOperator", () => {
    let state = initialState();
    let sawPromptThenCleared = false;
    let hadPrompt = false;
    for (const event of GOLDEN) {
      state = applyEvent(state, event);
      if (promptVisible(state)) hadPrompt = true;
      else if (hadPrompt && state.prompt === null) sawPromptThenCleared = true;
    }
    expect(sawPromptThenCleared).toBe(true);
  });

  it("batches accumulate trials and close with a summary", () => {
    const state = applyAll(initialState(), GOLDEN);
    const total = state.finishedBatches.reduce((n, b) => n + b.trials.length, 0) +
      (state.currentBatch?.trials.length ?? 0);
    const trialEvents = GOLDEN.filter((e) => e.kind === "trial_result").length;
    expect(total).toBe(trialEvents);
    for (const batch of state.finishedBatches) {
      if (batch.summary !== null) {
        expect(batch.summary.n).toBe(batch.trials.length);
      }
    }
  });
});
