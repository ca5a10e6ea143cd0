// @vitest-environment jsdom
import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import { GraphCanvas, edgeThickness, influenceColor, prominenceFill } from "../src/canvas.js";
import { applyAll, applyEvent, initialState } from "../src/state.js";
import type { GraphDoc, SessionEvent } from "../src/protocol.js";

const GOLDEN: SessionEvent[] = JSON.parse(
  readFileSync(join(__dirname, "fixtures", "events-100.json"), "utf-8"));

function committedGraph(): GraphDoc {
  const state = applyAll(initialState(), GOLDEN);
  return state.graph as GraphDoc;
}

function makeCanvas(): { svg: SVGSVGElement; canvas: GraphCanvas } {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg") as SVGSVGElement;
  document.body.appendChild(svg);
  return { svg, canvas: new GraphCanvas(svg) };
}

describe("graph canvas", () => {
  it("renders exactly one node per variable and one line per edge", () => {
    const graph = committedGraph();
    const { svg, canvas } = makeCanvas();
    canvas.render(graph);
    const nodeIds = [...svg.querySelectorAll<SVGGElement>(".node")]
      .map((g) => g.dataset.id).sort();
    expect(nodeIds).toEqual(graph.variables.map((v) => v.id).sort());
    const edgeKeys = [...svg.querySelectorAll<SVGLineElement>(".edge")]
      .map((l) => `${l.dataset.src}->${l.dataset.dst}`).sort();
    expect(edgeKeys).toEqual(graph.edges.map((e) => `${e.src}->${e.dst}`).sort());
  });

  it("edge thickness is strictly increasing in strength", () => {
    let prev = -Infinity;
    for (let s = 0; s <= 1.0001; s += 0.05) {
      const w = edgeThickness(Math.min(s, 1));
      expect(w).toBeGreaterThan(prev);
      prev = w;
    }
  });

  it("rendered stroke width follows the strength annotation", () => {
    const graph = committedGraph();
    const { svg, canvas } = makeCanvas();
    canvas.render(graph);
    for (const line of svg.querySelectorAll<SVGLineElement>(".edge")) {
      const edge = graph.edges.find(
        (e) => e.src === line.dataset.src && e.dst === line.dataset.dst)!;
      expect(Number(line.getAttribute("stroke-width"))).toBeCloseTo(
        edgeThickness(edge.strength), 12);
    }
  });

  it("influence drives the edge color gradient", () => {
    expect(influenceColor(0)).not.toBe(influenceColor(1));
    const graph = committedGraph();
    const { svg, canvas } = makeCanvas();
    const influence = new Map(graph.edges.map(
      (e, i) => [`${e.src}->${e.dst}`, i / graph.edges.length] as const));
    canvas.render(graph, { influence: new Map(influence) });
    for (const line of svg.querySelectorAll<SVGLineElement>(".edge")) {
      const key = `${line.dataset.src}->${line.dataset.dst}`;
      expect(line.getAttribute("stroke")).toBe(influenceColor(influence.get(key)!));
    }
  });

  it("prominence darkens the node fill", () => {
    expect(prominenceFill(0.9)).not.toBe(prominenceFill(0.1));
    const graph = committedGraph();
    graph.variables[0] = { ...graph.variables[0], prominence: 0.95 };
    const { svg, canvas } = makeCanvas();
    canvas.render(graph);
    const first = svg.querySelector<SVGGElement>(
      `.node[data-id="${graph.variables[0].id}"] ellipse`)!;
    expect(first.getAttribute("fill")).toBe(prominenceFill(0.95));
  });

  it("prompt-referenced nodes pulse and error subjects dim", () => {
    const graph = committedGraph();
    const { svg, canvas } = makeCanvas();
    canvas.render(graph, {
      pulseNodes: ["Weight"],
      report: {
        is_valid: false,
        issues: [{ severity: "error", subject: "Gripper", message: "stale mechanism" }],
      },
    });
    expect(svg.querySelector('.node[data-id="Weight"]')!.classList.contains("pulse"))
      .toBe(true);
    const gripper = svg.querySelector('.node[data-id="Gripper"]')!;
    expect(gripper.classList.contains("invalid")).toBe(true);
    expect(gripper.querySelector("ellipse")!.getAttribute("opacity")).toBe("0.45");
  });

  it("rendering is a pure function of the applied events", () => {
    const graph = committedGraph();
    const a = makeCanvas();
    const b = makeCanvas();
    a.canvas.render(graph);
    b.canvas.render(graph);
    expect(a.svg.innerHTML).toBe(b.svg.innerHTML);
  });

  it("replaying the recorded log yields the same final DOM as live delivery", () => {
    const batchState = applyAll(initialState(), GOLDEN);
    let liveState = initialState();
    for (const event of GOLDEN) liveState = applyEvent(liveState, event);
    const a = makeCanvas();
    const b = makeCanvas();
    a.canvas.render(batchState.graph as GraphDoc);
    b.canvas.render(liveState.graph as GraphDoc);
    expect(a.svg.innerHTML).toBe(b.svg.innerHTML);
  });
});
