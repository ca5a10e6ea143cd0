/** SVG node-link canvas with the operator's visual encodings.
 *
 * Nodes: fill shade tracks prominence, opacity tracks validation status, and
 * a pulse class marks nodes the active prompt refers to. Edges: stroke width
 * is a strictly increasing function of the operator's strength annotation;
 * stroke color is a gradient over the computed influence.
 */

import type { EdgeDoc, GraphDoc, ValidationReport } from "./protocol.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const NODE_RX = 46;
const NODE_RY = 24;

export function edgeThickness(strength: number): number {
  return 1.5 + 6 * strength;
}

/** Gray for influence 0 through amber to red at influence 1. */
export function influenceColor(influence: number): string {
  const x = Math.max(0, Math.min(1, influence));
  const r = Math.round(120 + 135 * x);
  const g = Math.round(120 - 40 * x);
  const b = Math.round(120 - 90 * x);
  return `rgb(${r},${g},${b})`;
}

export function prominenceFill(prominence: number): string {
  // deeper blue for more prominent nodes
  const light = Math.round(92 - 50 * prominence);
  return `hsl(210,55%,${light}%)`;
}

export interface CanvasCallbacks {
  onNodeClick?(id: string): void;
  onNodeDoubleClick?(id: string): void;
  onEdgeClick?(edge: EdgeDoc): void;
  onConnect?(src: string, dst: string): void;
  onNodeMoved?(id: string, x: number, y: number): void;
}

interface NodeVisual {
  group: SVGGElement;
  shape: SVGEllipseElement;
  x: number;
  y: number;
}

export class GraphCanvas {
  private nodes = new Map<string, NodeVisual>();
  private dragging: { id: string; dx: number; dy: number; moved: boolean } | null = null;
  private connecting: { src: string; line: SVGLineElement } | null = null;

  constructor(
    private svg: SVGSVGElement,
    private callbacks: CanvasCallbacks = {},
  ) {
    svg.addEventListener("mousemove", (e) => this.onMouseMove(e));
    svg.addEventListener("mouseup", (e) => this.onMouseUp(e));
  }

  render(
    graph: GraphDoc,
    options: {
      influence?: Map<string, number>;       // "src->dst" -> value
      report?: ValidationReport | null;
      pulseNodes?: string[];
    } = {},
  ): void {
    this.svg.replaceChildren();
    this.nodes.clear();
    const layout = this.resolveLayout(graph);
    const badSubjects = new Set(
      (options.report?.issues ?? [])
        .filter((i) => i.severity === "error")
        .map((i) => i.subject));
    const pulsing = new Set(options.pulseNodes ?? []);

    const edgeLayer = document.createElementNS(SVG_NS, "g");
    edgeLayer.setAttribute("class", "edges");
    this.svg.appendChild(edgeLayer);
    for (const edge of graph.edges) {
      const [x1, y1] = layout.get(edge.src)!;
      const [x2, y2] = layout.get(edge.dst)!;
      const line = document.createElementNS(SVG_NS, "line");
      line.setAttribute("class", "edge");
      line.dataset.src = edge.src;
      line.dataset.dst = edge.dst;
      line.setAttribute("x1", String(x1));
      line.setAttribute("y1", String(y1));
      line.setAttribute("x2", String(x2));
      line.setAttribute("y2", String(y2));
      line.setAttribute("stroke-width", String(edgeThickness(edge.strength)));
      const influence = options.influence?.get(`${edge.src}->${edge.dst}`);
      line.setAttribute("stroke", influenceColor(influence ?? 0));
      line.setAttribute("marker-end", "url(#arrow)");
      if (influence !== undefined) {
        line.dataset.influence = influence.toFixed(4);
      }
      line.addEventListener("click", () => this.callbacks.onEdgeClick?.(edge));
      edgeLayer.appendChild(line);
    }
    this.installArrowMarker();

    const nodeLayer = document.createElementNS(SVG_NS, "g");
    nodeLayer.setAttribute("class", "nodes");
    this.svg.appendChild(nodeLayer);
    for (const variable of graph.variables) {
      const [x, y] = layout.get(variable.id)!;
      const group = document.createElementNS(SVG_NS, "g");
      group.setAttribute("class", "node");
      group.dataset.id = variable.id;
      group.setAttribute("transform", `translate(${x},${y})`);

      const shape = document.createElementNS(SVG_NS, "ellipse");
      shape.setAttribute("rx", String(NODE_RX));
      shape.setAttribute("ry", String(NODE_RY));
      shape.setAttribute("fill", prominenceFill(variable.prominence));
      shape.setAttribute("opacity", badSubjects.has(variable.id) ? "0.45" : "1");
      if (badSubjects.has(variable.id)) group.classList.add("invalid");
      if (pulsing.has(variable.id)) group.classList.add("pulse");

      const label = document.createElementNS(SVG_NS, "text");
      label.textContent = variable.id;
      label.setAttribute("text-anchor", "middle");
      label.setAttribute("dy", "5");

      group.appendChild(shape);
      group.appendChild(label);
      group.addEventListener("mousedown", (e) => this.onNodeMouseDown(e, variable.id));
      group.addEventListener("click", () => {
        if (this.dragging?.moved) return;
        this.callbacks.onNodeClick?.(variable.id);
      });
      group.addEventListener("dblclick", () => this.callbacks.onNodeDoubleClick?.(variable.id));
      nodeLayer.appendChild(group);
      this.nodes.set(variable.id, { group, shape, x, y });
    }
  }

  /** Operator-owned positions; simple grid only for nodes without one. */
  private resolveLayout(graph: GraphDoc): Map<string, [number, number]> {
    const out = new Map<string, [number, number]>();
    let placed = 0;
    for (const variable of graph.variables) {
      const pos = graph.layout[variable.id];
      if (pos) {
        out.set(variable.id, [pos[0], pos[1]]);
      } else {
        out.set(variable.id, [110 + (placed % 5) * 140, 80 + Math.floor(placed / 5) * 110]);
        placed += 1;
      }
    }
    return out;
  }

  private installArrowMarker(): void {
    const defs = document.createElementNS(SVG_NS, "defs");
    defs.innerHTML =
      '<marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" ' +
      'markerWidth="7" markerHeight="7" orient="auto-start-reverse">' +
      '<path d="M 0 0 L 10 5 L 0 10 z" fill="#555"/></marker>';
    this.svg.appendChild(defs);
  }

  private svgPoint(e: MouseEvent): [number, number] {
    const rect = this.svg.getBoundingClientRect();
    return [e.clientX - rect.left, e.clientY - rect.top];
  }

  private onNodeMouseDown(e: MouseEvent, id: string): void {
    e.preventDefault();
    const visual = this.nodes.get(id)!;
    const [px, py] = this.svgPoint(e);
    if (e.shiftKey) {
      // shift-drag starts a connection gesture
      const line = document.createElementNS(SVG_NS, "line");
      line.setAttribute("class", "connect-preview");
      line.setAttribute("x1", String(visual.x));
      line.setAttribute("y1", String(visual.y));
      line.setAttribute("x2", String(px));
      line.setAttribute("y2", String(py));
      line.setAttribute("stroke", "#888");
      line.setAttribute("stroke-dasharray", "6 4");
      this.svg.appendChild(line);
      this.connecting = { src: id, line };
    } else {
      this.dragging = { id, dx: visual.x - px, dy: visual.y - py, moved: false };
    }
  }

  private onMouseMove(e: MouseEvent): void {
    const [px, py] = this.svgPoint(e);
    if (this.dragging) {
      const visual = this.nodes.get(this.dragging.id)!;
      visual.x = px + this.dragging.dx;
      visual.y = py + this.dragging.dy;
      this.dragging.moved = true;
      visual.group.setAttribute("transform", `translate(${visual.x},${visual.y})`);
    } else if (this.connecting) {
      this.connecting.line.setAttribute("x2", String(px));
      this.connecting.line.setAttribute("y2", String(py));
    }
  }

  private onMouseUp(e: MouseEvent): void {
    if (this.dragging) {
      const { id, moved } = this.dragging;
      const visual = this.nodes.get(id)!;
      if (moved) this.callbacks.onNodeMoved?.(id, visual.x, visual.y);
      this.dragging = null;
      return;
    }
    if (this.connecting) {
      const [px, py] = this.svgPoint(e);
      const target = this.nodeAt(px, py);
      this.connecting.line.remove();
      if (target && target !== this.connecting.src) {
        this.callbacks.onConnect?.(this.connecting.src, target);
      }
      this.connecting = null;
    }
  }

  private nodeAt(x: number, y: number): string | null {
    for (const [id, visual] of this.nodes) {
      const nx = (x - visual.x) / NODE_RX;
      const ny = (y - visual.y) / NODE_RY;
      if (nx * nx + ny * ny <= 1) return id;
    }
    return null;
  }
}
