/** Side panels: distribution bar chart, what-if form, prompt card, validation. */

import type { ApiClient, ServiceError } from "./client.js";
import type {
  DistributionView,
  GraphDoc,
  QueryRequest,
  ValidationReport,
} from "./protocol.js";
import type { PromptState } from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";

/** Bar chart of a distribution; bar values carry the API numbers verbatim. */
export function renderDistribution(
  container: HTMLElement,
  dist: DistributionView,
  queryEcho: string,
): void {
  container.replaceChildren();
  const heading = document.createElement("div");
  heading.className = "dist-heading";
  heading.textContent = `${queryEcho} @ graph v${dist.graph_version}`;
  container.appendChild(heading);

  const width = 260;
  const barH = 26;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "dist-chart");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(dist.domain.length * (barH + 8)));
  dist.domain.forEach((label, i) => {
    const y = i * (barH + 8);
    const bar = document.createElementNS(SVG_NS, "rect");
    bar.setAttribute("class", "dist-bar");
    bar.dataset.value = String(dist.p[i]);
    bar.dataset.label = label;
    bar.setAttribute("x", "70");
    bar.setAttribute("y", String(y));
    bar.setAttribute("height", String(barH));
    bar.setAttribute("width", String(Math.max(1, (width - 130) * dist.p[i])));
    bar.setAttribute("fill", "#4478b8");
    svg.appendChild(bar);

    const name = document.createElementNS(SVG_NS, "text");
    name.textContent = label;
    name.setAttribute("x", "64");
    name.setAttribute("y", String(y + barH / 2 + 4));
    name.setAttribute("text-anchor", "end");
    svg.appendChild(name);

    const value = document.createElementNS(SVG_NS, "text");
    value.setAttribute("class", "dist-value");
    value.textContent = String(dist.p[i]);
    value.setAttribute("x", String(76 + Math.max(1, (width - 130) * dist.p[i])));
    value.setAttribute("y", String(y + barH / 2 + 4));
    svg.appendChild(value);
  });
  container.appendChild(svg);
  if (dist.meta["flag"] !== undefined) {
    const flag = document.createElement("div");
    flag.className = "dist-flag";
    flag.textContent = `flag: ${dist.meta["flag"]}`;
    container.appendChild(flag);
  }
}

/** What-if form: target, do/given assignments, counterfactual toggle. */
export class WhatIfPanel {
  root: HTMLElement;
  private chart: HTMLElement;
  private banner: HTMLElement;
  private targetSel!: HTMLSelectElement;
  private cfToggle!: HTMLInputElement;
  private doRows!: HTMLElement;
  private givenRows!: HTMLElement;
  private graph: GraphDoc | null = null;

  constructor(private client: ApiClient, private sessionId: string) {
    this.root = document.createElement("div");
    this.root.className = "whatif";
    this.root.innerHTML = `
      <h3>What if?</h3>
      <div class="banner" hidden></div>
      <label>target <select class="target"></select></label>
      <label class="cf-label"><input type="checkbox" class="cf"> counterfactual</label>
      <fieldset class="do"><legend>do(...)</legend><div class="rows"></div>
        <button type="button" class="add-do">+ do</button></fieldset>
      <fieldset class="given"><legend>given</legend><div class="rows"></div>
        <button type="button" class="add-given">+ given</button></fieldset>
      <button type="button" class="run">Run query</button>
      <div class="chart"></div>`;
    this.chart = this.root.querySelector<HTMLElement>(".chart")!;
    this.banner = this.root.querySelector<HTMLElement>(".banner")!;
    this.targetSel = this.root.querySelector<HTMLSelectElement>(".target")!;
    this.cfToggle = this.root.querySelector<HTMLInputElement>(".cf")!;
    this.doRows = this.root.querySelector<HTMLElement>(".do .rows")!;
    this.givenRows = this.root.querySelector<HTMLElement>(".given .rows")!;
    this.root.querySelector(".add-do")!
      .addEventListener("click", () => this.addRow(this.doRows));
    this.root.querySelector(".add-given")!
      .addEventListener("click", () => this.addRow(this.givenRows));
    this.root.querySelector(".run")!.addEventListener("click", () => void this.run());
  }

  setGraph(graph: GraphDoc): void {
    this.graph = graph;
    this.targetSel.replaceChildren(
      ...graph.variables.map((v) => new Option(v.id, v.id)));
  }

  private addRow(into: HTMLElement): void {
    if (!this.graph) return;
    const row = document.createElement("div");
    row.className = "assign-row";
    const varSel = document.createElement("select");
    varSel.className = "var";
    varSel.replaceChildren(...this.graph.variables.map((v) => new Option(v.id, v.id)));
    const valSel = document.createElement("select");
    valSel.className = "val";
    const fill = () => {
      const domain = this.graph!.variables.find((v) => v.id === varSel.value)?.domain ?? [];
      valSel.replaceChildren(...domain.map((d) => new Option(d, d)));
    };
    varSel.addEventListener("change", fill);
    fill();
    row.append(varSel, valSel);
    into.appendChild(row);
  }

  private collect(rows: HTMLElement): Record<string, string> {
    const out: Record<string, string> = {};
    rows.querySelectorAll<HTMLElement>(".assign-row").forEach((row) => {
      const name = row.querySelector<HTMLSelectElement>(".var")!.value;
      const value = row.querySelector<HTMLSelectElement>(".val")!.value;
      out[name] = value;
    });
    return out;
  }

  buildRequest(): QueryRequest {
    return {
      kind: this.cfToggle.checked ? "counterfactual" : "query",
      target: this.targetSel.value,
      do: this.collect(this.doRows),
      given: this.collect(this.givenRows),
    };
  }

  async run(): Promise<void> {
    const req = this.buildRequest();
    this.banner.hidden = true;
    try {
      const dist = await this.client.query(this.sessionId, req);
      const parts = [`P(${req.target}`];
      const dos = Object.entries(req.do).map(([k, v]) => `do(${k}=${v})`);
      const givens = Object.entries(req.given).map(([k, v]) => `${k}=${v}`);
      const cond = [...dos, ...givens].join(", ");
      const echo = `${parts}${cond ? " | " + cond : ""})` +
        (req.kind === "counterfactual" ? " [counterfactual]" : "");
      renderDistribution(this.chart, dist, echo);
    } catch (err) {
      const service = err as ServiceError;
      if (service.error === undefined) throw err;
      // error codes render verbatim
      this.banner.textContent = `${service.error.code}: ${service.error.detail}`;
      this.banner.hidden = false;
      this.chart.replaceChildren();
    }
  }
}

/** Continue?/Abort card; sends exactly one respond per prompt. */
export class PromptCard {
  root: HTMLElement;
  private respondedSeq: number | null = null;
  private current: PromptState | null = null;

  constructor(private send: (cont: boolean) => void) {
    this.root = document.createElement("div");
    this.root.className = "prompt-card";
    this.root.hidden = true;
    this.root.innerHTML = `
      <div class="summary"></div>
      <div class="question"></div>
      <button type="button" class="continue">Continue</button>
      <button type="button" class="abort">Abort</button>`;
    this.root.querySelector(".continue")!
      .addEventListener("click", () => this.click(true));
    this.root.querySelector(".abort")!
      .addEventListener("click", () => this.click(false));
  }

  update(prompt: PromptState | null, visible: boolean): void {
    this.current = prompt;
    this.root.hidden = !visible || prompt === null;
    if (prompt === null || !visible) return;
    const trial = prompt.trial;
    const progress = prompt.progress;
    this.root.querySelector(".summary")!.textContent =
      `trial ${trial.index} failed (${trial.failure_reason ?? "unknown"}) — ` +
      `${progress.successes}/${progress.completed} ok of ${progress.total}`;
    this.root.querySelector(".question")!.textContent = prompt.question;
  }

  private click(cont: boolean): void {
    if (this.current === null) return;
    if (this.respondedSeq === this.current.seq) return; // one respond per prompt
    this.respondedSeq = this.current.seq;
    this.send(cont);
  }
}

export function renderValidation(container: HTMLElement,
                                 report: ValidationReport | null): void {
  container.replaceChildren();
  if (report === null) return;
  for (const issue of report.issues) {
    const row = document.createElement("div");
    row.className = `issue ${issue.severity}`;
    row.dataset.subject = issue.subject;
    row.textContent = `[${issue.subject}] ${issue.message}`;
    container.appendChild(row);
  }
}
