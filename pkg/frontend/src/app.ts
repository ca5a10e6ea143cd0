/** Session page assembly: canvas, edit tools, panels, execution monitor. */

import { ApiClient, EventChannel, ServiceError } from "./client.js";
import { GraphCanvas } from "./canvas.js";
import { TransactionBuilder } from "./editor.js";
import { PromptCard, WhatIfPanel, renderValidation } from "./panels.js";
import {
  applyEvent,
  initialState,
  promptNodeIds,
  promptVisible,
  SessionViewState,
} from "./state.js";
import type { GraphDoc, MechanismRow, ValidationReport } from "./protocol.js";

export class SessionApp {
  state: SessionViewState = initialState();
  private canvas: GraphCanvas;
  private txn: TransactionBuilder;
  private whatIf: WhatIfPanel;
  private prompt: PromptCard;
  private channel: EventChannel;
  private influence = new Map<string, number>();
  private report: ValidationReport | null = null;

  constructor(
    private client: ApiClient,
    private sessionId: string,
    private root: HTMLElement,
  ) {
    this.root.innerHTML = `
      <div class="status-bar">
        <span class="phase"></span>
        <span class="version"></span>
        <span class="stale-banner" hidden>connection lost — replaying…</span>
      </div>
      <div class="columns">
        <div class="canvas-wrap">
          <svg class="graph-canvas" width="760" height="520"></svg>
          <div class="edit-bar">
            <button type="button" class="begin">Edit</button>
            <button type="button" class="commit">Commit</button>
            <span class="txn-info"></span>
          </div>
          <div class="validation"></div>
          <div class="cpt-editor" hidden></div>
        </div>
        <div class="side">
          <div class="prompt-slot"></div>
          <div class="exec">
            <h3>Execute</h3>
            <label>trials <input class="trials" type="number" value="10"></label>
            <label>seed <input class="seed" type="number" value="0"></label>
            <button type="button" class="start">Start</button>
          </div>
          <div class="whatif-slot"></div>
          <div class="batches"></div>
        </div>
      </div>`;

    this.txn = new TransactionBuilder(client, sessionId);
    this.canvas = new GraphCanvas(
      this.root.querySelector<SVGSVGElement>(".graph-canvas")!,
      {
        onConnect: (src, dst) => {
          if (this.txn.isOpen) {
            this.txn.connect(src, dst);
            this.refreshTxnInfo();
          }
        },
        onNodeMoved: (id, x, y) => {
          if (this.txn.isOpen) {
            this.txn.moveNode(id, x, y);
            this.refreshTxnInfo();
          }
        },
        onNodeDoubleClick: (id) => this.openCptEditor(id),
      });
    this.whatIf = new WhatIfPanel(client, sessionId);
    this.root.querySelector(".whatif-slot")!.appendChild(this.whatIf.root);
    this.prompt = new PromptCard((cont) => void this.client.respond(sessionId, cont));
    this.root.querySelector(".prompt-slot")!.appendChild(this.prompt.root);

    this.root.querySelector(".begin")!.addEventListener("click", () => void this.beginEdit());
    this.root.querySelector(".commit")!.addEventListener("click", () => void this.commit());
    this.root.querySelector(".start")!.addEventListener("click", () => void this.start());

    this.channel = new EventChannel(client.base, sessionId, {
      onEvent: (event) => {
        this.state = applyEvent(this.state, event);
        if (event.kind === "graph_committed") void this.refreshInfluence();
        this.renderAll();
      },
      onStatus: (status) => {
        this.root.querySelector<HTMLElement>(".stale-banner")!.hidden = status === "live";
      },
    });
  }

  async startUp(): Promise<void> {
    const view = await this.client.getSession(this.sessionId);
    const graph = await this.client.getGraph(this.sessionId);
    this.state = { ...this.state, phase: view.phase, graphVersion: view.version, graph };
    if (view.version >= 1) await this.refreshInfluence();
    this.renderAll();
    this.channel.start(0);
  }

  shutDown(): void {
    this.channel.stop();
  }

  private async refreshInfluence(): Promise<void> {
    try {
      const page = await this.client.influence(this.sessionId);
      this.influence = new Map(
        page.edges.map((e) => [`${e.src}->${e.dst}`, e.influence]));
    } catch {
      this.influence = new Map();
    }
  }

  private async beginEdit(): Promise<void> {
    await this.txn.begin();
    this.refreshTxnInfo();
    this.renderAll();
  }

  private async commit(): Promise<void> {
    const outcome = await this.txn.commit();
    if (outcome.ok) {
      this.report = null;
    } else if (outcome.staleBase) {
      const info = this.root.querySelector<HTMLElement>(".txn-info")!;
      info.textContent = "base is stale — Rebase to keep your edits";
      const btn = document.createElement("button");
      btn.textContent = "Rebase";
      btn.addEventListener("click", () => void this.txn.rebase());
      info.appendChild(btn);
      return;
    } else {
      this.report = outcome.report ?? null;
    }
    this.refreshTxnInfo();
    this.renderAll();
  }

  private async start(): Promise<void> {
    const trials = Number(this.root.querySelector<HTMLInputElement>(".trials")!.value);
    const seed = Number(this.root.querySelector<HTMLInputElement>(".seed")!.value);
    try {
      await this.client.execute(this.sessionId, trials, seed);
    } catch (err) {
      const service = err as ServiceError;
      if (service.error === undefined) throw err;
      this.root.querySelector(".txn-info")!.textContent =
        `${service.error.code}: ${service.error.detail}`;
    }
  }

  private openCptEditor(nodeId: string): void {
    const graph = this.state.graph;
    const host = this.root.querySelector<HTMLElement>(".cpt-editor")!;
    if (!graph || !this.txn.isOpen) {
      host.hidden = false;
      host.textContent = "open an edit transaction first";
      return;
    }
    const mech = graph.mechanisms[nodeId];
    const variable = graph.variables.find((v) => v.id === nodeId);
    if (!variable) return;
    host.hidden = false;
    host.replaceChildren();
    const title = document.createElement("h4");
    title.textContent = `CPT for ${nodeId} (${variable.domain.join(", ")})`;
    host.appendChild(title);
    const rows: MechanismRow[] = mech?.rows ??
      [{ given: {}, p: variable.domain.map(() => 1 / variable.domain.length) }];
    const table = document.createElement("table");
    for (const row of rows) {
      const tr = document.createElement("tr");
      const ctx = document.createElement("td");
      ctx.textContent = Object.entries(row.given)
        .map(([k, v]) => `${k}=${v}`).join(", ") || "(root)";
      tr.appendChild(ctx);
      row.p.forEach((value, i) => {
        const td = document.createElement("td");
        const input = document.createElement("input");
        input.type = "number";
        input.step = "0.01";
        input.value = String(value);
        input.addEventListener("change", () => {
          row.p[i] = Number(input.value);
        });
        td.appendChild(input);
        tr.appendChild(td);
      });
      table.appendChild(tr);
    }
    host.appendChild(table);
    const apply = document.createElement("button");
    apply.textContent = "Queue CPT";
    apply.addEventListener("click", () => {
      this.txn.setMechanism(nodeId, rows);
      this.refreshTxnInfo();
      host.hidden = true;
    });
    host.appendChild(apply);
  }

  private refreshTxnInfo(): void {
    const info = this.root.querySelector<HTMLElement>(".txn-info")!;
    info.textContent = this.txn.isOpen
      ? `editing v${this.txn.baseVersion}: ${this.txn.pending.length} ops queued`
      : "";
  }

  renderAll(): void {
    this.root.querySelector(".phase")!.textContent = this.state.phase;
    this.root.querySelector(".version")!.textContent = `v${this.state.graphVersion}`;
    if (this.state.graph) {
      this.canvas.render(this.state.graph, {
        influence: this.influence,
        report: this.report,
        pulseNodes: promptNodeIds(this.state),
      });
      this.whatIf.setGraph(this.state.graph as GraphDoc);
    }
    renderValidation(this.root.querySelector<HTMLElement>(".validation")!, this.report);
    this.prompt.update(this.state.prompt, promptVisible(this.state));
    this.renderBatches();
  }

  private renderBatches(): void {
    const host = this.root.querySelector<HTMLElement>(".batches")!;
    host.replaceChildren();
    const render = (label: string, trials: number, ok: number, aborted: boolean) => {
      const div = document.createElement("div");
      div.className = "batch";
      div.textContent = `${label}: ${ok}/${trials} ok${aborted ? " (aborted)" : ""}`;
      host.appendChild(div);
    };
    this.state.finishedBatches.forEach((batch, i) => {
      const ok = batch.trials.filter((t) => t.success).length;
      render(`batch ${i + 1}`, batch.trials.length, ok, batch.summary?.aborted ?? false);
    });
    if (this.state.currentBatch) {
      const batch = this.state.currentBatch;
      render("running", batch.trials.length, batch.trials.filter((t) => t.success).length,
             false);
    }
  }
}
