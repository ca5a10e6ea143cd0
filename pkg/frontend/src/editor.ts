/** Accumulates canvas gestures into one edit transaction.
 *
 * Gestures queue ops locally; Commit sends the whole transaction with the
 * base version it was opened against, so the server can reject stale bases
 * and the operator can rebase.
 */

import type { ApiClient, ServiceError } from "./client.js";
import type { EditOp, MechanismRow, ValidationReport } from "./protocol.js";

export interface CommitOutcome {
  ok: boolean;
  version?: number;
  report?: ValidationReport;
  staleBase?: boolean;
  error?: string;
}

export class TransactionBuilder {
  private ops: EditOp[] = [];
  private open = false;
  baseVersion = 0;

  constructor(private client: ApiClient, private sessionId: string) {}

  get isOpen(): boolean {
    return this.open;
  }

  get pending(): readonly EditOp[] {
    return this.ops;
  }

  async begin(): Promise<void> {
    const out = await this.client.beginEdit(this.sessionId);
    this.baseVersion = out.base_version;
    this.open = true;
    this.ops = [];
  }

  /** Reopen against the latest version, keeping the queued gestures. */
  async rebase(): Promise<void> {
    const out = await this.client.beginEdit(this.sessionId);
    this.baseVersion = out.base_version;
    this.open = true;
  }

  addNode(id: string, domain: string[], note = ""): void {
    this.push({ op: "add_node", id, domain, note });
  }

  /** Drag-to-connect between two nodes. */
  connect(src: string, dst: string, strength = 0.5): void {
    this.push({ op: "add_edge", src, dst, strength });
  }

  remove(id: string): void {
    this.push({ op: "remove", id });
  }

  removeEdge(src: string, dst: string): void {
    this.push({ op: "remove", id: `${src}->${dst}` });
  }

  /** CPT table editor result for one node. */
  setMechanism(node: string, rows: MechanismRow[]): void {
    this.push({ op: "set_mechanism", node, rows });
  }

  /** Strength slider on an edge. */
  setStrength(src: string, dst: string, strength: number): void {
    this.push({ op: "annotate", id: `${src}->${dst}`, strength });
  }

  setProminence(id: string, prominence: number): void {
    this.push({ op: "annotate", id, prominence });
  }

  setNote(id: string, note: string): void {
    this.push({ op: "annotate", id, note });
  }

  /** Node drag end; layout is operator-owned and persisted with the graph. */
  moveNode(id: string, x: number, y: number): void {
    this.push({ op: "annotate", id, position: [x, y] });
  }

  private push(op: EditOp): void {
    if (!this.open) throw new Error("no open transaction (call begin first)");
    this.ops.push(op);
  }

  async commit(): Promise<CommitOutcome> {
    try {
      const out = await this.client.commitEdit(this.sessionId, this.baseVersion, this.ops);
      this.ops = [];
      this.open = false;
      return { ok: true, version: out.version };
    } catch (err) {
      const service = err as ServiceError;
      if (service.error === undefined) throw err;
      if (service.error.code === "StaleBase") {
        return { ok: false, staleBase: true, error: service.error.detail };
      }
      return {
        ok: false,
        report: service.error.report,
        error: `${service.error.code}: ${service.error.detail}`,
      };
    }
  }
}
