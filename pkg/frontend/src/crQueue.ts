import { ApiClient, ApiError } from "./api.js";
import type { ChangeRequest } from "./types.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Pending change requests with approve/reject actions.
 *
 * Every decision POST carries the revision the row was rendered from, so a
 * double-click or a concurrent editor produces exactly one applied
 * transition; the loser sees an inline conflict and a refreshed row.
 */
export class ChangeRequestQueue {
  items: ChangeRequest[] = [];
  error: string | null = null;
  notice: string | null = null;
  private inFlight = new Set<string>();

  constructor(private api: ApiClient) {}

  async load(): Promise<void> {
    this.items = await this.api.listChangeRequests("under_review");
  }

  canDecide(cr: ChangeRequest): boolean {
    return cr.approver_role === this.api.role;
  }

  async decide(crId: string, action: "approve" | "reject", note = ""): Promise<void> {
    if (this.inFlight.has(crId)) return;
    const cr = this.items.find((c) => c.id === crId);
    if (!cr || !this.canDecide(cr)) return;
    this.inFlight.add(crId);
    this.error = null;
    this.notice = null;
    try {
      await this.api.transitionChangeRequest(crId, action, cr.revision, note);
      this.notice = `${crId} ${action}d`;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.error = `${crId} changed while you were reviewing; the row was reloaded`;
      } else if (err instanceof ApiError) {
        this.error = err.message;
      } else {
        throw err;
      }
    } finally {
      this.inFlight.delete(crId);
      await this.load(); // refresh: decided rows drop out, conflicts reload
    }
  }

  render(): string {
    const banner =
      (this.error ? `<p class="error-state">${escapeHtml(this.error)}</p>` : "") +
      (this.notice ? `<p class="notice">${escapeHtml(this.notice)}</p>` : "");
    if (!this.items.length) {
      return banner + '<p class="empty-state">No change requests waiting for review.</p>';
    }
    const rows = this.items
      .map((cr) => {
        const targets = cr.targets
          .map(
            (t) =>
              `<li>${escapeHtml(t.entity_id)}.${escapeHtml(t.field)}: ` +
              `${escapeHtml(t.old_value)} &rarr; ${escapeHtml(t.new_value)}</li>`,
          )
          .join("");
        const enabled = this.canDecide(cr);
        const buttons = ["approve", "reject"]
          .map(
            (action) =>
              `<button class="${action}" data-cr="${cr.id}" data-action="${action}"` +
              `${enabled ? "" : " disabled"}>${action}</button>`,
          )
          .join("");
        return (
          `<tr class="cr-row" data-cr="${cr.id}">` +
          `<td>${cr.id}</td><td>${cr.level}</td>` +
          `<td><ul>${targets}</ul>${escapeHtml(cr.rationale)}</td>` +
          `<td>decides: ${cr.approver_role}</td><td>${buttons}</td></tr>`
        );
      })
      .join("");
    return (
      banner +
      '<table class="cr-queue"><thead><tr><th>id</th><th>level</th>' +
      "<th>change</th><th>approver</th><th>actions</th></tr></thead>" +
      `<tbody>${rows}</tbody></table>`
    );
  }
}
