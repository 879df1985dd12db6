import { ApiClient, ApiError } from "./api.js";
import type { EvidenceArtifact, Integration, KppScore } from "./types.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** SME / project-director surface: evidence preview, endorse/reject with a
 * written report, final approval on endorsed items, and live per-product
 * KPP progress fetched from the API. */
export class IntegrationReviewBoard {
  integrations: Integration[] = [];
  kpp: KppScore | null = null;
  error: string | null = null;
  private inFlight = new Set<string>();

  constructor(private api: ApiClient) {}

  async load(): Promise<void> {
    this.integrations = (await this.api.listIntegrations()).filter(
      (i) => i.state !== "proposed",
    );
    this.kpp = await this.api.getKpp();
  }

  renderEvidence(artifact: EvidenceArtifact): string {
    if (artifact.kind === "screenshot") {
      return (
        `<img class="evidence-preview" src="${this.api.evidenceUrl(artifact.content_digest)}" ` +
        `alt="${escapeHtml(artifact.uri_or_path)}">`
      );
    }
    return (
      `<a class="evidence-link" href="${this.api.evidenceUrl(artifact.content_digest)}">` +
      `${escapeHtml(artifact.uri_or_path)} (${artifact.kind})</a>`
    );
  }

  async review(integrationId: string, verdict: "endorse" | "reject", report: string): Promise<void> {
    if (!report.trim()) {
      this.error = "an SME review needs a written report";
      return;
    }
    await this.transition(integrationId, { action: verdict, report });
  }

  async finalApprove(integrationId: string): Promise<void> {
    await this.transition(integrationId, { action: "approve" });
  }

  private async transition(integrationId: string, payload: Record<string, unknown>): Promise<void> {
    if (this.inFlight.has(integrationId)) return;
    const integration = this.integrations.find((i) => i.id === integrationId);
    if (!integration) return;
    this.inFlight.add(integrationId);
    this.error = null;
    try {
      await this.api.transitionIntegration(integrationId, {
        ...payload,
        revision: integration.revision,
      });
    } catch (err) {
      if (err instanceof ApiError) {
        this.error =
          err.status === 409
            ? `${integrationId} changed while you were reviewing; reloaded`
            : err.message;
      } else {
        throw err;
      }
    } finally {
      this.inFlight.delete(integrationId);
      await this.load();
    }
  }

  renderKppBars(): string {
    if (!this.kpp) return "";
    const bars = this.kpp.per_product
      .map((status) => {
        const width = Math.min(100, (status.approved_count / status.goal) * 100);
        const cls = status.met ? "kpp-bar met" : "kpp-bar";
        return (
          `<div class="kpp-row" data-product="${status.product_id}">` +
          `<span class="kpp-label">${status.product_id}</span>` +
          `<div class="${cls}"><div class="kpp-fill" style="width:${width}%"></div></div>` +
          `<span class="kpp-count">${status.approved_count}/${status.goal}` +
          `${status.met ? " &#10003; met" : ""}</span></div>`
        );
      })
      .join("");
    return `<div class="kpp-bars">${bars}</div>`;
  }

  render(): string {
    const banner = this.error ? `<p class="error-state">${escapeHtml(this.error)}</p>` : "";
    const canReview = this.api.role === "sme";
    const canApprove = this.api.role === "project_director";
    const cards = this.integrations
      .map((integration) => {
        const evidence = integration.evidence.map((a) => this.renderEvidence(a)).join("");
        const reviewControls =
          integration.state === "under_sme_review" && canReview
            ? `<textarea class="sme-report" data-integration="${integration.id}" ` +
              'placeholder="SME report"></textarea>' +
              `<button data-action="endorse" data-integration="${integration.id}">endorse</button>` +
              `<button data-action="reject" data-integration="${integration.id}">reject</button>`
            : "";
        const approveControl =
          integration.state === "sme_endorsed" && canApprove
            ? `<button data-action="approve" data-integration="${integration.id}">final approval</button>`
            : "";
        return (
          `<div class="integration-card state-${integration.state}" data-integration="${integration.id}">` +
          `<h4>${escapeHtml(integration.capability)} &rarr; ${escapeHtml(integration.client)}</h4>` +
          `<p>product ${integration.product_id} &middot; ${integration.environment_class} &middot; ` +
          `<span class="state">${integration.state}</span></p>` +
          (integration.sme_report ? `<blockquote>${escapeHtml(integration.sme_report)}</blockquote>` : "") +
          `<div class="evidence">${evidence}</div>` +
          reviewControls +
          approveControl +
          "</div>"
        );
      })
      .join("");
    return banner + this.renderKppBars() + `<div class="integration-cards">${cards}</div>`;
  }
}
