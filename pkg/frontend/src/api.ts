import type {
  AlertsPayload,
  ChangeRequest,
  EvmPoint,
  Integration,
  KppScore,
  PortfolioTree,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

/** Thin fetch wrapper; mutating calls carry the selected actor role. */
export class ApiClient {
  constructor(
    private baseUrl = "",
    public role = "team",
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "unreachable", `API unreachable: ${String(err)}`);
    }
    let body: Record<string, unknown> = {};
    try {
      body = (await response.json()) as Record<string, unknown>;
    } catch {
      // non-JSON body; keep the status-driven error below
    }
    if (!response.ok) {
      throw new ApiError(
        response.status,
        String(body.error ?? response.status),
        String(body.message ?? `request failed with ${response.status}`),
      );
    }
    return body;
  }

  private post(path: string, payload: Record<string, unknown>): Promise<unknown> {
    return this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json", "X-Actor-Role": this.role },
      body: JSON.stringify(payload),
    });
  }

  getPortfolio(): Promise<PortfolioTree> {
    return this.request("/portfolio") as Promise<PortfolioTree>;
  }

  async getSeries(nodeId: string, start: string, end: string): Promise<EvmPoint[]> {
    const body = (await this.request(
      `/evm/${encodeURIComponent(nodeId)}/series?start=${start}&end=${end}`,
    )) as { series: EvmPoint[] };
    return body.series;
  }

  getAlerts(period: string): Promise<AlertsPayload> {
    return this.request(`/alerts/${period}`) as Promise<AlertsPayload>;
  }

  async listChangeRequests(state?: string): Promise<ChangeRequest[]> {
    const suffix = state ? `?state=${state}` : "";
    const body = (await this.request(`/change-requests${suffix}`)) as {
      change_requests: ChangeRequest[];
    };
    return body.change_requests;
  }

  transitionChangeRequest(
    id: string,
    action: string,
    revision: number,
    note = "",
  ): Promise<unknown> {
    return this.post(`/change-requests/${id}/transition`, { action, revision, note });
  }

  async listIntegrations(state?: string): Promise<Integration[]> {
    const suffix = state ? `?state=${state}` : "";
    const body = (await this.request(`/integrations${suffix}`)) as {
      integrations: Integration[];
    };
    return body.integrations;
  }

  transitionIntegration(
    id: string,
    payload: Record<string, unknown>,
  ): Promise<unknown> {
    return this.post(`/integrations/${id}/transition`, payload);
  }

  getKpp(): Promise<KppScore> {
    return this.request("/kpp") as Promise<KppScore>;
  }

  evidenceUrl(digest: string): string {
    return `${this.baseUrl}/evidence/${digest}`;
  }
}
