// Payload shapes mirroring the engine's HTTP API. All numbers that appear
// on screen arrive pre-formatted from the server; the dashboard never
// computes a metric itself.

export interface PortfolioTree {
  portfolio: { id: string; name: string; start_fy: number; years: number };
  config: {
    cpi_alert_threshold_display: string;
    spi_alert_threshold_display: string;
    [key: string]: unknown;
  };
  groups: Array<{ id: string; name: string; product_ids: string[] }>;
  products: Array<{ id: string; name: string; team_name: string; group_id: string; kpp_goal: number }>;
}

export interface EvmPoint {
  node_id: string;
  period: string;
  pv: string;
  ev: string;
  ac: string;
  cpi: string | null;
  spi: string | null;
  cv: string;
  sv: string;
}

export interface AlertsPayload {
  period: string;
  flags: Array<{ product_id: string; reason: string; first_flagged_period: string }>;
  wavefront_count: number;
}

export interface ChangeRequest {
  id: string;
  level: "L1" | "L2";
  state: string;
  rationale: string;
  approver_role: string;
  revision: number;
  targets: Array<{ entity_id: string; field: string; old_value: string; new_value: string }>;
}

export interface EvidenceArtifact {
  id: string;
  kind: "screenshot" | "client_letter" | "test_output" | "link";
  uri_or_path: string;
  content_digest: string;
}

export interface Integration {
  id: string;
  product_id: string;
  capability: string;
  client: string;
  environment_class: string;
  state: string;
  sme_report: string | null;
  revision: number;
  evidence: EvidenceArtifact[];
}

export interface KppStatus {
  product_id: string;
  approved_count: number;
  goal: number;
  met: boolean;
  environments_covered: string[];
}

export interface KppScore {
  fraction_met: string | null;
  pass: boolean;
  per_product: KppStatus[];
}
