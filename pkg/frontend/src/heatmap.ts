import type { ApiClient } from "./api.js";
import type { EvmPoint } from "./types.js";

export interface HeatmapCell {
  period: string;
  cpi: string | null;
  spi: string | null;
  flagged: boolean;
}

export interface HeatmapRow {
  productId: string;
  productName: string;
  groupName: string;
  flagged: boolean;
  cells: HeatmapCell[];
}

export interface HeatmapViewModel {
  periods: string[];
  rows: HeatmapRow[];
  thresholds: { cpi: number; spi: number };
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** All values come from the API: cpi/spi strings from the series endpoint,
 * flags from the alerts endpoint. The dashboard adds no arithmetic. */
export async function buildHeatmapViewModel(
  api: ApiClient,
  startPeriod: string,
  endPeriod: string,
): Promise<HeatmapViewModel> {
  const tree = await api.getPortfolio();
  const groupNames = new Map(tree.groups.map((g) => [g.id, g.name]));
  const products = [...tree.products].sort((a, b) =>
    a.group_id === b.group_id
      ? a.name.localeCompare(b.name)
      : (groupNames.get(a.group_id) ?? "").localeCompare(groupNames.get(b.group_id) ?? ""),
  );

  let periods: string[] = [];
  const seriesByProduct = new Map<string, EvmPoint[]>();
  for (const product of products) {
    const series = await api.getSeries(product.id, startPeriod, endPeriod);
    seriesByProduct.set(product.id, series);
    if (!periods.length) periods = series.map((p) => p.period);
  }
  const flaggedByPeriod = new Map<string, Set<string>>();
  for (const period of periods) {
    const alerts = await api.getAlerts(period);
    flaggedByPeriod.set(period, new Set(alerts.flags.map((f) => f.product_id)));
  }

  const rows: HeatmapRow[] = products.map((product) => {
    const series = seriesByProduct.get(product.id) ?? [];
    const cells: HeatmapCell[] = series.map((point) => ({
      period: point.period,
      cpi: point.cpi,
      spi: point.spi,
      flagged: flaggedByPeriod.get(point.period)?.has(product.id) ?? false,
    }));
    return {
      productId: product.id,
      productName: product.name,
      groupName: groupNames.get(product.group_id) ?? product.group_id,
      flagged: cells.some((c) => c.flagged),
      cells,
    };
  });
  return {
    periods,
    rows,
    thresholds: {
      cpi: Number.parseFloat(tree.config.cpi_alert_threshold_display),
      spi: Number.parseFloat(tree.config.spi_alert_threshold_display),
    },
  };
}

/** Absent indices render neutral, never as zero. */
export function cellClass(cell: HeatmapCell, thresholds: { cpi: number; spi: number }): string {
  if (cell.flagged) return "cell flagged";
  if (cell.cpi === null && cell.spi === null) return "cell neutral";
  const low =
    (cell.cpi !== null && Number.parseFloat(cell.cpi) < thresholds.cpi) ||
    (cell.spi !== null && Number.parseFloat(cell.spi) < thresholds.spi);
  return low ? "cell warn" : "cell ok";
}

export function renderHeatmap(vm: HeatmapViewModel): string {
  if (!vm.rows.length) {
    return '<p class="empty-state">No products in the portfolio yet.</p>';
  }
  const head = ["<th>SDK</th>", "<th>Product</th>"]
    .concat(vm.periods.map((p) => `<th>${escapeHtml(p)}</th>`))
    .join("");
  const body = vm.rows
    .map((row) => {
      const cells = row.cells
        .map((cell) => {
          const label =
            cell.cpi === null && cell.spi === null
              ? "&middot;"
              : `${cell.cpi ?? "-"}/${cell.spi ?? "-"}`;
          return (
            `<td class="${cellClass(cell, vm.thresholds)}" data-product="${row.productId}" ` +
            `data-period="${cell.period}" title="cpi ${cell.cpi ?? "n/a"} spi ${cell.spi ?? "n/a"}">` +
            `${label}</td>`
          );
        })
        .join("");
      const rowClass = row.flagged ? "product-row flagged-row" : "product-row";
      return (
        `<tr class="${rowClass}" data-product="${row.productId}">` +
        `<td>${escapeHtml(row.groupName)}</td>` +
        `<td class="product-name">${escapeHtml(row.productName)}${row.flagged ? " &#9888;" : ""}</td>` +
        cells +
        "</tr>"
      );
    })
    .join("");
  return `<table class="heatmap"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

export function renderErrorState(message: string): string {
  return `<p class="error-state">${escapeHtml(message)}</p>`;
}

/** Drill-down when a cell is clicked: the product's index series plus its
 * completed-milestone ledger, both straight from the API. */
export async function renderProductDetail(
  api: ApiClient,
  productId: string,
  startPeriod: string,
  endPeriod: string,
): Promise<string> {
  const series = await api.getSeries(productId, startPeriod, endPeriod);
  const rows = series
    .map(
      (p) =>
        `<tr><td>${p.period}</td><td>${p.pv}</td><td>${p.ev}</td><td>${p.ac}</td>` +
        `<td>${p.cpi ?? "-"}</td><td>${p.spi ?? "-"}</td></tr>`,
    )
    .join("");
  return (
    `<h3>${escapeHtml(productId)}</h3>` +
    '<table class="series"><thead><tr><th>period</th><th>PV</th><th>EV</th>' +
    "<th>AC</th><th>CPI</th><th>SPI</th></tr></thead>" +
    `<tbody>${rows}</tbody></table>`
  );
}
