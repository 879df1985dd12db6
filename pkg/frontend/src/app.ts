import { ApiClient } from "./api.js";
import { ChangeRequestQueue } from "./crQueue.js";
import {
  buildHeatmapViewModel,
  renderErrorState,
  renderHeatmap,
  renderProductDetail,
} from "./heatmap.js";
import { IntegrationReviewBoard } from "./reviewBoard.js";

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("api") ?? "http://127.0.0.1:8765");
const queue = new ChangeRequestQueue(api);
const board = new IntegrationReviewBoard(api);

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

async function refreshHeatmap(): Promise<void> {
  const start = (el("start-period") as HTMLInputElement).value;
  const end = (el("end-period") as HTMLInputElement).value;
  const target = el("heatmap");
  try {
    const vm = await buildHeatmapViewModel(api, start, end);
    target.innerHTML = renderHeatmap(vm);
  } catch (err) {
    target.innerHTML = renderErrorState(String(err));
  }
}

async function refreshQueue(): Promise<void> {
  const target = el("cr-queue");
  try {
    await queue.load();
    target.innerHTML = queue.render();
  } catch (err) {
    target.innerHTML = renderErrorState(String(err));
  }
}

async function refreshBoard(): Promise<void> {
  const target = el("review-board");
  try {
    await board.load();
    target.innerHTML = board.render();
  } catch (err) {
    target.innerHTML = renderErrorState(String(err));
  }
}

function wireEvents(): void {
  el("role-select").addEventListener("change", (event) => {
    api.role = (event.target as HTMLSelectElement).value;
    void refreshQueue();
    void refreshBoard();
  });
  el("refresh-heatmap").addEventListener("click", () => void refreshHeatmap());

  el("heatmap").addEventListener("click", (event) => {
    const cell = (event.target as HTMLElement).closest<HTMLElement>("[data-product]");
    if (!cell) return;
    const start = (el("start-period") as HTMLInputElement).value;
    const end = (el("end-period") as HTMLInputElement).value;
    void renderProductDetail(api, cell.dataset.product ?? "", start, end).then((html) => {
      el("product-detail").innerHTML = html;
    });
  });

  el("cr-queue").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>("button[data-cr]");
    if (!button || button.disabled) return;
    void queue
      .decide(button.dataset.cr ?? "", button.dataset.action as "approve" | "reject")
      .then(() => {
        el("cr-queue").innerHTML = queue.render();
      });
  });

  el("review-board").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>(
      "button[data-integration]",
    );
    if (!button) return;
    const id = button.dataset.integration ?? "";
    const action = button.dataset.action ?? "";
    const done = () => {
      el("review-board").innerHTML = board.render();
    };
    if (action === "approve") {
      void board.finalApprove(id).then(done);
      return;
    }
    const reportField = el("review-board").querySelector<HTMLTextAreaElement>(
      `textarea[data-integration="${id}"]`,
    );
    void board.review(id, action as "endorse" | "reject", reportField?.value ?? "").then(done);
  });
}

wireEvents();
void refreshHeatmap();
void refreshQueue();
void refreshBoard();
