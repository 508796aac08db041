import { ApiClient } from "./api.js";
import { Explorer } from "./controller.js";
import {
  drawMatrix,
  drawScatter,
  hitTestBoxes,
  renderComponentTable,
  renderMemberList,
} from "./render.js";
import { chooseDownsample, type SortKey } from "./state.js";
import type { BoxInfo, ComponentInfo, PointsPayload } from "./types.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

async function start(): Promise<void> {
  const api = new ApiClient("");
  const meta = await api.meta();

  const slider = byId<HTMLInputElement>("threshold-slider");
  const thresholdLabel = byId<HTMLElement>("threshold-label");
  const matrixCanvas = byId<HTMLCanvasElement>("matrix");
  const scatterCanvas = byId<HTMLCanvasElement>("scatter");
  const tableBody = byId<HTMLTableSectionElement>("component-rows");
  const memberList = byId<HTMLElement>("member-list");
  const banner = byId<HTMLElement>("banner");
  const metaLine = byId<HTMLElement>("meta-line");

  metaLine.textContent = `n=${meta.n}, k=${meta.k}` + (meta.d ? `, d=${meta.d}` : "");
  scatterCanvas.style.display = meta.has_xy ? "block" : "none";

  let lastPgm: ArrayBuffer | null = null;
  let lastBoxes: BoxInfo[] = [];
  let lastComponents: ComponentInfo[] = [];
  let lastPoints: PointsPayload | null = null;
  let sortKey: SortKey = "size";
  let sortDescending = true;

  const explorer: Explorer = new Explorer(api, meta, {
    matrix(pgm, boxes, snapped) {
      lastPgm = pgm;
      lastBoxes = boxes;
      thresholdLabel.textContent = `threshold ${snapped.toFixed(4)}`;
      drawMatrix(matrixCanvas, pgm, boxes, explorer.state.selectedComponent);
    },
    table(components, _snapped) {
      lastComponents = components;
      renderComponentTable(
        tableBody, components, explorer.state.selectedComponent,
        sortKey, sortDescending, (id) => explorer.select(id)
      );
    },
    scatter(points) {
      lastPoints = points;
      if (points) drawScatter(scatterCanvas, points, explorer.state.selectedComponent);
    },
    selection(id) {
      if (lastPgm) drawMatrix(matrixCanvas, lastPgm, lastBoxes, id);
      renderComponentTable(
        tableBody, lastComponents, id, sortKey, sortDescending,
        (cid) => explorer.select(cid)
      );
      if (lastPoints) drawScatter(scatterCanvas, lastPoints, id);
      renderMemberList(memberList, lastComponents.find((c) => c.id === id) ?? null);
    },
    banner(visible, message) {
      banner.style.display = visible ? "block" : "none";
      if (message) banner.textContent = `server unreachable or request failed: ${message}`;
    },
  });
  explorer.state.downsample = chooseDownsample(meta.n, matrixCanvas.width);

  slider.addEventListener("input", () => {
    explorer.slider(parseFloat(slider.value));
  });
  matrixCanvas.addEventListener("click", (ev) => {
    const rect = matrixCanvas.getBoundingClientRect();
    const scale = matrixCanvas.width / Math.ceil(meta.n / explorer.state.downsample);
    const id = hitTestBoxes(
      lastBoxes, scale,
      ((ev.clientX - rect.left) / rect.width) * matrixCanvas.width,
      ((ev.clientY - rect.top) / rect.height) * matrixCanvas.height
    );
    explorer.select(id);
  });
  for (const th of document.querySelectorAll<HTMLTableCellElement>("th[data-sort]")) {
    th.addEventListener("click", () => {
      const key = th.dataset.sort as SortKey;
      sortDescending = key === sortKey ? !sortDescending : true;
      sortKey = key;
      renderComponentTable(
        tableBody, lastComponents, explorer.state.selectedComponent,
        sortKey, sortDescending, (id) => explorer.select(id)
      );
    });
  }

  slider.value = "1";
  await explorer.setThreshold(1.0);
}

window.addEventListener("DOMContentLoaded", () => {
  void start();
});
