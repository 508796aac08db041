import { parsePgm, pgmToRgba } from "./pgm.js";
import type { SortKey } from "./state.js";
import { sortComponents } from "./state.js";
import type { BoxInfo, ComponentInfo, PointsPayload } from "./types.js";

export function componentColor(id: number): string {
  return `hsl(${(id * 47) % 360}, 70%, 45%)`;
}

export interface CanvasRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

// Box coordinates arrive in pooled raster units; scale maps raster to canvas.
export function boxToCanvasRect(box: BoxInfo, scale: number): CanvasRect {
  return {
    x: box.start * scale,
    y: box.start * scale,
    w: box.size * scale,
    h: box.size * scale,
  };
}

export function hitTestBoxes(
  boxes: BoxInfo[],
  scale: number,
  x: number,
  y: number
): number | null {
  // later boxes are smaller components; prefer the smallest hit for precision
  let hit: BoxInfo | null = null;
  for (const box of boxes) {
    const r = boxToCanvasRect(box, scale);
    if (x >= r.x && x <= r.x + r.w && y >= r.y && y <= r.y + r.h) {
      if (hit === null || box.size < hit.size) hit = box;
    }
  }
  return hit === null ? null : hit.id;
}

export function drawMatrix(
  canvas: HTMLCanvasElement,
  pgmBytes: ArrayBuffer,
  boxes: BoxInfo[],
  selectedId: number | null
): void {
  const pgm = parsePgm(pgmBytes);
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const off = document.createElement("canvas");
  off.width = pgm.width;
  off.height = pgm.height;
  const offCtx = off.getContext("2d");
  if (!offCtx) return;
  offCtx.putImageData(new ImageData(pgmToRgba(pgm), pgm.width, pgm.height), 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  const scale = canvas.width / pgm.width;
  for (const box of boxes) {
    const r = boxToCanvasRect(box, scale);
    const selected = box.id === selectedId;
    ctx.strokeStyle = selected ? "#1255cc" : "#cc2222";
    ctx.lineWidth = selected ? 3 : 1;
    ctx.strokeRect(r.x, r.y, Math.max(r.w, 2), Math.max(r.h, 2));
  }
}

export function renderComponentTable(
  tbody: HTMLTableSectionElement,
  components: ComponentInfo[],
  selectedId: number | null,
  sortKey: SortKey,
  descending: boolean,
  onSelect: (id: number) => void
): void {
  tbody.textContent = "";
  const doc = tbody.ownerDocument;
  for (const comp of sortComponents(components, sortKey, descending)) {
    const row = doc.createElement("tr");
    row.dataset.id = String(comp.id);
    if (comp.id === selectedId) row.classList.add("selected");
    const cells = [
      String(comp.id),
      String(comp.size),
      comp.purity === undefined ? "-" : comp.purity.toFixed(3),
    ];
    for (const text of cells) {
      const td = doc.createElement("td");
      td.textContent = text;
      row.appendChild(td);
    }
    row.addEventListener("click", () => onSelect(comp.id));
    tbody.appendChild(row);
  }
}

export function renderMemberList(target: HTMLElement, comp: ComponentInfo | null): void {
  if (comp === null) {
    target.textContent = "";
    return;
  }
  const suffix = comp.member_ids_truncated ? ", ..." : "";
  target.textContent = `component ${comp.id} members: ${comp.member_ids.join(", ")}${suffix}`;
}

export function drawScatter(
  canvas: HTMLCanvasElement,
  points: PointsPayload,
  selectedId: number | null
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const xs = points.xy.map((p) => p[0]);
  const ys = points.xy.map((p) => p[1]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const pad = 8;
  for (let i = 0; i < points.xy.length; i++) {
    const cid = points.component_id[i];
    const px = pad + ((points.xy[i][0] - minX) / spanX) * (canvas.width - 2 * pad);
    const py = canvas.height - pad - ((points.xy[i][1] - minY) / spanY) * (canvas.height - 2 * pad);
    const selected = cid === selectedId;
    ctx.fillStyle = componentColor(cid);
    ctx.globalAlpha = selectedId === null || selected ? 1.0 : 0.15;
    ctx.beginPath();
    ctx.arc(px, py, selected ? 3 : 2, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.globalAlpha = 1.0;
}
