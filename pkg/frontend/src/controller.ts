import { ApiClient, LatestOnly } from "./api.js";
import { debounce, type Debounced } from "./debounce.js";
import { initialState, reconcileSelection, withSelection, withThreshold } from "./state.js";
import type { BoxInfo, ComponentInfo, Meta, PointsPayload, ViewState } from "./types.js";

export interface PanelSinks {
  matrix(pgm: ArrayBuffer, boxes: BoxInfo[], snapped: number): void;
  table(components: ComponentInfo[], snapped: number): void;
  scatter(points: PointsPayload | null): void;
  selection(id: number | null): void;
  banner(visible: boolean, message?: string): void;
}

// Drives the exploration loop. A slider settle issues one debounced refresh:
// one matrix-panel fetch (raster plus its box sidecar) and one component-table
// fetch, plus the scatter fetch for 2-D sessions. Every panel keeps at most
// one request in flight and discards superseded responses; on failure the
// banner comes up and the stale views stay.
export class Explorer {
  state: ViewState;
  latestComponents: ComponentInfo[] = [];
  readonly slider: Debounced<[number]>;
  private matrixSlot = new LatestOnly();
  private tableSlot = new LatestOnly();
  private scatterSlot = new LatestOnly();

  constructor(
    private api: ApiClient,
    private meta: Meta,
    private sinks: PanelSinks,
    debounceMs = 150
  ) {
    this.state = initialState(meta);
    this.slider = debounce((x: number) => {
      void this.setThreshold(x);
    }, debounceMs);
  }

  async setThreshold(x: number): Promise<void> {
    this.state = withThreshold(this.state, x);
    this.sinks.selection(null);
    await this.refresh();
  }

  async refresh(): Promise<void> {
    const t = this.state.threshold;
    const m = this.state.downsample;
    const matrixTask = this.matrixSlot.run(async (signal) => {
      const [adj, boxes] = await Promise.all([
        this.api.adjacency(t, m, signal),
        this.api.boxes(t, m, signal),
      ]);
      return { adj, boxes };
    });
    const tableTask = this.tableSlot.run((signal) => this.api.components(t, signal));
    const scatterTask = this.meta.has_xy
      ? this.scatterSlot.run((signal) => this.api.points(t, signal))
      : Promise.resolve(null);

    let failed: string | null = null;
    try {
      const matrix = await matrixTask;
      if (matrix !== null) {
        this.sinks.matrix(matrix.adj.pgm, matrix.boxes.boxes, matrix.adj.snapped);
      }
    } catch (err) {
      failed = String(err);
    }
    try {
      const table = await tableTask;
      if (table !== null) {
        this.latestComponents = table.components;
        this.state = reconcileSelection(this.state, this.latestComponents);
        this.sinks.table(table.components, table.threshold);
        this.sinks.selection(this.state.selectedComponent);
      }
    } catch (err) {
      failed = String(err);
    }
    if (this.meta.has_xy) {
      try {
        const points = await scatterTask;
        if (points !== null) this.sinks.scatter(points);
      } catch (err) {
        failed = String(err);
      }
    }
    this.sinks.banner(failed !== null, failed ?? undefined);
  }

  select(id: number | null): void {
    this.state = withSelection(this.state, id, this.latestComponents);
    this.sinks.selection(this.state.selectedComponent);
  }
}
