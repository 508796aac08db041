import type { ComponentInfo, Meta, ViewState } from "./types.js";

export function initialState(meta: Meta): ViewState {
  return {
    threshold: meta.sweep_thresholds.length ? meta.sweep_thresholds[0] : 1.0,
    selectedComponent: null,
    downsample: 1,
    showScatter: meta.has_xy,
    showTable: true,
  };
}

// Moving the threshold invalidates any component selection: ids are only
// meaningful within one threshold's labeling.
export function withThreshold(state: ViewState, threshold: number): ViewState {
  const clamped = Math.min(1, Math.max(0, threshold));
  return { ...state, threshold: clamped, selectedComponent: null };
}

export function withSelection(
  state: ViewState,
  id: number | null,
  available: ComponentInfo[]
): ViewState {
  if (id === null || !available.some((c) => c.id === id)) {
    return { ...state, selectedComponent: null };
  }
  return { ...state, selectedComponent: id };
}

// After new component data arrives, drop a selection whose id no longer exists.
export function reconcileSelection(state: ViewState, available: ComponentInfo[]): ViewState {
  if (
    state.selectedComponent !== null &&
    !available.some((c) => c.id === state.selectedComponent)
  ) {
    return { ...state, selectedComponent: null };
  }
  return state;
}

// Pooling factor so an n x n raster fits the viewport's pixel budget.
export function chooseDownsample(n: number, viewportPx: number): number {
  if (viewportPx < 1) return Math.max(1, n);
  return Math.max(1, Math.ceil(n / viewportPx));
}

export type SortKey = "id" | "size" | "purity";

export function sortComponents(
  comps: ComponentInfo[],
  key: SortKey,
  descending: boolean
): ComponentInfo[] {
  const sorted = [...comps].sort((a, b) => {
    const av = key === "purity" ? a.purity ?? -1 : a[key];
    const bv = key === "purity" ? b.purity ?? -1 : b[key];
    if (av !== bv) return av < bv ? -1 : 1;
    return a.id - b.id;
  });
  if (descending) sorted.reverse();
  return sorted;
}
