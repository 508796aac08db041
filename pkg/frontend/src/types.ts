// Payload shapes mirrored from the session server's JSON responses.

export interface Meta {
  n: number;
  k: number;
  d: number | null;
  has_labels: boolean;
  has_xy: boolean;
  sweep_thresholds: number[];
}

export interface ComponentInfo {
  id: number;
  size: number;
  member_ids: number[];
  member_ids_truncated: boolean;
  purity?: number;
}

export interface BoxInfo {
  id: number;
  start: number;
  size: number;
  nodes: number;
}

export interface BoxesPayload {
  threshold: number;
  boxes: BoxInfo[];
}

export interface ComponentsPayload {
  threshold: number;
  components: ComponentInfo[];
}

export interface PointsPayload {
  threshold: number;
  xy: [number, number][];
  component_id: number[];
}

export interface ViewState {
  threshold: number;
  selectedComponent: number | null;
  downsample: number;
  showScatter: boolean;
  showTable: boolean;
}

export interface Pgm {
  width: number;
  height: number;
  pixels: Uint8Array;
}
