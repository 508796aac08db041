import type { BoxesPayload, ComponentsPayload, Meta, PointsPayload } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string, signal?: AbortSignal): Promise<T> {
  const resp = await fetch(url, { signal });
  if (!resp.ok) throw new ApiError(resp.status, `${url}: HTTP ${resp.status}`);
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(private base: string = "") {}

  meta(signal?: AbortSignal): Promise<Meta> {
    return getJson<Meta>(`${this.base}/meta`, signal);
  }

  async adjacency(
    threshold: number,
    downsample: number,
    signal?: AbortSignal
  ): Promise<{ pgm: ArrayBuffer; snapped: number }> {
    const url = `${this.base}/adjacency?threshold=${threshold}&downsample=${downsample}`;
    const resp = await fetch(url, { signal });
    if (!resp.ok) throw new ApiError(resp.status, `${url}: HTTP ${resp.status}`);
    const snapped = parseFloat(resp.headers.get("X-Snapped-Threshold") ?? `${threshold}`);
    return { pgm: await resp.arrayBuffer(), snapped };
  }

  boxes(threshold: number, downsample: number, signal?: AbortSignal): Promise<BoxesPayload> {
    return getJson<BoxesPayload>(
      `${this.base}/boxes?threshold=${threshold}&downsample=${downsample}`,
      signal
    );
  }

  components(threshold: number, signal?: AbortSignal): Promise<ComponentsPayload> {
    return getJson<ComponentsPayload>(`${this.base}/components?threshold=${threshold}`, signal);
  }

  async points(threshold: number, signal?: AbortSignal): Promise<PointsPayload | null> {
    try {
      return await getJson<PointsPayload>(`${this.base}/points?threshold=${threshold}`, signal);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }
}

// One logical request slot: starting a new task aborts the previous one, and
// a task that finishes after being superseded resolves to null so callers
// never render stale data (sequence-number check).
export class LatestOnly {
  private seq = 0;
  private controller: AbortController | null = null;

  async run<T>(task: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.seq += 1;
    const mySeq = this.seq;
    this.controller?.abort();
    this.controller = new AbortController();
    try {
      const result = await task(this.controller.signal);
      return mySeq === this.seq ? result : null;
    } catch (err) {
      if (mySeq !== this.seq) return null; // superseded; outcome irrelevant
      throw err;
    }
  }
}
