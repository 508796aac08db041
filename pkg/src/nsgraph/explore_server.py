"""Read-only JSON-over-HTTP session service for interactive threshold exploration.

A session loads a scored graph once, precomputes the full sorting sweep, and
then serves pure lookups; arbitrary query thresholds snap down to the nearest
sweep grid value. Rasters ship as binary PGM with component boxes available
as a JSON sidecar, everything else as JSON.
"""

from __future__ import annotations

import json
import mimetypes
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .edge_similarity import EdgeScores, load_scored_edges
from .filter_components import component_purity
from .knn_graph import KnnGraph
from .sort_sweep import render_adjacency, sweep_sort, write_pgm

MEMBER_CAP = 64


class BadRequest(ValueError):
    pass


class Session:
    """Immutable exploration state: graph, scores, sweep, and per-step caches."""

    def __init__(
        self,
        graph: KnnGraph,
        scores: EdgeScores,
        d: int | None = None,
        labels: np.ndarray | None = None,
        display_xy: np.ndarray | None = None,
        sweep_steps: int = 50,
    ):
        self.graph = graph
        self.scores = scores
        self.d = d
        self.labels = labels
        self.display_xy = display_xy
        self.sweep = sweep_sort(graph, scores, steps=sweep_steps)
        self.masks = [scores.sa >= t for t in self.sweep.thresholds]
        self.purities = None
        if labels is not None:
            self.purities = [
                component_purity(lab, labels) for lab in self.sweep.labelings
            ]
        # per step: nodes grouped by component for O(size) member slicing
        self.member_order = []
        self.member_offsets = []
        for lab in self.sweep.labelings:
            order = np.argsort(lab.component_id, kind="stable")
            offsets = np.concatenate([[0], np.cumsum(lab.sizes)])
            self.member_order.append(order)
            self.member_offsets.append(offsets)

    @classmethod
    def from_artifacts(
        cls,
        graph_path,
        meta_path=None,
        labels_path=None,
        xy_path=None,
        sweep_steps: int = 50,
    ) -> "Session":
        graph, scores = load_scored_edges(graph_path)
        d = None
        if meta_path is not None:
            meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))
            d = meta.get("d")
        labels = None
        if labels_path is not None:
            rows = np.loadtxt(labels_path, dtype=np.int64, ndmin=2)
            labels = rows[np.argsort(rows[:, 0]), 1]
        xy = None
        if xy_path is not None:
            rows = np.loadtxt(xy_path, dtype=np.float64, ndmin=2)
            xy = rows[np.argsort(rows[:, 0]), 1:3]
        return cls(
            graph, scores, d=d, labels=labels, display_xy=xy, sweep_steps=sweep_steps
        )

    def _step(self, threshold: float) -> int:
        if not (0.0 <= threshold <= 1.0):
            raise BadRequest(f"threshold {threshold} outside [0, 1]")
        return self.sweep.step_at(threshold)

    def meta(self) -> dict:
        return {
            "n": self.graph.n,
            "k": self.graph.k,
            "d": self.d,
            "has_labels": self.labels is not None,
            "has_xy": self.display_xy is not None,
            "sweep_thresholds": [float(t) for t in self.sweep.thresholds],
        }

    def adjacency(self, threshold: float, downsample: int = 1) -> tuple[bytes, list[dict], float]:
        if downsample < 1:
            raise BadRequest(f"downsample must be >= 1, got {downsample}")
        step = self._step(threshold)
        raster, boxes = render_adjacency(
            self.sweep.perms[step],
            self.graph,
            self.masks[step],
            labeling=self.sweep.labelings[step],
            downsample=downsample,
        )
        return write_pgm(raster), boxes, float(self.sweep.thresholds[step])

    def components(self, threshold: float) -> tuple[list[dict], float]:
        step = self._step(threshold)
        lab = self.sweep.labelings[step]
        order = self.member_order[step]
        offsets = self.member_offsets[step]
        out = []
        for c in range(lab.n_components):
            members = order[offsets[c]:offsets[c + 1]]
            entry = {
                "id": c,
                "size": int(lab.sizes[c]),
                "member_ids": [int(m) for m in members[:MEMBER_CAP]],
                "member_ids_truncated": members.size > MEMBER_CAP,
            }
            if self.purities is not None:
                entry["purity"] = float(self.purities[step][c])
            out.append(entry)
        return out, float(self.sweep.thresholds[step])

    def points(self, threshold: float) -> tuple[dict, float] | None:
        if self.display_xy is None:
            return None
        step = self._step(threshold)
        lab = self.sweep.labelings[step]
        payload = {
            "xy": [[float(a), float(b)] for a, b in self.display_xy],
            "component_id": [int(c) for c in lab.component_id],
        }
        return payload, float(self.sweep.thresholds[step])


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, code: int, body: bytes, content_type: str) -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, code: int, payload) -> None:
        self._send(code, json.dumps(payload).encode("utf-8"), "application/json; charset=utf-8")

    def _param_float(self, params, name: str, required: bool = True, default=None) -> float:
        if name not in params:
            if required:
                raise BadRequest(f"missing query parameter {name!r}")
            return default
        try:
            return float(params[name][0])
        except ValueError:
            raise BadRequest(f"bad value for {name!r}: {params[name][0]!r}") from None

    def _param_int(self, params, name: str, default: int) -> int:
        if name not in params:
            return default
        try:
            return int(params[name][0])
        except ValueError:
            raise BadRequest(f"bad value for {name!r}: {params[name][0]!r}") from None

    def do_GET(self):  # noqa: N802 (http.server naming)
        url = urlparse(self.path)
        route = url.path.rstrip("/") or "/"
        session: Session | None = self.server.session
        ui_dir: Path | None = self.server.ui_dir
        try:
            if route in ("/", "/index.html") and ui_dir is not None:
                self._serve_static(ui_dir, "index.html")
                return
            if route.startswith("/ui/") and ui_dir is not None:
                self._serve_static(ui_dir, route[len("/ui/"):])
                return
            if session is None:
                self._send_json(503, {"error": "session not loaded"})
                return
            params = parse_qs(url.query)
            if route == "/meta":
                self._send_json(200, session.meta())
            elif route == "/adjacency":
                threshold = self._param_float(params, "threshold")
                downsample = self._param_int(params, "downsample", 1)
                pgm, _, snapped = session.adjacency(threshold, downsample)
                self.send_response(200)
                self.send_header("Content-Type", "image/x-portable-graymap")
                self.send_header("Content-Length", str(len(pgm)))
                self.send_header("X-Snapped-Threshold", f"{snapped:.17g}")
                self.end_headers()
                self.wfile.write(pgm)
            elif route == "/boxes":
                threshold = self._param_float(params, "threshold")
                downsample = self._param_int(params, "downsample", 1)
                _, boxes, snapped = session.adjacency(threshold, downsample)
                self._send_json(200, {"threshold": snapped, "boxes": boxes})
            elif route == "/components":
                threshold = self._param_float(params, "threshold")
                comps, snapped = session.components(threshold)
                self._send_json(200, {"threshold": snapped, "components": comps})
            elif route == "/points":
                threshold = self._param_float(params, "threshold")
                result = session.points(threshold)
                if result is None:
                    self._send_json(404, {"error": "dataset has no display coordinates"})
                    return
                payload, snapped = result
                self._send_json(200, {"threshold": snapped, **payload})
            else:
                self._send_json(404, {"error": f"unknown route {route}"})
        except BadRequest as exc:
            self._send_json(400, {"error": str(exc)})
        except BrokenPipeError:
            pass

    def _serve_static(self, ui_dir: Path, rel: str) -> None:
        target = (ui_dir / rel).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), ctype)


class ExploreServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, session: Session | None, ui_dir: Path | None = None):
        self.session = session
        self.ui_dir = ui_dir
        super().__init__(addr, _Handler)


def make_server(
    session: Session | None, host: str = "127.0.0.1", port: int = 0, ui_dir=None
) -> ExploreServer:
    """Create (but do not start) the HTTP server; port 0 picks an ephemeral port."""
    return ExploreServer((host, port), session, None if ui_dir is None else Path(ui_dir))
