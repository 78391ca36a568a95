"""Local HTTP API backing the review UI.

File-backed, single-operator service: definitions and candidate pools are
read from disk, selections funnel through the append-only ledger (one
writer lock), evaluation runs are directories of report + per-case
diagnostics. Binds to loopback by default; medical-adjacent data should
not be exposed accidentally.

Endpoints (all JSON):
  GET  /api/classes                      class list with selection status
  GET  /api/classes/{name}/candidates    candidate pool for one class
  POST /api/classes/{name}/selection     record a selection {index}
  GET  /api/runs                         run index
  GET  /api/runs/{id}/cases              case index for a run
  GET  /api/runs/{id}/cases/{case_id}    overlay payload for one case

The built UI bundle (when present) is served at /; images, when a
directory is configured, at /images/.
"""

from __future__ import annotations

import json
import re
import threading
import urllib.parse
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .knowledge import (
    AbnormalityDefinition,
    SelectionError,
    SelectionLedger,
    load_definition_store,
    load_pool,
    select_candidate,
)

DEFAULT_PORT = 7700

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}

_PLACEHOLDER_INDEX = """<!doctype html>
<html><head><title>abground review</title></head>
<body><h1>abground service</h1>
<p>No UI bundle configured. The JSON API is available under /api/.</p>
</body></html>
"""


def class_slug(name: str) -> str:
    """Filesystem-safe pool filename stem for a class name."""
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower()


@dataclass
class AppState:
    definitions_path: Path | None = None
    pools_dir: Path | None = None
    ledger_path: Path | None = None
    runs_dir: Path | None = None
    images_dir: Path | None = None
    ui_dir: Path | None = None
    _write_lock: threading.Lock = field(default_factory=threading.Lock)

    def definitions(self) -> list[AbnormalityDefinition] | None:
        if self.definitions_path is None or not self.definitions_path.exists():
            return None
        return load_definition_store(self.definitions_path)

    def ledger(self) -> SelectionLedger | None:
        if self.ledger_path is None:
            return None
        return SelectionLedger(self.ledger_path)

    def pool_path(self, class_name: str) -> Path | None:
        if self.pools_dir is None:
            return None
        return self.pools_dir / f"{class_slug(class_name)}.json"


class _ApiError(Exception):
    def __init__(self, status: int, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.payload = {"error": message, **extra}


def _classes_payload(state: AppState) -> list[dict]:
    defs = state.definitions()
    if defs is None:
        raise _ApiError(503, "definition store not available")
    ledger = state.ledger()
    selected = set(ledger.selections()) if ledger is not None else set()
    return [
        {"class_name": d.class_name, "definition": d.definition,
         "source": d.source, "has_selection": d.class_name in selected}
        for d in defs
    ]


def _find_definition(state: AppState, name: str) -> AbnormalityDefinition:
    defs = state.definitions()
    if defs is None:
        raise _ApiError(503, "definition store not available")
    for d in defs:
        if d.class_name == name:
            return d
    raise _ApiError(404, f"unknown class: {name}")


def _candidates_payload(state: AppState, name: str) -> dict:
    _find_definition(state, name)
    pool_path = state.pool_path(name)
    if pool_path is None or not pool_path.exists():
        raise _ApiError(404, f"no candidate pool for class: {name}")
    pool = load_pool(pool_path)
    return {
        "class_name": pool.class_name,
        "candidates": pool.candidates,
        "generation_params": pool.params.as_dict(),
    }


def _post_selection(state: AppState, name: str, body: dict) -> dict:
    _find_definition(state, name)
    pool_path = state.pool_path(name)
    if pool_path is None or not pool_path.exists():
        raise _ApiError(404, f"no candidate pool for class: {name}")
    ledger = state.ledger()
    if ledger is None:
        raise _ApiError(503, "no selection ledger configured")
    pool = load_pool(pool_path)
    index = body.get("index")
    if not isinstance(index, int) or isinstance(index, bool):
        raise _ApiError(422, "body must carry an integer 'index'",
                        bounds=[0, len(pool.candidates) - 1])
    who = body.get("selected_by", "human")

    with state._write_lock:
        # idempotent retry: identical to the current latest entry -> no-op
        latest = ledger.selections().get(name)
        if (latest is not None and latest.selected_index == index
                and latest.selected_by == who):
            prompt = latest
        else:
            try:
                prompt = select_candidate(pool, index, who, ledger)
            except SelectionError as exc:
                raise _ApiError(422, str(exc),
                                bounds=[0, len(pool.candidates) - 1]) from exc
            except ValueError as exc:
                raise _ApiError(422, str(exc)) from exc
    return {
        "class_name": prompt.class_name,
        "description": prompt.description,
        "selected_index": prompt.selected_index,
        "selected_by": prompt.selected_by,
        "timestamp": prompt.timestamp,
    }


def _run_dir(state: AppState, run_id: str) -> Path:
    if state.runs_dir is None:
        raise _ApiError(404, "no runs directory configured")
    run_dir = state.runs_dir / run_id
    if not run_dir.is_dir() or not (run_dir / "cases.jsonl").exists():
        raise _ApiError(404, f"unknown run: {run_id}")
    return run_dir


def _run_cases(run_dir: Path) -> list[dict]:
    cases = []
    with (run_dir / "cases.jsonl").open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                cases.append(json.loads(line))
    return cases


def _runs_payload(state: AppState) -> list[dict]:
    if state.runs_dir is None or not state.runs_dir.is_dir():
        return []
    out = []
    for run_dir in sorted(state.runs_dir.iterdir()):
        if run_dir.is_dir() and (run_dir / "cases.jsonl").exists():
            out.append({"run_id": run_dir.name,
                        "n_cases": len(_run_cases(run_dir))})
    return out


def _case_index_payload(state: AppState, run_id: str) -> list[dict]:
    cases = _run_cases(_run_dir(state, run_id))
    return [
        {"case_id": idx, "image_id": c["image_id"], "class_name": c["class_name"],
         "n_gt": len(c["gt_boxes"]), "n_pred": len(c["predictions"])}
        for idx, c in enumerate(cases)
    ]


def _image_url(state: AppState, image_id: str) -> str | None:
    if state.images_dir is None:
        return None
    for suffix in _IMAGE_SUFFIXES:
        candidate = state.images_dir / f"{image_id}{suffix}"
        if candidate.exists():
            return f"/images/{candidate.name}"
    return None


def _case_payload(state: AppState, run_id: str, case_id: str) -> dict:
    cases = _run_cases(_run_dir(state, run_id))
    try:
        idx = int(case_id)
        case = cases[idx]
    except (ValueError, IndexError) as exc:
        raise _ApiError(404, f"unknown case: {case_id}") from exc
    payload = dict(case)
    payload["case_id"] = idx
    payload["run_id"] = run_id
    payload["image"] = _image_url(state, case["image_id"])
    return payload


class _Handler(BaseHTTPRequestHandler):
    state: AppState  # set by make_server

    server_version = "abground"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, status: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_file(self, path: Path) -> None:
        body = path.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type",
                         _CONTENT_TYPES.get(path.suffix.lower(),
                                            "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _static(self, root: Path | None, rel: str, fallback: str | None = None):
        if root is None:
            if fallback is not None:
                body = fallback.encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)
                return
            raise _ApiError(404, "not found")
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            raise _ApiError(404, "not found")
        self._send_file(target)

    def _route(self, method: str, path: str, body: dict | None):
        state = self.state
        parts = [urllib.parse.unquote(p) for p in path.strip("/").split("/") if p]

        if method == "GET" and parts == ["api", "classes"]:
            return _classes_payload(state)
        if (method == "GET" and len(parts) == 4 and parts[:2] == ["api", "classes"]
                and parts[3] == "candidates"):
            return _candidates_payload(state, parts[2])
        if (method == "POST" and len(parts) == 4 and parts[:2] == ["api", "classes"]
                and parts[3] == "selection"):
            return _post_selection(state, parts[2], body or {})
        if method == "GET" and parts == ["api", "runs"]:
            return _runs_payload(state)
        if (method == "GET" and len(parts) == 4 and parts[:2] == ["api", "runs"]
                and parts[3] == "cases"):
            return _case_index_payload(state, parts[2])
        if (method == "GET" and len(parts) == 5 and parts[:2] == ["api", "runs"]
                and parts[3] == "cases"):
            return _case_payload(state, parts[2], parts[4])
        raise _ApiError(404, f"no such endpoint: {method} {path}")

    def _dispatch(self, method: str) -> None:
        parsed = urllib.parse.urlparse(self.path)
        path = parsed.path
        try:
            if method == "GET" and not path.startswith("/api/"):
                if path.startswith("/images/"):
                    self._static(self.state.images_dir, path[len("/images/"):])
                else:
                    rel = path.lstrip("/") or "index.html"
                    self._static(self.state.ui_dir, rel,
                                 fallback=_PLACEHOLDER_INDEX
                                 if rel == "index.html" else None)
                return
            body = None
            if method == "POST":
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length) if length else b"{}"
                try:
                    body = json.loads(raw.decode("utf-8") or "{}")
                except json.JSONDecodeError as exc:
                    raise _ApiError(422, f"invalid JSON body: {exc}") from exc
                if not isinstance(body, dict):
                    raise _ApiError(422, "body must be a JSON object")
            self._send_json(200, self._route(method, path, body))
        except _ApiError as exc:
            self._send_json(exc.status, exc.payload)
        except Exception as exc:  # noqa: BLE001 - never kill the connection thread
            self._send_json(500, {"error": f"internal error: {exc}"})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


def make_server(state: AppState, host: str = "127.0.0.1",
                port: int = DEFAULT_PORT) -> ThreadingHTTPServer:
    """Create (but do not start) the HTTP server; port 0 picks a free port."""
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve(state: AppState, host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> None:
    server = make_server(state, host, port)
    actual_port = server.server_address[1]
    print(f"serving on http://{host}:{actual_port}/ (Ctrl-C to stop)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
