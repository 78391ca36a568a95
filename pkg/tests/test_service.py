"""HTTP API tests against a live loopback server on an ephemeral port."""

from __future__ import annotations

import json
import shutil
import threading
import urllib.error
import urllib.parse
import urllib.request
from pathlib import Path

import pytest

from abground.knowledge import (
    CandidatePool,
    GenerationParams,
    SelectionLedger,
    save_pool,
    shipped_definition_store,
)
from abground.metrics import build_report
from abground.evalrun import write_run_dir
from abground.service import AppState, class_slug, make_server

from conftest import make_case, make_pred


@pytest.fixture
def workspace(tmp_path):
    defs_src = Path(__file__).parents[1] / "src/abground/data/vindr_definitions.json"
    defs = tmp_path / "definitions.json"
    shutil.copy(defs_src, defs)

    pools = tmp_path / "pools"
    pools.mkdir()
    for d in shipped_definition_store():
        pool = CandidatePool(d.class_name, [
            f"A first candidate description of {d.class_name.lower()} findings.",
            f"A second candidate description of {d.class_name.lower()} findings.",
            f"A third candidate description of {d.class_name.lower()} findings.",
            f"A fourth candidate description of {d.class_name.lower()} findings.",
            f"A fifth candidate description of {d.class_name.lower()} findings.",
        ], GenerationParams())
        save_pool(pool, pools / f"{class_slug(d.class_name)}.json")

    runs = tmp_path / "runs"
    cases = [
        make_case("Cardiomegaly", [(100, 100, 300, 300), (400, 400, 500, 520)],
                  [make_pred("Cardiomegaly", 110, 105, 310, 300, rank=0),
                   make_pred("Cardiomegaly", 395, 405, 505, 515, rank=1)],
                  image_id="img_a"),
        make_case("Scoliosis", [(50, 50, 90, 200)], [], image_id="img_b"),
    ]
    from abground.geometry import ImageDims
    for case in cases:
        case.dims = ImageDims(1024, 1024)
    report = build_report(cases)
    write_run_dir(runs, "runfix", report, {"note": "fixture"})

    return AppState(
        definitions_path=defs,
        pools_dir=pools,
        ledger_path=tmp_path / "ledger.jsonl",
        runs_dir=runs,
    )


@pytest.fixture
def server(workspace):
    srv = make_server(workspace, port=0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield base, workspace
    srv.shutdown()
    srv.server_close()


def get(base, path):
    with urllib.request.urlopen(base + path) as resp:
        return resp.status, json.loads(resp.read().decode())


def post(base, path, payload):
    req = urllib.request.Request(
        base + path, data=json.dumps(payload).encode(),
        headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode())


def geterr(base, path):
    try:
        with urllib.request.urlopen(base + path) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode())


class TestClasses:
    def test_store_yields_22_entries(self, server):
        base, _ = server
        status, payload = get(base, "/api/classes")
        assert status == 200
        assert len(payload) == 22
        assert all(not row["has_selection"] for row in payload)

    def test_missing_store_is_503(self, tmp_path):
        state = AppState(definitions_path=tmp_path / "absent.json")
        srv = make_server(state, port=0)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{srv.server_address[1]}"
        try:
            status, payload = geterr(base, "/api/classes")
            assert status == 503
        finally:
            srv.shutdown()
            srv.server_close()

    def test_selection_flag_after_post(self, server):
        base, _ = server
        name = urllib.parse.quote("Cardiomegaly")
        status, _ = post(base, f"/api/classes/{name}/selection", {"index": 2})
        assert status == 200
        _, payload = get(base, "/api/classes")
        flags = {row["class_name"]: row["has_selection"] for row in payload}
        assert flags["Cardiomegaly"] is True
        assert flags["Edema"] is False


class TestCandidates:
    def test_pool_of_five(self, server):
        base, _ = server
        name = urllib.parse.quote("Lung Opacity")
        status, payload = get(base, f"/api/classes/{name}/candidates")
        assert status == 200
        assert len(payload["candidates"]) == 5

    def test_params_echo_decoding_config(self, server):
        base, _ = server
        name = urllib.parse.quote("Edema")
        _, payload = get(base, f"/api/classes/{name}/candidates")
        params = payload["generation_params"]
        assert (params["temperature"], params["top_p"],
                params["repetition_penalty"], params["max_tokens"],
                params["n"]) == (0.7, 0.7, 1.1, 1024, 5)

    def test_unknown_class_404(self, server):
        base, _ = server
        status, _ = geterr(base, "/api/classes/NotAClass/candidates")
        assert status == 404

    def test_slash_in_class_name(self, server):
        base, _ = server
        name = urllib.parse.quote("Nodule / Mass", safe="")
        status, payload = get(base, f"/api/classes/{name}/candidates")
        assert status == 200
        assert payload["class_name"] == "Nodule / Mass"


class TestSelectionEndpoint:
    def test_valid_selection_roundtrip(self, server):
        base, state = server
        name = urllib.parse.quote("Edema")
        status, payload = post(base, f"/api/classes/{name}/selection", {"index": 1})
        assert status == 200
        assert payload["selected_index"] == 1
        assert payload["selected_by"] == "human"
        ledger = SelectionLedger(state.ledger_path)
        assert ledger.selections()["Edema"].selected_index == 1

    def test_out_of_bounds_422_with_bounds(self, server):
        base, _ = server
        name = urllib.parse.quote("Edema")
        status, payload = post(base, f"/api/classes/{name}/selection", {"index": 9})
        assert status == 422
        assert payload["bounds"] == [0, 4]

    def test_non_integer_index_422(self, server):
        base, _ = server
        name = urllib.parse.quote("Edema")
        status, _ = post(base, f"/api/classes/{name}/selection", {"index": "x"})
        assert status == 422

    def test_idempotent_retry_same_body(self, server):
        base, state = server
        name = urllib.parse.quote("Edema")
        post(base, f"/api/classes/{name}/selection", {"index": 3})
        post(base, f"/api/classes/{name}/selection", {"index": 3})
        ledger = SelectionLedger(state.ledger_path)
        entries = [e for e in ledger.entries() if e.class_name == "Edema"]
        assert len(entries) == 1

    def test_reselection_latest_wins(self, server):
        base, state = server
        name = urllib.parse.quote("Edema")
        post(base, f"/api/classes/{name}/selection", {"index": 0})
        post(base, f"/api/classes/{name}/selection", {"index": 4})
        ledger = SelectionLedger(state.ledger_path)
        entries = [e for e in ledger.entries() if e.class_name == "Edema"]
        assert len(entries) == 2
        assert ledger.selections()["Edema"].selected_index == 4


class TestRuns:
    def test_run_index(self, server):
        base, _ = server
        status, payload = get(base, "/api/runs")
        assert status == 200
        assert payload == [{"run_id": "runfix", "n_cases": 2}]

    def test_case_index(self, server):
        base, _ = server
        status, payload = get(base, "/api/runs/runfix/cases")
        assert status == 200
        assert [c["case_id"] for c in payload] == [0, 1]
        assert payload[0]["n_gt"] == 2 and payload[0]["n_pred"] == 2

    def test_case_overlay_payload(self, server):
        base, _ = server
        status, payload = get(base, "/api/runs/runfix/cases/0")
        assert status == 200
        assert len(payload["gt_boxes"]) == 2
        assert len(payload["predictions"]) == 2
        assert len(payload["pairs"]) == 2
        assert payload["dims"] == {"width": 1024, "height": 1024}
        assert payload["image"] is None
        for pair in payload["pairs"]:
            assert 0.0 < pair["iou"] <= 1.0
            assert 0.0 <= pair["loc"] <= 1.0

    def test_gt_only_case(self, server):
        base, _ = server
        _, payload = get(base, "/api/runs/runfix/cases/1")
        assert payload["predictions"] == []
        assert len(payload["gt_boxes"]) == 1

    def test_unknown_ids_404(self, server):
        base, _ = server
        assert geterr(base, "/api/runs/nope/cases/0")[0] == 404
        assert geterr(base, "/api/runs/runfix/cases/99")[0] == 404


def _load_schema():
    root = Path(__file__).parents[1] / "docs" / "openapi.json"
    return json.loads(root.read_text())


def _validate(schema: dict, value, spec: dict, path="$"):
    """Minimal structural validator for the published schema document."""
    if "$ref" in schema:
        ref = schema["$ref"].split("/")[-1]
        _validate(spec["components"]["schemas"][ref], value, spec, path)
        return
    types = schema.get("type")
    if types is not None:
        allowed = types if isinstance(types, list) else [types]
        kind = {bool: "boolean", int: "integer", float: "number",
                str: "string", list: "array", dict: "object",
                type(None): "null"}[type(value)]
        if kind == "integer" and "number" in allowed:
            kind = "number"
        assert kind in allowed, f"{path}: {kind} not in {allowed}"
    if isinstance(value, dict):
        for key in schema.get("required", []):
            assert key in value, f"{path}: missing required {key!r}"
        for key, sub in schema.get("properties", {}).items():
            if key in value:
                _validate(sub, value[key], spec, f"{path}.{key}")
    if isinstance(value, list) and "items" in schema:
        if "minItems" in schema:
            assert len(value) >= schema["minItems"], f"{path}: too short"
        if "maxItems" in schema:
            assert len(value) <= schema["maxItems"], f"{path}: too long"
        for i, item in enumerate(value):
            _validate(schema["items"], item, spec, f"{path}[{i}]")
    if "enum" in schema:
        assert value in schema["enum"], f"{path}: {value!r} not in enum"


class TestSchemaConformance:
    def _response_schema(self, spec, path, method, status):
        body = spec["paths"][path][method]["responses"][str(status)]
        if "$ref" in body:
            ref = body["$ref"].split("/")[-1]
            body = spec["components"]["responses"][ref]
        return body["content"]["application/json"]["schema"]

    def test_fixture_traffic_validates(self, server):
        base, _ = server
        spec = _load_schema()

        _, classes = get(base, "/api/classes")
        _validate(self._response_schema(spec, "/api/classes", "get", 200),
                  classes, spec)

        name = urllib.parse.quote("Lung Opacity")
        _, pool = get(base, f"/api/classes/{name}/candidates")
        _validate(self._response_schema(
            spec, "/api/classes/{name}/candidates", "get", 200), pool, spec)

        _, record = post(base, f"/api/classes/{name}/selection", {"index": 1})
        _validate(self._response_schema(
            spec, "/api/classes/{name}/selection", "post", 200), record, spec)

        _, runs = get(base, "/api/runs")
        _validate(self._response_schema(spec, "/api/runs", "get", 200),
                  runs, spec)

        _, cases = get(base, "/api/runs/runfix/cases")
        _validate(self._response_schema(
            spec, "/api/runs/{id}/cases", "get", 200), cases, spec)

        for case_id in (0, 1):
            _, payload = get(base, f"/api/runs/runfix/cases/{case_id}")
            _validate(self._response_schema(
                spec, "/api/runs/{id}/cases/{case_id}", "get", 200),
                payload, spec)

        status, err = post(base, f"/api/classes/{name}/selection", {"index": 99})
        assert status == 422
        _validate(spec["components"]["responses"]["Error"]["content"]
                  ["application/json"]["schema"], err, spec)


class TestStatic:
    def test_placeholder_index_without_bundle(self, server):
        base, _ = server
        with urllib.request.urlopen(base + "/") as resp:
            body = resp.read().decode()
        assert "abground" in body

    def test_ui_bundle_served_when_configured(self, workspace, tmp_path):
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<html><body>bundle</body></html>")
        (ui / "app.js").write_text("console.log('ok')")
        workspace.ui_dir = ui
        srv = make_server(workspace, port=0)
        thread = threading.Thread(target=srv.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{srv.server_address[1]}"
        try:
            with urllib.request.urlopen(base + "/") as resp:
                assert b"bundle" in resp.read()
            with urllib.request.urlopen(base + "/app.js") as resp:
                assert resp.headers["Content-Type"].startswith("text/javascript")
            status, _ = geterr(base, "/../etc/passwd")
            assert status == 404
        finally:
            srv.shutdown()
            srv.server_close()
