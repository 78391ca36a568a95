"""Glue between parsed predictions, splits, and the metrics layer.

Assembles GroundingCases from a split's instances plus a raw prediction
file, and materializes evaluation runs as directories the service can
browse: report.json, cases.jsonl (per-case diagnostics), report.txt, and
run_meta.json.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .dataset import DatasetSplit
from .metrics import EvalReport, GroundingCase, render_text_report
from .outparse import normalize_predictions, parse_output
from .promptgen import WireFormat


@dataclass
class AssemblyStats:
    n_rows: int = 0
    n_fatal_parses: int = 0
    n_orphan_rows: int = 0
    n_predictions: int = 0
    n_discarded_fragments: int = 0
    fatal_cases: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "rows": self.n_rows,
            "fatal_parses": self.n_fatal_parses,
            "orphan_rows": self.n_orphan_rows,
            "predictions": self.n_predictions,
            "discarded_fragments": self.n_discarded_fragments,
        }


def assemble_cases(
    split: DatasetSplit,
    raw_rows: list[dict],
    json_coords: str = "normalized",
) -> tuple[list[GroundingCase], AssemblyStats]:
    """One case per split instance, predictions attached by (image, class).

    Unparsable outputs contribute zero predictions to their case (counted
    in the stats). Prediction rows matching no instance become gt-free
    cases so their boxes still count as false positives; rows without a
    known image id cannot be normalized (no dims) and are skipped as
    orphans.
    """
    stats = AssemblyStats()
    cases: dict[tuple[str, str], GroundingCase] = {}
    dims_by_image = {}
    for inst in split.instances:
        cases[(inst.image_id, inst.class_name)] = GroundingCase(
            image_id=inst.image_id,
            class_name=inst.class_name,
            gt=list(inst.fused_boxes),
            preds=[],
            dims=inst.dims,
        )
        dims_by_image[inst.image_id] = inst.dims

    for row in raw_rows:
        stats.n_rows += 1
        image_id = str(row["image_id"])
        class_name = str(row["class_name"])
        fmt = WireFormat(row["format"])
        dims = dims_by_image.get(image_id)
        if dims is None:
            stats.n_orphan_rows += 1
            continue
        report = parse_output(str(row.get("raw_output", "")), fmt)
        stats.n_discarded_fragments += len(report.discarded_fragments)
        if report.fatal:
            stats.n_fatal_parses += 1
            stats.fatal_cases.append({"image_id": image_id,
                                      "class_name": class_name})
        preds = normalize_predictions(report, dims, fmt, json_coords)
        stats.n_predictions += len(preds)
        key = (image_id, class_name)
        if key not in cases:
            cases[key] = GroundingCase(image_id, class_name, [], [], dims)
        cases[key].preds.extend(preds)

    ordered = [cases[key] for key in sorted(cases)]
    return ordered, stats


def run_digest(*parts: bytes | str) -> str:
    """Deterministic run id from the run's inputs and options."""
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8") if isinstance(part, str) else part)
        h.update(b"\x1f")
    return h.hexdigest()[:12]


class RunExistsError(ValueError):
    """A run directory already holds a different report for this id."""


def write_run_dir(
    runs_dir: str | Path,
    run_id: str,
    report: EvalReport,
    config: dict | None = None,
) -> Path:
    """Write report.json / cases.jsonl / report.txt / run_meta.json.

    The data artifacts are byte-deterministic for identical inputs;
    run_meta.json carries the wall-clock created_at and is the only
    non-reproducible file. Runs are immutable: rewriting an id with
    identical content is allowed (re-run), different content is refused.
    """
    run_dir = Path(runs_dir) / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    payload = report.to_json_dict()
    diagnostics = payload.pop("diagnostics")
    report_text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    existing = run_dir / "report.json"
    if existing.exists() and existing.read_text(encoding="utf-8") != report_text:
        raise RunExistsError(
            f"run {run_id!r} already exists with different content; "
            "pick a new --run-id")
    existing.write_text(report_text, encoding="utf-8")
    with (run_dir / "cases.jsonl").open("w", encoding="utf-8") as fh:
        for case in diagnostics:
            fh.write(json.dumps(case, sort_keys=True) + "\n")
    (run_dir / "report.txt").write_text(render_text_report(report),
                                        encoding="utf-8")
    meta = {
        "run_id": run_id,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config": config or {},
    }
    (run_dir / "run_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return run_dir


def load_report_dict(run_dir: str | Path) -> dict:
    return json.loads((Path(run_dir) / "report.json").read_text(encoding="utf-8"))
