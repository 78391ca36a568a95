"""Robust parsers for raw model output in either wire format.

Parsers never raise on malformed input: every call returns a ParseReport
whose ``discarded_fragments`` explain what was dropped and why. Label
filtering is deliberately not done here; the metrics layer compares
predicted labels against the queried class.

Location-token grammar: repetitions of [label text][4 x <loc_K>] with
K in 0..1000. Tokens separated only by whitespace form a run; a run is
consumed four tokens at a time, each chunk becoming one prediction with
the text preceding the run as its label. Chunks containing K > 1000 are
discarded (out_of_vocab), trailing chunks shorter than four tokens are
discarded (incomplete_group).

JSON grammar: the first balanced bracket span that parses as a JSON array
of objects is used, which makes the parser invariant to surrounding
prose, whitespace, and markdown code fences. Objects need a "bbox_2d"
array of four numbers and a "label"; anything else in the array is
discarded (bad_shape). No such span at all marks the report fatal.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .geometry import BoundingBox, ImageDims
from .promptgen import WireFormat

logger = logging.getLogger(__name__)

_LOC_TOKEN = re.compile(r"<\s*loc_(\d+)\s*>")

JSON_COORDS_NORMALIZED = "normalized"
JSON_COORDS_PIXELS = "pixels"


@dataclass(frozen=True)
class Prediction:
    """One parsed box: grid coordinates for loc tokens, contract-space
    numbers for JSON (normalized to [0, 1000] unless the prompt asked for
    pixels)."""

    label: str
    coords: tuple[float, float, float, float]
    rank: int
    score: float = 1.0


@dataclass(frozen=True)
class DiscardedFragment:
    span: str
    reason: str


@dataclass
class ParseReport:
    predictions: list[Prediction] = field(default_factory=list)
    discarded_fragments: list[DiscardedFragment] = field(default_factory=list)
    fatal: bool = False


@dataclass(frozen=True)
class NormalizedPrediction:
    label: str
    box: BoundingBox
    score: float
    rank: int


def parse_loc_tokens(raw: str) -> ParseReport:
    """Parse location-token output. Never fatal: zero groups on nonempty
    input simply yields an empty prediction list."""
    report = ParseReport()
    matches = list(_LOC_TOKEN.finditer(raw))
    if not matches:
        return report

    # split token matches into runs separated only by whitespace
    runs: list[list[re.Match]] = [[matches[0]]]
    for prev, cur in zip(matches, matches[1:]):
        if raw[prev.end():cur.start()].strip() == "":
            runs[-1].append(cur)
        else:
            runs.append([cur])

    rank = 0
    cursor = 0
    for run in runs:
        label = raw[cursor:run[0].start()].strip()
        cursor = run[-1].end()
        for i in range(0, len(run) - len(run) % 4, 4):
            chunk = run[i:i + 4]
            values = [int(m.group(1)) for m in chunk]
            span = raw[chunk[0].start():chunk[-1].end()]
            if any(v > 1000 for v in values):
                report.discarded_fragments.append(
                    DiscardedFragment(span, "out_of_vocab"))
                continue
            report.predictions.append(
                Prediction(label, tuple(float(v) for v in values), rank))
            rank += 1
        leftover = len(run) % 4
        if leftover:
            span = raw[run[-leftover].start():run[-1].end()]
            report.discarded_fragments.append(
                DiscardedFragment(span, "incomplete_group"))
    return report


def _balanced_spans(raw: str) -> Iterable[str]:
    """Yield balanced [...] substrings left to right, string-aware."""
    n = len(raw)
    pos = 0
    while pos < n:
        start = raw.find("[", pos)
        if start < 0:
            return
        depth = 0
        in_string = False
        escaped = False
        end = -1
        for i in range(start, n):
            ch = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth == 0:
                    end = i
                    break
        if end < 0:
            pos = start + 1
            continue
        yield raw[start:end + 1]
        pos = start + 1


def _object_to_prediction(obj: dict, rank: int) -> Prediction | None:
    bbox = obj.get("bbox_2d")
    label = obj.get("label")
    if not isinstance(bbox, list) or len(bbox) != 4:
        return None
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox):
        return None
    if not isinstance(label, str):
        return None
    score = obj.get("score", 1.0)
    if not (isinstance(score, (int, float)) and not isinstance(score, bool)
            and 0 < score <= 1):
        score = 1.0
    return Prediction(label, tuple(float(v) for v in bbox), rank, float(score))


def parse_json_boxes(raw: str) -> ParseReport:
    """Parse JSON-format output. Fatal when no array of objects can be
    recovered anywhere in the text."""
    report = ParseReport()
    for span in _balanced_spans(raw):
        try:
            payload = json.loads(span)
        except (json.JSONDecodeError, RecursionError):
            continue
        if not isinstance(payload, list):
            continue
        if not all(isinstance(el, dict) for el in payload):
            continue
        rank = 0
        for el in payload:
            pred = _object_to_prediction(el, rank)
            if pred is None:
                report.discarded_fragments.append(
                    DiscardedFragment(json.dumps(el), "bad_shape"))
                continue
            report.predictions.append(pred)
            rank += 1
        return report

    excerpt = raw.strip()[:120]
    report.fatal = True
    report.discarded_fragments.append(DiscardedFragment(excerpt, "no_array"))
    return report


def parse_output(raw: str, fmt: WireFormat) -> ParseReport:
    if fmt is WireFormat.LOC_TOKEN:
        return parse_loc_tokens(raw)
    return parse_json_boxes(raw)


def normalize_predictions(
    report: ParseReport,
    dims: ImageDims,
    fmt: WireFormat,
    json_coords: str = JSON_COORDS_NORMALIZED,
) -> list[NormalizedPrediction]:
    """Map parsed predictions into clamped pixel-space boxes.

    Loc-token values are dequantized; JSON values are interpreted on the
    prompt's coordinate contract ([0, 1000]-normalized by default, raw
    pixels with ``json_coords="pixels"``). Inverted corners are swapped,
    boxes are clamped to the image, and zero-area boxes are dropped with
    a warning.
    """
    if json_coords not in (JSON_COORDS_NORMALIZED, JSON_COORDS_PIXELS):
        raise ValueError(f"unknown json_coords mode: {json_coords!r}")
    scale_to_pixels = fmt is WireFormat.LOC_TOKEN or json_coords == JSON_COORDS_NORMALIZED

    out = []
    for pred in report.predictions:
        x1, y1, x2, y2 = pred.coords
        if scale_to_pixels:
            x1, x2 = x1 / 1000.0 * dims.width, x2 / 1000.0 * dims.width
            y1, y2 = y1 / 1000.0 * dims.height, y2 / 1000.0 * dims.height
        x1, x2 = sorted((x1, x2))
        y1, y2 = sorted((y1, y2))
        x1 = min(max(x1, 0.0), float(dims.width))
        x2 = min(max(x2, 0.0), float(dims.width))
        y1 = min(max(y1, 0.0), float(dims.height))
        y2 = min(max(y2, 0.0), float(dims.height))
        if x2 - x1 <= 0.0 or y2 - y1 <= 0.0:
            logger.warning("dropping zero-area prediction %s at rank %d",
                           pred.coords, pred.rank)
            continue
        out.append(NormalizedPrediction(
            pred.label, BoundingBox(x1, y1, x2, y2, label=pred.label),
            pred.score, pred.rank))
    return out


def write_raw_predictions(rows: Iterable[dict], path: str | Path) -> int:
    """Bulk prediction format: one {image_id, class_name, format, raw_output}
    object per line."""
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
            count += 1
    return count


def read_raw_predictions(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_parsed_dump(entries: Iterable[dict], path: str | Path) -> int:
    """Parsed dump format: {image_id, class_name, predictions: [{label, box,
    score}]} per line."""
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
            count += 1
    return count
