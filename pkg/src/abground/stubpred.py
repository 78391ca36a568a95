"""Deterministic stub predictor.

Reads a pairs file, re-parses each answer to recover the ground-truth
boxes, perturbs them by a seeded jitter, and re-renders raw model output
in the pair's own wire format. This exercises the parse -> evaluate path
end to end without any trained model.

Jitter is a fraction of each box's diagonal: every box is translated by
exactly ``jitter * diagonal`` in a direction drawn from the seeded stream,
in the wire coordinate space ([0, 1000] grid), then rounded back to grid
integers and clamped. jitter=0 reproduces the answers exactly.
"""

from __future__ import annotations

import math
import random
from typing import Iterable

from .geometry import QuantizedBox
from .outparse import parse_output
from .promptgen import WireFormat, render_answer_text


def _jitter_box(coords, jitter: float, rng: random.Random) -> QuantizedBox:
    x1, y1, x2, y2 = coords
    theta = rng.uniform(0.0, 2.0 * math.pi)
    diag = math.hypot(x2 - x1, y2 - y1)
    dx = jitter * diag * math.cos(theta)
    dy = jitter * diag * math.sin(theta)
    def clamp(v: float) -> int:
        return max(0, min(1000, int(round(v))))

    return QuantizedBox(clamp(x1 + dx), clamp(y1 + dy),
                        clamp(x2 + dx), clamp(y2 + dy))


def stub_predict(
    pair_rows: Iterable[dict],
    jitter: float = 0.0,
    seed: int = 0,
) -> list[dict]:
    """Produce raw prediction rows ({image_id, class_name, format,
    raw_output}) from pairs file rows. Same seed, same bytes."""
    rng = random.Random(seed)
    out = []
    for row in pair_rows:
        fmt = WireFormat(row["format"])
        report = parse_output(row["answer"], fmt)
        qboxes = [_jitter_box(pred.coords, jitter, rng)
                  for pred in report.predictions]
        out.append({
            "image_id": row["image_id"],
            "class_name": row["class_name"],
            "format": fmt.value,
            "raw_output": render_answer_text(row["class_name"], qboxes, fmt),
        })
    return out
