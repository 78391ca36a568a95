"""Shared fixtures: fixture-file paths, documented counts, and case builders.

Bundled fixture counts (stand-ins for the licensed dataset exports):
  vindr_mini.csv      68 rows -> 44 instances (22 classes x 2 images);
                      split: 22 train / 22 test
  padchest_mini.csv   30 rows -> 30 instances; class-map partition:
                      12 known / 18 unknown
  e2e.csv             6 rows -> 5 instances, 3 classes, 7 gt boxes,
                      all dims 1000x1000 so grid coords equal pixels
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from abground.geometry import BoundingBox, ImageDims
from abground.metrics import GroundingCase
from abground.outparse import NormalizedPrediction

FIXTURES = Path(__file__).parent / "fixtures"

VINDR_MINI_TOTAL = 44
VINDR_MINI_TRAIN = 22
VINDR_MINI_TEST = 22
VINDR_MINI_CLASSES = 22
PADCHEST_MINI_KNOWN = 12
PADCHEST_MINI_UNKNOWN = 18
E2E_INSTANCES = 5


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def vindr_csv() -> Path:
    return FIXTURES / "vindr_mini.csv"


@pytest.fixture
def vindr_split_manifest() -> dict:
    return json.loads((FIXTURES / "vindr_mini_split.json").read_text())


@pytest.fixture
def padchest_csv() -> Path:
    return FIXTURES / "padchest_mini.csv"


@pytest.fixture
def e2e_csv() -> Path:
    return FIXTURES / "e2e.csv"


def make_pred(label: str, x1, y1, x2, y2, rank=0, score=1.0) -> NormalizedPrediction:
    return NormalizedPrediction(
        label, BoundingBox(x1, y1, x2, y2, label=label), score, rank)


def make_case(class_name: str, gt_boxes, preds, image_id="img",
              dims: ImageDims | None = None) -> GroundingCase:
    return GroundingCase(
        image_id=image_id,
        class_name=class_name,
        gt=[BoundingBox(*b) for b in gt_boxes],
        preds=list(preds),
        dims=dims,
    )
