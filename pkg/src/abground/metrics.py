"""Detection evaluation: per-class AP, mAP families, and RoDeO.

Grounding model outputs carry no confidence scores, so predictions default
to score 1.0 and are ordered by emission rank; the precision-recall curve
is the cumulative-order curve over the canonical pool order
(score desc, rank asc, image_id asc). That order is a total order, which
makes AP invariant under permutation of the evaluated cases. AP uses
101-point interpolation by default ("all" selects all-point/area
interpolation); the convention is recorded in report metadata.

Matching is the IoU-maximal one-to-one assignment over pairs with
positive IoU: exhaustive (bitmask DP, lexicographically smallest optimum)
up to 8x8, Hungarian above. RoDeO scores each matched pair on location
(1 - center distance / gt diagonal, floored at 0), shape (IoU after
aligning centers), and class (label equals the queried class,
case-insensitive); each component is 100 * 2 * sum(pair scores) /
(num preds + num gts) over the whole set, so unmatched boxes on either
side penalize every component. The total is the harmonic mean of the
three components, 0 if any component is 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .dataset import ClassMap
from .geometry import BoundingBox, ImageDims
from .outparse import NormalizedPrediction

AP_INTERP_101 = "101"
AP_INTERP_ALL = "all"

MAP_50_95_THRESHOLDS = tuple(np.arange(50, 100, 5) / 100.0)

_EXHAUSTIVE_LIMIT = 8


class MetricsError(ValueError):
    """Evaluation set unusable (e.g. no class has any ground truth)."""


@dataclass
class GroundingCase:
    """One image's ground truth and predictions for one queried class."""

    image_id: str
    class_name: str
    gt: list[BoundingBox]
    preds: list[NormalizedPrediction]
    dims: ImageDims | None = None


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]
    unmatched_preds: list[int]
    unmatched_gts: list[int]


@dataclass(frozen=True)
class RodeoScores:
    r_loc: float
    r_shape: float
    r_cls: float
    r_total: float

    def as_dict(self) -> dict[str, float]:
        return {"R_loc": self.r_loc, "R_shape": self.r_shape,
                "R_cls": self.r_cls, "R_total": self.r_total}


def _iou_matrix(case: GroundingCase) -> np.ndarray:
    if not case.preds or not case.gt:
        return np.zeros((len(case.preds), len(case.gt)))
    pred_arr = np.array([p.box.corners() for p in case.preds])
    gt_arr = np.array([g.corners() for g in case.gt])
    return _kernels.iou_matrix(pred_arr, gt_arr)


def _match_exhaustive(iou: np.ndarray) -> list[tuple[int, int]]:
    n, m = iou.shape
    full = (1 << m) - 1
    memo: dict[tuple[int, int], float] = {}

    def best(i: int, mask: int) -> float:
        if i == n:
            return 0.0
        key = (i, mask)
        cached = memo.get(key)
        if cached is not None:
            return cached
        value = best(i + 1, mask)  # leave pred i unmatched
        avail = full & ~mask
        j = 0
        rest = avail
        while rest:
            if rest & 1:
                w = iou[i, j]
                if w > 0.0:
                    value = max(value, w + best(i + 1, mask | (1 << j)))
            rest >>= 1
            j += 1
        memo[key] = value
        return value

    # reconstruct the optimum, preferring the lexicographically smallest
    # pair sequence: match the earliest pred with the smallest feasible gt
    pairs = []
    mask = 0
    for i in range(n):
        target = best(i, mask)
        chosen = -1
        for j in range(m):
            if mask & (1 << j) or iou[i, j] <= 0.0:
                continue
            if math.isclose(iou[i, j] + best(i + 1, mask | (1 << j)), target,
                            rel_tol=0.0, abs_tol=1e-12):
                chosen = j
                break
        if chosen >= 0:
            pairs.append((i, chosen))
            mask |= 1 << chosen
    return pairs


def _match_hungarian(iou: np.ndarray) -> list[tuple[int, int]]:
    from scipy.optimize import linear_sum_assignment

    rows, cols = linear_sum_assignment(-iou)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if iou[i, j] > 0.0]


def match_boxes(case: GroundingCase) -> MatchResult:
    """One-to-one assignment maximizing total IoU over positive-IoU pairs."""
    iou = _iou_matrix(case)
    n, m = iou.shape
    if n == 0 or m == 0:
        pairs = []
    elif n <= _EXHAUSTIVE_LIMIT and m <= _EXHAUSTIVE_LIMIT:
        pairs = _match_exhaustive(iou)
    else:
        pairs = _match_hungarian(iou)
    pairs = sorted(pairs)
    matched_p = {p for p, _ in pairs}
    matched_g = {g for _, g in pairs}
    return MatchResult(
        pairs=[(p, g, float(iou[p, g])) for p, g in pairs],
        unmatched_preds=[i for i in range(n) if i not in matched_p],
        unmatched_gts=[j for j in range(m) if j not in matched_g],
    )


def _pooled_predictions(cases: Sequence[GroundingCase]):
    """Canonical class-pool order: score desc, emission rank asc, image asc."""
    pool = []
    for ci, case in enumerate(cases):
        for pi, pred in enumerate(case.preds):
            pool.append((-pred.score, pred.rank, case.image_id, ci, pi))
    pool.sort(key=lambda t: t[:3])
    return [(ci, pi) for *_ignored, ci, pi in pool]


def average_precision(
    cases: Sequence[GroundingCase],
    iou_threshold: float,
    interp: str = AP_INTERP_101,
) -> float | None:
    """AP in [0, 100] for one class's cases; None when the class has no gt."""
    total_gt = sum(len(c.gt) for c in cases)
    if total_gt == 0:
        return None

    matrices = [_iou_matrix(c) for c in cases]
    used = [np.zeros(len(c.gt), dtype=bool) for c in cases]
    flags = []
    for ci, pi in _pooled_predictions(cases):
        row = matrices[ci][pi]
        best_j = -1
        best_iou = 0.0
        for j in range(row.shape[0]):
            if used[ci][j] or row[j] < iou_threshold:
                continue
            if row[j] > best_iou:
                best_iou = row[j]
                best_j = j
        if best_j >= 0:
            used[ci][best_j] = True
            flags.append(True)
        else:
            flags.append(False)

    if not flags:
        return 0.0
    tp = np.cumsum(np.array(flags, dtype=np.int64))
    ranks = np.arange(1, len(flags) + 1)
    precision = tp / ranks
    recall = tp / total_gt

    if interp == AP_INTERP_ALL:
        # area under the envelope, evaluated at recall change points
        env = np.maximum.accumulate(precision[::-1])[::-1]
        ap = 0.0
        prev_recall = 0.0
        for k in range(len(flags)):
            if recall[k] > prev_recall:
                ap += (recall[k] - prev_recall) * env[k]
                prev_recall = recall[k]
        return 100.0 * ap
    if interp != AP_INTERP_101:
        raise ValueError(f"unknown AP interpolation: {interp!r}")

    env = np.maximum.accumulate(precision[::-1])[::-1]
    grid = np.arange(101) / 100.0
    idx = np.searchsorted(recall, grid, side="left")
    samples = np.where(idx < len(flags), env[np.minimum(idx, len(flags) - 1)], 0.0)
    return float(100.0 * samples.sum() / 101.0)


def group_by_class(cases: Iterable[GroundingCase]) -> dict[str, list[GroundingCase]]:
    grouped: dict[str, list[GroundingCase]] = {}
    for case in cases:
        grouped.setdefault(case.class_name, []).append(case)
    return grouped


def map_family(
    cases: Sequence[GroundingCase],
    interp: str = AP_INTERP_101,
) -> dict[str, float]:
    """mAP30 / mAP50 / mAP75 / mAP50_95 over classes with ground truth."""
    grouped = group_by_class(cases)
    per_class = {
        name: {t: average_precision(cls_cases, t, interp)
               for t in {0.30, 0.50, 0.75, *MAP_50_95_THRESHOLDS}}
        for name, cls_cases in grouped.items()
    }
    scored = {n: aps for n, aps in per_class.items() if aps[0.50] is not None}
    if not scored:
        raise MetricsError("no class in the evaluation set has ground truth")

    def mean_at(threshold: float) -> float:
        return float(np.mean([aps[threshold] for aps in scored.values()]))

    return {
        "mAP30": mean_at(0.30),
        "mAP50": mean_at(0.50),
        "mAP75": mean_at(0.75),
        "mAP50_95": float(np.mean([
            np.mean([aps[t] for t in MAP_50_95_THRESHOLDS])
            for aps in scored.values()
        ])),
    }


def _pair_scores(case: GroundingCase, match: MatchResult):
    scores = []
    query = case.class_name.strip().lower()
    for pi, gi, iou in match.pairs:
        pred, gt = case.preds[pi], case.gt[gi]
        diag = gt.diagonal
        if diag > 0.0:
            dist = _kernels.center_distance(*pred.box.corners(), *gt.corners())
            loc = max(0.0, 1.0 - dist / diag)
        else:
            loc = 0.0
        shape = _kernels.centered_iou(*pred.box.corners(), *gt.corners())
        cls = 1.0 if pred.label.strip().lower() == query else 0.0
        scores.append({"pred": pi, "gt": gi, "iou": iou,
                       "loc": loc, "shape": shape, "cls": cls})
    return scores


def harmonic_total(r_loc: float, r_shape: float, r_cls: float) -> float:
    if min(r_loc, r_shape, r_cls) <= 0.0:
        return 0.0
    return 3.0 / (1.0 / r_loc + 1.0 / r_shape + 1.0 / r_cls)


def rodeo(cases: Sequence[GroundingCase]) -> RodeoScores:
    loc_sum = shape_sum = cls_sum = 0.0
    denom = 0
    for case in cases:
        match = match_boxes(case)
        for entry in _pair_scores(case, match):
            loc_sum += entry["loc"]
            shape_sum += entry["shape"]
            cls_sum += entry["cls"]
        denom += len(case.preds) + len(case.gt)
    if denom == 0:
        return RodeoScores(0.0, 0.0, 0.0, 0.0)
    r_loc = 100.0 * 2.0 * loc_sum / denom
    r_shape = 100.0 * 2.0 * shape_sum / denom
    r_cls = 100.0 * 2.0 * cls_sum / denom
    return RodeoScores(r_loc, r_shape, r_cls, harmonic_total(r_loc, r_shape, r_cls))


@dataclass
class EvalReport:
    per_class: dict[str, dict[str, float | None]]
    aggregate: dict[str, float]
    rodeo: RodeoScores
    case_diagnostics: list[dict] = field(default_factory=list)
    groups: dict[str, dict] = field(default_factory=dict)
    prediction_only_classes: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for value in self.aggregate.values():
            if not math.isfinite(value) or not 0.0 <= value <= 100.0:
                raise ValueError(f"aggregate metric out of range: {value}")
        for value in self.rodeo.as_dict().values():
            if not math.isfinite(value):
                raise ValueError("non-finite RoDeO component")

    def to_json_dict(self) -> dict:
        return {
            "per_class": self.per_class,
            "aggregate": self.aggregate,
            "rodeo": self.rodeo.as_dict(),
            "groups": self.groups,
            "prediction_only_classes": self.prediction_only_classes,
            "metadata": self.metadata,
            "diagnostics": self.case_diagnostics,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def _case_diagnostic(case: GroundingCase, match: MatchResult) -> dict:
    return {
        "image_id": case.image_id,
        "class_name": case.class_name,
        "dims": ({"width": case.dims.width, "height": case.dims.height}
                 if case.dims is not None else None),
        "gt_boxes": [list(g.corners()) for g in case.gt],
        "predictions": [
            {"label": p.label, "box": list(p.box.corners()),
             "score": p.score, "rank": p.rank}
            for p in case.preds
        ],
        "pairs": _pair_scores(case, match),
        "unmatched_preds": match.unmatched_preds,
        "unmatched_gts": match.unmatched_gts,
    }


GROUP_BY_CLASS = "class"
GROUP_BY_KNOWN = "known_vs_unknown"


def build_report(
    cases: Sequence[GroundingCase],
    group_by: str = GROUP_BY_CLASS,
    class_map: ClassMap | None = None,
    interp: str = AP_INTERP_101,
    metadata: dict | None = None,
    extra_thresholds: Sequence[float] = (),
) -> EvalReport:
    """Assemble per-class and aggregate tables plus per-case diagnostics.

    ``extra_thresholds`` adds AP@{t} columns (per class and aggregate)
    beyond the standard mAP30/50/75/50:95 family.
    """
    if group_by not in (GROUP_BY_CLASS, GROUP_BY_KNOWN):
        raise ValueError(f"unknown group_by: {group_by!r}")
    for t in extra_thresholds:
        if not 0.0 < t <= 1.0:
            raise ValueError(f"IoU threshold out of range: {t}")

    grouped = group_by_class(cases)
    per_class: dict[str, dict[str, float | None]] = {}
    prediction_only = []
    scored_extra: dict[float, list[float]] = {t: [] for t in extra_thresholds}
    for name in sorted(grouped):
        cls_cases = grouped[name]
        if sum(len(c.gt) for c in cls_cases) == 0:
            prediction_only.append(name)
            per_class[name] = {"AP30": None, "AP50": None, "AP75": None,
                               "AP50_95": None,
                               "rodeo": rodeo(cls_cases).as_dict()}
            for t in extra_thresholds:
                per_class[name][f"AP@{t:g}"] = None
            continue
        aps = {t: average_precision(cls_cases, t, interp)
               for t in {0.30, 0.50, 0.75, *MAP_50_95_THRESHOLDS}}
        per_class[name] = {
            "AP30": aps[0.30],
            "AP50": aps[0.50],
            "AP75": aps[0.75],
            "AP50_95": float(np.mean([aps[t] for t in MAP_50_95_THRESHOLDS])),
            "rodeo": rodeo(cls_cases).as_dict(),
        }
        for t in extra_thresholds:
            value = average_precision(cls_cases, t, interp)
            per_class[name][f"AP@{t:g}"] = value
            scored_extra[t].append(value)

    aggregate = map_family(cases, interp)
    for t in extra_thresholds:
        if scored_extra[t]:
            aggregate[f"mAP@{t:g}"] = float(np.mean(scored_extra[t]))
    overall = rodeo(cases)

    groups: dict[str, dict] = {}
    if group_by == GROUP_BY_KNOWN:
        if class_map is None:
            raise ValueError("known_vs_unknown grouping requires a class map")
        buckets: dict[str, list[GroundingCase]] = {"known": [], "unknown": []}
        for case in cases:
            buckets[class_map.status(case.class_name)].append(case)
        for bucket_name, bucket_cases in buckets.items():
            if not bucket_cases:
                continue
            entry = {"n_cases": len(bucket_cases),
                     "classes": sorted({c.class_name for c in bucket_cases}),
                     "rodeo": rodeo(bucket_cases).as_dict()}
            try:
                entry["map"] = map_family(bucket_cases, interp)
            except MetricsError:
                entry["map"] = None
            groups[bucket_name] = entry

    diagnostics = [_case_diagnostic(c, match_boxes(c)) for c in cases]
    meta = {
        "ap_interpolation": interp,
        "score_convention": "score-free outputs rank by emission order",
        "rodeo_convention": "unmatched boxes penalize all components via "
                            "the (preds + gts) denominator",
    }
    if metadata:
        meta.update(metadata)

    return EvalReport(
        per_class=per_class,
        aggregate=aggregate,
        rodeo=overall,
        case_diagnostics=diagnostics,
        groups=groups,
        prediction_only_classes=prediction_only,
        metadata=meta,
    )


def report_from_dict(payload: dict) -> EvalReport:
    """Rebuild a report from its JSON form (diagnostics optional)."""
    rd = payload["rodeo"]
    return EvalReport(
        per_class=payload["per_class"],
        aggregate=payload["aggregate"],
        rodeo=RodeoScores(rd["R_loc"], rd["R_shape"], rd["R_cls"], rd["R_total"]),
        case_diagnostics=payload.get("diagnostics", []),
        groups=payload.get("groups", {}),
        prediction_only_classes=payload.get("prediction_only_classes", []),
        metadata=payload.get("metadata", {}),
    )


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:7.2f}"


def render_text_report(report: EvalReport) -> str:
    """Aligned text tables for terminal output."""
    lines = []
    name_width = max([len(n) for n in report.per_class] + [len("class")])
    header = (f"{'class':<{name_width}}  {'AP30':>7} {'AP50':>7} {'AP75':>7} "
              f"{'AP50:95':>7} {'R_loc':>7} {'R_shape':>7} {'R_cls':>7} {'R_total':>7}")
    lines.append(header)
    lines.append("-" * len(header))
    for name, row in report.per_class.items():
        rd = row["rodeo"]
        lines.append(
            f"{name:<{name_width}}  {_fmt(row['AP30'])} {_fmt(row['AP50'])} "
            f"{_fmt(row['AP75'])} {_fmt(row['AP50_95'])} {_fmt(rd['R_loc'])} "
            f"{_fmt(rd['R_shape'])} {_fmt(rd['R_cls'])} {_fmt(rd['R_total'])}"
        )
    lines.append("-" * len(header))
    agg = report.aggregate
    rd = report.rodeo.as_dict()
    lines.append(
        f"{'ALL':<{name_width}}  {_fmt(agg['mAP30'])} {_fmt(agg['mAP50'])} "
        f"{_fmt(agg['mAP75'])} {_fmt(agg['mAP50_95'])} {_fmt(rd['R_loc'])} "
        f"{_fmt(rd['R_shape'])} {_fmt(rd['R_cls'])} {_fmt(rd['R_total'])}"
    )
    for bucket_name, entry in report.groups.items():
        lines.append("")
        lines.append(f"[{bucket_name}] {entry['n_cases']} cases, "
                     f"{len(entry['classes'])} classes")
        if entry["map"] is not None:
            m = entry["map"]
            lines.append(f"  mAP30 {m['mAP30']:.2f}  mAP50 {m['mAP50']:.2f}  "
                         f"mAP75 {m['mAP75']:.2f}  mAP50:95 {m['mAP50_95']:.2f}")
        rd = entry["rodeo"]
        lines.append(f"  R_loc {rd['R_loc']:.2f}  R_shape {rd['R_shape']:.2f}  "
                     f"R_cls {rd['R_cls']:.2f}  R_total {rd['R_total']:.2f}")
    if report.prediction_only_classes:
        lines.append("")
        lines.append("classes with predictions but no ground truth "
                     "(excluded from mAP): "
                     + ", ".join(report.prediction_only_classes))
    return "\n".join(lines) + "\n"
