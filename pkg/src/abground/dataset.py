"""Annotation ingestion, multi-rater box fusion, splits, and class mapping.

The annotation schema is a CSV with columns
``image_id, class_name, x_min, y_min, x_max, y_max, width, height, rater_id``
(``rater_id`` optional), or an equivalent JSON array of objects. Images are
never read; annotations plus recorded dims drive the whole pipeline.

Fusion merges per-rater boxes of one image/class group into consensus
boxes: candidates are visited in canonical order (descending weight, then
lexicographic corners) and greedily joined to the running fused box they
overlap best at IoU >= threshold; a fused box is the weight-averaged
corner vector of its members. A final closure pass re-merges any fused
boxes that still overlap at the threshold, which makes fusion idempotent.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import BoundingBox, ImageDims, iou

logger = logging.getLogger(__name__)

DEFAULT_WBF_IOU = 0.4

KNOWN = "known"
UNKNOWN = "unknown"

_CSV_COLUMNS = ("image_id", "class_name", "x_min", "y_min", "x_max", "y_max",
                "width", "height")


class AnnotationFormatError(ValueError):
    """File-level failure: unreadable file, missing columns, bad top-level JSON."""


class ClassMapError(ValueError):
    """Records contain classes the map does not cover."""


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    class_name: str
    box: BoundingBox
    dims: ImageDims
    rater_id: str | None = None


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class LoadResult:
    records: list[AnnotationRecord]
    errors: list[RowError] = field(default_factory=list)


@dataclass(frozen=True)
class GroundingInstance:
    """One image-abnormality pair: an image's fused boxes for one class."""

    image_id: str
    class_name: str
    fused_boxes: tuple[BoundingBox, ...]
    dims: ImageDims

    def __post_init__(self):
        if not self.fused_boxes:
            raise ValueError("an instance needs at least one fused box")


@dataclass
class DatasetSplit:
    name: str
    instances: list[GroundingInstance]

    def __len__(self) -> int:
        return len(self.instances)


@dataclass(frozen=True)
class ClassMap:
    """PadChest-style class names mapped to known training names or 'unknown'."""

    known: dict[str, str]
    unknown: frozenset[str]

    def status(self, class_name: str) -> str:
        # accept both the source names and the renamed training-set names,
        # since known-split instances carry the latter after mapping
        if class_name in self.known or class_name in self.known.values():
            return KNOWN
        if class_name in self.unknown:
            return UNKNOWN
        raise ClassMapError(f"class not covered by map: {class_name!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "ClassMap":
        return cls(known=dict(data["known"]), unknown=frozenset(data["unknown"]))


def shipped_class_map() -> ClassMap:
    """The bundled PadChest-GR map: 6 known classes, 18 unknown."""
    from ._data import load_json_asset

    cmap = ClassMap.from_dict(load_json_asset("padchest_class_map.json"))
    assert len(cmap.known) == 6 and len(cmap.unknown) == 18
    return cmap


def _parse_row(row: dict) -> AnnotationRecord:
    try:
        coords = [float(row[k]) for k in ("x_min", "y_min", "x_max", "y_max")]
        width = int(float(row["width"]))
        height = int(float(row["height"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"non-numeric or missing coordinate field: {exc}") from exc
    image_id = str(row.get("image_id") or "").strip()
    class_name = str(row.get("class_name") or "").strip()
    if not image_id:
        raise ValueError("empty image_id")
    if not class_name:
        raise ValueError("empty class_name")
    dims = ImageDims(width, height)
    box = BoundingBox(*coords, label=class_name)
    if box.x2 > dims.width or box.y2 > dims.height:
        raise ValueError(
            f"box ({box.x1}, {box.y1}, {box.x2}, {box.y2}) outside "
            f"{dims.width}x{dims.height} image"
        )
    rater = row.get("rater_id")
    rater_id = str(rater).strip() if rater not in (None, "") else None
    return AnnotationRecord(image_id, class_name, box, dims, rater_id)


def load_annotations(path: str | Path, format: str | None = None) -> LoadResult:
    """Load and validate an annotation file.

    Invalid rows are reported with their line numbers in ``LoadResult.errors``
    while valid rows still load; file-level problems raise
    AnnotationFormatError.
    """
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    if format not in ("csv", "json"):
        raise AnnotationFormatError(f"unsupported format: {format!r}")
    if not path.exists():
        raise AnnotationFormatError(f"annotation file not found: {path}")

    result = LoadResult(records=[])
    if format == "csv":
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in _CSV_COLUMNS if c not in header]
            if missing:
                raise AnnotationFormatError(
                    f"{path}: missing required columns: {', '.join(missing)}"
                )
            for line, row in enumerate(reader, start=2):
                try:
                    result.records.append(_parse_row(row))
                except ValueError as exc:
                    result.errors.append(RowError(line, str(exc)))
    else:
        try:
            with path.open(encoding="utf-8") as fh:
                payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise AnnotationFormatError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(payload, list):
            raise AnnotationFormatError(f"{path}: expected a top-level JSON array")
        for idx, row in enumerate(payload):
            if not isinstance(row, dict):
                result.errors.append(RowError(idx, "entry is not an object"))
                continue
            try:
                result.records.append(_parse_row(row))
            except ValueError as exc:
                result.errors.append(RowError(idx, str(exc)))
    return result


def _canonical_key(box: BoundingBox, weight: float):
    return (-weight, box.x1, box.y1, box.x2, box.y2)


class _Cluster:
    __slots__ = ("sums", "weight", "label")

    def __init__(self, box: BoundingBox, weight: float):
        self.sums = [c * weight for c in box.corners()]
        self.weight = weight
        self.label = box.label

    def add(self, box: BoundingBox, weight: float):
        for i, c in enumerate(box.corners()):
            self.sums[i] += c * weight
        self.weight += weight

    def fused(self) -> BoundingBox:
        x1, y1, x2, y2 = (s / self.weight for s in self.sums)
        return BoundingBox(x1, y1, x2, y2, label=self.label)


def weighted_box_fusion(
    boxes: list[tuple[BoundingBox, float]],
    iou_threshold: float = DEFAULT_WBF_IOU,
) -> list[BoundingBox]:
    """Fuse overlapping boxes from multiple raters into consensus boxes.

    All boxes must belong to one image and one class; weights must be
    positive. Returns fused boxes sorted by corner coordinates (the
    canonical emission order downstream modules rely on).
    """
    for box, weight in boxes:
        if weight <= 0:
            raise ValueError(f"weights must be positive, got {weight}")
    if not boxes:
        return []

    ordered = sorted(boxes, key=lambda bw: _canonical_key(bw[0], bw[1]))
    clusters: list[_Cluster] = []
    for box, weight in ordered:
        best_idx = -1
        best_iou = 0.0
        for idx, cluster in enumerate(clusters):
            overlap = iou(box, cluster.fused())
            if overlap >= iou_threshold and overlap > best_iou:
                best_idx, best_iou = idx, overlap
        if best_idx >= 0:
            clusters[best_idx].add(box, weight)
        else:
            clusters.append(_Cluster(box, weight))

    # closure: running means can drift two clusters into overlap; re-merge
    # until stable so fusing a fused set is the identity
    merged = True
    while merged and len(clusters) > 1:
        merged = False
        pairs = sorted(
            range(len(clusters)),
            key=lambda i: _canonical_key(clusters[i].fused(), clusters[i].weight),
        )
        for ai in range(len(pairs)):
            for bi in range(ai + 1, len(pairs)):
                a, b = clusters[pairs[ai]], clusters[pairs[bi]]
                if iou(a.fused(), b.fused()) >= iou_threshold:
                    a.sums = [x + y for x, y in zip(a.sums, b.sums)]
                    a.weight += b.weight
                    clusters.remove(b)
                    merged = True
                    break
            if merged:
                break

    return sorted((c.fused() for c in clusters), key=lambda b: b.corners())


def fuse_records(
    records: list[AnnotationRecord],
    iou_threshold: float = DEFAULT_WBF_IOU,
) -> list[GroundingInstance]:
    """Group records by (image, class) and fuse each group into one instance."""
    groups: dict[tuple[str, str], list[AnnotationRecord]] = {}
    for rec in records:
        groups.setdefault((rec.image_id, rec.class_name), []).append(rec)

    instances = []
    for (image_id, class_name), members in sorted(groups.items()):
        dims = members[0].dims
        mismatched = [m for m in members if m.dims != dims]
        if mismatched:
            logger.warning("inconsistent dims for image %s; using %sx%s",
                           image_id, dims.width, dims.height)
        fused = weighted_box_fusion([(m.box, 1.0) for m in members], iou_threshold)
        instances.append(GroundingInstance(image_id, class_name, tuple(fused), dims))
    return instances


def apply_split_manifest(
    instances: list[GroundingInstance],
    manifest: dict[str, list[str]],
) -> dict[str, DatasetSplit]:
    """Assign instances to named splits by image id.

    Instances whose image id appears in no split are dropped with a warning;
    an image id in more than one split is an error.
    """
    owner: dict[str, str] = {}
    for split_name, image_ids in manifest.items():
        for image_id in image_ids:
            if image_id in owner and owner[image_id] != split_name:
                raise ValueError(
                    f"image {image_id!r} assigned to both "
                    f"{owner[image_id]!r} and {split_name!r}"
                )
            owner[image_id] = split_name

    splits = {name: DatasetSplit(name, []) for name in manifest}
    dropped = 0
    for inst in instances:
        split_name = owner.get(inst.image_id)
        if split_name is None:
            dropped += 1
            continue
        splits[split_name].instances.append(inst)
    if dropped:
        logger.warning("%d instances not covered by the split manifest", dropped)
    return splits


def apply_class_map(
    instances: list[GroundingInstance],
    class_map: ClassMap,
) -> tuple[DatasetSplit, DatasetSplit]:
    """Partition instances into known/unknown splits, renaming known classes.

    Raises ClassMapError listing every class the map does not cover.
    """
    uncovered = sorted(
        {i.class_name for i in instances}
        - set(class_map.known) - set(class_map.unknown)
    )
    if uncovered:
        raise ClassMapError(f"classes not covered by map: {', '.join(uncovered)}")

    known = DatasetSplit("zeroshot", [])
    unknown = DatasetSplit("ood", [])
    for inst in instances:
        if inst.class_name in class_map.known:
            renamed = class_map.known[inst.class_name]
            known.instances.append(
                GroundingInstance(inst.image_id, renamed, inst.fused_boxes, inst.dims)
            )
        else:
            unknown.instances.append(inst)
    return known, unknown


def class_distribution(split: DatasetSplit) -> dict[str, int]:
    """Instance count per class; counts sum to the split size."""
    hist: dict[str, int] = {}
    for inst in split.instances:
        hist[inst.class_name] = hist.get(inst.class_name, 0) + 1
    return dict(sorted(hist.items()))


def instance_to_dict(inst: GroundingInstance) -> dict:
    return {
        "image_id": inst.image_id,
        "class_name": inst.class_name,
        "dims": {"width": inst.dims.width, "height": inst.dims.height},
        "boxes": [list(b.corners()) for b in inst.fused_boxes],
    }


def instance_from_dict(data: dict) -> GroundingInstance:
    dims = ImageDims(int(data["dims"]["width"]), int(data["dims"]["height"]))
    boxes = tuple(
        BoundingBox(*map(float, corners), label=data["class_name"])
        for corners in data["boxes"]
    )
    return GroundingInstance(str(data["image_id"]), str(data["class_name"]), boxes, dims)


def write_split_manifest(splits: dict[str, DatasetSplit], path: str | Path) -> None:
    payload = {
        name: [instance_to_dict(i) for i in split.instances]
        for name, split in sorted(splits.items())
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_split_manifest(path: str | Path) -> dict[str, DatasetSplit]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return {
        name: DatasetSplit(name, [instance_from_dict(d) for d in items])
        for name, items in payload.items()
    }
