"""Box arithmetic, coordinate quantization, and IoU.

Coordinates are continuous pixel values in corner form (x1, y1, x2, y2);
the discrete side is the [0, 1000] grid used by location-token and JSON
wire formats. Quantization uses floor(coord / extent * 1000), computed in
exact integer arithmetic so the round-trip error bound (extent / 1000 per
axis) holds for every representable input, not just away from grid
boundaries. Area convention is (x2 - x1) * (y2 - y1) with no pixel
inclusivity; degenerate boxes have IoU 0 against everything.

All values are immutable and every operation is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import _kernels


class BoxBoundsError(ValueError):
    """A coordinate falls outside the image it is quantized against."""


@dataclass(frozen=True)
class BoundingBox:
    """Continuous corner-form box; ``label`` is optional in pure-geometry use."""

    x1: float
    y1: float
    x2: float
    y2: float
    label: str | None = None

    def __post_init__(self):
        if not (self.x1 <= self.x2 and self.y1 <= self.y2):
            raise ValueError(
                f"corners out of order: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )
        if self.x1 < 0 or self.y1 < 0:
            raise ValueError(
                f"negative coordinates: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    @property
    def diagonal(self) -> float:
        return (self.width ** 2 + self.height ** 2) ** 0.5

    def corners(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class ImageDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"dims must be positive: {self.width}x{self.height}")


@dataclass(frozen=True)
class QuantizedBox:
    """Grid box with each component in {0, ..., 1000}."""

    qx1: int
    qy1: int
    qx2: int
    qy2: int

    def __post_init__(self):
        for name in ("qx1", "qy1", "qx2", "qy2"):
            v = getattr(self, name)
            if not isinstance(v, int) or not 0 <= v <= 1000:
                raise ValueError(f"{name}={v!r} outside the 0..1000 vocabulary")
        if self.qx1 > self.qx2 or self.qy1 > self.qy2:
            raise ValueError(
                f"corners out of order: ({self.qx1}, {self.qy1}, {self.qx2}, {self.qy2})"
            )

    def components(self) -> tuple[int, int, int, int]:
        return (self.qx1, self.qy1, self.qx2, self.qy2)


def _exact_floor_scaled(coord: float, extent: int) -> int:
    # floor(coord / extent * 1000) in exact integer arithmetic. Inputs within
    # 1e-9 grid units below the next integer snap up: a dequantized float can
    # sit half an ulp below its true grid point, and the floor must still
    # recover the grid (the quantize-dequantize fixed point).
    num, den = float(coord).as_integer_ratio()
    scaled = 1000 * num
    d = den * extent
    q = scaled // d
    if ((q + 1) * d - scaled) * 10**9 < d:
        q += 1
    return min(int(q), 1000)


def quantize(box: BoundingBox, dims: ImageDims) -> QuantizedBox:
    """Quantize a pixel box onto the [0, 1000] grid.

    Raises BoxBoundsError naming the offending coordinate when the box
    extends past the image.
    """
    for name, value, extent in (
        ("x2", box.x2, dims.width),
        ("y2", box.y2, dims.height),
    ):
        if value > extent:
            raise BoxBoundsError(
                f"{name}={value} exceeds image extent {extent} ({dims.width}x{dims.height})"
            )
    return QuantizedBox(
        _exact_floor_scaled(box.x1, dims.width),
        _exact_floor_scaled(box.y1, dims.height),
        _exact_floor_scaled(box.x2, dims.width),
        _exact_floor_scaled(box.y2, dims.height),
    )


def dequantize(qbox: QuantizedBox, dims: ImageDims, label: str | None = None) -> BoundingBox:
    """Map a grid box back to pixel space (q / 1000 * extent)."""
    x1, y1, x2, y2 = _kernels.dequantize_box(
        qbox.qx1, qbox.qy1, qbox.qx2, qbox.qy2, dims.width, dims.height
    )
    return BoundingBox(x1, y1, x2, y2, label=label)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union in [0, 1]; 0 for degenerate or disjoint boxes."""
    return _kernels.iou(a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2)


def centered_iou(a: BoundingBox, b: BoundingBox) -> float:
    """IoU after translating b so the centers coincide (shape-only overlap)."""
    return _kernels.centered_iou(a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2)


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    """Euclidean distance between the two box centers, in pixels."""
    return _kernels.center_distance(a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2)
