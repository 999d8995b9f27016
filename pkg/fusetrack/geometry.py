"""
Axis-aligned box algebra.

Boxes are ``(x, y, w, h)`` with ``(x, y)`` the top-left corner, in continuous pixel
coordinates. Every function here is pure and thread-safe.
"""
import math
import numbers
from typing import Dict, NamedTuple, Optional

from fusetrack.exceptions import InvalidGeometryError

# Guard for the enclosing-box diagonal in CIoU
CIOU_EPS = 1e-12


class BBox(NamedTuple):
    """
    An axis-aligned bounding box.

    Attributes:
        x (float): Left edge in pixels.
        y (float): Top edge in pixels.
        w (float): Width in pixels.
        h (float): Height in pixels.
    """
    x: float
    y: float
    w: float
    h: float

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        """Builds a box from its center and size."""
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def right(self) -> float:
        """Right edge."""
        return self.x + self.w

    @property
    def bottom(self) -> float:
        """Bottom edge."""
        return self.y + self.h

    @property
    def center(self) -> tuple:
        """Box center as ``(cx, cy)``."""
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        """Box area in square pixels."""
        return self.w * self.h

    def validate(self) -> None:
        """
        Validates the box for use in overlap computations.

        Raises:
            InvalidGeometryError: If any field is not finite, or if the width or
                height is not strictly positive.
        """
        if not all(isinstance(v, numbers.Real) and math.isfinite(v) for v in self):
            raise InvalidGeometryError(self, "all fields must be finite numbers")
        if self.w <= 0:
            raise InvalidGeometryError(self, "width must be > 0")
        if self.h <= 0:
            raise InvalidGeometryError(self, "height must be > 0")

    def to_dict(self) -> Dict[str, float]:
        """
        Converts the box to a dictionary.

        Returns:
            Dict[str, float]: ``{'x': ..., 'y': ..., 'w': ..., 'h': ...}``
        """
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


class FrameGeometry(NamedTuple):
    """
    Image size of a sequence.

    Attributes:
        width (float): Frame width in pixels.
        height (float): Frame height in pixels.
    """
    width: float
    height: float

    @property
    def diagonal(self) -> float:
        """Euclidean norm of ``(width, height)``."""
        return math.hypot(self.width, self.height)

    @property
    def max_dimension(self) -> float:
        """Larger of width and height."""
        return max(self.width, self.height)

    def validate(self) -> None:
        """
        Validates the frame size.

        Raises:
            InvalidGeometryError: If width or height is not a positive finite number.
        """
        if not all(isinstance(v, numbers.Real) and math.isfinite(v) and v > 0 for v in self):
            raise InvalidGeometryError(self, "frame width and height must be finite and > 0")

    def contains(self, box: BBox) -> bool:
        """True when the box lies fully inside the frame."""
        return (box.x >= 0 and box.y >= 0
                and box.right <= self.width and box.bottom <= self.height)


def _intersection(a: BBox, b: BBox) -> float:
    inter_w = min(a.right, b.right) - max(a.x, b.x)
    inter_h = min(a.bottom, b.bottom) - max(a.y, b.y)
    if inter_w <= 0 or inter_h <= 0:
        return 0.0
    return inter_w * inter_h


def iou(a: BBox, b: BBox) -> float:
    """
    Intersection over union of two boxes.

    Args:
        a (BBox): First box.
        b (BBox): Second box.

    Returns:
        float: Score in [0, 1]; 0.0 when the boxes are disjoint or only touch.

    Raises:
        InvalidGeometryError: If either box is degenerate.

    Example:
        >>> iou(BBox(0, 0, 10, 10), BBox(5, 0, 10, 10))
        0.3333333333333333
    """
    a.validate()
    b.validate()
    inter = _intersection(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def ciou(a: BBox, b: BBox) -> float:
    """
    Complete IoU: IoU minus a normalised center-distance penalty and an
    aspect-ratio consistency penalty.

    ``CIoU = IoU - rho^2 / c^2 - alpha * v`` where ``rho`` is the distance between
    the centers, ``c`` the diagonal of the smallest enclosing box,
    ``v = 4 / pi^2 * (atan(w_b / h_b) - atan(w_a / h_a))^2`` and
    ``alpha = v / ((1 - IoU) + v)``.

    The aspect term is order-sensitive only in sign before squaring, so the
    value is symmetric; by convention ``a`` is the tracker prediction and ``b``
    the detection.

    Args:
        a (BBox): Prediction box.
        b (BBox): Detection box.

    Returns:
        float: Score in [-1.5, 1]. The distance penalty stays below 1 and the
        aspect penalty ``alpha * v`` is at most 0.5.

    Raises:
        InvalidGeometryError: If either box is degenerate.
    """
    overlap = iou(a, b)
    (acx, acy), (bcx, bcy) = a.center, b.center
    rho2 = (acx - bcx) ** 2 + (acy - bcy) ** 2
    enclose_w = max(a.right, b.right) - min(a.x, b.x)
    enclose_h = max(a.bottom, b.bottom) - min(a.y, b.y)
    c2 = enclose_w ** 2 + enclose_h ** 2 + CIOU_EPS
    v = (4.0 / math.pi ** 2) * (math.atan(b.w / b.h) - math.atan(a.w / a.h)) ** 2
    alpha = v / ((1.0 - overlap) + v) if v > 0 else 0.0
    return overlap - rho2 / c2 - alpha * v


def center_distance(a: BBox, b: BBox, norm: Optional[FrameGeometry] = None) -> float:
    """
    Euclidean distance between box centers.

    Args:
        a (BBox): First box.
        b (BBox): Second box.
        norm (FrameGeometry, optional): When given, the distance is divided by
            the frame diagonal.

    Returns:
        float: Distance in pixels, or dimensionless when normalised.

    Raises:
        InvalidGeometryError: If a box or the frame geometry is invalid.
    """
    a.validate()
    b.validate()
    (acx, acy), (bcx, bcy) = a.center, b.center
    dist = math.hypot(acx - bcx, acy - bcy)
    if norm is not None:
        norm.validate()
        dist = dist / norm.diagonal
    return dist


def encloses(outer: BBox, inner: BBox) -> bool:
    """
    Closed containment test: True iff every edge of ``inner`` lies within or on
    the corresponding edge of ``outer``.
    """
    outer.validate()
    inner.validate()
    return (inner.x >= outer.x and inner.y >= outer.y
            and inner.right <= outer.right and inner.bottom <= outer.bottom)


def mean_box(a: BBox, b: BBox) -> BBox:
    """
    Componentwise arithmetic mean of two boxes' ``(x, y, w, h)``.

    Example:
        >>> mean_box(BBox(0, 0, 10, 10), BBox(10, 10, 20, 20))
        BBox(x=5.0, y=5.0, w=15.0, h=15.0)
    """
    a.validate()
    b.validate()
    return BBox((a.x + b.x) / 2.0, (a.y + b.y) / 2.0, (a.w + b.w) / 2.0, (a.h + b.h) / 2.0)
