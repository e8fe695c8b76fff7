"""Core raster and geometry types, plus the canonical PGM mask codec.

Conventions used everywhere in this package: x is the column index, y is
the row index, the origin is the top-left corner, and pixel centers sit at
integer coordinates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CodecError

# Pixel budget guard for decoded masks; anything larger is treated as a
# corrupted header rather than an allocation request.
MAX_PIXELS = 100_000_000


class Label(enum.IntEnum):
    BACKGROUND = 0
    SCLERA = 1
    IRIS = 2
    PUPIL = 3


#: Gray value stored in a PGM file for each label (label * 85).
GRAY_STEP = 85


class Method(str, enum.Enum):
    """Which localization pathway produced a measurement."""

    MASS_CENTER = "MassCenter"
    LMS = "LMS"
    HOUGH = "Hough"
    MIXED = "Mixed"
    # Tag for generator ground-truth records, which no algorithm produced.
    TRUTH = "Truth"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class LabelMask:
    """Per-pixel class image over the four eye classes."""

    labels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"labels must be a non-empty 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            arr = arr.astype(np.uint8)
        if arr.max(initial=0) > int(Label.PUPIL):
            bad = int(arr[arr > int(Label.PUPIL)][0])
            raise ValueError(f"invalid label value {bad}")
        object.__setattr__(self, "labels", _freeze(arr))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelMask):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Single-class bitmap; the unit all morphology and fitting steps act on."""

    bits: np.ndarray  # bool, shape (height, width)

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"bits must be a non-empty 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            arr = arr.astype(bool)
        object.__setattr__(self, "bits", _freeze(arr))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


@dataclass(frozen=True)
class EllipseFit:
    """Axis-aligned ellipse: center plus per-axis radii. Circles store rx == ry."""

    cx: float
    cy: float
    rx: float
    ry: float

    def __post_init__(self) -> None:
        for name in ("cx", "cy", "rx", "ry"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.rx < 0 or self.ry < 0:
            raise ValueError(f"radii must be non-negative, got rx={self.rx}, ry={self.ry}")

    @classmethod
    def circle(cls, cx: float, cy: float, r: float) -> "EllipseFit":
        return cls(cx=cx, cy=cy, rx=r, ry=r)

    @property
    def mean_radius(self) -> float:
        return (self.rx + self.ry) / 2.0


@dataclass(frozen=True)
class BoundingBox:
    """Half-open pixel box [x0, x1) x [y0, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"box corners out of order: {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class FrameMeasurement:
    """Pupil and iris fits for one frame, with derived ratio and eye openness.

    `inverted` flags frames whose pupil came out larger than the iris; such
    frames are kept but should be treated as suspect downstream.
    """

    frame_idx: int
    t: float
    pupil: EllipseFit
    iris: EllipseFit
    ratio: float
    openness: float
    method: Method
    inverted: bool = False

    def __post_init__(self) -> None:
        if self.frame_idx < 0:
            raise ValueError(f"frame_idx must be >= 0, got {self.frame_idx}")
        if not math.isfinite(self.t) or self.t < 0:
            raise ValueError(f"t must be finite and >= 0, got {self.t}")
        if not math.isfinite(self.ratio) or self.ratio < 0:
            raise ValueError(f"ratio must be finite and >= 0, got {self.ratio}")
        if not 0.0 <= self.openness <= 1.0:
            raise ValueError(f"openness must be in [0, 1], got {self.openness}")

    @classmethod
    def from_fits(
        cls,
        frame_idx: int,
        t: float,
        pupil: EllipseFit,
        iris: EllipseFit,
        openness: float,
        method: Method,
    ) -> "FrameMeasurement":
        """Build a measurement, deriving ratio and the inverted-geometry flag."""
        ratio = pupil.mean_radius / iris.mean_radius if iris.mean_radius > 0 else 0.0
        return cls(
            frame_idx=frame_idx,
            t=t,
            pupil=pupil,
            iris=iris,
            ratio=ratio,
            openness=min(1.0, openness),
            method=method,
            inverted=pupil.mean_radius > iris.mean_radius,
        )


# --------------------------------------------------------------------------
# PGM (P5) mask codec.
#
# Labels are stored as gray values 0/85/170/255 in a binary PGM with
# maxval 255, so masks stay viewable in any image tool and round-trip
# bit-exactly.
# --------------------------------------------------------------------------

_WHITESPACE = b" \t\r\n\v\f"


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Read one header token, skipping whitespace and '#' comment lines."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in (b"#",):
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise CodecError("truncated PGM header")
    return data[start:pos], pos


def decode_mask(data: bytes) -> LabelMask:
    """Decode a binary PGM (P5, maxval 255) into a LabelMask.

    Gray values map 0 -> Background, 85 -> Sclera, 170 -> Iris, 255 -> Pupil;
    anything else is rejected, naming the value and its payload offset.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise CodecError(f"expected bytes, got {type(data).__name__}")
    data = bytes(data)
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise CodecError(f"not a binary PGM (magic {magic!r}, expected b'P5')")
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _next_token(data, pos)
        try:
            value = int(token)
        except ValueError:
            raise CodecError(f"non-numeric {name} field {token!r}") from None
        fields.append(value)
    width, height, maxval = fields
    if maxval != 255:
        raise CodecError(f"maxval must be 255, got {maxval}")
    if width <= 0 or height <= 0:
        raise CodecError(f"dimensions must be positive, got {width}x{height}")
    if width * height > MAX_PIXELS:
        raise CodecError(f"dimension overflow: {width}x{height} exceeds {MAX_PIXELS} pixels")
    # Exactly one whitespace byte separates the header from the payload.
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise CodecError("missing whitespace after maxval")
    pos += 1
    payload = data[pos:]
    if len(payload) != width * height:
        raise CodecError(
            f"payload length {len(payload)} does not match {width}x{height} pixels"
        )
    gray = np.frombuffer(payload, dtype=np.uint8)
    bad = (gray % GRAY_STEP != 0).nonzero()[0]
    if bad.size:
        off = int(bad[0])
        raise CodecError(f"invalid label value {int(gray[off])} at payload offset {off}")
    return LabelMask((gray // GRAY_STEP).astype(np.uint8).reshape(height, width))


def encode_mask(mask: LabelMask) -> bytes:
    """Encode a LabelMask as a binary PGM; inverse of decode_mask."""
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    return header + (mask.labels * np.uint8(GRAY_STEP)).tobytes()


def class_plane(mask: LabelMask, label: Label) -> BinaryMask:
    """Extract one class as a bitmap; dimensions preserved."""
    return BinaryMask(mask.labels == np.uint8(label))
