"""Input/output: polygon annotations, mask rasterization, session loading,
and the measurement CSV format.

Annotation files are a VIA-compatible JSON subset: a mapping from image id
to an entry with a "regions" list, each region carrying polygon
shape_attributes (all_points_x / all_points_y) and region_attributes with
"class" (pupil/iris/sclera) and "eye" (left/right). A top-level
"_via_img_metadata" wrapper is unwrapped if present.

A session directory holds masks named <frame_idx>.pgm plus a manifest.txt
of key=value lines: subject_id, session, eye, cohort, and optionally
frame_rate (frames per second, default 20).
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import json

import numpy as np

from .errors import AnnotationError, EmptyEyeError, ManifestError
from .localization import LocalizationConfig, mixed_fit
from .masks import EllipseFit, FrameMeasurement, Label, LabelMask, Method, decode_mask

log = logging.getLogger(__name__)

DEFAULT_FRAME_RATE = 20.0
MANIFEST_NAME = "manifest.txt"

MEASUREMENT_COLUMNS = (
    "subject_id,session,eye,cohort,frame_idx,t,"
    "pupil_cx,pupil_cy,pupil_rx,pupil_ry,iris_cx,iris_cy,iris_rx,iris_ry,"
    "ratio,openness,method"
).split(",")

_FRAME_FILE = re.compile(r"^(\d+)\.pgm$")


class Eye(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class Cohort(str, enum.Enum):
    ALCOHOL = "alcohol"
    NO_ALCOHOL = "no_alcohol"


#: Annotation class names in paint order, outer to inner, so inner classes
#: overwrite outer ones when polygons overlap.
CLASS_PAINT_ORDER = (("sclera", Label.SCLERA), ("iris", Label.IRIS), ("pupil", Label.PUPIL))
_CLASS_NAMES = {name for name, _ in CLASS_PAINT_ORDER}


@dataclass(frozen=True)
class Region:
    polygon: tuple[tuple[float, float], ...]
    cls: str  # pupil / iris / sclera
    eye: Eye


@dataclass(frozen=True)
class Annotation:
    image_id: str
    regions: tuple[Region, ...]


@dataclass(frozen=True)
class SessionRecord:
    """Ordered frame measurements for one subject/eye/session.

    `gaps` lists frame indices that are missing from the directory or were
    skipped because the mask held no eye pixels.
    """

    subject_id: str
    session: int
    eye: Eye
    cohort: Cohort
    frames: tuple[FrameMeasurement, ...]
    gaps: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not self.subject_id or any(c in self.subject_id for c in ",\n\r"):
            raise ValueError(f"invalid subject_id {self.subject_id!r}")
        if not 0 <= self.session <= 4:
            raise ValueError(f"session must be 0..4 per capture protocol, got {self.session}")
        idx = [f.frame_idx for f in self.frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("frame indices must be strictly increasing")


# --------------------------------------------------------------------------
# Annotation parsing
# --------------------------------------------------------------------------


def parse_annotations(data: bytes) -> list[Annotation]:
    """Parse the VIA-compatible JSON subset into Annotation records."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise AnnotationError(f"malformed annotation JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise AnnotationError("annotation root must be a JSON object")
    if "_via_img_metadata" in doc:
        doc = doc["_via_img_metadata"]
        if not isinstance(doc, dict):
            raise AnnotationError("_via_img_metadata must be a JSON object")

    annotations = []
    for key, entry in doc.items():
        if not isinstance(entry, dict):
            raise AnnotationError(f"{key}: image entry must be an object")
        image_id = str(entry.get("filename", key))
        raw_regions = entry.get("regions", [])
        if isinstance(raw_regions, dict):
            raw_regions = [raw_regions[k] for k in sorted(raw_regions, key=str)]
        if not isinstance(raw_regions, list):
            raise AnnotationError(f"{image_id}: regions must be a list")
        regions = [
            _parse_region(image_id, i, region) for i, region in enumerate(raw_regions)
        ]
        annotations.append(Annotation(image_id=image_id, regions=tuple(regions)))
    return annotations


def _parse_region(image_id: str, index: int, region: object) -> Region:
    where = f"{image_id}: region {index}"
    if not isinstance(region, dict):
        raise AnnotationError(f"{where}: must be an object")
    shape = region.get("shape_attributes")
    if not isinstance(shape, dict) or shape.get("name") != "polygon":
        raise AnnotationError(f"{where}: only polygon shape_attributes are supported")
    xs = shape.get("all_points_x")
    ys = shape.get("all_points_y")
    if not isinstance(xs, list) or not isinstance(ys, list) or len(xs) != len(ys):
        raise AnnotationError(f"{where}: all_points_x/all_points_y must be equal-length lists")
    if len(xs) < 3:
        raise AnnotationError(f"{where}: polygon needs at least 3 vertices, got {len(xs)}")
    attrs = region.get("region_attributes")
    if not isinstance(attrs, dict):
        raise AnnotationError(f"{where}: missing region_attributes")
    cls = attrs.get("class")
    if cls not in _CLASS_NAMES:
        raise AnnotationError(f"{where}: missing or invalid 'class' attribute ({cls!r})")
    eye = attrs.get("eye")
    if eye not in (Eye.LEFT.value, Eye.RIGHT.value):
        raise AnnotationError(f"{where}: missing or invalid 'eye' attribute ({eye!r})")
    try:
        polygon = tuple((float(x), float(y)) for x, y in zip(xs, ys))
    except (TypeError, ValueError):
        raise AnnotationError(f"{where}: non-numeric polygon vertex") from None
    return Region(polygon=polygon, cls=cls, eye=Eye(eye))


# --------------------------------------------------------------------------
# Rasterization
# --------------------------------------------------------------------------


def _fill_polygon(grid: np.ndarray, polygon: Sequence[tuple[float, float]], value: int) -> None:
    """Paint pixels whose centers are inside or on the polygon (even-odd rule)."""
    h, w = grid.shape
    px = np.array([p[0] for p in polygon], dtype=np.float64)
    py = np.array([p[1] for p in polygon], dtype=np.float64)
    x_lo = max(int(math.ceil(px.min())), 0)
    x_hi = min(int(math.floor(px.max())), w - 1)
    y_lo = max(int(math.ceil(py.min())), 0)
    y_hi = min(int(math.floor(py.max())), h - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return
    gy, gx = np.mgrid[y_lo : y_hi + 1, x_lo : x_hi + 1]
    gx = gx.astype(np.float64)
    gy = gy.astype(np.float64)
    inside = np.zeros(gx.shape, dtype=bool)
    on_edge = np.zeros(gx.shape, dtype=bool)
    n = len(px)
    eps = 1e-9
    for i in range(n):
        x1, y1 = px[i], py[i]
        x2, y2 = px[(i + 1) % n], py[(i + 1) % n]
        # Even-odd crossing of a ray cast in +x, half-open in y so shared
        # vertices are counted once.
        crosses = (y1 > gy) != (y2 > gy)
        if crosses.any():
            x_at = (x2 - x1) * (gy - y1) / (y2 - y1) + x1
            inside ^= crosses & (gx < x_at)
        # Pixel centers exactly on the segment count as covered.
        cross = (x2 - x1) * (gy - y1) - (y2 - y1) * (gx - x1)
        on_seg = (
            (np.abs(cross) <= eps * max(1.0, abs(x2 - x1) + abs(y2 - y1)))
            & (gx >= min(x1, x2) - eps)
            & (gx <= max(x1, x2) + eps)
            & (gy >= min(y1, y2) - eps)
            & (gy <= max(y1, y2) + eps)
        )
        on_edge |= on_seg
    grid[y_lo : y_hi + 1, x_lo : x_hi + 1][inside | on_edge] = value


def rasterize(ann: Annotation, width: int, height: int) -> LabelMask:
    """Rasterize polygon regions into a label mask.

    Classes are painted sclera, then iris, then pupil, so inner classes
    overwrite outer ones. Geometry outside the canvas is clipped.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"dimensions must be positive, got {width}x{height}")
    grid = np.zeros((height, width), dtype=np.uint8)
    for cls_name, label in CLASS_PAINT_ORDER:
        for region in ann.regions:
            if region.cls == cls_name:
                _fill_polygon(grid, region.polygon, int(label))
    return LabelMask(grid)


# --------------------------------------------------------------------------
# Session loading
# --------------------------------------------------------------------------


def parse_manifest(text: str, where: str = "manifest") -> dict[str, str]:
    """Parse flat key=value manifest content; '#' starts a comment line."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ManifestError(f"{where}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _manifest_field(fields: dict[str, str], key: str, where: str) -> str:
    if key not in fields:
        raise ManifestError(f"{where}: missing required key {key!r}")
    return fields[key]


def load_session(
    directory: str | Path, cfg: LocalizationConfig = LocalizationConfig()
) -> SessionRecord:
    """Load a session directory: decode masks in index order and fit each frame.

    Missing frame indices and frames with no eye pixels are recorded as gaps
    rather than errors.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ManifestError(f"{directory}: missing {MANIFEST_NAME}")
    fields = parse_manifest(manifest_path.read_text(encoding="utf-8"), str(manifest_path))
    where = str(manifest_path)

    subject_id = _manifest_field(fields, "subject_id", where)
    try:
        session = int(_manifest_field(fields, "session", where))
    except ValueError:
        raise ManifestError(f"{where}: session must be an integer") from None
    if not 0 <= session <= 4:
        raise ManifestError(f"{where}: session must be 0..4 per capture protocol, got {session}")
    eye_raw = _manifest_field(fields, "eye", where)
    cohort_raw = _manifest_field(fields, "cohort", where)
    try:
        eye = Eye(eye_raw)
        cohort = Cohort(cohort_raw)
    except ValueError as exc:
        raise ManifestError(f"{where}: {exc}") from None
    try:
        frame_rate = float(fields.get("frame_rate", DEFAULT_FRAME_RATE))
    except ValueError:
        raise ManifestError(f"{where}: frame_rate must be numeric") from None
    if frame_rate <= 0:
        raise ManifestError(f"{where}: frame_rate must be positive, got {frame_rate}")

    indices = sorted(
        int(m.group(1))
        for p in directory.iterdir()
        if (m := _FRAME_FILE.match(p.name)) is not None
    )
    frames: list[FrameMeasurement] = []
    gaps: list[int] = []
    if indices:
        missing = sorted(set(range(indices[0], indices[-1] + 1)) - set(indices))
        for idx in missing:
            log.warning("%s: gap in frame indices at %d", directory, idx)
        gaps.extend(missing)
    for idx in indices:
        mask = decode_mask((directory / f"{idx}.pgm").read_bytes())
        try:
            fit = mixed_fit(mask, cfg)
        except EmptyEyeError:
            log.warning("%s: frame %d has no eye pixels, recorded as gap", directory, idx)
            gaps.append(idx)
            continue
        frames.append(
            FrameMeasurement(
                frame_idx=idx,
                t=idx / frame_rate,
                pupil=fit.pupil,
                iris=fit.iris,
                ratio=fit.ratio,
                openness=fit.openness,
                method=fit.method,
                inverted=fit.inverted,
            )
        )
    return SessionRecord(
        subject_id=subject_id,
        session=session,
        eye=eye,
        cohort=cohort,
        frames=tuple(frames),
        gaps=tuple(sorted(gaps)),
    )


# --------------------------------------------------------------------------
# Measurement CSV
# --------------------------------------------------------------------------


def write_measurements_csv(rec: SessionRecord) -> bytes:
    """Serialize a session to CSV with fixed columns and 4-decimal numbers."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MEASUREMENT_COLUMNS)
    for f in rec.frames:
        writer.writerow(
            [
                rec.subject_id,
                rec.session,
                rec.eye.value,
                rec.cohort.value,
                f.frame_idx,
                f"{f.t:.4f}",
                f"{f.pupil.cx:.4f}",
                f"{f.pupil.cy:.4f}",
                f"{f.pupil.rx:.4f}",
                f"{f.pupil.ry:.4f}",
                f"{f.iris.cx:.4f}",
                f"{f.iris.cy:.4f}",
                f"{f.iris.rx:.4f}",
                f"{f.iris.ry:.4f}",
                f"{f.ratio:.4f}",
                f"{f.openness:.4f}",
                f.method.value,
            ]
        )
    return buf.getvalue().encode("ascii")


def parse_measurements_csv(data: bytes) -> SessionRecord:
    """Parse a measurement CSV written by write_measurements_csv."""
    lines = data.decode("ascii").splitlines()
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty measurement CSV") from None
    if header != MEASUREMENT_COLUMNS:
        raise ValueError(f"unexpected CSV header {header!r}")
    meta: tuple[str, int, Eye, Cohort] | None = None
    frames: list[FrameMeasurement] = []
    for row in reader:
        if len(row) != len(MEASUREMENT_COLUMNS):
            raise ValueError(f"row has {len(row)} fields, expected {len(MEASUREMENT_COLUMNS)}")
        row_meta = (row[0], int(row[1]), Eye(row[2]), Cohort(row[3]))
        if meta is None:
            meta = row_meta
        elif row_meta != meta:
            raise ValueError("measurement CSV mixes multiple sessions")
        frames.append(
            FrameMeasurement(
                frame_idx=int(row[4]),
                t=float(row[5]),
                pupil=EllipseFit(float(row[6]), float(row[7]), float(row[8]), float(row[9])),
                iris=EllipseFit(float(row[10]), float(row[11]), float(row[12]), float(row[13])),
                ratio=float(row[14]),
                openness=float(row[15]),
                method=Method(row[16]),
            )
        )
    if meta is None:
        raise ValueError("measurement CSV has no data rows")
    subject_id, session, eye, cohort = meta
    return SessionRecord(
        subject_id=subject_id, session=session, eye=eye, cohort=cohort, frames=tuple(frames)
    )
