"""Pupil/iris localization: mass-center, least-squares circle, Hough, and the
mixed pipeline that combines them.

Radius conventions: region extents count whole pixels, so a mass-center
half-extent overshoots the analytic radius by ~0.5 px, while inner-contour
pixels sit ~0.5 px inside the region edge. The mixed pipeline compensates
both so reported radii refer to the analytic boundary through pixel centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateFitError, EmptyEyeError, NoCircleError
from .masks import BinaryMask, EllipseFit, FrameMeasurement, Label, LabelMask, Method, class_plane
from .morphology import contour, fill_holes, largest_component, suppress_horizontal_edges

#: Reject a Hough peak supported by less than this fraction of the perimeter.
HOUGH_MIN_SUPPORT = 0.2

#: Offset between contour pixel centers and the region boundary they trace.
BOUNDARY_OFFSET = 0.5


@dataclass(frozen=True)
class LocalizationConfig:
    """Tunable parameters of the mixed localization pipeline."""

    pupil_radius_range: tuple[float, float] = (5.0, 25.0)
    iris_radius_range: tuple[float, float] = (20.0, 80.0)
    openness_threshold: float = 0.6
    hough_center_stride: int = 1
    horiz_ratio: float = 2.0

    def __post_init__(self) -> None:
        for name in ("pupil_radius_range", "iris_radius_range"):
            r_min, r_max = getattr(self, name)
            if not 0 < r_min < r_max:
                raise ValueError(f"{name} must satisfy 0 < r_min < r_max, got ({r_min}, {r_max})")
        if not 0 < self.openness_threshold <= 1:
            raise ValueError(f"openness_threshold must be in (0, 1], got {self.openness_threshold}")
        if self.hough_center_stride < 1:
            raise ValueError(f"hough_center_stride must be >= 1, got {self.hough_center_stride}")
        if self.horiz_ratio <= 0:
            raise ValueError(f"horiz_ratio must be positive, got {self.horiz_ratio}")


def split_pupil_iris(mask: LabelMask) -> tuple[BinaryMask, BinaryMask]:
    """Separate a label mask into the pupil region and the filled iris disk.

    The iris disk is the hole-filled largest component of the combined
    iris+pupil plane. The pupil comes from its own class plane when labeled,
    otherwise it is recovered as the filled hole of the iris annulus.
    """
    iris_plane = class_plane(mask, Label.IRIS).bits
    pupil_plane = class_plane(mask, Label.PUPIL).bits
    union = iris_plane | pupil_plane
    if not union.any():
        raise EmptyEyeError("mask has no iris or pupil pixels")
    raw = largest_component(BinaryMask(union))
    iris_disk = fill_holes(raw)
    if pupil_plane.any():
        pupil = BinaryMask(pupil_plane & iris_disk.bits)
    else:
        pupil = BinaryMask(iris_disk.bits ^ raw.bits)
    return pupil, iris_disk


def mass_center_fit(region: BinaryMask) -> EllipseFit:
    """Centroid plus half-extents of a filled region.

    Half-extents count whole pixels: a single pixel has rx = ry = 0.5.
    """
    ys, xs = np.nonzero(region.bits)
    if xs.size == 0:
        raise EmptyEyeError("cannot fit an empty region")
    return EllipseFit(
        cx=float(xs.mean()),
        cy=float(ys.mean()),
        rx=(float(xs.max()) - float(xs.min()) + 1.0) / 2.0,
        ry=(float(ys.max()) - float(ys.min()) + 1.0) / 2.0,
    )


def lms_circle_fit(points) -> EllipseFit:
    """Algebraic least-squares circle through contour points (rx == ry).

    Minimizes sum((x^2 + y^2 + Dx + Ey + F)^2) via the 3x3 normal equations;
    exact on noise-free co-circular points. Points are centered first so the
    solve stays well conditioned far from the origin.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
    n = pts.shape[0]
    if n < 3:
        raise DegenerateFitError(f"need at least 3 points, got {n}")
    mean = pts.mean(axis=0)
    u = pts[:, 0] - mean[0]
    v = pts[:, 1] - mean[1]
    suu = float(u @ u)
    svv = float(v @ v)
    suv = float(u @ v)
    # After centering, the first-moment terms vanish and the system splits
    # into a 2x2 solve for the center; it is singular iff points are collinear.
    det = suu * svv - suv * suv
    scale = suu + svv
    if det <= 1e-12 * scale * scale:
        cond = math.inf if det <= 0 else scale * scale / det
        raise DegenerateFitError(
            f"collinear or near-collinear points (n={n}, condition ~{cond:.3g})"
        )
    q = u * u + v * v
    rhs_u = float(q @ u)
    rhs_v = float(q @ v)
    uc = (svv * rhs_u - suv * rhs_v) / (2.0 * det)
    vc = (suu * rhs_v - suv * rhs_u) / (2.0 * det)
    r = math.sqrt(max(uc * uc + vc * vc + float(q.sum()) / n, 0.0))
    return EllipseFit.circle(cx=uc + mean[0], cy=vc + mean[1], r=r)


@lru_cache(maxsize=256)
def _circle_offsets(r: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer offsets whose rounded distance from the origin equals r."""
    span = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(span, span)
    ring = np.rint(np.hypot(dx, dy)).astype(np.int64) == r
    return dx[ring].copy(), dy[ring].copy()


def hough_circle_fit(
    edges: BinaryMask,
    radius_range: tuple[float, float],
    center_stride: int = 1,
) -> EllipseFit:
    """Circle detection by accumulator voting over integer (cx, cy, r).

    Each edge pixel votes for every center at distance r; votes are divided
    by the circle circumference 2*pi*r before taking the peak so large radii
    are not favored. Ties break toward the smallest radius, then the first
    center in row-major order.
    """
    r_min, r_max = radius_range
    if not 0 < r_min < r_max:
        raise ValueError(f"radius range must satisfy 0 < r_min < r_max, got ({r_min}, {r_max})")
    if center_stride < 1:
        raise ValueError(f"center_stride must be >= 1, got {center_stride}")
    ys, xs = np.nonzero(edges.bits)
    if xs.size == 0:
        raise NoCircleError("empty edge mask")
    h, w = edges.bits.shape
    s = int(center_stride)
    ws = (w + s - 1) // s
    hs = (h + s - 1) // s

    best_vote = -1.0
    best = (0, 0, 0)
    for r in range(int(math.ceil(r_min)), int(math.floor(r_max)) + 1):
        dx, dy = _circle_offsets(r)
        cxs = xs[:, None] - dx[None, :]
        cys = ys[:, None] - dy[None, :]
        valid = (cxs >= 0) & (cxs < w) & (cys >= 0) & (cys < h)
        if s > 1:
            valid &= (cxs % s == 0) & (cys % s == 0)
        flat = (cys[valid] // s) * ws + (cxs[valid] // s)
        if flat.size == 0:
            continue
        counts = np.bincount(flat, minlength=ws * hs)
        peak = int(np.argmax(counts))
        vote = counts[peak] / (2.0 * math.pi * r)
        if vote > best_vote:
            best_vote = vote
            best = (r, (peak % ws) * s, (peak // ws) * s)
    if best_vote < HOUGH_MIN_SUPPORT:
        raise NoCircleError(
            f"peak normalized vote {best_vote:.3f} below {HOUGH_MIN_SUPPORT} "
            f"for radii in [{r_min}, {r_max}]"
        )
    r, cx, cy = best
    return EllipseFit.circle(cx=float(cx), cy=float(cy), r=float(r))


def openness_ratio(iris_disk: BinaryMask) -> float:
    """Vertical over horizontal extent of the region; ~1 for a full disk,
    below 1 when an eyelid cuts it."""
    ys, xs = np.nonzero(iris_disk.bits)
    if xs.size == 0:
        raise EmptyEyeError("cannot measure openness of an empty region")
    v = float(ys.max()) - float(ys.min()) + 1.0
    hz = float(xs.max()) - float(xs.min()) + 1.0
    return v / hz


def _mass_center_boundary(region: BinaryMask) -> EllipseFit:
    """Mass-center fit with half-extents shifted to the analytic boundary."""
    raw = mass_center_fit(region)
    return EllipseFit(
        cx=raw.cx,
        cy=raw.cy,
        rx=max(raw.rx - BOUNDARY_OFFSET, BOUNDARY_OFFSET),
        ry=max(raw.ry - BOUNDARY_OFFSET, BOUNDARY_OFFSET),
    )


def _contour_points(edges: BinaryMask) -> np.ndarray:
    ys, xs = np.nonzero(edges.bits)
    return np.column_stack([xs, ys]).astype(np.float64)


def mixed_fit(mask: LabelMask, cfg: LocalizationConfig = LocalizationConfig()) -> FrameMeasurement:
    """Run the combined localization pipeline on one label mask.

    Pupil via mass center on the filled pupil region; iris via least-squares
    circle on the iris contour after horizontal-edge suppression; when the
    eye is not open enough (or the circle fit degenerates) the iris is refit
    with the Hough transform, and so is the pupil if its mass-center fit
    collapsed below the configured minimum radius. Frame index and timestamp
    are left at zero for the caller to assign.
    """
    pupil_region, iris_disk = split_pupil_iris(mask)
    openness = openness_ratio(iris_disk)

    pupil_blob = largest_component(pupil_region)
    pupil = _mass_center_boundary(pupil_blob)

    iris_contour = contour(iris_disk)
    iris_edges = suppress_horizontal_edges(iris_contour, iris_disk, cfg.horiz_ratio)
    if iris_edges.popcount == 0:
        iris_edges = iris_contour

    method = Method.MIXED
    iris: EllipseFit | None
    try:
        fit = lms_circle_fit(_contour_points(iris_edges))
        iris = EllipseFit.circle(fit.cx, fit.cy, fit.rx + BOUNDARY_OFFSET)
    except DegenerateFitError:
        iris = None

    if openness < cfg.openness_threshold or iris is None:
        try:
            iris = hough_circle_fit(iris_edges, cfg.iris_radius_range, cfg.hough_center_stride)
            method = Method.HOUGH
        except NoCircleError:
            if iris is None:
                iris = _mass_center_boundary(iris_disk)
        if pupil.mean_radius < cfg.pupil_radius_range[0]:
            try:
                pupil = hough_circle_fit(
                    contour(pupil_blob), cfg.pupil_radius_range, cfg.hough_center_stride
                )
                method = Method.HOUGH
            except NoCircleError:
                pass

    return FrameMeasurement.from_fits(
        frame_idx=0, t=0.0, pupil=pupil, iris=iris, openness=openness, method=method
    )
