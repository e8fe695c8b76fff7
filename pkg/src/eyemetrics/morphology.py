"""Binary image operators shared by all localization algorithms.

All operators use a fixed 3x3 square structuring element and treat pixels
outside the image as background. Hole filling flood-fills 4-connected
background from the border; components are 8-connected.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError
from .masks import BinaryMask

_SQUARE3 = np.ones((3, 3), dtype=bool)
_CROSS3 = ndimage.generate_binary_structure(2, 1)

_SOBEL_GX = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.int32)
_SOBEL_GY = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.int32)


def erode(m: BinaryMask) -> BinaryMask:
    """Keep a pixel only if its full 3x3 neighborhood is foreground."""
    return BinaryMask(ndimage.binary_erosion(m.bits, structure=_SQUARE3, border_value=0))


def dilate(m: BinaryMask) -> BinaryMask:
    """Set a pixel if any of its 3x3 neighborhood is foreground."""
    return BinaryMask(ndimage.binary_dilation(m.bits, structure=_SQUARE3, border_value=0))


def fill_holes(m: BinaryMask) -> BinaryMask:
    """Fill every background region not 4-connected to the image border."""
    return BinaryMask(ndimage.binary_fill_holes(m.bits, structure=_CROSS3))


def contour(m: BinaryMask) -> BinaryMask:
    """One-pixel-thick inner boundary: XOR of the mask with its erosion."""
    return BinaryMask(m.bits ^ ndimage.binary_erosion(m.bits, structure=_SQUARE3, border_value=0))


def largest_component(m: BinaryMask) -> BinaryMask:
    """Keep only the 8-connected component with the most pixels.

    Ties go to the component whose first pixel comes earliest in row-major
    order. An empty mask stays empty.
    """
    labels, count = ndimage.label(m.bits, structure=_SQUARE3)
    if count == 0:
        return m
    sizes = np.bincount(labels.ravel())[1:]
    best = sizes.max()
    winners = np.flatnonzero(sizes == best) + 1
    if winners.size == 1:
        keep = winners[0]
    else:
        flat = labels.ravel()
        # argmax on a boolean array returns the first (row-major) match.
        keep = min(winners, key=lambda k: int(np.argmax(flat == k)))
    return BinaryMask(labels == keep)


def sobel_responses(m: BinaryMask) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel responses (Gx, Gy) of a mask treated as a 0/1 image."""
    img = m.bits.astype(np.int32)
    gx = ndimage.correlate(img, _SOBEL_GX, mode="constant", cval=0)
    gy = ndimage.correlate(img, _SOBEL_GY, mode="constant", cval=0)
    return gx, gy


def suppress_horizontal_edges(
    c: BinaryMask, source: BinaryMask, horiz_ratio: float = 2.0
) -> BinaryMask:
    """Drop contour pixels lying on horizontally-oriented edges of `source`.

    A pixel is dropped when |Gy| > horiz_ratio * |Gx| for the Sobel response
    of `source`; with the default ratio that removes edges within roughly
    27 degrees of horizontal, which is where eyelids and lashes cut the iris.
    """
    if c.bits.shape != source.bits.shape:
        raise DimensionMismatchError(
            f"contour is {c.width}x{c.height} but source is {source.width}x{source.height}"
        )
    gx, gy = sobel_responses(source)
    horizontal = np.abs(gy) > horiz_ratio * np.abs(gx)
    return BinaryMask(c.bits & ~horizontal)
