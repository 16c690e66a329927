"""Preprocessing of isolated character scans.

Turns a grayscale scan into the three canonical representations the feature
extractors consume: the cleaned 100x100 binary canvas, its one pixel wide
skeleton and the Freeman chain codes of its contour.

Coordinates exposed by this module are ``(x, y)`` pairs, ``x`` being the
column and ``y`` the row. Arrays are indexed ``[row, column]``.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from PIL import Image
from scipy import ndimage
from skimage.morphology import thin

from glyphvote.constants import (
    CANVAS_SIZE,
    FREEMAN_STEPS,
    INITIAL_THRESHOLD,
    MAX_THRESHOLD_ITERATIONS,
    THRESHOLD_TOLERANCE,
)
from glyphvote.exceptions import NoForeground, UnreadableImage

log = logging.getLogger(__name__)

_SQUARE = np.ones((3, 3), dtype=bool)


def _readonly(array: NDArray) -> NDArray:
    out = np.array(array, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major 8-bit intensities of a scan."""

    pixels: NDArray[np.uint8]

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"GrayImage needs a non-empty 2-D raster, got {px.shape}")
        object.__setattr__(
            self, "pixels", _readonly(np.clip(px, 0, 255).astype(np.uint8))
        )

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class BinaryImage:
    """Row-major booleans, ``True`` marks ink."""

    pixels: NDArray[np.bool_]

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"BinaryImage needs a 2-D raster, got {px.shape}")
        object.__setattr__(self, "pixels", _readonly(px.astype(bool)))

    @classmethod
    def blank(cls, width: int = CANVAS_SIZE, height: int = CANVAS_SIZE) -> BinaryImage:
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_points(
        cls,
        points: ArrayLike,
        width: int = CANVAS_SIZE,
        height: int = CANVAS_SIZE,
    ) -> BinaryImage:
        """Build an image whose ink is exactly the given ``(x, y)`` points."""
        px = np.zeros((height, width), dtype=bool)
        pts = np.asarray(points, dtype=int).reshape(-1, 2)
        px[pts[:, 1], pts[:, 0]] = True
        return cls(px)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.pixels))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Rect:
    """Axis aligned pixel rectangle."""

    left: int
    top: int
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"Degenerate rectangle {self}")

    def fits(self, img: BinaryImage) -> bool:
        """Whether the rectangle lies entirely inside ``img``."""
        return (
            self.left >= 0
            and self.top >= 0
            and self.left + self.width <= img.width
            and self.top + self.height <= img.height
        )


@dataclass(frozen=True)
class Skeleton:
    """One pixel wide thinned character."""

    image: BinaryImage


@dataclass(frozen=True)
class ContourChain:
    """A traced contour: start pixel plus Freeman codes.

    Closed chains end with the step back onto ``start``. An isolated contour
    pixel is a closed chain without codes.
    """

    start: tuple[int, int]
    codes: tuple[int, ...]
    closed: bool

    def points(self) -> Iterator[tuple[int, int]]:
        """Replay the chain, yielding every visited ``(x, y)`` including start."""
        x, y = self.start
        yield x, y
        for code in self.codes:
            dx, dy = FREEMAN_STEPS[code]
            x, y = x + dx, y + dy
            yield x, y

    def __len__(self) -> int:
        return len(self.codes)


# --------------------------------- Thresholding --------------------------------- #


class ThresholdSearch(NamedTuple):
    threshold: float
    iterations: int


def find_dynamic_threshold(img: GrayImage) -> ThresholdSearch:
    """Iterate the mean-of-means threshold until it moves less than 2%.

    Pixels darker than the threshold are ink. When one side of the partition
    is empty the threshold cannot move and the search stops.
    """
    values = img.pixels.astype(np.float64)
    threshold = INITIAL_THRESHOLD
    for iteration in range(1, MAX_THRESHOLD_ITERATIONS + 1):
        ink = values < threshold
        if not ink.any() or ink.all():
            return ThresholdSearch(threshold, iteration)

        updated = (values[ink].mean() + values[~ink].mean()) / 2
        change = abs(updated - threshold) / max(threshold, 1.0)
        threshold = float(updated)
        if change < THRESHOLD_TOLERANCE:
            return ThresholdSearch(threshold, iteration)

    log.warning(
        f"Threshold did not settle within {MAX_THRESHOLD_ITERATIONS} iterations, "
        f"using {threshold:.3f}"
    )
    return ThresholdSearch(threshold, MAX_THRESHOLD_ITERATIONS)


def binarize_dynamic_threshold(img: GrayImage) -> tuple[BinaryImage, float]:
    """Binarize a scan with the dynamic threshold.

    Returns
    -------
    tuple[BinaryImage, float]
        Ink mask (values below the threshold) and the converged threshold.

    Raises
    ------
    NoForeground
        If no pixel lies below the converged threshold.
    """
    search = find_dynamic_threshold(img)
    ink = img.pixels < search.threshold
    if not ink.any():
        raise NoForeground(
            f"No pixel darker than the converged threshold {search.threshold:.2f}"
        )
    log.debug(
        f"Threshold {search.threshold:.3f} after {search.iterations} iteration(s)"
    )
    return BinaryImage(ink), search.threshold


# ------------------------------ Geometric normalization ------------------------------ #


def tight_bounding_box(img: BinaryImage) -> Rect:
    """Smallest rectangle holding every ink pixel."""
    rows = np.flatnonzero(img.pixels.any(axis=1))
    cols = np.flatnonzero(img.pixels.any(axis=0))
    if rows.size == 0:
        raise NoForeground("Cannot box an image without ink")
    return Rect(
        left=int(cols[0]),
        top=int(rows[0]),
        width=int(cols[-1] - cols[0] + 1),
        height=int(rows[-1] - rows[0] + 1),
    )


def scale_to_canvas(
    img: BinaryImage, box: Rect, size: int = CANVAS_SIZE
) -> BinaryImage:
    """Crop to ``box`` and stretch onto a ``size`` x ``size`` canvas.

    The stretch is independent per axis (aspect ratio is not kept) and samples
    the nearest source pixel, so the result stays binary.
    """
    if not box.fits(img):
        raise ValueError(f"{box} does not fit a {img.width}x{img.height} image")

    crop = img.pixels[box.top : box.top + box.height, box.left : box.left + box.width]
    src_rows = np.minimum(
        ((np.arange(size) + 0.5) * box.height / size).astype(int), box.height - 1
    )
    src_cols = np.minimum(
        ((np.arange(size) + 0.5) * box.width / size).astype(int), box.width - 1
    )
    return BinaryImage(crop[np.ix_(src_rows, src_cols)])


def morph_cleanup(img: BinaryImage) -> BinaryImage:
    """Close with a 3x3 square, then dilate once more.

    The closing runs on a padded copy so ink touching the canvas border is
    not eaten by the erosion.
    """
    padded = np.pad(img.pixels, 1)
    closed = ndimage.binary_erosion(
        ndimage.binary_dilation(padded, structure=_SQUARE), structure=_SQUARE
    )[1:-1, 1:-1]
    return BinaryImage(ndimage.binary_dilation(closed, structure=_SQUARE))


# ----------------------------------- Thinning ----------------------------------- #

# P2..P9 around P, clockwise from north, as (drow, dcol).
_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _ring(px: NDArray[np.bool_], r: int, c: int) -> list[int]:
    return [int(px[r + dr, c + dc]) for dr, dc in _RING]


def _is_simple(ring: list[int]) -> bool:
    """Whether deleting the centre keeps the local 8-connectivity.

    Yokoi's 8-connectivity number on the complement must equal one.
    """
    n, ne, e, se, s, sw, w, nw = (1 - v for v in ring)
    # counterclockwise from east: x1..x8
    x = (e, ne, n, nw, w, sw, s, se)
    return (
        sum(x[k] - x[k] * x[(k + 1) % 8] * x[(k + 2) % 8] for k in (0, 2, 4, 6)) == 1
    )


def _redundant_pixel_pass(px: NDArray[np.bool_]) -> bool:
    """Remove pixels the 8-connected path does not need.

    Targets pixels of 2x2 ink blocks and staircase corners (two orthogonal
    4-neighbours set). End points are never removed.
    """
    changed = False
    blocks = px[:-1, :-1] & px[1:, :-1] & px[:-1, 1:] & px[1:, 1:]
    for r, c in zip(*np.nonzero(blocks)):
        for rr, cc in ((r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)):
            if not (px[r, c] and px[r, c + 1] and px[r + 1, c] and px[r + 1, c + 1]):
                break
            ring = _ring(px, rr, cc)
            if sum(ring) >= 2 and _is_simple(ring):
                px[rr, cc] = False
                changed = True

    for r, c in zip(*np.nonzero(px)):
        ring = _ring(px, r, c)
        n, _, e, _, s, _, w, _ = ring
        corner = (n and e) or (e and s) or (s and w) or (w and n)
        if corner and sum(ring) >= 2 and _is_simple(ring):
            px[r, c] = False
            changed = True
    return changed


def _path_neighbours(
    px: NDArray[np.bool_], pixel: tuple[int, int]
) -> list[tuple[int, int]]:
    r, c = pixel
    return [(r + dr, c + dc) for dr, dc in _RING if px[r + dr, c + dc]]


def _hook_pass(px: NDArray[np.bool_]) -> bool:
    """Drop end pixels that curl away from their stroke.

    An end pixel goes when the last step onto it turns by 90 degrees or more
    against the step two pixels further in. Only plain path pixels (exactly
    two neighbours) are followed, so junctions and short components stay.
    """
    changed = False
    for r, c in zip(*np.nonzero(px)):
        end = (int(r), int(c))
        path = [end]
        while len(path) < 4:
            ahead = [p for p in _path_neighbours(px, path[-1]) if p not in path]
            expected = 1 if len(path) == 1 else 2
            if len(_path_neighbours(px, path[-1])) != expected or len(ahead) != 1:
                break
            path.append(ahead[0])
        if len(path) < 4:
            continue
        last = _step_code(path[1], path[0])
        before = _step_code(path[3], path[2])
        assert last is not None and before is not None
        turn = abs(last - before) % 8
        if min(turn, 8 - turn) >= 2:
            px[end] = False
            changed = True
    return changed


def thin_to_skeleton(img: BinaryImage) -> Skeleton:
    """Thin to a one pixel wide skeleton.

    Two-subiteration parallel thinning, then the redundant pixel and end hook
    passes, repeated until nothing changes. Every deletion is a simple point,
    so the number of 8-connected components never changes, and a skeleton is
    a fixed point of this function.
    """
    px = np.pad(img.pixels, 1).copy()
    passes = 0
    while True:
        passes += 1
        thinned = thin(px)
        changed = not np.array_equal(thinned, px)
        px = np.array(thinned, dtype=bool)
        changed = _redundant_pixel_pass(px) or changed
        changed = _hook_pass(px) or changed
        if not changed:
            break
    log.debug(f"Thinning settled after {passes} pass(es)")
    return Skeleton(BinaryImage(px[1:-1, 1:-1]))


# ------------------------------- Contours and chains ------------------------------- #


def extract_contour_mask(img: BinaryImage) -> BinaryImage:
    """Ink pixels with at least one background 4-neighbour."""
    px = np.pad(img.pixels, 1)
    interior = px[:-2, 1:-1] & px[2:, 1:-1] & px[1:-1, :-2] & px[1:-1, 2:]
    return BinaryImage(img.pixels & ~interior)


def _step_code(src: tuple[int, int], dst: tuple[int, int]) -> int | None:
    """Freeman code from ``src`` to an 8-adjacent ``dst`` (row, col)."""
    delta = (dst[1] - src[1], dst[0] - src[0])
    try:
        return FREEMAN_STEPS.index(delta)
    except ValueError:
        return None


def _trace_one(
    mask: NDArray[np.bool_], unvisited: NDArray[np.bool_], start: tuple[int, int]
) -> ContourChain:
    h, w = mask.shape
    unvisited[start] = False
    current = start
    codes: list[int] = []
    # At the start nothing has been walked yet: scan clockwise from east.
    scan: list[int] = [0, 7, 6, 5, 4, 3, 2, 1]
    while True:
        step = None
        for code in scan:
            dx, dy = FREEMAN_STEPS[code]
            r, c = current[0] + dy, current[1] + dx
            if 0 <= r < h and 0 <= c < w and unvisited[r, c]:
                step = code, (r, c)
                break
        if step is None:
            break
        code, current = step
        unvisited[current] = False
        codes.append(code)
        # Outermost turn first, backtrack excluded.
        scan = [(code + 3 - i) % 8 for i in range(7)]

    closed = not codes
    if len(codes) >= 2:
        back = _step_code(current, start)
        if back is not None:
            codes.append(back)
            closed = True
    return ContourChain(start=(start[1], start[0]), codes=tuple(codes), closed=closed)


def trace_chain_codes(img: BinaryImage) -> list[ContourChain]:
    """Follow every contour clockwise and encode it as Freeman chains.

    Each chain starts at the top-most, then left-most pixel not yet visited
    and scans its neighbours from the outermost turn inwards, beginning with
    code 0. A chain closes when its last pixel touches the start. Pixels the
    walk could not reach (spurs, double-width contour parts) start further
    chains, so every contour pixel belongs to exactly one chain.
    """
    mask = img.pixels
    unvisited = mask.copy()
    chains: list[ContourChain] = []
    for r, c in zip(*np.nonzero(mask)):
        if unvisited[r, c]:
            chains.append(_trace_one(mask, unvisited, (int(r), int(c))))
    return chains


# ----------------------------------- File I/O ----------------------------------- #


def read_gray_image(path: Path | str) -> GrayImage:
    """Read a PGM (P2/P5) or PNG file as 8-bit grayscale."""
    try:
        with Image.open(path) as im:
            return GrayImage(np.asarray(im.convert("L")))
    except (OSError, ValueError, Image.DecompressionBombError) as e:
        raise UnreadableImage(f"Cannot decode image: {e}", where=str(path)) from e


def write_pgm(path: Path | str, img: GrayImage | BinaryImage) -> None:
    """Write a binary (P5) PGM; ink of a BinaryImage is written black."""
    if isinstance(img, BinaryImage):
        raster = np.where(img.pixels, 0, 255).astype(np.uint8)
    else:
        raster = img.pixels.copy()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(raster).save(path, format="PPM")
