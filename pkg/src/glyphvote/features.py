"""The four fixed-length feature families.

Shadow (16) comes from the cleaned canvas, the chain code histogram (200)
from its contour, intersection (32) and line fitting (48) from its skeleton.
Values are emitted raw; scaling to [0, 1] is the normalizer's job.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from functools import cache
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

from glyphvote.constants import (
    CANVAS_SIZE,
    CLASSIFIER_ORDER,
    FAMILY_SIZES,
    FREEMAN_STEPS,
    FeatureFamily,
)
from glyphvote.imaging import (
    BinaryImage,
    ContourChain,
    GrayImage,
    Skeleton,
    binarize_dynamic_threshold,
    extract_contour_mask,
    morph_cleanup,
    scale_to_canvas,
    thin_to_skeleton,
    tight_bounding_box,
    trace_chain_codes,
    write_pgm,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Raw feature values of one family."""

    family: FeatureFamily
    values: NDArray[np.float64]

    def __post_init__(self):
        family = FeatureFamily(self.family)
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.size != FAMILY_SIZES[family]:
            raise ValueError(
                f"{family.value} vectors hold {FAMILY_SIZES[family]} values, "
                f"got {values.size}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.family == other.family and np.array_equal(
            self.values, other.values
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SegmentGrid:
    """Regular partition of the canvas into equally sized cells."""

    rows: int
    cols: int
    cell_height: int
    cell_width: int

    def __post_init__(self):
        if self.rows * self.cell_height != CANVAS_SIZE:
            raise ValueError(f"{self.rows} rows of {self.cell_height} px do not tile")
        if self.cols * self.cell_width != CANVAS_SIZE:
            raise ValueError(f"{self.cols} cols of {self.cell_width} px do not tile")

    @classmethod
    def skeleton_grid(cls) -> SegmentGrid:
        """4x4 segments of 25x25 px for intersection and line fitting."""
        return cls(4, 4, 25, 25)

    @classmethod
    def contour_grid(cls) -> SegmentGrid:
        """5x5 blocks of 20x20 px for the chain code histogram."""
        return cls(5, 5, 20, 20)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def index_of(self, x: int, y: int) -> int:
        """Row-major index of the cell holding pixel ``(x, y)``."""
        return (y // self.cell_height) * self.cols + x // self.cell_width

    def cell_sums(self, mask: NDArray) -> NDArray[np.int64]:
        """Per-cell totals of ``mask``, flattened row-major."""
        blocks = np.asarray(mask, dtype=np.int64).reshape(
            self.rows, self.cell_height, self.cols, self.cell_width
        )
        return blocks.sum(axis=(1, 3)).ravel()

    def cells(self, img: BinaryImage) -> Iterator[NDArray[np.bool_]]:
        """Cell rasters in row-major order."""
        for i in range(self.rows):
            for j in range(self.cols):
                yield img.pixels[
                    i * self.cell_height : (i + 1) * self.cell_height,
                    j * self.cell_width : (j + 1) * self.cell_width,
                ]


@dataclass(frozen=True)
class LineFitResult:
    """Least squares line of one segment.

    ``f1`` and ``f2`` encode the slope on the unit circle. Segments with fewer
    than two points carry ``f1 = f2 = 0``, which lies off that circle.
    """

    a: float
    f1: float
    f2: float
    n: int


# ----------------------------------- Shadow ----------------------------------- #


@cache
def _octant_masks(size: int = CANVAS_SIZE) -> tuple[NDArray[np.bool_], ...]:
    """The eight triangles cut by both diagonals and both midlines.

    Clockwise from the upper triangle of the top-left quadrant. Pixels whose
    centre lies on a diagonal straddle it and belong to both neighbours.
    """
    half = size // 2
    last = size - 1
    r, c = np.indices((size, size))
    top, left = r < half, c < half
    tl, tr, br, bl = top & left, top & ~left, ~top & ~left, ~top & left
    masks = (
        tl & (r <= c),
        tr & (r + c <= last),
        tr & (r + c >= last),
        br & (r <= c),
        br & (r >= c),
        bl & (r + c >= last),
        bl & (r + c <= last),
        tl & (r >= c),
    )
    for m in masks:
        m.setflags(write=False)
    return masks


# Octants whose canvas side is horizontal (top or bottom edge).
_HORIZONTAL_EDGE_OCTANTS = frozenset({0, 1, 4, 5})


def shadow_features(img: BinaryImage) -> FeatureVector:
    """Shadow of each octant on its canvas side and on its midline side.

    The shadow is the number of distinct coordinates the octant's ink covers
    when projected onto the side, divided by the side length of 50.
    """
    half = img.width // 2
    values = []
    for octant, mask in enumerate(_octant_masks(img.width)):
        ink = img.pixels & mask
        columns = np.count_nonzero(ink.any(axis=0)) / half
        rows = np.count_nonzero(ink.any(axis=1)) / half
        if octant in _HORIZONTAL_EDGE_OCTANTS:
            values += [columns, rows]
        else:
            values += [rows, columns]
    return FeatureVector(FeatureFamily.SHADOW, np.array(values))


# ------------------------------ Chain code histogram ------------------------------ #


def chain_code_histogram(
    chains: Iterable[ContourChain], grid: SegmentGrid | None = None
) -> FeatureVector:
    """Direction code counts per block, ``8 * block + code``.

    A step is counted in the block of the pixel it leaves.
    """
    grid = grid or SegmentGrid.contour_grid()
    hist = np.zeros(grid.size * 8)
    for chain in chains:
        x, y = chain.start
        for code in chain.codes:
            hist[8 * grid.index_of(x, y) + code] += 1
            dx, dy = FREEMAN_STEPS[code]
            x, y = x + dx, y + dy
    return FeatureVector(FeatureFamily.CHAIN_CODE, hist)


# --------------------------------- Intersections --------------------------------- #

_NEIGHBOUR_KERNEL = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]])


def neighbour_counts(img: BinaryImage) -> NDArray[np.int64]:
    """Number of ink 8-neighbours of every pixel, border counted as background."""
    return ndimage.convolve(
        img.pixels.astype(np.int64), _NEIGHBOUR_KERNEL, mode="constant", cval=0
    )


def intersection_features(
    sk: Skeleton, grid: SegmentGrid | None = None
) -> FeatureVector:
    """Open ends (first 16) then junctions (last 16) per segment, row-major."""
    grid = grid or SegmentGrid.skeleton_grid()
    px = sk.image.pixels
    counts = neighbour_counts(sk.image)
    open_ends = grid.cell_sums(px & (counts == 1))
    junctions = grid.cell_sums(px & (counts > 2))
    return FeatureVector(
        FeatureFamily.INTERSECTION, np.concatenate([open_ends, junctions])
    )


# --------------------------------- Line fitting --------------------------------- #


def line_fit_segment(points: ArrayLike) -> LineFitResult:
    """Fit ``y = a + b x`` by least squares and reparametrize the slope.

    ``f1 = 2b / (1 + b^2)`` and ``f2 = (1 - b^2) / (1 + b^2)``. A vertical point
    set takes the ``b -> inf`` limit (``f1 = 0, f2 = -1``) with ``a`` set to its
    shared x.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n < 2:
        return LineFitResult(a=0.0, f1=0.0, f2=0.0, n=n)

    x, y = pts[:, 0], pts[:, 1]
    if np.all(x == x[0]):
        return LineFitResult(a=float(x[0]), f1=0.0, f2=-1.0, n=n)

    sx, sy = x.sum(), y.sum()
    sxx, sxy = (x * x).sum(), (x * y).sum()
    b = (sxy * n - sx * sy) / (n * sxx - sx * sx)
    a = (sxy * sx - sxx * sy) / (sx * sx - n * sxx)
    return LineFitResult(
        a=float(a) + 0.0,
        f1=float(2 * b / (1 + b * b)) + 0.0,
        f2=float((1 - b * b) / (1 + b * b)) + 0.0,
        n=n,
    )


def line_fitting_features(
    sk: Skeleton, grid: SegmentGrid | None = None
) -> FeatureVector:
    """Intercepts (0-15), f1 (16-31) and f2 (32-47) per segment.

    Coordinates are local to the segment, origin at its top-left pixel.
    """
    grid = grid or SegmentGrid.skeleton_grid()
    fits = []
    for cell in grid.cells(sk.image):
        rows, cols = np.nonzero(cell)
        fits.append(line_fit_segment(np.column_stack([cols, rows])))
    values = [f.a for f in fits] + [f.f1 for f in fits] + [f.f2 for f in fits]
    return FeatureVector(FeatureFamily.LINE_FIT, np.array(values))


# ----------------------------------- Pipeline ----------------------------------- #


@dataclass(frozen=True)
class FeatureBundle:
    """All four vectors of one image."""

    shadow: FeatureVector
    intersection: FeatureVector
    line_fit: FeatureVector
    chain_code: FeatureVector

    def __getitem__(self, family: FeatureFamily | str) -> FeatureVector:
        family = FeatureFamily(family)
        return {
            FeatureFamily.SHADOW: self.shadow,
            FeatureFamily.INTERSECTION: self.intersection,
            FeatureFamily.LINE_FIT: self.line_fit,
            FeatureFamily.CHAIN_CODE: self.chain_code,
        }[family]

    def __iter__(self) -> Iterator[FeatureVector]:
        """Vectors in classifier order."""
        return (self[family] for family in CLASSIFIER_ORDER)

    @classmethod
    def from_vectors(cls, vectors: Iterable[FeatureVector]) -> FeatureBundle:
        by_family = {v.family: v for v in vectors}
        missing = set(FeatureFamily) - set(by_family)
        if missing:
            raise ValueError(f"Missing feature families: {sorted(f.value for f in missing)}")
        return cls(
            shadow=by_family[FeatureFamily.SHADOW],
            intersection=by_family[FeatureFamily.INTERSECTION],
            line_fit=by_family[FeatureFamily.LINE_FIT],
            chain_code=by_family[FeatureFamily.CHAIN_CODE],
        )


def extract_feature_bundle(
    img: GrayImage, dump_dir: Path | None = None, stem: str = "glyph"
) -> FeatureBundle:
    """Run the whole preprocessing chain and all four extractors.

    Parameters
    ----------
    img : GrayImage
        The scan of one isolated character.
    dump_dir : Path, optional
        When given, every intermediate stage is written there as PGM.
    stem : str
        File name prefix of the dumped stages.

    Raises
    ------
    NoForeground
        If the scan holds no ink.
    """
    binary, _ = binarize_dynamic_threshold(img)
    scaled = scale_to_canvas(binary, tight_bounding_box(binary))
    cleaned = morph_cleanup(scaled)
    contour = extract_contour_mask(cleaned)
    skeleton = thin_to_skeleton(cleaned)

    if dump_dir is not None:
        stages = {
            "binary": binary,
            "scaled": scaled,
            "cleaned": cleaned,
            "contour": contour,
            "skeleton": skeleton.image,
        }
        for name, stage in stages.items():
            write_pgm(Path(dump_dir) / f"{stem}.{name}.pgm", stage)
        log.debug(f"Dumped {len(stages)} stages of '{stem}' to {dump_dir}")

    return FeatureBundle(
        shadow=shadow_features(cleaned),
        intersection=intersection_features(skeleton),
        line_fit=line_fitting_features(skeleton),
        chain_code=chain_code_histogram(trace_chain_codes(contour)),
    )
