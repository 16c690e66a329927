"""Synthetic glyph corpus for end-to-end runs without a real dataset.

Ten stroke shapes are drawn with random placement, size, stroke width, ink
and paper intensity plus mild sensor noise. Pure single horizontal or
vertical bars are avoided: stretching their bounding box onto the canvas
would turn them into a solid square.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from glyphvote.imaging import GrayImage

log = logging.getLogger(__name__)

GLYPH_SIZE = 64

Box = tuple[int, int, int, int]


def _slash(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    x0, y0, x1, y1 = box
    draw.line([(x0, y1), (x1, y0)], fill=ink, width=width)


def _backslash(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    x0, y0, x1, y1 = box
    draw.line([(x0, y0), (x1, y1)], fill=ink, width=width)


def _equals(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    x0, y0, x1, y1 = box
    for y in (y0, y1):
        draw.line([(x0, y), (x1, y)], fill=ink, width=width)


def _plus(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    x0, y0, x1, y1 = box
    xm, ym = (x0 + x1) // 2, (y0 + y1) // 2
    draw.line([(x0, ym), (x1, ym)], fill=ink, width=width)
    draw.line([(xm, y0), (xm, y1)], fill=ink, width=width)


def _cross(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    _slash(draw, box, ink, width)
    _backslash(draw, box, ink, width)


def _ell(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    x0, y0, x1, y1 = box
    draw.line([(x0, y0), (x0, y1), (x1, y1)], fill=ink, width=width, joint="curve")


def _tee(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    x0, y0, x1, y1 = box
    xm = (x0 + x1) // 2
    draw.line([(x0, y0), (x1, y0)], fill=ink, width=width)
    draw.line([(xm, y0), (xm, y1)], fill=ink, width=width)


def _zed(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    x0, y0, x1, y1 = box
    draw.line(
        [(x0, y0), (x1, y0), (x0, y1), (x1, y1)], fill=ink, width=width, joint="curve"
    )


def _ring(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    draw.ellipse(box, outline=ink, width=width)


def _loop(draw: ImageDraw.ImageDraw, box: Box, ink: int, width: int) -> None:
    x0, y0, x1, y1 = box
    ym = (y0 + y1) // 2
    draw.ellipse((x0, y0, x1, ym), outline=ink, width=width)
    draw.line([(x1 - width // 2, (y0 + ym) // 2), (x1 - width // 2, y1)], fill=ink, width=width)


GLYPH_CLASSES: dict[str, Callable[[ImageDraw.ImageDraw, Box, int, int], None]] = {
    "slash": _slash,
    "backslash": _backslash,
    "equals": _equals,
    "plus": _plus,
    "cross": _cross,
    "ell": _ell,
    "tee": _tee,
    "zed": _zed,
    "ring": _ring,
    "loop": _loop,
}


def generate_glyph(class_name: str, rng: np.random.Generator) -> GrayImage:
    """Render one jittered sample of ``class_name``.

    Raises
    ------
    KeyError
        For an unknown class name.
    """
    painter = GLYPH_CLASSES[class_name]
    paper = int(rng.integers(200, 256))
    ink = int(rng.integers(0, 70))
    width = int(rng.integers(2, 7))
    x0, y0 = (int(v) for v in rng.integers(4, 16, size=2))
    x1, y1 = (GLYPH_SIZE - 1 - int(v) for v in rng.integers(4, 16, size=2))

    canvas = Image.new("L", (GLYPH_SIZE, GLYPH_SIZE), paper)
    painter(ImageDraw.Draw(canvas), (x0, y0, x1, y1), ink, width)
    noisy = np.asarray(canvas, dtype=np.float64) + rng.normal(0.0, 6.0, canvas.size[::-1])
    return GrayImage(np.clip(np.rint(noisy), 0, 255).astype(np.uint8))


def write_corpus(root: Path | str, per_class: int = 60, seed: int = 0) -> list[Path]:
    """Write ``root/<class>/<n>.png`` for every class; same seed, same files."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    written = []
    for name in GLYPH_CLASSES:
        (root / name).mkdir(parents=True, exist_ok=True)
        for n in range(per_class):
            path = root / name / f"{n:03d}.png"
            Image.fromarray(generate_glyph(name, rng).pixels.copy()).save(path)
            written.append(path)
    log.info(f"Wrote {len(written)} synthetic glyphs of {len(GLYPH_CLASSES)} classes to {root}")
    return written
