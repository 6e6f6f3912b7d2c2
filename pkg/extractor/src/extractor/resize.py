"""Input-size planning: place the largest axis exactly on the cell grid."""

from __future__ import annotations


def round_half_down_ratio(numer: int, denom: int) -> int:
    """Nearest integer to numer/denom, exact halves rounding down.

    Integer arithmetic throughout so .5 cases cannot drift through float
    division.  Both arguments must be non-negative with denom >= 1.
    """
    if denom < 1 or numer < 0:
        raise ValueError(f"need numer >= 0 and denom >= 1, got {numer}/{denom}")
    return (2 * numer + denom - 1) // (2 * denom)


def scaled_size(width: int, height: int, tag: int, reduction: int) -> tuple[int, int]:
    """Resize target (width, height) in pixels for one scale tag.

    The largest axis becomes exactly reduction * tag pixels, so a backbone
    that halves ceil-wise down to that reduction emits exactly tag cells
    along it.  The short axis keeps the aspect ratio, rounded to the nearest
    pixel with ties going down, and never collapses below one pixel.
    """
    if min(width, height) < 1:
        raise ValueError(f"image size must be positive, got {width}x{height}")
    if tag < 1 or reduction < 1:
        raise ValueError(f"tag and reduction must be positive, got {tag}, {reduction}")
    long_px = reduction * tag
    if width >= height:
        short_px = max(1, round_half_down_ratio(height * long_px, width))
        return long_px, short_px
    short_px = max(1, round_half_down_ratio(width * long_px, height))
    return short_px, long_px


def grid_shape(width_px: int, height_px: int, reduction: int) -> tuple[int, int]:
    """(rows, cols) the backbone emits for an input of the given pixel size.

    Every stride-2 stage pads so its output is ceil(input / 2); composing
    them gives ceil(px / reduction) per axis.
    """
    rows = -(-height_px // reduction)
    cols = -(-width_px // reduction)
    return rows, cols
