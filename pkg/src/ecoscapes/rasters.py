"""All pixel math: band indices, image rendering, rescaling, water masking.

Conventions pinned here so golden images stay bit-stable:

* 8-bit quantization always rounds half-up.
* The water rendering maps index 1 -> white (matching the analysis
  system prompt "water as white and land as black"). Images produced by
  the public data browser use the opposite ramp (0 -> white, 1 -> black);
  pass ``invert=True`` to reproduce that ramp exactly.
* An index is no-data wherever either input band is masked out or the
  band sum is zero, rather than inventing a value there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from ecoscapes.errors import GeometryMismatchError

# 8-connectivity for component labeling: diagonal neighbors join.
_CONNECT_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class IndexRaster:
    """A per-pixel normalized-difference index with a validity mask."""

    values: np.ndarray  # float64, shape (H, W); undefined where ~valid
    valid: np.ndarray   # bool, shape (H, W)

    def __post_init__(self):
        if self.values.shape != self.valid.shape or self.values.ndim != 2:
            raise ValueError("values and valid must be equal-shaped 2-D arrays")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """A boolean water map with the geometry of its source raster."""

    bits: np.ndarray  # bool, shape (H, W); True = water

    def __post_init__(self):
        if self.bits.ndim != 2 or self.bits.dtype != np.bool_:
            raise ValueError("bits must be a 2-D boolean array")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # np.round is banker's rounding; quantization here is half-up by contract.
    return np.floor(x + 0.5)


def _check_same_geometry(*shapes: tuple) -> None:
    first = shapes[0]
    for s in shapes[1:]:
        if s != first:
            raise GeometryMismatchError(f"raster shapes differ: {first} vs {s}")


def normalized_difference(a, b) -> IndexRaster:
    """Compute (a - b) / (a + b) per pixel over two band rasters.

    ``a`` and ``b`` are band rasters (``.values`` float array and
    ``.data_mask`` bool array, equal shapes). A pixel is no-data when
    either input is masked out or when a + b = 0, where the formula is
    undefined.
    """
    _check_same_geometry(a.values.shape, b.values.shape,
                         a.data_mask.shape, b.data_mask.shape)
    av = a.values.astype(np.float64)
    bv = b.values.astype(np.float64)
    total = av + bv
    valid = a.data_mask & b.data_mask & (total != 0)
    values = np.zeros_like(av)
    np.divide(av - bv, total, out=values, where=valid)
    return IndexRaster(values=values, valid=valid)


def compose_true_color(r, g, b, gain: float = 2.5) -> np.ndarray:
    """Render three reflectance bands into an 8-bit RGB image.

    Each channel is clamp(gain * reflectance, 0, 1) scaled to 0-255 and
    rounded half-up; pixels masked out in any band come out black.
    """
    _check_same_geometry(r.values.shape, g.values.shape, b.values.shape)
    valid = r.data_mask & g.data_mask & b.data_mask
    out = np.zeros((*r.values.shape, 3), dtype=np.uint8)
    for i, band in enumerate((r, g, b)):
        channel = _round_half_up(np.clip(gain * band.values, 0.0, 1.0) * 255.0)
        out[..., i] = np.where(valid, channel, 0).astype(np.uint8)
    return out


def render_moisture(idx: IndexRaster,
                    nodata_color: tuple[int, int, int] = (0, 0, 0)) -> np.ndarray:
    """Render a moisture index as a red -> white -> blue ramp.

    Index -1 is pure red (dry), 0 is white, +1 is pure blue (moist).
    No-data pixels take ``nodata_color``.
    """
    v = np.clip(idx.values, -1.0, 1.0)
    # Below the midpoint red stays saturated while green/blue rise to white;
    # above it red/green fall off toward pure blue.
    low = _round_half_up(255.0 * (1.0 + np.minimum(v, 0.0)))
    high = _round_half_up(255.0 * (1.0 - np.maximum(v, 0.0)))
    out = np.empty((*v.shape, 3), dtype=np.uint8)
    out[..., 0] = high
    out[..., 1] = np.where(v < 0, low, high)
    out[..., 2] = np.where(v < 0, low, 255)
    for i, c in enumerate(nodata_color):
        out[..., i] = np.where(idx.valid, out[..., i], c)
    return out


def render_water(idx: IndexRaster, invert: bool = False) -> np.ndarray:
    """Render a water index as an 8-bit greyscale image.

    Indices outside [0, 1] and no-data pixels are discarded to 0 (land /
    no-data). In range, luminance = round(255 * index) so strong water
    renders white. With ``invert=True`` the in-range ramp flips to
    0 -> white, 1 -> black, matching images exported from the public
    data browser; discarded pixels still come out 0.
    """
    v = idx.values
    in_range = idx.valid & (v >= 0.0) & (v <= 1.0)
    ramp = 1.0 - v if invert else v
    lum = _round_half_up(255.0 * np.clip(ramp, 0.0, 1.0))
    return np.where(in_range, lum, 0).astype(np.uint8)


def rescale_max_side(image: np.ndarray, max_side: int = 1024) -> np.ndarray:
    """Proportionally shrink an image so its largest side is ``max_side``.

    Images already within the limit are returned unchanged. The other
    side is rounded half-up and never drops below 1 pixel.
    """
    if max_side < 1:
        raise ValueError(f"max_side must be >= 1, got {max_side}")
    if image.size == 0:
        raise ValueError("empty image")
    h, w = image.shape[:2]
    largest = max(h, w)
    if largest <= max_side:
        return image
    scale = max_side / largest
    new_h = max(1, int(np.floor(h * scale + 0.5)))
    new_w = max(1, int(np.floor(w * scale + 0.5)))
    if h == largest:
        new_h = max_side
    else:
        new_w = max_side
    resized = Image.fromarray(image).resize((new_w, new_h), Image.LANCZOS)
    return np.asarray(resized)


def threshold_mask(gray: np.ndarray, t: int) -> BinaryMask:
    """Mark pixels with luminance >= t as water (inclusive boundary)."""
    if gray.ndim != 2:
        raise ValueError("expected a single-channel image")
    return BinaryMask(bits=np.asarray(gray) >= t)


def denoise_mask(mask: BinaryMask, opening_radius: int,
                 min_area_fraction: float) -> BinaryMask:
    """Drop noise from a water mask: morphological opening + area filter.

    Opening (erosion then dilation with a square element of side
    2 * radius + 1) kills features thinner than the element, such as
    single-pixel pools; afterwards 8-connected components smaller than
    ``min_area_fraction`` of the image area are removed.
    """
    if opening_radius < 0:
        raise ValueError("opening_radius must be >= 0")
    if not 0.0 <= min_area_fraction < 1.0:
        raise ValueError("min_area_fraction must be in [0, 1)")
    bits = mask.bits
    if opening_radius > 0:
        side = 2 * opening_radius + 1
        element = np.ones((side, side), dtype=bool)
        bits = ndimage.binary_opening(bits, structure=element)
    min_area = min_area_fraction * bits.size
    if min_area > 0 and bits.any():
        labels, count = ndimage.label(bits, structure=_CONNECT_8)
        areas = np.bincount(labels.ravel(), minlength=count + 1)
        keep = areas >= min_area
        keep[0] = False
        bits = keep[labels]
    return BinaryMask(bits=np.ascontiguousarray(bits))


def water_fraction(mask: BinaryMask) -> float:
    """Share of pixels marked as water."""
    return float(np.count_nonzero(mask.bits)) / mask.bits.size


def save_png(image: np.ndarray, path) -> None:
    """Write an 8-bit image array (greyscale or RGB) as a PNG file."""
    Image.fromarray(image).save(path, format="PNG")


def encode_png(image: np.ndarray) -> bytes:
    """Encode an 8-bit image array as PNG bytes."""
    import io

    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


def load_png(path) -> np.ndarray:
    """Read a PNG into an array, preserving greyscale vs RGB channels."""
    with Image.open(path) as img:
        if img.mode in ("L", "RGB"):
            return np.asarray(img)
        if img.mode in ("LA", "I;16", "I"):
            return np.asarray(img.convert("L"))
        return np.asarray(img.convert("RGB"))
