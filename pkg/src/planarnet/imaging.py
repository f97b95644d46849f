"""Grayscale images, parametric planar transforms, and Cartesian/polar resampling.

Intensities live in [0, 1] everywhere.  Transforms are applied by inverse
mapping with bilinear interpolation; reads outside the source are zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Union

import numpy as np
from PIL import Image

from .geometry import PolarGeometry

__all__ = [
    "GrayImage",
    "PolarImage",
    "Translate",
    "Rotate",
    "Scale",
    "TransformSpec",
    "apply_transform",
    "transform_center_crop",
    "power",
    "compose",
    "downscale_bilinear",
    "upscale_nearest",
    "crop_center",
    "threshold",
    "to_polar",
    "from_polar",
    "read_image",
    "write_image",
]


def _validated(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{what} must be 2-dimensional, got shape {arr.shape}")
    if arr.size and not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise ValueError(f"{what} intensities must lie in [0, 1]")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class GrayImage:
    """Immutable rectangular grid of intensities in [0, 1], row-major."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        self.pixels = _validated(pixels, "image")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def constant(cls, height: int, width: int, value: float) -> "GrayImage":
        return cls(np.full((height, width), float(value)))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


class PolarImage:
    """Immutable polar picture: (rings, wedges) sector intensities in [0, 1]."""

    __slots__ = ("geometry", "sectors")

    def __init__(self, geometry: PolarGeometry, sectors):
        arr = _validated(sectors, "polar picture")
        if arr.shape != (geometry.rings, geometry.wedges):
            raise ValueError(
                f"sector grid {arr.shape} does not match geometry "
                f"{geometry.rings}x{geometry.wedges}"
            )
        self.geometry = geometry
        self.sectors = arr

    @property
    def rings(self) -> int:
        return self.geometry.rings

    @property
    def wedges(self) -> int:
        return self.geometry.wedges

    def __repr__(self):
        return f"PolarImage({self.rings}x{self.wedges})"


@dataclass(frozen=True)
class Translate:
    """Shift by (dx, dy): dx rightward, dy upward, in network-pixel units."""

    dx: float
    dy: float


@dataclass(frozen=True)
class Rotate:
    """Rotate counter-clockwise about the image center, in degrees."""

    degrees: float


@dataclass(frozen=True)
class Scale:
    """Scale about the image center by a positive factor."""

    factor: float

    def __post_init__(self):
        if self.factor <= 0:
            raise ValueError(f"scale factor must be positive, got {self.factor}")


TransformSpec = Union[Translate, Rotate, Scale]


def power(t: TransformSpec, j: int) -> TransformSpec:
    """The j-fold composition of a transform with itself, computed analytically.

    j = 0 yields the identity of the same variant.
    """
    if j < 0:
        raise ValueError(f"power must be non-negative, got {j}")
    if isinstance(t, Translate):
        return Translate(t.dx * j, t.dy * j)
    if isinstance(t, Rotate):
        return Rotate(t.degrees * j)
    if isinstance(t, Scale):
        return Scale(t.factor**j)
    raise TypeError(f"not a transform: {t!r}")


def compose(a: TransformSpec, b: TransformSpec) -> TransformSpec:
    """Analytic composition of two same-variant transforms (order-free)."""
    if type(a) is not type(b):
        raise ValueError(f"cannot compose {type(a).__name__} with {type(b).__name__}")
    if isinstance(a, Translate):
        return Translate(a.dx + b.dx, a.dy + b.dy)
    if isinstance(a, Rotate):
        return Rotate(a.degrees + b.degrees)
    if isinstance(a, Scale):
        return Scale(a.factor * b.factor)
    raise TypeError(f"not a transform: {a!r}")


@lru_cache(maxsize=16)
def _index_grid(h: int, w: int):
    rows, cols = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def _bilinear_sample(pixels: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample at fractional (row, col) locations; out-of-bounds reads are zero.

    The source is framed with a one-pixel zero border so that clipping corner
    indices into the padded frame reproduces zero fill for any read outside
    the image, however far out.
    """
    h, w = pixels.shape
    padded = np.zeros((h + 2, w + 2), dtype=np.float64)
    padded[1:-1, 1:-1] = pixels
    flat = padded.ravel()
    stride = w + 2
    r0 = np.floor(rows)
    c0 = np.floor(cols)
    fr = rows - r0
    fc = cols - c0
    r0 = r0.astype(np.int64)
    c0 = c0.astype(np.int64)
    r_lo = np.clip(r0 + 1, 0, h + 1)
    r_hi = np.clip(r0 + 2, 0, h + 1)
    c_lo = np.clip(c0 + 1, 0, w + 1)
    c_hi = np.clip(c0 + 2, 0, w + 1)
    out = (1.0 - fr) * (1.0 - fc) * flat[r_lo * stride + c_lo]
    out += (1.0 - fr) * fc * flat[r_lo * stride + c_hi]
    out += fr * (1.0 - fc) * flat[r_hi * stride + c_lo]
    out += fr * fc * flat[r_hi * stride + c_hi]
    return out


def _warp_window(
    pixels: np.ndarray, t: TransformSpec, scale_ratio: float, top: int, left: int,
    out_h: int, out_w: int,
) -> np.ndarray:
    """Inverse-map a window of the transformed image; the transform is centered
    on the *source* image, so warping a window equals warping then cropping."""
    h, w = pixels.shape
    grid_r, grid_c = _index_grid(out_h, out_w)
    rows = grid_r + float(top)
    cols = grid_c + float(left)
    if isinstance(t, Translate):
        src_r = rows + t.dy * scale_ratio
        src_c = cols - t.dx * scale_ratio
    elif isinstance(t, Rotate):
        theta = math.radians(t.degrees)
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        u = cols - cx  # rightward
        v = rows - cy  # downward
        src_c = cx + u * cos_t - v * sin_t
        src_r = cy + u * sin_t + v * cos_t
    elif isinstance(t, Scale):
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        src_c = cx + (cols - cx) / t.factor
        src_r = cy + (rows - cy) / t.factor
    else:
        raise TypeError(f"not a transform: {t!r}")
    return np.clip(_bilinear_sample(pixels, src_r, src_c), 0.0, 1.0)


def apply_transform(img: GrayImage, t: TransformSpec, scale_ratio: float = 1.0) -> GrayImage:
    """Apply a transform by inverse-mapping every output pixel into the source.

    ``scale_ratio`` converts translation parameters from network-pixel units
    into the units of this image (high-res source = crop size / network size);
    it does not affect rotation or scaling.
    """
    if scale_ratio <= 0:
        raise ValueError(f"scale_ratio must be positive, got {scale_ratio}")
    return GrayImage(_warp_window(img.pixels, t, scale_ratio, 0, 0, img.height, img.width))


def transform_center_crop(
    img: GrayImage, t: TransformSpec, scale_ratio: float, out_w: int, out_h: int
) -> GrayImage:
    """apply_transform followed by crop_center, fused into one sampling pass.

    Produces bit-identical values to the two-step form; only the pixels inside
    the crop window are ever sampled.
    """
    if scale_ratio <= 0:
        raise ValueError(f"scale_ratio must be positive, got {scale_ratio}")
    if out_w > img.width or out_h > img.height:
        raise ValueError(f"crop {out_w}x{out_h} exceeds source {img.width}x{img.height}")
    top = (img.height - out_h) // 2
    left = (img.width - out_w) // 2
    return GrayImage(_warp_window(img.pixels, t, scale_ratio, top, left, out_h, out_w))


@lru_cache(maxsize=64)
def _box_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) matrix averaging each output cell's footprint."""
    weights = np.zeros((n_out, n_in))
    step = n_in / n_out
    for j in range(n_out):
        lo, hi = j * step, (j + 1) * step
        for i in range(int(math.floor(lo)), min(int(math.ceil(hi)), n_in)):
            weights[j, i] = min(hi, i + 1) - max(lo, i)
    weights /= weights.sum(axis=1, keepdims=True)
    weights.setflags(write=False)
    return weights


def downscale_bilinear(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Area-consistent reduction: each output pixel averages its source footprint."""
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output dimensions must be positive, got {out_w}x{out_h}")
    if out_w > img.width or out_h > img.height:
        raise ValueError(
            f"cannot downscale {img.width}x{img.height} to {out_w}x{out_h}; "
            f"use upscale_nearest to enlarge"
        )
    wh = _box_weights(img.height, out_h)
    ww = _box_weights(img.width, out_w)
    out = wh @ img.pixels @ ww.T
    return GrayImage(np.clip(out, 0.0, 1.0))


def upscale_nearest(img: GrayImage, factor: int) -> GrayImage:
    """Replicate each pixel into a factor x factor block."""
    if factor < 1 or factor != int(factor):
        raise ValueError(f"factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return img
    return GrayImage(np.repeat(np.repeat(img.pixels, factor, axis=0), factor, axis=1))


def crop_center(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Centered axis-aligned crop."""
    if out_w > img.width or out_h > img.height:
        raise ValueError(
            f"crop {out_w}x{out_h} exceeds source {img.width}x{img.height}"
        )
    top = (img.height - out_h) // 2
    left = (img.width - out_w) // 2
    return GrayImage(img.pixels[top : top + out_h, left : left + out_w])


def threshold(img, level: float = 0.5):
    """Round intensities to {0, 1}: values >= level become 1. Ties round up."""
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"threshold level must lie in [0, 1], got {level}")
    if isinstance(img, PolarImage):
        return PolarImage(img.geometry, np.where(img.sectors >= level, 1.0, 0.0))
    return GrayImage(np.where(img.pixels >= level, 1.0, 0.0))


class _PolarBins(NamedTuple):
    sector: np.ndarray  # flat per-pixel sector index, -1 for blind spot / exterior
    counts: np.ndarray  # pixel-center count per sector
    centroid_rows: np.ndarray  # per-sector centroid sample coordinates
    centroid_cols: np.ndarray


@lru_cache(maxsize=32)
def _polar_bins(geometry: PolarGeometry, size: int) -> _PolarBins:
    """Per-pixel sector assignment for a size x size raster of this geometry.

    Radii are measured in source-image pixel units regardless of ``size`` so
    the same geometry can be rasterized at larger output resolutions.
    """
    rings, wedges = geometry.rings, geometry.wedges
    unit = size / geometry.source_size
    center = (size - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    x = (cols - center) / unit
    y = (center - rows) / unit  # y grows upward
    radius = np.hypot(x, y)
    angle = np.arctan2(y, x)
    angle = np.where(angle < 0, angle + 2 * math.pi, angle)
    wedge = np.minimum((angle * wedges / (2 * math.pi)).astype(np.int64), wedges - 1)

    ascending = np.array(geometry.boundaries[::-1])  # blind spot .. outer edge
    level = np.searchsorted(ascending, radius.ravel(), side="right")
    ring = level - 1  # 0 = innermost ring; -1 below blind spot
    sector = ring * wedges + wedge.ravel()
    sector[(ring < 0) | (ring >= rings)] = -1

    counts = np.bincount(sector[sector >= 0], minlength=rings * wedges)

    ring_idx = np.repeat(np.arange(rings), wedges)
    wedge_idx = np.tile(np.arange(wedges), rings)
    mid_r = np.array([geometry.mid_radius(k) for k in range(rings)])[ring_idx] * unit
    mid_a = (wedge_idx + 0.5) * 2 * math.pi / wedges
    centroid_rows = center - mid_r * np.sin(mid_a)
    centroid_cols = center + mid_r * np.cos(mid_a)

    for arr in (sector, counts, centroid_rows, centroid_cols):
        arr.setflags(write=False)
    return _PolarBins(sector, counts, centroid_rows, centroid_cols)


def to_polar(img: GrayImage, geometry: PolarGeometry) -> PolarImage:
    """Convert a square image to a polar picture.

    Each sector takes the mean of the pixels whose centers fall inside it; a
    sector that captures no pixel centers falls back to the bilinear sample at
    its centroid.  Pixels inside the blind spot or beyond the outer boundary
    are ignored.
    """
    if img.width != geometry.source_size or img.height != geometry.source_size:
        raise ValueError(
            f"image {img.width}x{img.height} does not match geometry source size "
            f"{geometry.source_size}"
        )
    bins = _polar_bins(geometry, geometry.source_size)
    flat = img.pixels.ravel()
    inside = bins.sector >= 0
    sums = np.bincount(bins.sector[inside], weights=flat[inside], minlength=geometry.n_sectors)
    means = sums / np.maximum(bins.counts, 1)
    fallback = _bilinear_sample(img.pixels, bins.centroid_rows, bins.centroid_cols)
    sectors = np.where(bins.counts > 0, means, fallback)
    return PolarImage(geometry, np.clip(sectors, 0.0, 1.0).reshape(geometry.rings, geometry.wedges))


def from_polar(p: PolarImage, out_size: int) -> GrayImage:
    """Rasterize a polar picture: each pixel takes its containing sector's value.

    The blind spot and the region beyond the outer boundary render as 0.
    """
    geometry = p.geometry
    if out_size < geometry.source_size:
        raise ValueError(
            f"out_size {out_size} is below the geometry source size {geometry.source_size}"
        )
    bins = _polar_bins(geometry, out_size)
    flat = np.where(bins.sector >= 0, p.sectors.ravel()[np.maximum(bins.sector, 0)], 0.0)
    return GrayImage(flat.reshape(out_size, out_size))


def read_image(path) -> GrayImage:
    """Read any PIL-supported image as grayscale; color converts via ITU-R 601 luma."""
    with Image.open(path) as im:
        gray = im.convert("L")
        arr = np.asarray(gray, dtype=np.float64) / 255.0
    return GrayImage(arr)


def write_image(img: GrayImage, path) -> None:
    """Write as 8-bit grayscale PNG, intensities mapped linearly to 0-255."""
    data = np.round(img.pixels * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")
