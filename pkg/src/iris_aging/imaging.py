"""Raster primitives, rubber-sheet unwrapping and the two filters used by
the quality metrics (10x10 sliding median, Laplacian of Gaussian)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image
from scipy import ndimage

from .errors import DegenerateGrid, ImageFormatError, InvalidGeometry

DEFAULT_ROWS = 64
DEFAULT_COLS = 512
DEFAULT_LOG_SIGMA = 1.4
FULL_CIRCLE = ((0.0, 360.0),)

# 10x10 window: pixel (i, j) owns rows i-4..i+5 and cols j-4..j+5
_MEDIAN_BEFORE = 4
_MEDIAN_AFTER = 5


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale raster, shape (height, width), intensities in [0, 255].

    Rasters decoded from files are uint8; resampled rasters (polar textures)
    keep float64 samples.
    """

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ImageFormatError(f"expected a non-empty 2-D raster, got shape {arr.shape}")
        if arr.dtype == bool or not np.issubdtype(arr.dtype, np.number):
            raise ImageFormatError(f"unsupported pixel dtype {arr.dtype}")
        if arr.dtype != np.uint8:
            arr = arr.astype(np.float64)
            if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 255:
                raise ImageFormatError("pixel intensities must lie in [0, 255]")
        object.__setattr__(self, "pixels", _frozen(arr))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def as_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)

    def to_uint8(self) -> np.ndarray:
        if self.pixels.dtype == np.uint8:
            return np.array(self.pixels)
        return np.clip(np.rint(self.pixels), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class BitMask:
    """Per-pixel validity flags; True marks an unoccluded iris pixel."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ImageFormatError(f"mask must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "bits", _frozen(arr.astype(bool)))

    @classmethod
    def full(cls, height: int, width: int) -> "BitMask":
        return cls(np.ones((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


@dataclass(frozen=True)
class SegmentationCircles:
    pupil_center: tuple[float, float]
    pupil_radius: float
    iris_center: tuple[float, float]
    iris_radius: float

    def __post_init__(self):
        object.__setattr__(self, "pupil_center", tuple(float(v) for v in self.pupil_center))
        object.__setattr__(self, "iris_center", tuple(float(v) for v in self.iris_center))
        pr, ir = float(self.pupil_radius), float(self.iris_radius)
        object.__setattr__(self, "pupil_radius", pr)
        object.__setattr__(self, "iris_radius", ir)
        if not (math.isfinite(pr) and math.isfinite(ir)) or pr <= 0:
            raise InvalidGeometry(f"pupil radius must be positive, got {pr}")
        if pr >= ir:
            raise InvalidGeometry(f"pupil radius {pr} must be smaller than iris radius {ir}")
        offset = math.dist(self.pupil_center, self.iris_center)
        if offset + pr > ir + 1e-9:
            raise InvalidGeometry("pupil circle is not contained in the iris circle")


@dataclass(frozen=True, eq=False)
class PolarIris:
    """Rubber-sheet texture. Rows run pupil -> limbus, columns run along
    the angle (0 deg at 3 o'clock, counterclockwise)."""

    texture: GrayImage
    mask: BitMask
    sectors: tuple[tuple[float, float], ...] = field(default=FULL_CIRCLE)

    def __post_init__(self):
        if self.texture.shape != self.mask.shape:
            raise ImageFormatError(
                f"texture {self.texture.shape} and mask {self.mask.shape} dimensions differ"
            )
        object.__setattr__(self, "sectors", tuple((float(a), float(b)) for a, b in self.sectors))

    @property
    def rows(self) -> int:
        return self.texture.height

    @property
    def cols(self) -> int:
        return self.texture.width

    @property
    def is_full_circle(self) -> bool:
        return len(self.sectors) == 1 and self.sectors[0][1] - self.sectors[0][0] >= 360.0


# ---------------------------------------------------------------------------
# file IO


def read_image(path) -> GrayImage:
    """Read an 8-bit grayscale PGM (P5) or PNG."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise ImageFormatError(f"{path}: expected 8-bit grayscale, got mode {im.mode}")
            return GrayImage(np.asarray(im, dtype=np.uint8))
    except (OSError, SyntaxError) as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc


def read_mask(path) -> BitMask:
    """Read a mask raster: 0 = occluded, anything else valid."""
    return BitMask(read_image(path).pixels > 0)


def write_image(path, img: GrayImage) -> None:
    path = Path(path)
    fmt = "PNG" if path.suffix.lower() == ".png" else "PPM"
    Image.fromarray(img.to_uint8(), mode="L").save(path, format=fmt)


def write_mask(path, mask: BitMask) -> None:
    write_image(path, GrayImage(np.where(mask.bits, 255, 0).astype(np.uint8)))


# ---------------------------------------------------------------------------
# rubber sheet


def sector_columns(cols: int, sectors: Sequence[tuple[float, float]]) -> np.ndarray:
    """Indices into a full-circle grid of `cols` angular samples that fall in
    the given [start, end) degree intervals, ordered sector by sector."""
    step = 360.0 / cols
    angles = np.arange(cols) * step
    picked = []
    for start, end in sectors:
        span = end - start
        if not 0 < span <= 360:
            raise DegenerateGrid(f"invalid sector [{start}, {end}]")
        rel = np.mod(angles - start, 360.0)
        # tolerate rounding when the sector border lands on a grid angle
        rel = np.where(np.isclose(rel, 360.0, atol=1e-9), 0.0, rel)
        inside = np.flatnonzero(rel < span - 1e-9)
        picked.append(inside[np.argsort(rel[inside], kind="stable")])
    return np.concatenate(picked) if picked else np.array([], dtype=int)


def _bilinear(values: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Sample `values` at float coords; returns samples, in-bounds flags and
    the integer corner indices used."""
    h, w = values.shape
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xc = np.clip(x, 0, w - 1)
    yc = np.clip(y, 0, h - 1)
    x0 = np.clip(np.floor(xc).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(yc).astype(int), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0
    top = values[y0, x0] * (1 - fx) + values[y0, x1] * fx
    bottom = values[y1, x0] * (1 - fx) + values[y1, x1] * fx
    return top * (1 - fy) + bottom * fy, inside, (x0, x1, y0, y1)


def unwrap_to_polar(
    img: GrayImage,
    seg: SegmentationCircles,
    mask: BitMask | None = None,
    rows: int = DEFAULT_ROWS,
    cols: int = DEFAULT_COLS,
    sectors: Sequence[tuple[float, float]] = FULL_CIRCLE,
) -> PolarIris:
    """Map the iris annulus onto a rows x cols rectangle (Daugman rubber sheet).

    Row k samples the fraction (k + 0.5) / rows of the way from the pupil
    boundary to the limbus; column c looks along angle c * 360 / cols. Only
    columns whose angle lies inside `sectors` are kept. A polar pixel is valid
    when its sample lies inside the image and every bilinear support pixel is
    valid in `mask`.
    """
    if seg.pupil_radius >= seg.iris_radius:
        raise InvalidGeometry("pupil radius must be smaller than iris radius")
    if rows < 4 or cols < 16:
        raise DegenerateGrid(f"polar grid {rows}x{cols} is below the 4x16 minimum")
    if mask is not None and mask.shape != img.shape:
        raise ImageFormatError(f"mask {mask.shape} does not match image {img.shape}")

    col_idx = sector_columns(cols, sectors)
    if col_idx.size == 0:
        raise DegenerateGrid("sector selection produced no angular samples")
    theta = np.deg2rad(col_idx * (360.0 / cols))
    frac = (np.arange(rows) + 0.5) / rows

    ux, uy = np.cos(theta), -np.sin(theta)  # image y axis points down
    (px, py), (ix, iy) = seg.pupil_center, seg.iris_center
    inner_x = px + seg.pupil_radius * ux
    inner_y = py + seg.pupil_radius * uy
    outer_x = ix + seg.iris_radius * ux
    outer_y = iy + seg.iris_radius * uy
    x = inner_x[None, :] + frac[:, None] * (outer_x - inner_x)[None, :]
    y = inner_y[None, :] + frac[:, None] * (outer_y - inner_y)[None, :]

    samples, inside, (x0, x1, y0, y1) = _bilinear(img.as_float(), x, y)
    valid = inside
    if mask is not None:
        m = mask.bits
        valid = valid & m[y0, x0] & m[y0, x1] & m[y1, x0] & m[y1, x1]
    return PolarIris(GrayImage(samples), BitMask(valid), tuple(sectors))


# ---------------------------------------------------------------------------
# filters


def _median_counts(n: int) -> np.ndarray:
    """Number of in-bounds window positions along one axis for each index."""
    idx = np.arange(n)
    lo = np.maximum(idx - _MEDIAN_BEFORE, 0)
    hi = np.minimum(idx + _MEDIAN_AFTER, n - 1)
    return hi - lo + 1


def median_filter_10x10(img: GrayImage, chunk_rows: int = 32) -> GrayImage:
    """10x10 sliding median with windows clipped at the borders.

    For an even count of surviving pixels the lower of the two middle values
    is returned, so the output always holds actual input intensities.
    """
    data = img.as_float()
    h, w = data.shape
    padded = np.pad(
        data,
        ((_MEDIAN_BEFORE, _MEDIAN_AFTER), (_MEDIAN_BEFORE, _MEDIAN_AFTER)),
        constant_values=np.inf,
    )
    windows = sliding_window_view(padded, (10, 10))
    counts = _median_counts(h)[:, None] * _median_counts(w)[None, :]
    order = (counts - 1) // 2
    out = np.empty((h, w), dtype=np.float64)
    for r0 in range(0, h, chunk_rows):
        r1 = min(r0 + chunk_rows, h)
        block = np.sort(windows[r0:r1].reshape(r1 - r0, w, 100), axis=-1)
        out[r0:r1] = np.take_along_axis(block, order[r0:r1, :, None], axis=-1)[..., 0]
    if img.pixels.dtype == np.uint8:
        return GrayImage(out.astype(np.uint8))
    return GrayImage(out)


def log_kernel(sigma: float = DEFAULT_LOG_SIGMA) -> np.ndarray:
    """Discrete Laplacian-of-Gaussian kernel, side ceil(6*sigma) rounded up to
    odd, shifted to sum exactly to zero."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    side = math.ceil(6 * sigma)
    if side % 2 == 0:
        side += 1
    half = side // 2
    yy, xx = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    r2 = (xx**2 + yy**2) / (2 * sigma**2)
    kernel = -(1.0 / (math.pi * sigma**4)) * (1 - r2) * np.exp(-r2)
    return kernel - kernel.mean()


def log_filter(img: GrayImage, sigma: float = DEFAULT_LOG_SIGMA) -> np.ndarray:
    """Signed LoG response; borders are extended by edge replication."""
    data = img.as_float()
    # the kernel sums to zero only up to rounding; removing an offset first
    # keeps flat regions from leaking c * sum(kernel)
    data = data - data.min()
    return ndimage.convolve(data, log_kernel(sigma), mode="nearest")
