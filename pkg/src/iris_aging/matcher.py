"""Daugman-style iris codes built from real (even, cosine) Gabor wavelets,
compared by masked fractional Hamming distance with rotation search."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigMismatch, ImageFormatError, NoOverlap, PolarTooSmall
from .imaging import PolarIris

MAGIC = b"IAC1"
DEFAULT_MAX_ROTATION = 8


@dataclass(frozen=True)
class EncoderConfig:
    """Filter bank and sampling grid.

    Each wavelength gives one zero-DC kernel exp(-x^2 / 2s^2) cos(2 pi x / L)
    with s = sigma_ratio * L, truncated at +-ceil(support * s) columns.
    """

    grid_rows: int = 8
    grid_cols: int = 512
    wavelengths: tuple[float, ...] = (8.0, 16.0, 32.0)
    sigma_ratio: float = 0.5
    support: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "wavelengths", tuple(float(w) for w in self.wavelengths))
        if self.grid_rows < 1 or self.grid_cols < 1 or not self.wavelengths:
            raise ValueError("encoder grid and filter bank must be non-empty")

    @property
    def filter_count(self) -> int:
        return len(self.wavelengths)

    @property
    def code_length(self) -> int:
        return self.grid_rows * self.grid_cols * self.filter_count

    def kernels(self) -> list[np.ndarray]:
        out = []
        for wavelength in self.wavelengths:
            s = self.sigma_ratio * wavelength
            half = math.ceil(self.support * s)
            x = np.arange(-half, half + 1, dtype=np.float64)
            g = np.exp(-(x**2) / (2 * s**2)) * np.cos(2 * np.pi * x / wavelength)
            out.append(g - g.mean())
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wavelengths"] = list(self.wavelengths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(
            grid_rows=int(d["grid_rows"]),
            grid_cols=int(d["grid_cols"]),
            wavelengths=tuple(d["wavelengths"]),
            sigma_ratio=float(d["sigma_ratio"]),
            support=float(d["support"]),
        )


@dataclass(frozen=True, eq=False)
class IrisCode:
    """bits/mask have shape (filter_count, grid_rows, grid_cols)."""

    bits: np.ndarray
    mask: np.ndarray
    config: EncoderConfig

    def __post_init__(self):
        shape = (self.config.filter_count, self.config.grid_rows, self.config.grid_cols)
        bits = np.asarray(self.bits, dtype=bool).reshape(shape)
        mask = np.asarray(self.mask, dtype=bool).reshape(shape)
        bits.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "mask", mask)

    def __len__(self):
        return self.bits.size

    def __eq__(self, other):
        if not isinstance(other, IrisCode):
            return NotImplemented
        return (
            self.config == other.config
            and np.array_equal(self.bits, other.bits)
            and np.array_equal(self.mask, other.mask)
        )

    def to_bytes(self) -> bytes:
        cfg = json.dumps(self.config.to_dict(), sort_keys=True).encode()
        n = self.bits.size
        return b"".join(
            [
                MAGIC,
                struct.pack("<I", len(cfg)),
                cfg,
                struct.pack("<I", n),
                np.packbits(self.bits.ravel()).tobytes(),
                np.packbits(self.mask.ravel()).tobytes(),
            ]
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> "IrisCode":
        if blob[:4] != MAGIC:
            raise ImageFormatError("not an iris code container (bad magic)")
        (cfg_len,) = struct.unpack_from("<I", blob, 4)
        pos = 8 + cfg_len
        config = EncoderConfig.from_dict(json.loads(blob[8:pos]))
        (n,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        nbytes = (n + 7) // 8
        if len(blob) != pos + 2 * nbytes or n != config.code_length:
            raise ImageFormatError("iris code container is truncated or inconsistent")
        raw = np.frombuffer(blob, dtype=np.uint8, offset=pos)
        bits = np.unpackbits(raw[:nbytes])[:n]
        mask = np.unpackbits(raw[nbytes : 2 * nbytes])[:n]
        return cls(bits, mask, config)

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config.to_dict(),
                "length": int(self.bits.size),
                "bits": np.packbits(self.bits.ravel()).tobytes().hex(),
                "mask": np.packbits(self.mask.ravel()).tobytes().hex(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "IrisCode":
        d = json.loads(text)
        n = int(d["length"])
        bits = np.unpackbits(np.frombuffer(bytes.fromhex(d["bits"]), dtype=np.uint8))[:n]
        mask = np.unpackbits(np.frombuffer(bytes.fromhex(d["mask"]), dtype=np.uint8))[:n]
        return cls(bits, mask, EncoderConfig.from_dict(d["config"]))


@dataclass(frozen=True)
class MatchResult:
    hd: float
    best_rotation: int
    compared_bits: int


def _segments(polar: PolarIris) -> list[tuple[int, int]]:
    """Contiguous [start, stop) column ranges, one per angular sector."""
    if polar.is_full_circle:
        return [(0, polar.cols)]
    spans = [end - start for start, end in polar.sectors]
    total = sum(spans)
    bounds, acc = [0], 0.0
    for span in spans[:-1]:
        acc += span
        bounds.append(int(round(polar.cols * acc / total)))
    bounds.append(polar.cols)
    return list(zip(bounds[:-1], bounds[1:]))


def sample_positions(config: EncoderConfig, rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    r = np.floor((np.arange(config.grid_rows) + 0.5) * rows / config.grid_rows).astype(int)
    c = np.floor(np.arange(config.grid_cols) * cols / config.grid_cols).astype(int)
    return r, c


def encode(polar: PolarIris, config: EncoderConfig | None = None) -> IrisCode:
    """One sign bit per (filter, grid point); a bit is masked out whenever
    any pixel under its kernel support is invalid."""
    config = config or EncoderConfig()
    kernels = config.kernels()
    widest = max(k.size for k in kernels)
    if polar.cols < widest or polar.rows < config.grid_rows or polar.cols < config.grid_cols:
        raise PolarTooSmall(
            f"polar {polar.rows}x{polar.cols} too small for {config.grid_rows}x{config.grid_cols} "
            f"grid with {widest}-column kernels"
        )
    rows_idx, cols_idx = sample_positions(config, polar.rows, polar.cols)
    tex = polar.texture.as_float()[rows_idx]
    valid = polar.mask.bits[rows_idx]

    seg_id = np.empty(polar.cols, dtype=int)
    wrap = polar.is_full_circle
    for i, (a, b) in enumerate(_segments(polar)):
        seg_id[a:b] = i

    bits = np.empty((config.filter_count, config.grid_rows, config.grid_cols), dtype=bool)
    mask = np.empty_like(bits)
    for f, kernel in enumerate(kernels):
        half = kernel.size // 2
        idx = cols_idx[:, None] + np.arange(-half, half + 1)[None, :]
        if wrap:
            idx %= polar.cols
            in_segment = np.ones(idx.shape, dtype=bool)
        else:
            clipped = np.clip(idx, 0, polar.cols - 1)
            in_segment = (idx == clipped) & (seg_id[clipped] == seg_id[cols_idx][:, None])
            idx = clipped
        response = tex[:, idx] @ kernel
        bits[f] = response >= 0
        mask[f] = np.all(valid[:, idx] & in_segment[None, :, :], axis=-1)
    return IrisCode(bits, mask, config)


def _shift_order(max_rotation: int):
    yield 0
    for k in range(1, max_rotation + 1):
        yield -k
        yield k


def match(a: IrisCode, b: IrisCode, max_rotation: int = DEFAULT_MAX_ROTATION) -> MatchResult:
    """Minimum masked Hamming distance over circular shifts of `b` by
    -max_rotation..+max_rotation grid columns.

    Ties go to the smaller |shift|, then to the negative shift.
    """
    if a.config != b.config:
        raise ConfigMismatch("iris codes were produced with different encoder configs")
    if max_rotation < 0:
        raise ValueError("max_rotation must be non-negative")
    best = None
    for shift in _shift_order(max_rotation):
        bb = np.roll(b.bits, shift, axis=-1)
        bm = np.roll(b.mask, shift, axis=-1)
        both = a.mask & bm
        compared = int(np.count_nonzero(both))
        if compared == 0:
            continue
        hd = int(np.count_nonzero((a.bits ^ bb) & both)) / compared
        if best is None or hd < best.hd:
            best = MatchResult(hd, shift, compared)
    if best is None:
        raise NoOverlap("iris codes have no mutually valid bits at any shift")
    return best
