"""Seeded synthetic eyes, manifests and genuine scores with known effects.

Every random draw comes from a Philox (counter-based) stream keyed by what
it is for, e.g. ``(IMAGE, class, k)``, so outputs do not depend on
generation order. Normal deviates use the Box-Muller cosine branch on
Philox uniforms.

Each iris class owns two independent textures, ``base`` and ``aged``, and a
patchy "change day" field uniform on [0, 1 / (2 * rate)]. A capture taken
``d`` days after the start date shows ``aged`` wherever the change day is
<= d and ``base`` elsewhere, plus fresh per-capture noise. Two captures
``dt`` days apart therefore differ on a fraction ``2 * rate * dt`` of the
iris, and since unrelated texture yields HD ~0.5, the expected genuine
Hamming distance grows roughly linearly, by ``rate * (1 - 2 * h0)`` per day
(``h0`` = same-day genuine HD).
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .dataset import ComparisonRecord, ManifestEntry, genuine_pairs, write_manifest, write_scores
from .errors import MissingCovariate
from .imaging import BitMask, GrayImage, SegmentationCircles, write_image, write_mask
from .quality import GeometryVector, QualityVector

_CLASS, _IMAGE, _PAIR = 0, 1, 2

PUPIL_RADIUS_RANGE = (18.0, 40.0)
IRIS_RATIO_RANGE = (2.2, 3.2)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 2013
    n_classes: int = 58
    images_per_class: int = 10
    date_range: tuple[str, str] = ("2003-01-01", "2011-12-31")
    base_score: float = 0.25
    time_slope: float = 0.000018
    covariate_effects: Mapping[str, float] = field(default_factory=dict)
    noise_sigma: float = 0.01
    # image rendering
    texture_aging: float = 0.000018
    capture_noise: float = 0.2
    polar_shape: tuple[int, int] = (64, 512)
    max_rotation_deg: float = 3.0
    occlusion: bool = True

    def __post_init__(self):
        object.__setattr__(self, "date_range", tuple(str(d) for d in self.date_range))
        object.__setattr__(self, "polar_shape", tuple(int(v) for v in self.polar_shape))
        object.__setattr__(self, "covariate_effects", dict(self.covariate_effects))
        if self.noise_sigma < 0 or self.capture_noise < 0:
            raise ValueError("noise levels must be non-negative")
        if self.n_classes < 1 or self.images_per_class < 1:
            raise ValueError("class and image counts must be at least 1")
        if self.start > self.end:
            raise ValueError("date range is empty")

    @property
    def start(self) -> dt.date:
        return dt.date.fromisoformat(self.date_range[0])

    @property
    def end(self) -> dt.date:
        return dt.date.fromisoformat(self.date_range[1])

    @property
    def image_size(self) -> int:
        return 2 * math.ceil(IRIS_RATIO_RANGE[1] * PUPIL_RADIUS_RANGE[1]) + 32

    def to_json(self) -> str:
        d = asdict(self)
        d["date_range"] = list(self.date_range)
        d["polar_shape"] = list(self.polar_shape)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        return cls(**json.loads(text))


def _stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def _normal(rng: np.random.Generator, size) -> np.ndarray:
    u1 = 1.0 - rng.random(size)
    u2 = rng.random(size)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _band_limited(rng, shape) -> np.ndarray:
    field_ = ndimage.gaussian_filter(_normal(rng, shape), sigma=1.5, mode=("nearest", "wrap"))
    return (field_ - field_.mean()) / field_.std()


def _change_days(rng, shape, rate: float) -> np.ndarray:
    """Smooth patches with a uniform marginal on [0, 1 / (2 * rate)) days."""
    if rate <= 0:
        return np.full(shape, np.inf)
    smooth = ndimage.gaussian_filter(_normal(rng, shape), sigma=4.0, mode=("nearest", "wrap"))
    ranks = np.argsort(np.argsort(smooth, axis=None, kind="stable"), kind="stable").reshape(shape)
    return (ranks + 0.5) / ranks.size / (2.0 * rate)


def _sample_wrapped(tex: np.ndarray, row: np.ndarray, col: np.ndarray) -> np.ndarray:
    """Bilinear lookup, clamped along rows and periodic along columns."""
    rows, cols = tex.shape
    row = np.clip(row, 0, rows - 1)
    r0 = np.clip(np.floor(row).astype(int), 0, rows - 2)
    fr = row - r0
    col = np.mod(col, cols)
    c0 = np.floor(col).astype(int) % cols
    c1 = (c0 + 1) % cols
    fc = col - np.floor(col)
    top = tex[r0, c0] * (1 - fc) + tex[r0, c1] * fc
    bot = tex[r0 + 1, c0] * (1 - fc) + tex[r0 + 1, c1] * fc
    return top * (1 - fr) + bot * fr


def render_eye(
    texture: np.ndarray,
    seg: SegmentationCircles,
    size: int,
    rotation_deg: float = 0.0,
    lid_y: float | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[GrayImage, BitMask]:
    """Paint a polar texture (values in [0, 255]) into a size x size eye.

    Inverts the rubber-sheet mapping used by unwrap_to_polar so that
    unwrapping with the same circles returns (approximately) the texture,
    rotated by `rotation_deg`. Rows above `lid_y` are covered by an eyelid
    and flagged invalid in the returned mask.
    """
    rows, cols = texture.shape
    (px, py), (ix, iy) = seg.pupil_center, seg.iris_center
    pr, ir = seg.pupil_radius, seg.iris_radius
    img = np.full((size, size), 190.0)
    # every point with s <= 1 lies inside the iris disk, so only its
    # bounding box needs the inverse mapping
    y0, y1 = max(0, math.floor(iy - ir) - 1), min(size, math.ceil(iy + ir) + 2)
    x0, x1 = max(0, math.floor(ix - ir) - 1), min(size, math.ceil(ix + ir) + 2)
    yy, xx = np.mgrid[y0:y1, x0:x1].astype(np.float64)
    s = np.zeros_like(xx)
    for _ in range(8):
        cx = px + s * (ix - px)
        cy = py + s * (iy - py)
        s = (np.hypot(xx - cx, yy - cy) - pr) / (ir - pr)
    cx = px + s * (ix - px)
    cy = py + s * (iy - py)
    theta = np.degrees(np.arctan2(-(yy - cy), xx - cx))
    iris = _sample_wrapped(texture, s * rows - 0.5, (theta - rotation_deg) * cols / 360.0)
    img[y0:y1, x0:x1] = np.where(s < 0, 25.0, np.where(s > 1, 190.0, iris))
    valid = np.ones((size, size), dtype=bool)
    if lid_y is not None:
        lid = np.arange(size, dtype=np.float64)[:, None] < lid_y
        lid = np.broadcast_to(lid, (size, size))
        img = np.where(lid, 150.0, img)
        valid &= ~lid
    if rng is not None:
        img = img + 2.0 * _normal(rng, img.shape)
    return GrayImage(np.clip(np.rint(img), 0, 255).astype(np.uint8)), BitMask(valid)


def _image_id(cls_idx: int, k: int) -> tuple[str, str, str]:
    subject = f"S{cls_idx // 2:03d}"
    eye = "L" if cls_idx % 2 == 0 else "R"
    return f"{subject}{eye}_{k:02d}", subject, eye


def generate_manifest(
    cfg: SynthConfig, root=".", render: bool = True
) -> tuple[list[ManifestEntry], dict[str, tuple[GrayImage, BitMask | None]]]:
    """Entries plus rendered (image, mask) per image id. Paths point into
    ``root/images`` and ``root/masks``; nothing is written here.

    With ``render=False`` only the entries are produced (same dates and
    circles) and the image dict is empty.
    """
    root = Path(root)
    rows, cols = cfg.polar_shape
    span = (cfg.end - cfg.start).days
    size = cfg.image_size
    entries, images = [], {}
    for c in range(cfg.n_classes):
        if render:
            crng = _stream(cfg.seed, _CLASS, c)
            base = _band_limited(crng, (rows, cols))
            aged = _band_limited(crng, (rows, cols))
            change_day = _change_days(crng, (rows, cols), cfg.texture_aging)
        for k in range(cfg.images_per_class):
            rng = _stream(cfg.seed, _IMAGE, c, k)
            image_id, subject, eye = _image_id(c, k)
            offset = int(rng.integers(0, span + 1))
            pr = rng.uniform(*PUPIL_RADIUS_RANGE)
            ir = pr * rng.uniform(*IRIS_RATIO_RANGE)
            ix = size / 2 + rng.uniform(-4, 4)
            iy = size / 2 + rng.uniform(-4, 4)
            shift = min(3.0, ir - pr - 1.0)
            ang = rng.uniform(0, 2 * np.pi)
            rad = shift * math.sqrt(rng.random())
            seg = SegmentationCircles((ix + rad * math.cos(ang), iy + rad * math.sin(ang)), pr, (ix, iy), ir)
            rotation = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg)
            lid_frac = rng.uniform(0.55, 1.2)
            lid_y = iy - ir * lid_frac if cfg.occlusion and lid_frac < 1.0 else None

            mask_path = root / "masks" / f"{image_id}_mask.pgm" if lid_y is not None else None
            entries.append(
                ManifestEntry(
                    image_id, subject, eye, cfg.start + dt.timedelta(days=offset),
                    root / "images" / f"{image_id}.pgm", mask_path, seg,
                )
            )
            if not render:
                continue
            tex = np.where(change_day <= offset, aged, base) + cfg.capture_noise * _band_limited(rng, (rows, cols))
            tex = np.clip(128.0 + 32.0 * tex, 0, 255)
            img, mask = render_eye(tex, seg, size, rotation, lid_y, rng)
            images[image_id] = (img, mask if lid_y is not None else None)
    return entries, images


def _pair_stream(seed: int, id1: str, id2: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{id1}\x00{id2}".encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return _stream(seed, _PAIR, *words)


def generate_scores(
    pairs: Sequence[tuple[ManifestEntry, ManifestEntry]],
    cfg: SynthConfig,
    covariates: Mapping[str, QualityVector] | None = None,
) -> list[tuple[str, str, float]]:
    """score = base + slope * dt_days + sum(effect * term value) + N(0, sigma).

    Effect keys are model terms (``|dPR|``, ``OCprod``, ``LC1`` ...).
    Geometry comes from the manifest circles; quality terms need
    `covariates` (image_id -> QualityVector).
    """
    from .regression.models import parse_term

    effects = [(parse_term(k), float(v)) for k, v in sorted(cfg.covariate_effects.items())]
    out = []
    for a, b in pairs:
        dt_days = abs((b.capture_date - a.capture_date).days)
        value = cfg.base_score + cfg.time_slope * dt_days
        if effects:
            q1 = q2 = QualityVector(None, None, None, None)
            if covariates is not None:
                try:
                    q1, q2 = covariates[a.image_id], covariates[b.image_id]
                except KeyError as exc:
                    raise MissingCovariate(f"no quality covariates for image {exc.args[0]!r}") from None
            rec = ComparisonRecord(
                a.image_id, b.image_id, dt_days, 0.0, q1, q2,
                GeometryVector.from_circles(a.seg), GeometryVector.from_circles(b.seg),
            )
            value += sum(coef * term.value(rec) for term, coef in effects)
        if cfg.noise_sigma > 0:
            value += cfg.noise_sigma * float(_normal(_pair_stream(cfg.seed, a.image_id, b.image_id), 1)[0])
        out.append((a.image_id, b.image_id, value))
    return out


def write_synthetic(out_dir, cfg: SynthConfig) -> list[ManifestEntry]:
    """Write manifest.csv, images/, masks/, scores.csv and synth_config.json."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    entries, images = generate_manifest(cfg, out)
    for e in entries:
        img, mask = images[e.image_id]
        write_image(e.image_path, img)
        if mask is not None:
            write_mask(e.mask_path, mask)
    write_manifest(out / "manifest.csv", entries)
    write_scores(out / "scores.csv", generate_scores(genuine_pairs(entries), cfg))
    (out / "synth_config.json").write_text(cfg.to_json())
    return entries
