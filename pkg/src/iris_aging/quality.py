"""Per-image quality (OC, LC, IL, SH) and geometry (PR, IR) covariates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateMask, MissingPolar, ParseError
from .imaging import (
    DEFAULT_LOG_SIGMA,
    BitMask,
    GrayImage,
    PolarIris,
    SegmentationCircles,
    log_filter,
    median_filter_10x10,
)

FAMILIES = ("D", "B", "V")


@dataclass(frozen=True)
class QualityVector:
    """OC is None for families that work without a polar occlusion mask."""

    OC: float | None
    LC: float
    IL: float
    SH: float


@dataclass(frozen=True)
class GeometryVector:
    PR: float
    IR: float

    @classmethod
    def from_circles(cls, seg: SegmentationCircles) -> "GeometryVector":
        return cls(seg.pupil_radius, seg.iris_radius)


def _valid_count(mask: BitMask) -> int:
    n = mask.count
    if n == 0:
        raise DegenerateMask("mask has no valid pixel")
    return n


def _check_shapes(img: GrayImage, mask: BitMask) -> None:
    if img.shape != mask.shape:
        raise ValueError(f"image {img.shape} and mask {mask.shape} differ in size")


def compute_occlusion(polar: PolarIris) -> float:
    total = polar.rows * polar.cols
    return (total - polar.mask.count) / total


def compute_local_contrast(img: GrayImage, mask: BitMask) -> float:
    """RMS deviation of valid pixels from the 10x10 median image.

    The median image is built from every pixel; only valid ones are summed.
    """
    _check_shapes(img, mask)
    n = _valid_count(mask)
    dev = img.as_float() - median_filter_10x10(img).as_float()
    return math.sqrt(float(np.sum(dev[mask.bits] ** 2)) / n)


def compute_illumination(img: GrayImage, mask: BitMask) -> float:
    _check_shapes(img, mask)
    n = _valid_count(mask)
    return float(np.sum(img.as_float()[mask.bits])) / n


def compute_sharpness(img: GrayImage, mask: BitMask, sigma: float = DEFAULT_LOG_SIGMA) -> float:
    """Plain (signed) mean of the LoG response over valid pixels."""
    _check_shapes(img, mask)
    n = _valid_count(mask)
    return float(np.sum(log_filter(img, sigma)[mask.bits])) / n


def compute_sharpness_abs(img: GrayImage, mask: BitMask, sigma: float = DEFAULT_LOG_SIGMA) -> float:
    """Mean |LoG| over valid pixels; orders images by focus, unlike the
    signed mean which hovers near zero on most textures."""
    _check_shapes(img, mask)
    n = _valid_count(mask)
    return float(np.sum(np.abs(log_filter(img, sigma))[mask.bits])) / n


def quality_for_matcher(
    img: GrayImage,
    polar: PolarIris | None,
    matcher_family: str,
    sigma: float = DEFAULT_LOG_SIGMA,
) -> QualityVector:
    """Quality covariates in the pixel domain the given matcher family sees.

    Family D is measured on the polar texture under its occlusion mask and
    carries OC; families B and V are measured on the whole Cartesian image
    and have no OC.
    """
    if matcher_family not in FAMILIES:
        raise ValueError(f"unknown matcher family {matcher_family!r}")
    if matcher_family == "D":
        if polar is None:
            raise MissingPolar("family D quality needs the polar iris")
        tex, mask = polar.texture, polar.mask
        return QualityVector(
            OC=compute_occlusion(polar),
            LC=compute_local_contrast(tex, mask),
            IL=compute_illumination(tex, mask),
            SH=compute_sharpness(tex, mask, sigma),
        )
    full = BitMask.full(img.height, img.width)
    return QualityVector(
        OC=None,
        LC=compute_local_contrast(img, full),
        IL=compute_illumination(img, full),
        SH=compute_sharpness(img, full, sigma),
    )


# ---------------------------------------------------------------------------
# covariate CSV

COVARIATE_HEADER = ["image_id", "family", "OC", "LC", "IL", "SH", "PR", "IR"]


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def write_covariates(path, rows: Iterable[tuple[str, str, QualityVector, GeometryVector]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COVARIATE_HEADER)
        for image_id, family, q, g in rows:
            writer.writerow(
                [image_id, family, _fmt(q.OC), _fmt(q.LC), _fmt(q.IL), _fmt(q.SH), _fmt(g.PR), _fmt(g.IR)]
            )


def read_covariates(path) -> dict[str, tuple[str, QualityVector, GeometryVector]]:
    """Returns image_id -> (family, quality, geometry)."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != COVARIATE_HEADER:
            raise ParseError(f"expected header {','.join(COVARIATE_HEADER)}", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(COVARIATE_HEADER):
                raise ParseError(f"expected {len(COVARIATE_HEADER)} fields, got {len(row)}", lineno, path)
            try:
                image_id, family = row[0], row[1]
                oc = float(row[2]) if row[2] else None
                q = QualityVector(oc, float(row[3]), float(row[4]), float(row[5]))
                g = GeometryVector(float(row[6]), float(row[7]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno, path) from exc
            if image_id in out:
                raise ParseError(f"duplicate image_id {image_id!r}", lineno, path)
            out[image_id] = (family, q, g)
    return out
