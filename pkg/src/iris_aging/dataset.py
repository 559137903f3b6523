"""Manifest ingestion, genuine-pair enumeration and comparison records."""

from __future__ import annotations

import csv
import datetime as dt
import os
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DuplicateId, InvalidCircle, InvalidGeometry, MissingCovariate, MissingScore, ParseError
from .imaging import SegmentationCircles
from .quality import FAMILIES, GeometryVector, QualityVector

MANIFEST_HEADER = [
    "image_id", "subject_id", "eye", "capture_date", "image_path", "mask_path",
    "pupil_x", "pupil_y", "pupil_r", "iris_x", "iris_y", "iris_r",
]
SCORE_HEADER = ["pair_id_1", "pair_id_2", "score"]
RECORD_HEADER = [
    "id1", "id2", "dt_days", "score",
    "OC1", "OC2", "LC1", "LC2", "IL1", "IL2", "SH1", "SH2", "PR1", "PR2", "IR1", "IR2",
]


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    subject_id: str
    eye: str
    capture_date: dt.date
    image_path: Path
    mask_path: Path | None
    seg: SegmentationCircles

    @property
    def iris_class(self) -> tuple[str, str]:
        return (self.subject_id, self.eye)


@dataclass(frozen=True)
class ComparisonRecord:
    """One genuine comparison, oriented (earlier, later)."""

    id1: str
    id2: str
    dt_days: int
    score: float
    q1: QualityVector
    q2: QualityVector
    g1: GeometryVector | None = None
    g2: GeometryVector | None = None


def days_between(a: dt.date, b: dt.date) -> int:
    return abs((b - a).days)


# ---------------------------------------------------------------------------
# manifest


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise ParseError(f"header must be exactly {','.join(MANIFEST_HEADER)}", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ParseError(f"expected {len(MANIFEST_HEADER)} fields, got {len(row)}", lineno, path)
            image_id, subject_id, eye, date_s, image_s, mask_s = row[:6]
            if not image_id or not subject_id:
                raise ParseError("image_id and subject_id must be non-empty", lineno, path)
            if eye not in ("L", "R"):
                raise ParseError(f"eye must be L or R, got {eye!r}", lineno, path)
            try:
                date = dt.date.fromisoformat(date_s)
            except ValueError:
                raise ParseError(f"capture_date {date_s!r} is not an ISO 8601 date", lineno, path) from None
            try:
                px, py, pr, ix, iy, ir = (float(v) for v in row[6:])
            except ValueError as exc:
                raise ParseError(f"bad circle field: {exc}", lineno, path) from None
            try:
                seg = SegmentationCircles((px, py), pr, (ix, iy), ir)
            except InvalidGeometry as exc:
                raise InvalidCircle(str(exc), line=lineno) from None
            if image_id in seen:
                raise DuplicateId(f"image_id {image_id!r} already defined on line {seen[image_id]}", lineno, path)
            seen[image_id] = lineno
            entries.append(
                ManifestEntry(
                    image_id, subject_id, eye, date,
                    _resolve(base, image_s),
                    _resolve(base, mask_s) if mask_s else None,
                    seg,
                )
            )
    return entries


def write_manifest(path, entries: Iterable[ManifestEntry]) -> None:
    """Write entries with paths made relative to the manifest's directory."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        return "" if p is None else Path(os.path.relpath(Path(p).resolve(), base)).as_posix()

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for e in entries:
            s = e.seg
            writer.writerow(
                [
                    e.image_id, e.subject_id, e.eye, e.capture_date.isoformat(),
                    rel(e.image_path), rel(e.mask_path),
                    repr(s.pupil_center[0]), repr(s.pupil_center[1]), repr(s.pupil_radius),
                    repr(s.iris_center[0]), repr(s.iris_center[1]), repr(s.iris_radius),
                ]
            )


# ---------------------------------------------------------------------------
# pairs


def _capture_key(e: ManifestEntry):
    return (e.capture_date, e.image_id)


def genuine_pairs(entries: Sequence[ManifestEntry]) -> list[tuple[ManifestEntry, ManifestEntry]]:
    """Every within-class pair, earlier capture first (same-day ties broken
    by image_id). Output order is canonical, independent of input order."""
    classes: dict[tuple[str, str], list[ManifestEntry]] = {}
    for e in entries:
        classes.setdefault(e.iris_class, []).append(e)
    pairs = []
    for key in sorted(classes):
        members = sorted(classes[key], key=_capture_key)
        pairs.extend(combinations(members, 2))
    return pairs


# ---------------------------------------------------------------------------
# scores


def read_scores(path) -> dict[tuple[str, str], float]:
    out: dict[tuple[str, str], float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SCORE_HEADER:
            raise ParseError(f"header must be exactly {','.join(SCORE_HEADER)}", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", lineno, path)
            try:
                score = float(row[2])
            except ValueError:
                raise ParseError(f"score {row[2]!r} is not a number", lineno, path) from None
            key = (row[0], row[1])
            if key in out or key[::-1] in out:
                raise ParseError(f"duplicate score for pair {row[0]},{row[1]}", lineno, path)
            out[key] = score
    return out


def write_scores(path, scores: Iterable[tuple[str, str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORE_HEADER)
        for id1, id2, score in scores:
            writer.writerow([id1, id2, repr(float(score))])


def _lookup_score(scores: Mapping[tuple[str, str], float], id1: str, id2: str) -> float:
    if (id1, id2) in scores:
        return scores[(id1, id2)]
    if (id2, id1) in scores:
        return scores[(id2, id1)]
    raise MissingScore((id1, id2))


# ---------------------------------------------------------------------------
# records


def build_records(
    pairs: Sequence[tuple[ManifestEntry, ManifestEntry]],
    scores: Mapping[tuple[str, str], float],
    covariates: Mapping[str, tuple[QualityVector, GeometryVector]],
    family: str,
) -> list[ComparisonRecord]:
    """Attach scores and family-appropriate covariates to each pair.

    Family D needs OC on both images; B and V drop OC; V also drops geometry.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown matcher family {family!r}")
    records = []
    for a, b in pairs:
        ids = (a.image_id, b.image_id)
        score = _lookup_score(scores, *ids)
        cov = []
        for image_id in ids:
            if image_id not in covariates:
                raise MissingCovariate(f"no covariates for image {image_id!r} in pair {ids[0]},{ids[1]}", ids)
            cov.append(covariates[image_id])
        (q1, g1), (q2, g2) = cov
        if family == "D":
            if q1.OC is None or q2.OC is None:
                raise MissingCovariate(f"family D needs OC for pair {ids[0]},{ids[1]}", ids)
        else:
            q1 = QualityVector(None, q1.LC, q1.IL, q1.SH)
            q2 = QualityVector(None, q2.LC, q2.IL, q2.SH)
        if family == "V":
            g1 = g2 = None
        records.append(
            ComparisonRecord(ids[0], ids[1], days_between(a.capture_date, b.capture_date), score, q1, q2, g1, g2)
        )
    return records


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_records(path, records: Iterable[ComparisonRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_HEADER)
        for r in records:
            g1, g2 = r.g1, r.g2
            writer.writerow(
                [
                    r.id1, r.id2, str(r.dt_days), _fmt(r.score),
                    _fmt(r.q1.OC), _fmt(r.q2.OC), _fmt(r.q1.LC), _fmt(r.q2.LC),
                    _fmt(r.q1.IL), _fmt(r.q2.IL), _fmt(r.q1.SH), _fmt(r.q2.SH),
                    _fmt(g1 and g1.PR), _fmt(g2 and g2.PR), _fmt(g1 and g1.IR), _fmt(g2 and g2.IR),
                ]
            )


def read_records(path, family: str | None = None) -> list[ComparisonRecord]:
    """Parse a records CSV. Passing a family drops the covariates that
    family never uses (OC for B/V, geometry for V)."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RECORD_HEADER:
            raise ParseError(f"header must be exactly {','.join(RECORD_HEADER)}", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RECORD_HEADER):
                raise ParseError(f"expected {len(RECORD_HEADER)} fields, got {len(row)}", lineno, path)
            try:
                vals = [float(v) if v else None for v in row[4:]]
                dt_days = int(row[2])
                score = float(row[3])
            except ValueError as exc:
                raise ParseError(str(exc), lineno, path) from None
            if dt_days < 0:
                raise ParseError("dt_days must be non-negative", lineno, path)
            oc1, oc2, lc1, lc2, il1, il2, sh1, sh2, pr1, pr2, ir1, ir2 = vals
            if None in (lc1, lc2, il1, il2, sh1, sh2):
                raise ParseError("LC, IL and SH fields are required", lineno, path)
            if family in ("B", "V"):
                oc1 = oc2 = None
            g1 = g2 = None
            if family != "V" and None not in (pr1, pr2, ir1, ir2):
                g1, g2 = GeometryVector(pr1, ir1), GeometryVector(pr2, ir2)
            records.append(
                ComparisonRecord(
                    row[0], row[1], dt_days, score,
                    QualityVector(oc1, lc1, il1, sh1), QualityVector(oc2, lc2, il2, sh2), g1, g2,
                )
            )
    return records
