"""Regression term language, model specs and design-matrix assembly.

Text form of a model, one per line::

    D_final: D [t, |dSH|, |dPR|, |dIR|]

The intercept is implicit. Tokens: ``t`` (time lapse in days), ``LC1``/``LC2``
(raw per-image values), ``|dLC|`` (absolute difference), ``OCprod``
(absolute product, OC only).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..dataset import ComparisonRecord
from ..errors import EmptyInput, MissingCovariate, ModelSpecError
from ..quality import FAMILIES
from .ols import FitResult, fit_ols

QUALITY = ("OC", "LC", "IL", "SH")
GEOMETRY = ("PR", "IR")
COVARIATES = QUALITY + GEOMETRY

INTERCEPT, TIME, RAW, ABSDIFF, ABSPROD = "intercept", "time", "raw", "absdiff", "absprod"


@dataclass(frozen=True)
class Term:
    kind: str
    covariate: str | None = None
    which: int | None = None

    @property
    def name(self) -> str:
        if self.kind == INTERCEPT:
            return "1"
        if self.kind == TIME:
            return "t"
        if self.kind == RAW:
            return f"{self.covariate}{self.which}"
        if self.kind == ABSDIFF:
            return f"|d{self.covariate}|"
        return f"{self.covariate}prod"

    @property
    def label(self) -> str:
        """Column heading in the p-value report."""
        if self.kind == ABSDIFF:
            c = self.covariate
            return f"|{c}1-{c}2|" if c in GEOMETRY else f"|Δ{c}|"
        if self.kind == ABSPROD:
            return f"|{self.covariate}1*{self.covariate}2|"
        return self.name

    def value(self, rec: ComparisonRecord) -> float:
        if self.kind == INTERCEPT:
            return 1.0
        if self.kind == TIME:
            return float(rec.dt_days)
        if self.kind == RAW:
            return _covariate(rec, self.covariate, self.which)
        a = _covariate(rec, self.covariate, 1)
        b = _covariate(rec, self.covariate, 2)
        return abs(a - b) if self.kind == ABSDIFF else abs(a * b)

    def __str__(self):
        return self.name


def _covariate(rec: ComparisonRecord, cov: str, which: int) -> float:
    if cov in GEOMETRY:
        g = rec.g1 if which == 1 else rec.g2
        value = None if g is None else getattr(g, cov)
    else:
        value = getattr(rec.q1 if which == 1 else rec.q2, cov)
    if value is None:
        raise MissingCovariate(f"record {rec.id1},{rec.id2} has no {cov}{which}", (rec.id1, rec.id2))
    return float(value)


_RAW_RE = re.compile(r"^(OC|LC|IL|SH|PR|IR)([12])$")
_DIFF_RE = re.compile(r"^\|d(OC|LC|IL|SH|PR|IR)\|$")
_PROD_RE = re.compile(r"^(OC|LC|IL|SH|PR|IR)prod$")


def parse_term(token: str) -> Term:
    token = token.strip()
    if token == "1":
        return Term(INTERCEPT)
    if token == "t":
        return Term(TIME)
    if m := _RAW_RE.match(token):
        return Term(RAW, m.group(1), int(m.group(2)))
    if m := _DIFF_RE.match(token):
        return Term(ABSDIFF, m.group(1))
    if m := _PROD_RE.match(token):
        return Term(ABSPROD, m.group(1))
    raise ModelSpecError(f"unknown term {token!r}")


# canonical left-to-right column order for reports
CANONICAL_TERMS = tuple(
    parse_term(tok)
    for tok in (
        "t",
        "OC1", "OC2", "OCprod",
        "LC1", "LC2", "|dLC|",
        "IL1", "IL2", "|dIL|",
        "SH1", "SH2", "|dSH|",
        "PR1", "PR2", "|dPR|",
        "IR1", "IR2", "|dIR|",
    )
)
REPORT_TERMS = tuple(parse_term(tok) for tok in ("t", "OCprod", "|dLC|", "|dIL|", "|dSH|", "|dPR|", "|dIR|"))


@dataclass(frozen=True)
class ModelSpec:
    name: str
    family: str
    terms: tuple[Term, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        _validate(self)

    @classmethod
    def of(cls, name: str, family: str, tokens: Sequence[str]) -> "ModelSpec":
        """Build from DSL tokens; the intercept is prepended."""
        return cls(name, family, (Term(INTERCEPT),) + tuple(parse_term(t) for t in tokens))

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.terms]

    def to_text(self) -> str:
        body = ", ".join(t.name for t in self.terms[1:])
        return f"{self.name}: {self.family} [{body}]"


def _validate(spec: ModelSpec) -> None:
    err = f"model {spec.name!r}: "
    if spec.family not in FAMILIES:
        raise ModelSpecError(err + f"unknown family {spec.family!r}")
    terms = spec.terms
    if not terms or terms[0].kind != INTERCEPT:
        raise ModelSpecError(err + "intercept must be the first term")
    if any(t.kind == INTERCEPT for t in terms[1:]):
        raise ModelSpecError(err + "intercept appears more than once")
    times = [i for i, t in enumerate(terms) if t.kind == TIME]
    if len(times) > 1 or (times and times[0] != 1):
        raise ModelSpecError(err + "time must appear at most once, right after the intercept")
    if len(set(terms)) != len(terms):
        raise ModelSpecError(err + "duplicate term")
    for t in terms:
        if t.kind == ABSPROD and t.covariate != "OC":
            raise ModelSpecError(err + f"absolute product is only defined for OC, not {t.covariate}")
        if t.kind == ABSDIFF and t.covariate == "OC":
            raise ModelSpecError(err + "OC pairs are combined by absolute product, not difference")
        if t.kind == RAW and Term(RAW, t.covariate, 3 - t.which) not in terms:
            raise ModelSpecError(err + f"raw term {t.name} must come with its partner")
        if t.covariate == "OC" and spec.family != "D":
            raise ModelSpecError(err + f"family {spec.family} has no OC covariate")
        if t.covariate in GEOMETRY and spec.family == "V":
            raise ModelSpecError(err + "family V has no geometry covariates")


_LINE_RE = re.compile(r"^\s*([^:\s]+)\s*:\s*([A-Za-z])\s*\[(.*)\]\s*$")


def parse_model(line: str) -> ModelSpec:
    m = _LINE_RE.match(line)
    if not m:
        raise ModelSpecError(f"cannot parse model definition {line!r}")
    name, family, body = m.groups()
    tokens = [tok for tok in (s.strip() for s in body.split(",")) if tok]
    return ModelSpec.of(name, family, tokens)


def parse_models(text: str) -> list[ModelSpec]:
    specs = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            specs.append(parse_model(line))
    names = [s.name for s in specs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ModelSpecError(f"duplicate model name(s): {', '.join(dupes)}")
    return specs


def _record_key(rec: ComparisonRecord):
    return (rec.id1, rec.id2)


def design_matrix(records: Iterable[ComparisonRecord], spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    """X (n x p, columns in term order) and y (scores).

    Rows are put in canonical (id1, id2) order so a fit does not depend on
    the order records arrive in.
    """
    recs = sorted(records, key=_record_key)
    if not recs:
        raise EmptyInput("no records to build a design matrix from")
    X = np.array([[term.value(r) for term in spec.terms] for r in recs], dtype=np.float64)
    y = np.array([r.score for r in recs], dtype=np.float64)
    return X, y


def fit_model(records: Iterable[ComparisonRecord], spec: ModelSpec) -> FitResult:
    X, y = design_matrix(records, spec)
    return fit_ols(X, y, names=spec.names, model=spec.name, family=spec.family)
