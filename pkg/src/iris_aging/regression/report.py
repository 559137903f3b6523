"""P-value tables summarising fitted models (Markdown and JSON)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

from .models import CANONICAL_TERMS, REPORT_TERMS
from .ols import FitResult

DAYS_PER_YEAR = 365.25
ABSENT = "--"


def format_p(p: float) -> str:
    return "nan" if math.isnan(p) else f"{p:.4f}"


def _time_slope(result: FitResult) -> float | None:
    try:
        return result.term("t").beta
    except KeyError:
        return None


@dataclass(frozen=True)
class Report:
    results: tuple[FitResult, ...]
    alpha: float = 0.05

    def columns(self) -> list[tuple[str, str]]:
        """(term name, heading) pairs: the standard terms always, other terms
        when some model uses them. The intercept is not reported."""
        present = []
        for r in self.results:
            for e in r.terms:
                if e.name not in present and e.name != "1":
                    present.append(e.name)
        table1 = {t.name for t in REPORT_TERMS}
        cols = [(t.name, t.label) for t in CANONICAL_TERMS if t.name in table1 or t.name in present]
        known = {name for name, _ in cols}
        return cols + [(name, name) for name in present if name not in known]

    def rows(self) -> list[list[str]]:
        cols = self.columns()
        out = []
        for r in self.results:
            by_name = {e.name: e for e in r.terms}
            cells = [r.model]
            for name, _ in cols:
                est = by_name.get(name)
                if est is None:
                    cells.append(ABSENT)
                else:
                    mark = "*" if est.p < self.alpha else ""
                    cells.append(format_p(est.p) + mark)
            cells.append("nan" if math.isnan(r.r2) else f"{r.r2:.3f}")
            cells.append(str(r.n))
            slope = _time_slope(r)
            if slope is None:
                cells += [ABSENT, ABSENT]
            else:
                cells += [f"{slope:.3g}", f"{slope * DAYS_PER_YEAR:.3f}"]
            out.append(cells)
        return out

    def to_markdown(self) -> str:
        def esc(s):
            return s.replace("|", "\\|")

        header = ["Model"] + [label for _, label in self.columns()] + ["R²", "n", "t slope / day", "t slope / year"]
        lines = [
            "| " + " | ".join(esc(h) for h in header) + " |",
            "|" + "|".join("---" for _ in header) + "|",
        ]
        for cells in self.rows():
            lines.append("| " + " | ".join(esc(c) for c in cells) + " |")
        lines.append("")
        lines.append(f"p-values per term; `{ABSENT}` = term not in model; `*` = p < {self.alpha:g}.")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        models = []
        for r in self.results:
            d = r.to_dict()
            for term in d["terms"]:
                p = term["p"]
                term["significant"] = p is not None and p < self.alpha
            slope = _time_slope(r)
            d["time_slope_per_day"] = slope
            d["time_slope_per_year"] = None if slope is None else slope * DAYS_PER_YEAR
            models.append(d)
        return {"alpha": self.alpha, "models": models}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        d = json.loads(text)
        return cls(tuple(FitResult.from_dict(m) for m in d["models"]), float(d["alpha"]))


def fit_report(results: Sequence[FitResult], alpha: float = 0.05) -> Report:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return Report(tuple(results), alpha)
