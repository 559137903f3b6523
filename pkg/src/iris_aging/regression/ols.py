"""Ordinary least squares via Householder QR with coefficient t-tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import EmptyInput, RankDeficient, Underdetermined
from .tdist import student_t_sf

RANK_TOL = 1e-10


@dataclass(frozen=True)
class TermEstimate:
    name: str
    beta: float
    se: float
    t: float
    p: float


@dataclass(frozen=True)
class FitResult:
    model: str
    n: int
    terms: tuple[TermEstimate, ...]
    r2: float
    residual_variance: float
    family: str | None = None
    residuals: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def df(self) -> int:
        return self.n - len(self.terms)

    def term(self, name: str) -> TermEstimate:
        for est in self.terms:
            if est.name == name:
                return est
        raise KeyError(name)

    @property
    def beta(self) -> np.ndarray:
        return np.array([e.beta for e in self.terms])

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "family": self.family,
            "n": self.n,
            "df": self.df,
            "r2": _json_float(self.r2),
            "residual_variance": _json_float(self.residual_variance),
            "terms": [
                {"name": e.name, "beta": _json_float(e.beta), "se": _json_float(e.se),
                 "t": _json_float(e.t), "p": _json_float(e.p)}
                for e in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        def f(v):
            return math.nan if v is None else float(v)

        terms = tuple(TermEstimate(t["name"], f(t["beta"]), f(t["se"]), f(t["t"]), f(t["p"])) for t in d["terms"])
        return cls(d["model"], int(d["n"]), terms, f(d["r2"]), f(d["residual_variance"]), d.get("family"))


def _json_float(v: float):
    # JSON has no nan/inf
    return float(v) if math.isfinite(v) else None


def householder_qr(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce X to upper-triangular R (p x p) by Householder reflections,
    applying the same reflections to y. Returns (R, Q^T y)."""
    A = np.array(X, dtype=np.float64, copy=True)
    b = np.array(y, dtype=np.float64, copy=True)
    n, p = A.shape
    for j in range(min(p, n)):
        x = A[j:, j]
        norm = math.sqrt(float(x @ x))
        if norm == 0.0:
            continue
        alpha = -norm if x[0] >= 0 else norm
        v = x.copy()
        v[0] -= alpha
        vv = float(v @ v)
        if vv == 0.0:
            continue
        A[j:, j:] -= np.outer(v, (2.0 / vv) * (v @ A[j:, j:]))
        b[j:] -= v * (2.0 * float(v @ b[j:]) / vv)
        A[j + 1 :, j] = 0.0
        A[j, j] = alpha
    return np.triu(A[:p, :p]), b


def _back_substitute(R: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    p = R.shape[0]
    out = np.zeros_like(rhs, dtype=np.float64)
    for i in range(p - 1, -1, -1):
        out[i] = (rhs[i] - R[i, i + 1 :] @ out[i + 1 :]) / R[i, i]
    return out


def fit_ols(
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str] | None = None,
    model: str = "",
    family: str | None = None,
) -> FitResult:
    """Least squares fit with standard errors, t statistics, two-sided
    p-values (df = n - p) and R^2 about the mean of y."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyInput("design matrix is empty")
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if len(names) != p:
        raise ValueError("one name per column is required")
    if n <= p:
        raise Underdetermined(f"{n} observations for {p} parameters")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design matrix and response must be finite")

    R, qty = householder_qr(X, y)
    diag = np.abs(np.diag(R))
    scale = np.max(np.abs(R))
    bad = [names[j] for j in range(p) if not diag[j] > RANK_TOL * scale]
    if bad:
        raise RankDeficient(bad)

    beta = _back_substitute(R, qty[:p])
    resid = y - X @ beta
    ss_res = float(resid @ resid)
    dof = n - p
    s2 = ss_res / dof
    r_inv = _back_substitute(R, np.eye(p))
    se = np.sqrt(s2 * np.sum(r_inv**2, axis=1))

    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else math.nan

    terms = []
    for j in range(p):
        b, s = float(beta[j]), float(se[j])
        if s > 0:
            t = b / s
        else:
            t = math.copysign(math.inf, b) if b != 0 else 0.0
        terms.append(TermEstimate(names[j], b, s, t, student_t_sf(t, dof)))
    return FitResult(model, n, tuple(terms), r2, s2, family, resid)
