import json
import math

import numpy as np
import pytest

from iris_aging.regression import Report, fit_ols, fit_report
from iris_aging.regression.report import format_p


def fit(names, seed=0, model="m", n=40, slope=1.8e-5):
    rng = np.random.default_rng(seed)
    cols = [np.ones(n), rng.uniform(0, 3000, n)] + [rng.normal(size=n) for _ in names[2:]]
    X = np.column_stack(cols)
    y = 0.2 + slope * X[:, 1] + rng.normal(0, 0.005, n)
    return fit_ols(X, y, names, model=model, family="D")


def test_d6_row_has_dashes_for_quality():
    rep = fit_report([fit(["1", "t", "|dPR|", "|dIR|"], model="D6")])
    headings = [label for _, label in rep.columns()]
    row = dict(zip(headings, rep.rows()[0][1:]))
    for h in ("|OC1*OC2|", "|ΔLC|", "|ΔIL|", "|ΔSH|"):
        assert row[h] == "--"
    assert row["|PR1-PR2|"] != "--"
    assert row["t"].endswith("*")


def test_p_formatting():
    assert format_p(3e-7) == "0.0000"
    assert format_p(0.00004) == "0.0000"
    assert format_p(0.12345) == "0.1235"
    assert format_p(1.0) == "1.0000"


def test_significance_marker_follows_alpha():
    f = fit(["1", "t", "x"], seed=3)
    p = f.term("x").p
    strict = fit_report([f], alpha=min(p / 2, 0.5))
    loose = fit_report([f], alpha=min(p * 2, 0.99))
    idx = [n for n, _ in strict.columns()].index("x") + 1
    assert not strict.rows()[0][idx].endswith("*")
    assert loose.rows()[0][idx].endswith("*")


def test_empty_report():
    rep = fit_report([])
    md = rep.to_markdown()
    assert md.startswith("| Model |")
    assert json.loads(rep.to_json()) == {"alpha": 0.05, "models": []}


def test_per_year_slope():
    f = fit(["1", "t"], slope=1.8e-5, n=400)
    row = fit_report([f]).rows()[0]
    slope = f.term("t").beta
    assert row[-2] == f"{slope:.3g}"
    assert row[-1] == f"{slope * 365.25:.3f}"


def test_json_roundtrip_and_keys():
    rep = fit_report([fit(["1", "t", "|dSH|"], model="A"), fit(["1", "t"], model="B", seed=1)], alpha=0.01)
    d = json.loads(rep.to_json())
    m = d["models"][0]
    assert {"model", "n", "terms", "r2"} <= set(m)
    assert {"name", "beta", "se", "t", "p", "significant"} <= set(m["terms"][0])
    back = Report.from_json(rep.to_json())
    assert back.results == rep.results and back.alpha == 0.01


def test_markdown_escapes_pipes():
    md = fit_report([fit(["1", "t", "|dPR|", "|dIR|"])]).to_markdown()
    assert "\\|PR1-PR2\\|" in md
    assert md.count("\n") >= 4


def test_unknown_term_gets_own_column():
    rep = fit_report([fit(["1", "t", "custom"])])
    assert ("custom", "custom") in rep.columns()


def test_nan_r2_rendered():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    f = fit_ols(X, np.full(5, 2.0), ["1", "t"])
    assert math.isnan(f.r2)
    assert "nan" in fit_report([f]).rows()[0]


@pytest.mark.parametrize("alpha", [0, 1, -0.1, 2])
def test_alpha_validated(alpha):
    with pytest.raises(ValueError):
        fit_report([], alpha)
