import numpy as np
import pytest

from iris_aging.dataset import ComparisonRecord
from iris_aging.errors import EmptyInput, MissingCovariate, ModelSpecError, UnknownModel
from iris_aging.quality import GeometryVector, QualityVector
from iris_aging.regression import (
    ModelSpec,
    catalog,
    catalog_names,
    design_matrix,
    get_model,
    parse_model,
    parse_models,
)


def rec(id1="a", id2="b", dt=10, score=0.3, oc=(0.1, 0.2), lc=(5.0, 8.0), geo=True):
    q1 = QualityVector(oc[0], lc[0], 100.0, 0.01)
    q2 = QualityVector(oc[1], lc[1], 110.0, -0.02)
    g1 = GeometryVector(20.0, 60.0) if geo else None
    g2 = GeometryVector(23.5, 58.0) if geo else None
    return ComparisonRecord(id1, id2, dt, score, q1, q2, g1, g2)


def test_catalog_size_and_families():
    names = catalog_names()
    assert len(names) == 37
    assert len(set(names)) == 37
    assert len(catalog("D")) == 13 and len(catalog("B")) == 11 and len(catalog("V")) == 13
    for family, count in (("D", 12), ("B", 10), ("V", 12)):
        assert [f"{family}{i}" for i in range(count)] == [s.name for s in catalog(family)][:count]


def test_final_models():
    assert get_model("D_final").names == ["1", "t", "|dSH|", "|dPR|", "|dIR|"]
    assert get_model("B_final").names == ["1", "t", "|dLC|", "|dSH|", "|dPR|", "|dIR|"]
    assert len(get_model("V_final").terms) == 3


def test_family_constraints_hold_across_catalog():
    for spec in catalog("B"):
        assert all(t.covariate != "OC" for t in spec.terms)
    for spec in catalog("V"):
        assert all(t.covariate not in ("OC", "PR", "IR") for t in spec.terms)
    for spec in catalog():
        assert spec.terms[0].kind == "intercept"
        assert spec.terms[1].name == "t"


def test_d_family_structure():
    d0 = set(get_model("D0").names)
    assert {"OC1", "OC2", "LC1", "LC2", "IL1", "IL2", "SH1", "SH2"} <= d0
    d7 = set(get_model("D7").names)
    assert d7 == set(get_model("D5").names) | set(get_model("D6").names)
    dropped = {name: (d7 - set(get_model(name).names)) for name in ("D8", "D9", "D10", "D11")}
    assert dropped == {"D8": {"OCprod"}, "D9": {"|dLC|"}, "D10": {"|dIL|"}, "D11": {"|dSH|"}}


def test_unknown_model_lists_names():
    with pytest.raises(UnknownModel) as exc:
        get_model("D99")
    assert "D_final" in str(exc.value)


def test_dsl_roundtrip():
    for spec in catalog():
        assert parse_model(spec.to_text()) == spec


@pytest.mark.parametrize(
    "line",
    [
        "m: B [t, OCprod]",
        "m: V [t, |dPR|]",
        "m: D [|dLC|, t]",
        "m: D [t, LC1]",
        "m: D [t, |dOC|]",
        "m: D [t, LCprod]",
        "m: D [t, t]",
        "m: X [t]",
        "m: D [t, foo]",
        "no brackets",
    ],
)
def test_invalid_models(line):
    with pytest.raises(ModelSpecError):
        parse_model(line)


def test_parse_models_comments_and_duplicates():
    specs = parse_models("# header\nA: D [t]  # trailing\n\nB: V [t, |dLC|]\n")
    assert [s.name for s in specs] == ["A", "B"]
    with pytest.raises(ModelSpecError):
        parse_models("A: D [t]\nA: B [t]\n")


def test_d6_design_matrix_shape():
    X, y = design_matrix([rec(), rec("c", "d", dt=20)], get_model("D6"))
    assert X.shape == (2, 4)
    np.testing.assert_allclose(X[0], [1, 10, 3.5, 2.0])
    np.testing.assert_allclose(y, [0.3, 0.3])


def test_absdiff_and_absprod_values():
    spec = ModelSpec.of("m", "D", ["|dLC|", "OCprod"])
    X, _ = design_matrix([rec()], spec)
    assert X[0, 1] == 3.0
    assert X[0, 2] == pytest.approx(0.02)


def test_raw_columns_in_term_order():
    spec = ModelSpec.of("m", "D", ["t", "LC2", "LC1"])
    X, _ = design_matrix([rec()], spec)
    np.testing.assert_array_equal(X[0], [1, 10, 8, 5])


def test_design_matrix_errors():
    with pytest.raises(EmptyInput):
        design_matrix([], get_model("D6"))
    with pytest.raises(MissingCovariate):
        design_matrix([rec(geo=False)], get_model("D6"))
    with pytest.raises(MissingCovariate):
        design_matrix([rec(oc=(None, None))], get_model("D5"))
