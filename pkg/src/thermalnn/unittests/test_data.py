"""
Purpose: Unit tests for the data.py module
"""

import logging

import numpy as np
import pytest

from ..data import (
    FoldPlan,
    MeasurementProfile,
    ingest_csv,
    make_folds,
    make_schema,
    split_subsequences,
    write_profiles_csv,
)
from ..tnn_exceptions import ArgumentError, NumericalError, ParseError, PlanError, SchemaError


@pytest.fixture
def small_schema():
    return make_schema(exogenous=("i_s",), ancillary=("coolant",), targets=("pm", "winding"))


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def make_profile(schema, profile_id, length=5):
    values = np.full((length, len(schema.channels)), 0.5)
    return MeasurementProfile(profile_id, values, schema)


def test_default_divisors(small_schema):
    assert small_schema.divisors == {"i_s": 100.0, "coolant": 100.0, "pm": 100.0, "winding": 100.0}
    assert small_schema.channels == ("i_s", "coolant", "pm", "winding")
    assert (small_schema.o, small_schema.n, small_schema.m) == (1, 1, 2)


def test_schema_rejects_duplicates_and_bad_divisors():
    with pytest.raises(SchemaError):
        make_schema(exogenous=("pm",), ancillary=(), targets=("pm",))
    with pytest.raises(SchemaError) as exception_info:
        make_schema(exogenous=("torque",), ancillary=(), targets=("pm",))
    assert exception_info.value.column == "torque"
    with pytest.raises(SchemaError):
        make_schema(ancillary=(), targets=("pm",), divisors={"pm": 0.0})


def test_ingest_groups_profiles_in_order_of_appearance(small_schema, tmp_path):
    path = write_csv(
        tmp_path / "measurements.csv",
        "profile_id,i_s,coolant,pm,winding\n"
        "b,10,20,30,40\n"
        "a,50,20,30,40\n"
        "b,20,20,30,40\n"
        "a,60,20,30,40\n",
    )
    profiles = ingest_csv(path, small_schema)

    assert [profile.profile_id for profile in profiles] == ["b", "a"]
    np.testing.assert_allclose(profiles[0].exogenous[:, 0], [0.1, 0.2])
    np.testing.assert_allclose(profiles[1].targets, [[0.3, 0.4], [0.3, 0.4]])
    np.testing.assert_allclose(profiles[0].phi[0], [0.2, 0.1])


def test_ingest_derives_vector_norm(small_schema, tmp_path):
    path = write_csv(
        tmp_path / "measurements.csv",
        "profile_id,i_d,i_q,coolant,pm,winding\n1,30,40,20,30,40\n1,0,100,20,30,40\n",
    )
    profile = ingest_csv(path, small_schema)[0]
    np.testing.assert_allclose(profile.exogenous[:, 0], [0.5, 1.0])


def test_ingest_errors(small_schema, tmp_path):
    missing = write_csv(tmp_path / "missing.csv", "profile_id,i_s,coolant,pm\n1,1,2,3\n1,1,2,3\n")
    with pytest.raises(SchemaError) as exception_info:
        ingest_csv(missing, small_schema)
    assert exception_info.value.column == "winding"

    bad = write_csv(
        tmp_path / "bad.csv",
        "profile_id,i_s,coolant,pm,winding\n1,1,2,3,4\n1,1,x,3,4\n1,1,2,3,4\n",
    )
    with pytest.raises(ParseError) as exception_info:
        ingest_csv(bad, small_schema)
    assert exception_info.value.row == 1
    assert exception_info.value.column == "coolant"

    short = write_csv(
        tmp_path / "short.csv",
        "profile_id,i_s,coolant,pm,winding\n1,1,2,3,4\n1,1,2,3,4\n2,1,2,3,4\n",
    )
    with pytest.raises(ParseError):
        ingest_csv(short, small_schema)


def test_ingest_warns_about_unused_columns(small_schema, tmp_path, caplog):
    path = write_csv(
        tmp_path / "extra.csv",
        "profile_id,i_s,coolant,pm,winding,torque\n1,1,2,3,4,5\n1,1,2,3,4,5\n",
    )
    with caplog.at_level(logging.WARNING):
        ingest_csv(path, small_schema)
    assert "torque" in caplog.text


def test_written_profiles_read_back(small_schema, tmp_path):
    profiles = [make_profile(small_schema, "x", 4), make_profile(small_schema, "y", 3)]
    path = str(tmp_path / "out.csv")
    write_profiles_csv(profiles, path)
    again = ingest_csv(path, small_schema)
    assert [profile.profile_id for profile in again] == ["x", "y"]
    np.testing.assert_allclose(again[1].values, profiles[1].values)


def test_profile_validation(small_schema):
    profile = make_profile(small_schema, "p")
    with pytest.raises(ValueError):
        profile.values[0, 0] = 1.0
    with pytest.raises(ArgumentError):
        make_profile(small_schema, "p", length=1)
    values = np.zeros((3, 4))
    values[1, 2] = np.nan
    with pytest.raises(NumericalError):
        MeasurementProfile("p", values, small_schema)


def test_split_subsequences(small_schema):
    pieces = split_subsequences(make_profile(small_schema, "p", 25), 10)
    assert [len(piece) for piece in pieces] == [10, 10, 5]
    assert [piece.profile_id for piece in pieces] == ["p/0", "p/1", "p/2"]

    pieces = split_subsequences(make_profile(small_schema, "p", 21), 10)
    assert [len(piece) for piece in pieces] == [10, 10]

    assert [len(piece) for piece in split_subsequences(make_profile(small_schema, "p", 10), 4)] == [4, 4, 2]
    assert [len(piece) for piece in split_subsequences(make_profile(small_schema, "p", 4), 8)] == [4]

    with pytest.raises(ArgumentError):
        split_subsequences(make_profile(small_schema, "p"), 1)


def test_fold_plan_validation():
    with pytest.raises(PlanError):
        FoldPlan.from_sets(train=["1"], fold_1=["1"], fold_2=["2"], generalization=["3"])
    with pytest.raises(PlanError):
        FoldPlan.from_sets(train=["1"], fold_1=["2"], fold_2=[], generalization=["3"])


def test_make_folds(small_schema):
    profiles = [make_profile(small_schema, name) for name in ("a", "b", "c", "d", "e")]
    plan = FoldPlan.from_sets(train=["a", "b"], fold_1=["c"], fold_2=["d"], generalization=["e"])
    folds = make_folds(profiles, plan)

    assert [profile.profile_id for profile in folds.train] == ["a", "b"]
    validation, test = folds.iteration(1)
    assert (validation[0].profile_id, test[0].profile_id) == ("c", "d")
    validation, test = folds.iteration(2)
    assert (validation[0].profile_id, test[0].profile_id) == ("d", "c")
    with pytest.raises(ArgumentError):
        folds.iteration(3)
    assert len(folds.all_profiles()) == 5

    with pytest.raises(PlanError):
        make_folds(profiles + [make_profile(small_schema, "f")], plan)
