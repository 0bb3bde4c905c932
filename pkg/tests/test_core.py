import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from primeimpute import (
    AvailabilityPattern,
    MaskedDataset,
    load_csv,
    pattern_of,
    standardize,
    write_csv,
)
from primeimpute.errors import CsvParseError, EmptyPatternError, ValidationError
from primeimpute.simgen import gen_scenario, scenario1


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_one_na_cell(tmp_path):
    path = _write(tmp_path, "y,a,b\n1,2,3\n4,NA,6\n7,8,9\n")
    ds = load_csv(path)
    assert ds.x.shape == (3, 2)
    assert (~ds.mask).sum() == 1
    assert not ds.mask[1, 0]
    assert ds.columns == ("a", "b")


def test_load_custom_token(tmp_path):
    ds = load_csv(_write(tmp_path, "y,a,b\n1,.,3\n4,5,6\n"), na_token=".")
    assert not ds.mask[0, 0] and ds.mask[1].all()


def test_garbage_cell_names_row_and_column(tmp_path):
    path = _write(tmp_path, "y,a,b\n1,2,3\n4,abc,6\n")
    with pytest.raises(CsvParseError) as exc:
        load_csv(path)
    assert exc.value.row == 3 and exc.value.column == "a"
    assert "row 3" in str(exc.value) and "'a'" in str(exc.value)


@pytest.mark.parametrize(
    "text",
    [
        "y,a\n1,2\n3\n",          # ragged
        "y,a\n",                  # no rows
        "",                       # empty
        "y,y\n1,2\n",             # duplicate header
        "a,b\n1,2\n",             # no response column
        "y,a\nNA,1\n",            # missing response
        "y,a\n1,inf\n",           # non-finite
    ],
)
def test_malformed_files_rejected(tmp_path, text):
    with pytest.raises(CsvParseError):
        load_csv(_write(tmp_path, text))


def test_empty_pattern_rejected_at_load(tmp_path):
    with pytest.raises(EmptyPatternError) as exc:
        load_csv(_write(tmp_path, "y,a,b\n1,2,3\n4,NA,NA\n"))
    assert exc.value.rows == [3]


def test_empty_pattern_rejected_in_constructor():
    with pytest.raises(EmptyPatternError):
        MaskedDataset(y=[1.0, 2.0], x=np.ones((2, 2)), mask=[[True, False], [False, False]])


def test_missing_cells_never_hold_values():
    ds = MaskedDataset(y=[1.0, 2.0], x=[[1.0, 5.0], [2.0, 7.0]], mask=[[True, False], [True, True]])
    assert np.isnan(ds.x[0, 1])
    assert not ds.x.flags.writeable and not ds.mask.flags.writeable


def test_shape_validation():
    with pytest.raises(ValidationError, match="mask"):
        MaskedDataset(y=[1.0], x=[[1.0, 2.0]], mask=[[True]])
    with pytest.raises(ValidationError, match="y"):
        MaskedDataset(y=[1.0, 2.0], x=[[1.0, 2.0]], mask=[[True, True]])
    with pytest.raises(ValidationError, match="y"):
        MaskedDataset.complete(x=[[1.0]], y=[np.nan])


def test_round_trip_scenario_dataset(tmp_path):
    ds, _ = gen_scenario(scenario1(seed=3), 0)
    path = tmp_path / "rt.csv"
    write_csv(ds, path)
    back = load_csv(path)
    assert np.array_equal(back.mask, ds.mask)
    # repr round-trips doubles exactly
    assert np.array_equal(back.x[back.mask], ds.x[ds.mask])
    assert np.array_equal(back.y, ds.y)
    assert back.columns == ds.columns


def test_pattern_of_complete_row():
    ds = MaskedDataset.complete(x=np.ones((1, 4)), y=[0.0])
    assert pattern_of(ds, 0).observed == (0, 1, 2, 3)


def test_pattern_of_reference_rows():
    mask = np.ones((2, 12), dtype=bool)
    mask[0, 2] = False   # A1 lacks X3
    mask[1, :9] = False  # A10 analogue keeps X10..X12
    ds = MaskedDataset(y=[0.0, 0.0], x=np.zeros((2, 12)), mask=mask)
    assert pattern_of(ds, 0).observed == (0, 1) + tuple(range(3, 12))
    assert pattern_of(ds, 1).observed == (9, 10, 11)


@settings(max_examples=50, deadline=None)
@given(arrays(bool, (8, 5)), st.permutations(range(8)))
def test_pattern_of_permutes_with_rows(mask, perm):
    mask = mask.copy()
    mask[~mask.any(axis=1), 0] = True
    ds = MaskedDataset(y=np.zeros(8), x=np.zeros((8, 5)), mask=mask)
    perm = list(perm)
    shuffled = ds.take(perm)
    assert [pattern_of(shuffled, k) for k in range(8)] == [pattern_of(ds, i) for i in perm]


def test_pattern_algebra():
    a = AvailabilityPattern((3, 1))
    assert a.observed == (1, 3)
    assert a.union(0) == AvailabilityPattern((0, 1, 3))
    assert a.union(0).issuperset(a) and a.issuperset(a)
    assert a.intersection(AvailabilityPattern((3, 4))).observed == (3,)
    assert a.mask(5).tolist() == [False, True, False, True, False]


def test_standardize_hand_case():
    ds = MaskedDataset(y=[0.0, 1.0, 5.0, 2.0], x=[[1.0, 0.0], [2.0, 1.0], [3.0, 0.0], [9.0, 1.0]],
                       mask=[[True, True], [True, True], [True, True], [False, True]])
    out, sc = standardize(ds)
    np.testing.assert_allclose(out.x[:3, 0], [-1.0, 0.0, 1.0], atol=1e-15)
    assert sc.x_mean[0] == 2.0 and sc.x_scale[0] == 1.0
    assert not out.mask[3, 0]


def test_standardize_identity_on_standardized_column(rng):
    x = rng.standard_normal((30, 3))
    x = (x - x.mean(0)) / x.std(0, ddof=1)
    y = rng.standard_normal(30)
    _, sc = standardize(MaskedDataset.complete(x=x, y=y))
    np.testing.assert_allclose(sc.x_mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(sc.x_scale, 1.0, atol=1e-12)


def test_standardize_idempotent(rng):
    from conftest import random_masked

    ds = random_masked(rng, shift=4.0)
    once, _ = standardize(ds)
    twice, sc = standardize(once)
    np.testing.assert_allclose(twice.x[ds.mask], once.x[ds.mask], atol=1e-12)
    np.testing.assert_allclose(twice.y, once.y, atol=1e-12)
    np.testing.assert_allclose(sc.x_scale, 1.0, atol=1e-12)


def test_standardize_inverse_matches_raw_ols(rng):
    from primeimpute import fit_full_ols

    n, p = 60, 4
    x = rng.standard_normal((n, p)) * [1.0, 3.0, 0.5, 2.0] + [5.0, -2.0, 1.0, 0.0]
    y = 3.0 + x @ [1.0, -0.5, 2.0, 0.3] + rng.standard_normal(n)
    std, sc = standardize(MaskedDataset.complete(x=x, y=y))
    slopes, intercept = sc.coef_to_raw(fit_full_ols(std.x, std.y))
    design = np.column_stack([np.ones(n), x])
    ref = np.linalg.lstsq(design, y, rcond=None)[0]
    np.testing.assert_allclose(slopes, ref[1:], atol=1e-8)
    assert abs(intercept - ref[0]) < 1e-8


def test_standardize_rejects_constant_column():
    ds = MaskedDataset.complete(x=[[1.0, 2.0], [1.0, 3.0], [1.0, 4.0]], y=[1.0, 2.0, 4.0])
    with pytest.raises(ValidationError, match="x1"):
        standardize(ds)
