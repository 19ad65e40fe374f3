import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adjpriv import data as D
from adjpriv.errors import DataError


def raw_line(**over):
    rec = dict(zip(D.ADULT_COLUMNS, [
        "39", "State-gov", "77516", "Bachelors", "13", "Never-married", "Adm-clerical",
        "Not-in-family", "White", "Male", "2174", "0", "40", "United-States", "<=50K"]))
    rec.update(over)
    return ", ".join(rec[c] for c in D.ADULT_COLUMNS)


def small_raw():
    lines = [
        raw_line(),
        raw_line(age="50", sex="Female", income=">50K", workclass="Private"),
        raw_line(age="20", education="HS-grad", race="Black"),
        raw_line(age="31", workclass="?"),
        raw_line(age="45", sex="Female", **{"native-country": "?"}),
    ]
    return D.parse_adult_lines(lines)


# ---------------------------------------------------------------- parsing and encoding

def test_parse_handles_test_file_quirks():
    lines = ["|1x3 Cross validator", "", raw_line(income=">50K.")]
    recs = D.parse_adult_lines(lines)
    assert len(recs) == 1 and recs[0][-1] == ">50K"


def test_parse_reports_line_number():
    with pytest.raises(DataError, match="line 2"):
        D.parse_adult_lines([raw_line(), "1, 2, 3"])


def test_header_flag_skips_first_row():
    lines = [", ".join(D.ADULT_COLUMNS), raw_line()]
    assert len(D.parse_adult_lines(lines, header=True)) == 1


def test_missing_rows_excluded():
    ds = D.load_adult(small_raw())
    assert len(ds) == 3


def test_age_normalized_to_unit_range():
    ds = D.load_adult(small_raw())
    age = ds.features[:, 0]
    assert age.min() == 0.0 and age.max() == 1.0
    assert ds.column_map[0].attribute == "age"


def test_labels():
    ds = D.load_adult(small_raw())
    assert ds.y_private.tolist() == [1, 0, 1]
    assert ds.y_nonprivate.tolist() == [0, 1, 0]


def test_one_hot_groups_valid():
    ds = D.load_adult(small_raw())
    groups = {}
    for j, col in enumerate(ds.column_map):
        if col.kind == "category":
            groups.setdefault(col.attribute, []).append(j)
    for cols in groups.values():
        assert np.all(ds.features[:, cols].sum(axis=1) == 1)


def test_round_trip_through_column_map():
    records = D.drop_missing(small_raw())
    enc = D.AdultEncoder().fit(records)
    ds = enc.transform(records)
    for rec, row, yp, ynp in zip(records, ds.features, ds.y_private, ds.y_nonprivate):
        back = enc.decode(row, yp, ynp)
        for attr, orig, got in zip(D.ADULT_COLUMNS, rec, back):
            if attr in D.ADULT_CONTINUOUS:
                assert float(got) == pytest.approx(float(orig), abs=1e-9)
            else:
                assert got == orig


def test_unknown_category_is_data_error():
    records = D.drop_missing(small_raw())
    enc = D.AdultEncoder().fit(records)
    with pytest.raises(DataError):
        enc.transform(D.parse_adult_lines([raw_line(race="Martian")]))


def test_adult_widths_and_split(adult_raw):
    kept = D.drop_missing(adult_raw)
    assert len(adult_raw) == 48_842
    assert len(kept) == 45_222
    train, test, enc = D.preprocess_adult(adult_raw)
    assert enc.encoded_width == 106
    assert train.width == test.width == 102
    assert enc.encoded_width - train.width == 4
    assert (len(train), len(test)) == (36_177, 9_045)
    assert train.features.min() >= 0.0 and train.features.max() <= 1.0
    assert test.features.min() >= 0.0 and test.features.max() <= 1.0


def test_adult_round_trip(adult_raw):
    records = D.drop_missing(adult_raw)[:500]
    enc = D.AdultEncoder().fit(D.drop_missing(adult_raw))
    ds = enc.transform(records)
    for rec, row, yp, ynp in zip(records, ds.features, ds.y_private, ds.y_nonprivate):
        back = enc.decode(row, yp, ynp)
        assert [b for a, b in zip(D.ADULT_COLUMNS, back) if a not in D.ADULT_CONTINUOUS] == \
               [r for a, r in zip(D.ADULT_COLUMNS, rec) if a not in D.ADULT_CONTINUOUS]


# ---------------------------------------------------------------- splits and batches

def test_split_sizes_and_determinism():
    a_tr, a_te = D.split_indices(10, D.SplitConfig(0.8, 3))
    b_tr, b_te = D.split_indices(10, D.SplitConfig(0.8, 3))
    assert (len(a_tr), len(a_te)) == (8, 2)
    assert np.array_equal(a_tr, b_tr) and np.array_equal(a_te, b_te)
    assert not set(a_tr) & set(a_te)


def test_split_empty_side_rejected():
    with pytest.raises(DataError):
        D.split_indices(1, D.SplitConfig(0.8, 0))


def test_minibatch_sizes():
    assert [len(b) for b in D.minibatches(130, 64, 0)] == [64, 64, 2]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 500), st.integers(1, 70), st.integers(0, 10_000))
def test_minibatches_partition(n, size, seed):
    batches = D.minibatches(n, size, seed)
    flat = np.concatenate(batches)
    assert sorted(flat.tolist()) == list(range(n))


def test_minibatch_orderings_differ_by_seed():
    a = np.concatenate(D.minibatches(100, 10, [0, 1]))
    b = np.concatenate(D.minibatches(100, 10, [0, 2]))
    assert not np.array_equal(a, b)


# ---------------------------------------------------------------- synthetic data

def chi2_2x2_pvalue(a, b):
    table = np.zeros((2, 2))
    np.add.at(table, (a.astype(int), b.astype(int)), 1)
    expected = table.sum(1, keepdims=True) * table.sum(0, keepdims=True) / table.sum()
    stat = float(((table - expected) ** 2 / expected).sum())
    return math.erfc(math.sqrt(stat / 2))  # survival function of chi2 with 1 dof


def test_synth_zero_correlation_independent():
    ds = D.synth_generate(D.SynthSpec(n=10_000, correlation=0.0, seed=4))
    for j, col in enumerate(ds.column_map):
        if col.name.startswith("signal_nonprivate"):
            assert chi2_2x2_pvalue(ds.features[:, j], ds.y_nonprivate) > 0.01
        if col.name.startswith("signal_private"):
            assert chi2_2x2_pvalue(ds.features[:, j], ds.y_private) > 0.01


def test_synth_full_correlation_linearly_separable():
    ds = D.synth_generate(D.SynthSpec(n=2_000, correlation=1.0, seed=4))
    x = np.hstack([ds.features, np.ones((len(ds), 1))])
    coef, *_ = np.linalg.lstsq(x, ds.y_nonprivate.astype(float), rcond=None)
    acc = np.mean((x @ coef > 0.5) == ds.y_nonprivate)
    assert acc == 1.0


def test_synth_deterministic():
    a = D.synth_generate(D.SynthSpec(n=300, seed=9))
    b = D.synth_generate(D.SynthSpec(n=300, seed=9))
    assert a.features.tobytes() == b.features.tobytes()
    assert np.array_equal(a.y_private, b.y_private)


# ---------------------------------------------------------------- CSV

def test_csv_round_trip(tmp_path):
    ds = D.synth_generate(D.SynthSpec(n=50, seed=1))
    path = tmp_path / "d.csv"
    D.write_dataset(ds, path)
    back = D.read_dataset(path)
    assert back.features.tobytes() == ds.features.tobytes()
    assert np.array_equal(back.y_nonprivate, ds.y_nonprivate)
    D.write_dataset(back, tmp_path / "e.csv")
    assert path.read_bytes() == (tmp_path / "e.csv").read_bytes()


def test_csv_rejects_garbage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,y_private,y_nonprivate\n1,x,0\n")
    with pytest.raises(DataError, match=":2"):
        D.read_dataset(path)


def test_majority_rate():
    assert D.majority_rate([0, 0, 0, 1, 1]) == 0.6
