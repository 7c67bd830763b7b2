import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import CORPUS, CORPUS_BAD, CORPUS_GOOD
from pdftime.data import (
    ParseError,
    SyntheticSpec,
    TimeSeriesDataset,
    format_ts,
    load_dataset,
    load_ts,
    make_synthetic,
    parse_csv,
    parse_ts,
    resample_linear,
    stratified_split,
    synthetic_split,
    znormalize,
)

HEADER = "@problemName t\n@univariate true\n@classLabel true a b\n@data\n"


# -- parse_ts ---------------------------------------------------------------------


def test_single_record_example():
    ds = parse_ts(HEADER + "1,2,3:b\n")
    assert (ds.V, ds.L, ds.C) == (1, 3, 2)
    assert ds.y.tolist() == [1]
    assert ds.class_names == ["a", "b"]


def test_two_dimension_record():
    text = "@univariate false\n@dimensions 2\n@classLabel true a\n@data\n1,2:3,4:a\n"
    ds = parse_ts(text)
    assert ds.X[0].shape == (2, 2)
    np.testing.assert_array_equal(ds.X[0], [[1, 2], [3, 4]])


def test_extra_dimension_names_the_line():
    text = "@dimensions 2\n@classLabel true a\n@data\n1,2:3,4:a\n1:2:3:a\n"
    with pytest.raises(ParseError) as info:
        parse_ts(text)
    assert info.value.line == 5
    assert str(info.value).startswith("line 5:")


@pytest.mark.parametrize(
    "body, line",
    [
        ("@problemName t\n@classLabel true a\n", 2),
        (HEADER + "1,2:c\n", 5),
        (HEADER + "1,x,3:a\n", 5),
        ("@classLabel false\n@data\n", 1),
        ("@univariate true\n@data\n1,2:a\n", 3),
        (HEADER, 4),
        ("", 1),
    ],
)
def test_parse_errors_carry_line_numbers(body, line):
    with pytest.raises(ParseError) as info:
        parse_ts(body)
    assert info.value.line == line


def test_labels_follow_declaration_order_not_appearance():
    ds = parse_ts("@classLabel true z a\n@data\n1,2:a\n3,4:z\n")
    assert ds.class_names == ["z", "a"]
    assert ds.y.tolist() == [1, 0]


def test_missing_values_are_interpolated():
    ds = parse_ts(HEADER + "?,2,?,6,?:a\n")
    np.testing.assert_array_equal(ds.X[0, 0], [2, 2, 4, 6, 6])


def test_variable_length_resamples_to_longest():
    ds = parse_ts(HEADER + "0,2:a\n0,1,2,3,4:b\n")
    assert ds.L == 5
    np.testing.assert_allclose(ds.X[0, 0], [0, 0.5, 1, 1.5, 2])


def test_explicit_length_overrides_longest():
    ds = parse_ts(HEADER + "0,1,2,3:a\n", length=7)
    np.testing.assert_allclose(ds.X[0, 0], [0, 0.5, 1, 1.5, 2, 2.5, 3])


@pytest.mark.parametrize("name", sorted(CORPUS_GOOD))
def test_corpus_well_formed(name):
    n, V, L, C, labels = CORPUS_GOOD[name]
    ds = load_ts(CORPUS / name)
    assert ds.X.shape == (n, V, L)
    assert ds.C == C
    assert ds.y.tolist() == labels
    assert not np.isnan(ds.X).any()


@pytest.mark.parametrize("name", sorted(CORPUS_BAD))
def test_corpus_malformed(name):
    with pytest.raises(ParseError) as info:
        load_ts(CORPUS / name)
    assert info.value.line == CORPUS_BAD[name]
    assert str(info.value).startswith(f"line {CORPUS_BAD[name]}:")


def test_corpus_missing_file_values():
    ds = load_ts(CORPUS / "missing_values.ts")
    np.testing.assert_array_equal(ds.X[0], [[1, 2, 3, 4, 5], [2, 2, 3, 4, 4]])
    np.testing.assert_array_equal(ds.X[1, 0], [2, 2, 2, 4, 6])


def test_pipeline_is_deterministic():
    a = load_dataset(CORPUS / "variable_length.ts")
    b = load_dataset(CORPUS / "variable_length.ts")
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)


@settings(max_examples=30, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 3), st.integers(2, 9)),
           elements=st.floats(-1e6, 1e6, allow_nan=False)),
    st.data(),
)
def test_format_ts_round_trip(X, data):
    y = data.draw(arrays(np.int64, X.shape[0], elements=st.integers(0, 2)))
    ds = TimeSeriesDataset(X, y, ["p", "q", "r"])
    back = parse_ts(format_ts(ds))
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)
    assert back.class_names == ds.class_names


# -- CSV ------------------------------------------------------------------------


def test_csv_rows_are_row_major():
    ds = parse_csv("b,1,2,3,4,5,6\na,6,5,4,3,2,1\n", V=2, L=3)
    assert ds.class_names == ["a", "b"]
    assert ds.y.tolist() == [1, 0]
    np.testing.assert_array_equal(ds.X[0], [[1, 2, 3], [4, 5, 6]])


def test_csv_numeric_labels_sort_numerically():
    ds = parse_csv("10,1,2\n9,3,4\n", V=1, L=2)
    assert ds.class_names == ["9", "10"]


def test_csv_wrong_field_count():
    with pytest.raises(ParseError) as info:
        parse_csv("a,1,2\na,1\n", V=1, L=2)
    assert info.value.line == 2


def test_load_dataset_csv_normalizes(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,1,2,3\nb,3,3,3\n")
    ds = load_dataset(p, V=1, L=3)
    np.testing.assert_allclose(ds.X[0, 0], [-1.224744871391589, 0, 1.224744871391589])
    np.testing.assert_array_equal(ds.X[1, 0], 0.0)
    with pytest.raises(ValueError):
        load_dataset(p)


# -- resampling -------------------------------------------------------------------


def test_resample_hand_example():
    np.testing.assert_allclose(resample_linear(np.array([0.0, 1, 2, 3]), 7), [0, 0.5, 1, 1.5, 2, 2.5, 3])


def test_resample_constant():
    np.testing.assert_array_equal(resample_linear(np.array([5.0, 5, 5]), 10), np.full(10, 5.0))


def test_resample_rejects_short_input():
    with pytest.raises(ValueError):
        resample_linear(np.array([1.0]), 4)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(2, 30)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_resample_identity_at_same_length(x):
    np.testing.assert_array_equal(resample_linear(x, x.shape[1]), x)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(2, 30), elements=st.floats(-1e3, 1e3, allow_nan=False)),
       st.integers(2, 60))
def test_resample_endpoints_and_monotonicity(x, L):
    out = resample_linear(x, L)
    assert out[0] == x[0] and out[-1] == x[-1]
    inc = np.sort(x)
    assert np.all(np.diff(resample_linear(inc, L)) >= 0)


# -- normalization ------------------------------------------------------------------


def test_znormalize_examples():
    np.testing.assert_allclose(znormalize(np.array([[1.0, 2, 3]])), [[-1.224744871391589, 0, 1.224744871391589]])
    np.testing.assert_array_equal(znormalize(np.array([[7.0, 7, 7]])), [[0, 0, 0]])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(3, 40)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_znormalize_stats_and_idempotence(x):
    z = znormalize(x)
    live = x.std(axis=-1) >= 1e-3
    assert np.all(np.abs(z.mean(axis=-1)) <= 1e-6)
    np.testing.assert_allclose(z.std(axis=-1)[live], 1.0, atol=1e-4)
    np.testing.assert_allclose(znormalize(z)[live], z[live], atol=1e-6)


# -- stratified split ------------------------------------------------------------------


def _labeled(counts):
    y = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
    return TimeSeriesDataset(np.zeros((len(y), 1, 2)), y, [str(i) for i in range(len(counts))])


def test_split_examples():
    _, hold = stratified_split(_labeled([5, 5]), 0.2, seed=0)
    assert hold.class_counts().tolist() == [1, 1]
    _, hold = stratified_split(_labeled([8, 8, 4]), 0.25, seed=0)
    assert hold.class_counts().tolist() == [2, 2, 1]


def test_split_is_deterministic():
    ds = _labeled([6, 9])
    ds.X = np.arange(15, dtype=float).reshape(15, 1, 1) * np.ones((1, 1, 2))
    a = stratified_split(ds, 0.2, seed=4)[1].X
    b = stratified_split(ds, 0.2, seed=4)[1].X
    np.testing.assert_array_equal(a, b)


def test_split_rejects_singleton_class():
    with pytest.raises(ValueError, match="disable the validation split"):
        stratified_split(_labeled([4, 1]), 0.2, seed=0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(2, 30), min_size=1, max_size=5), st.floats(0.05, 0.95), st.integers(0, 10**6))
def test_split_partitions_and_preserves_distribution(counts, fraction, seed):
    ds = _labeled(counts)
    ds.X = np.arange(ds.n, dtype=float).reshape(-1, 1, 1) * np.ones((1, 1, 2))
    keep, hold = stratified_split(ds, fraction, seed)
    ids = np.concatenate([keep.X[:, 0, 0], hold.X[:, 0, 0]])
    assert sorted(ids.tolist()) == list(range(ds.n))
    for c, n in enumerate(counts):
        expect = min(max(1, int(np.floor(fraction * n + 0.5))), n - 1)
        assert hold.class_counts()[c] == expect


# -- synthetic data ------------------------------------------------------------------


def test_synthetic_is_bitwise_deterministic():
    a = make_synthetic(SyntheticSpec(seed=2025))
    b = make_synthetic(SyntheticSpec(seed=2025))
    assert a.X.tobytes() == b.X.tobytes()
    np.testing.assert_array_equal(a.y, b.y)


def test_synthetic_counts_and_balance():
    tr, te = synthetic_split(SyntheticSpec())
    assert tr.n == 300 and te.n == 300
    assert tr.class_counts().tolist() == [100, 100, 100]
    odd, _ = synthetic_split(SyntheticSpec(n_train=10, n_test=4))
    assert np.ptp(odd.class_counts()) <= 1


def test_noiseless_synthetic_is_separable_by_nearest_neighbor_on_spectra():
    tr, te = synthetic_split(SyntheticSpec(noise_std=0.0, base_frequencies=[2.0, 5.0, 9.0]))
    ftr = np.abs(np.fft.rfft(tr.X[:, 0], axis=-1))
    fte = np.abs(np.fft.rfft(te.X[:, 0], axis=-1))
    d = ((fte[:, None, :] - ftr[None, :, :]) ** 2).sum(axis=-1)
    pred = tr.y[np.argmin(d, axis=1)]
    assert np.mean(pred == te.y) == 1.0


@pytest.mark.parametrize(
    "kwargs", [dict(base_frequencies=[2.0, 2.0, 3.0]), dict(n_classes=2), dict(noise_std=-1.0), dict(L=0)]
)
def test_synthetic_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SyntheticSpec(**kwargs)


def test_dataset_invariants():
    with pytest.raises(ValueError):
        TimeSeriesDataset(np.zeros((2, 1, 3)), [0, 2], ["a", "b"])
    with pytest.raises(ValueError):
        TimeSeriesDataset(np.full((1, 1, 3), np.nan), [0], ["a"])
    with pytest.raises(ValueError):
        TimeSeriesDataset(np.zeros((2, 1, 3)), [0], ["a"])
