import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import read_table
from pdftime.metrics import BenchmarkReport, aggregate, average_ranks, top1_counts


def loop_ranks(m):
    """Average-tie ranks by counting, one dataset column at a time."""
    n_methods, n_data = m.shape
    out = np.zeros(n_methods)
    for d in range(n_data):
        col = m[:, d]
        for i in range(n_methods):
            better = sum(1 for v in col if v > col[i])
            tied = sum(1 for v in col if v == col[i])
            out[i] += better + (tied + 1) / 2
    return out / n_data


def loop_top1(m):
    return np.array([sum(1 for d in range(m.shape[1]) if m[i, d] == m[:, d].max()) for i in range(m.shape[0])])


def test_hand_case():
    agg = aggregate([[0.9, 0.8], [0.8, 0.9]], ["a", "b"])
    assert agg.top1 == [1, 1]
    assert agg.average_rank == [1.5, 1.5]
    assert agg.average_accuracy == pytest.approx([0.85, 0.85])


def test_ties_count_for_every_tied_method():
    m = np.array([[1.0, 0.5, 0.7], [1.0, 0.6, 0.7], [0.9, 0.6, 0.7]])
    assert top1_counts(m).tolist() == [2, 3, 2]
    np.testing.assert_allclose(average_ranks(m), [(1.5 + 3 + 2) / 3, (1.5 + 1.5 + 2) / 3, (3 + 1.5 + 2) / 3])


def test_table1_pdftime_average_accuracy_and_rank():
    datasets, methods, table = read_table("uea_table.csv")
    assert len(datasets) == 10
    agg = aggregate(table.T, methods)
    pd = agg.for_method("PDFTime")
    np.testing.assert_allclose(
        table[:, methods.index("PDFTime")], [0.369, 0.698, 0.713, 0.800, 0.989, 0.878, 0.887, 0.572, 1.000, 0.921]
    )
    assert pd["average_accuracy"] == pytest.approx(0.783, abs=5e-4)
    assert pd["average_rank"] == pytest.approx(2.80, abs=0.25)


def test_table2_counts_match_independent_count():
    _, methods, table = read_table("ucr_table.csv")
    assert table.shape == (128, 9)
    agg = aggregate(table.T, methods)
    assert agg.top1 == loop_top1(table.T).tolist()
    np.testing.assert_allclose(agg.average_rank, loop_ranks(table.T), atol=1e-12)
    assert agg.for_method("PDFTime")["average_accuracy"] == pytest.approx(0.9461, abs=5e-4)


def test_table2_constructed_tie_rows():
    # rows from the per-dataset table where several methods share the best accuracy
    _, methods, table = read_table("ucr_table.csv")
    tied = [r for r in table if (r == r.max()).sum() >= 2]
    assert len(tied) >= 5
    sub = np.array(tied[:5])
    counts = top1_counts(sub.T)
    for r in sub:
        assert set(np.flatnonzero(r == r.max())) <= set(np.flatnonzero(counts > 0))
    assert counts.sum() == sum((r == r.max()).sum() for r in sub)
    # all methods tied on every dataset: every method is top-1 everywhere with rank (n+1)/2
    flat = np.full((9, 4), 0.75)
    assert top1_counts(flat).tolist() == [4] * 9
    np.testing.assert_allclose(average_ranks(flat), 5.0)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 7), st.integers(1, 12)),
              elements=st.sampled_from([0.0, 0.25, 0.5, 0.75, 0.9, 1.0])))
def test_rank_sum_invariant_and_loop_oracle(m):
    n = m.shape[0]
    ranks = average_ranks(m)
    assert ranks.sum() == pytest.approx(n * (n + 1) / 2)
    np.testing.assert_allclose(ranks, loop_ranks(m), atol=1e-12)
    assert top1_counts(m).tolist() == loop_top1(m).tolist()
    assert top1_counts(m).sum() >= m.shape[1]


@pytest.mark.parametrize("bad", [[[0.5, 0.6], [0.5]], [], [[]], [[1.2]], [[-0.1]], [[float("nan")]]])
def test_invalid_matrices(bad):
    with pytest.raises(ValueError):
        aggregate(bad)


def test_method_name_count_checked():
    with pytest.raises(ValueError):
        aggregate([[0.5], [0.6]], ["only-one"])


def test_report_round_trip_and_outputs():
    report = BenchmarkReport.from_rows({"B": {"x": 0.5, "y": 0.75}, "A": {"x": 1.0, "y": 1.0}})
    report.curves["A"] = [{"epoch": 0, "val_accuracy": 0.5}]
    assert report.methods == ["x", "y"] and report.datasets == ["A", "B"]
    assert report.to_csv().splitlines() == ["dataset,method,accuracy", "A,x,1.0", "A,y,1.0", "B,x,0.5", "B,y,0.75"]
    doc = json.loads(report.to_json())
    assert doc["format_version"] == 1
    assert doc["aggregates"]["y"] == {"top1": 2, "average_accuracy": 0.875, "average_rank": 1.25}
    assert doc["curves"]["A"][0]["epoch"] == 0
    # aggregates are recomputable from the per-dataset map
    again = aggregate(np.array([[doc["accuracies"][m][d] for d in ["A", "B"]] for m in ["x", "y"]]), ["x", "y"])
    assert again.to_dict() == doc["aggregates"]


def test_report_missing_entry():
    report = BenchmarkReport({"x": {"A": 0.5, "B": 0.5}, "y": {"A": 0.5}})
    with pytest.raises(ValueError, match="no result for B"):
        report.aggregates()
