"""Benchmark aggregates: top-1 counts and average ranks with ties shared."""

from pdftime import BenchmarkReport, aggregate

acc = {
    "Beef": {"A": 0.80, "B": 0.80, "C": 0.70},
    "Coffee": {"A": 1.00, "B": 0.96, "C": 1.00},
    "Wine": {"A": 0.61, "B": 0.72, "C": 0.65},
}
report = BenchmarkReport.from_rows(acc)
print(report.to_csv())
for method, row in report.aggregates().to_dict().items():
    print(method, row)

# the same numbers straight from a methods x datasets matrix
agg = aggregate([[0.80, 1.00, 0.61], [0.80, 0.96, 0.72], [0.70, 1.00, 0.65]], ["A", "B", "C"])
print("average ranks:", agg.average_rank)
