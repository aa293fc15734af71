import csv

from tandem.evalharness import AblationScenario, BucketAccuracy
from tandem.evalreport import ablation_report, capacity_report, selection_report

PNG_MAGIC = b"\x89PNG"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestAblationReport:
    def test_writes_table_figure_and_summary(self, tmp_path):
        scenario = AblationScenario(
            n_instructions=100, first_attempt_success_rate=0.7,
            repair_success_rate=0.6, max_attempts=3)
        out = ablation_report(scenario, tmp_path, seeds=range(5))
        rows = read_csv(tmp_path / "ablation.csv")
        assert rows[0][0] == "seed"
        assert len(rows) == 6  # header + 5 seeds
        assert (tmp_path / "ablation.png").read_bytes()[:4] == PNG_MAGIC
        summary = (tmp_path / "summary.md").read_text()
        assert "ablation.csv" in summary and "ablation.png" in summary
        assert 0.0 <= out["mean_baseline"] <= out["mean_combined"] <= 1.0

    def test_improvement_column_positive(self, tmp_path):
        scenario = AblationScenario(
            n_instructions=454, first_attempt_success_rate=0.6806,
            repair_success_rate=0.6)
        ablation_report(scenario, tmp_path, seeds=range(3))
        rows = read_csv(tmp_path / "ablation.csv")[1:]
        assert all(float(row[-1]) >= 0.0 for row in rows)


class TestCapacityReport:
    def test_writes_table_and_figure(self, tmp_path):
        entries = [
            {"model": "small", "context_tokens": 8_000, "reserved_tokens": 2_000,
             "avg_api_tokens": 600, "capacity": 10},
            {"model": "large", "context_tokens": 128_000, "reserved_tokens": 8_000,
             "avg_api_tokens": 600, "capacity": 200},
        ]
        capacity_report(entries, tmp_path)
        rows = read_csv(tmp_path / "capacity.csv")
        assert rows[0] == ["model", "context_tokens", "reserved_tokens",
                           "avg_api_tokens", "capacity"]
        assert [r[0] for r in rows[1:]] == ["small", "large"]
        assert (tmp_path / "capacity.png").read_bytes()[:4] == PNG_MAGIC


class TestSelectionReport:
    def test_writes_table_and_figure(self, tmp_path):
        results = [BucketAccuracy(bucket=i, n_apis=(i + 1) * 10,
                                  correct=9 - i, total=10) for i in range(3)]
        selection_report(results, tmp_path)
        rows = read_csv(tmp_path / "selection.csv")
        assert len(rows) == 4
        assert rows[1][4] == "0.9000"
        assert (tmp_path / "selection.png").read_bytes()[:4] == PNG_MAGIC
