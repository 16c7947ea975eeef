import json

import numpy as np
import pytest

from mptraj import (BenchScenario, ValidationError, precompute_basis,
                    run_benchmark)
from mptraj.bench import write_bench_report_json

TINY = BenchScenario(dofs=1, duration=1.0, rate_hz=200.0, num_basis=5)


class TestScenario:
    def test_defaults_describe_workload(self):
        scenario = BenchScenario()
        assert scenario.weight_dim == 22
        assert scenario.query_times().shape == (6000,)
        assert "2 DoF" in scenario.describe()

    def test_validation(self):
        with pytest.raises(ValidationError):
            BenchScenario(dofs=0)
        with pytest.raises(ValidationError):
            BenchScenario(rate_hz=0.0)

    def test_config_spans_duration(self):
        config = TINY.config()
        assert config.duration == TINY.duration
        assert config.tau == TINY.duration


class TestRunBenchmark:
    def test_report_invariants(self):
        report = run_benchmark(TINY, repetitions=3)
        assert report.oracle_time > 0.0
        assert report.basis_time > 0.0
        assert report.speedup > 0.0
        assert len(report.basis_checksum) == 64
        assert len(report.oracle_checksum) == 64
        assert report.basis_checksum != report.oracle_checksum

    def test_outputs_deterministic_under_seed(self):
        a = run_benchmark(TINY, repetitions=3, seed=5)
        b = run_benchmark(TINY, repetitions=3, seed=5)
        c = run_benchmark(TINY, repetitions=3, seed=6)
        assert a.basis_checksum == b.basis_checksum
        assert a.oracle_checksum == b.oracle_checksum
        assert c.basis_checksum != a.basis_checksum

    def test_bc_recompute_changes_timing_not_output(self):
        cached = run_benchmark(TINY, repetitions=3, seed=5)
        rebuilt = run_benchmark(TINY, repetitions=3, seed=5,
                                with_bc_recompute=True)
        assert rebuilt.basis_checksum == cached.basis_checksum
        assert rebuilt.oracle_checksum == cached.oracle_checksum

    def test_supplied_bank_must_match(self):
        other = precompute_basis(BenchScenario(dofs=1, duration=2.0,
                                               rate_hz=200.0,
                                               num_basis=5).config())
        with pytest.raises(ValidationError, match="different scenario"):
            run_benchmark(TINY, repetitions=1, bank=other)

    def test_supplied_bank_reproduces_auto_bank(self):
        bank = precompute_basis(TINY.config())
        auto = run_benchmark(TINY, repetitions=2, seed=1)
        manual = run_benchmark(TINY, repetitions=2, seed=1, bank=bank)
        assert manual.basis_checksum == auto.basis_checksum

    def test_repetitions_validated(self):
        with pytest.raises(ValidationError):
            run_benchmark(TINY, repetitions=0)


class TestReport:
    def test_json_schema(self, tmp_path):
        report = run_benchmark(TINY, repetitions=2)
        path = tmp_path / "bench.json"
        write_bench_report_json(str(path), report)
        data = json.loads(path.read_text())
        assert data["scenario"]["weight_dim"] == 6
        assert data["speedup"] == pytest.approx(report.speedup)
        assert data["oracle_time_s"] == report.oracle_time
        assert "explicit Euler" in data["note"]

    def test_text_table(self):
        report = run_benchmark(TINY, repetitions=2)
        text = report.to_text()
        assert "speed-up" in text
        assert "euler baseline" in text
