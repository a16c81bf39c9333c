import io
import math

import pytest

from flexonc.metrics import (CSV_COLUMNS, FlowStats, MetricsRecord, count_decoding_failures,
                             summary_row, throughput, throughput_gain, write_csv)


def record(delivered=1000, duplicates=0, active=100.0):
    rec = MetricsRecord(scheme="flexonc")
    rec.flows[1] = FlowStats(0, 4, 1000, active, generated=delivered, delivered=delivered,
                             duplicates=duplicates, delay_sum=0.05 * delivered)
    return rec


class TestThroughput:
    def test_arithmetic(self):
        assert throughput(record()) == pytest.approx(80_000)

    def test_zero_delivered(self):
        assert throughput(record(delivered=0)) == 0.0

    def test_duplicates_do_not_count(self):
        assert throughput(record(duplicates=37)) == throughput(record())

    def test_subset_of_flows(self):
        rec = record()
        rec.flows[2] = FlowStats(4, 0, 500, 100.0, delivered=100)
        assert throughput(rec, [2]) == pytest.approx(4000)
        assert throughput(rec) == pytest.approx(84_000)


class TestGain:
    def test_ten_percent(self):
        assert throughput_gain(110.0, 100.0) == pytest.approx(10.0)

    def test_equal(self):
        assert throughput_gain(record(), record()) == 0.0

    def test_zero_baseline_is_undefined(self):
        assert throughput_gain(5.0, 0.0) is None


def test_decoding_failures_per_node():
    rec = MetricsRecord()
    rec.decoding_failure(9, 1.0)
    rec.decoding_failure(9, 2.0)
    assert count_decoding_failures(rec, 9) == 2
    assert count_decoding_failures(rec, 6) == 0
    assert rec.failure_times[9] == [1.0, 2.0]


def test_fate_fractions():
    rec = MetricsRecord()
    assert all(math.isnan(v) for v in rec.fate_fractions().values())
    rec.coded_sent = 4
    rec.fate.update(intended=2, backup_only=1, unheard=1)
    assert rec.fate_fractions() == {"intended": 0.5, "backup_only": 0.25, "unheard": 0.25}


def test_mean_delay_ignores_empty_flows():
    rec = record(delivered=10)
    assert rec.mean_delay == pytest.approx(0.05)
    assert math.isnan(record(delivered=0).mean_delay)


def test_dict_round_trip():
    rec = record()
    rec.decoding_failure(9, 3.5)
    rec.opportunity(6, 1.0, 3)
    rec.fate["intended"] += 1
    rec.switch_events.append((1.0, 6, 1, "on"))
    back = MetricsRecord.from_dict(rec.to_dict())
    assert back.to_dict() == rec.to_dict()


def test_csv_layout():
    buf = io.StringIO()
    row = {"scenario": "x", "scheme": "flexonc", "seed": 0, **summary_row(record())}
    row["mean_delay_s"] = 0.0123456789
    write_csv([row], buf, ["scenario", "scheme", "seed"])
    header, line = buf.getvalue().splitlines()
    assert header.split(",") == ["scenario", "scheme", "seed", *CSV_COLUMNS]
    assert "0.0123457" in line.split(",")
