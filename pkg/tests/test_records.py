"""Record row and CSV round-trip tests."""

import math

import pytest

from gqhuber.records import RECORD_COLUMNS, RunRecord, read_records_csv, write_records_csv


def _rec(**overrides):
    base = dict(epoch=0, loss=0.5, w1_oracle=0.25, risk=-1.0, b=0.4,
                ms=0.0, arm="qr", seed=0)
    base.update(overrides)
    return RunRecord(**base)


class TestRunRecord:
    def test_rejects_non_finite_metrics(self):
        for field in ("loss", "risk", "b", "ms"):
            with pytest.raises(ValueError, match=field):
                _rec(**{field: math.nan})
        with pytest.raises(ValueError, match="w1_oracle"):
            _rec(w1_oracle=math.inf)

    def test_missing_oracle_is_allowed(self):
        assert _rec(w1_oracle=None).w1_oracle is None

    def test_rows_are_immutable(self):
        with pytest.raises(AttributeError):
            _rec().loss = 1.0


class TestCsvRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        records = [
            _rec(arm="qr", seed=1, epoch=0, loss=1 / 3, w1_oracle=0.1 + 0.2),
            _rec(arm="qr", seed=1, epoch=1, loss=math.pi, w1_oracle=None),
            _rec(arm="gl", seed=0, epoch=0, loss=1e-17, risk=-12.345678901234567),
        ]
        path = tmp_path / "records.csv"
        write_records_csv(str(path), records)
        back = read_records_csv(str(path))
        assert sorted(records, key=lambda r: (r.arm, r.seed, r.epoch)) == back

    def test_rows_sorted_by_arm_seed_epoch(self, tmp_path):
        records = [
            _rec(arm="z", seed=0, epoch=0),
            _rec(arm="a", seed=1, epoch=1),
            _rec(arm="a", seed=0, epoch=2),
            _rec(arm="a", seed=0, epoch=0),
        ]
        path = tmp_path / "records.csv"
        write_records_csv(str(path), records)
        keys = [(r.arm, r.seed, r.epoch) for r in read_records_csv(str(path))]
        assert keys == sorted(keys)

    def test_header_written_and_checked(self, tmp_path):
        path = tmp_path / "records.csv"
        write_records_csv(str(path), [])
        assert path.read_text().splitlines() == [",".join(RECORD_COLUMNS)]
        bad = tmp_path / "bad.csv"
        bad.write_text("arm,seed\n")
        with pytest.raises(ValueError, match="header"):
            read_records_csv(str(bad))

    def test_write_is_byte_deterministic(self, tmp_path):
        records = [_rec(seed=s, epoch=e) for s in range(3) for e in range(4)]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_records_csv(str(a), records)
        write_records_csv(str(b), list(reversed(records)))
        assert a.read_bytes() == b.read_bytes()

    def test_no_tmp_file_left_behind(self, tmp_path):
        path = tmp_path / "records.csv"
        write_records_csv(str(path), [_rec()])
        assert [p.name for p in tmp_path.iterdir()] == ["records.csv"]
