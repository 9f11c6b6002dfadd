"""Per-epoch metric rows shared by the training loop and the experiment runner."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Optional

RECORD_COLUMNS = ("arm", "seed", "epoch", "loss", "w1_oracle", "risk", "b", "ms")


@dataclass(frozen=True)
class RunRecord:
    """One metrics row.

    ``w1_oracle`` is None when the environment has no oracle return
    distribution.  ``ms`` is wall-clock milliseconds for the epoch and is
    0 unless timing was explicitly enabled (timing breaks byte-for-byte
    reproducibility of the output files).  The training loop leaves
    ``arm``/``seed`` at their defaults; the runner fills them in.
    """

    epoch: int
    loss: float
    w1_oracle: Optional[float]
    risk: float
    b: float
    ms: float = 0.0
    arm: str = ""
    seed: int = 0

    def __post_init__(self):
        for name in ("loss", "risk", "b", "ms"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"RunRecord.{name} must be finite")
        if self.w1_oracle is not None and not math.isfinite(self.w1_oracle):
            raise ValueError("RunRecord.w1_oracle must be finite when present")


def write_records_csv(path: str, records: list[RunRecord]) -> None:
    """Write rows sorted by (arm, seed, epoch), atomically (tmp + rename)."""
    rows = sorted(records, key=lambda r: (r.arm, r.seed, r.epoch))
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in rows:
            writer.writerow([
                r.arm,
                r.seed,
                r.epoch,
                repr(r.loss),
                "" if r.w1_oracle is None else repr(r.w1_oracle),
                repr(r.risk),
                repr(r.b),
                repr(r.ms),
            ])
    os.replace(tmp, path)


def read_records_csv(path: str) -> list[RunRecord]:
    """Inverse of :func:`write_records_csv`; round-trips exactly."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != RECORD_COLUMNS:
            raise ValueError(f"unexpected records.csv header: {header}")
        for row in reader:
            arm, seed, epoch, loss, w1, risk, b, ms = row
            out.append(RunRecord(
                arm=arm,
                seed=int(seed),
                epoch=int(epoch),
                loss=float(loss),
                w1_oracle=None if w1 == "" else float(w1),
                risk=float(risk),
                b=float(b),
                ms=float(ms),
            ))
    return out
