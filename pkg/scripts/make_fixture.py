"""Regenerate the golden g2 fixture in tests/data.

The stream is a short simulated run; the histogram comes from the O(n^2)
pair-counting reference, not from the fast kernel under test.
"""

import csv
from pathlib import Path

from ionabsorb.analysis.correlate import g2_bruteforce
from ionabsorb.sim import TrajectoryConfig, simulate
from ionabsorb.source import SourceConfig
from ionabsorb.timetags import FLUORESCENCE, HERALD, write_stream

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"
BIN_TICKS = 1_000_000  # 1 ms at 1 ns ticks
HALF_BINS = 10


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    cfg = TrajectoryConfig(scheme="B", duration=2.0, r_on=5e3, r_dark=200, pump_rate_850=5.0,
                           source=SourceConfig(pair_rate=2e5, herald_efficiency=1.0),
                           absorption_peak_rate=2.0, master_seed=20140101)
    stream, _ = simulate(cfg)
    write_stream(stream, DATA / "fixture.ttag")
    a, b = stream.ticks(HERALD).astype(int), stream.ticks(FLUORESCENCE).astype(int)
    counts = g2_bruteforce(a.tolist(), b.tolist(), BIN_TICKS, HALF_BINS * BIN_TICKS)
    with open(DATA / "fixture_g2.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("lag_s", "count"))
        for k, c in enumerate(counts):
            w.writerow((repr((k - HALF_BINS) * BIN_TICKS * stream.tick), int(c)))
    print(f"{len(stream)} records, {a.size} heralds, {b.size} fluorescence, {counts.sum()} pairs")


if __name__ == "__main__":
    main()
