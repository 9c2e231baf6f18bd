"""Regenerate the bundled LASER-like drifter fixture.

19 buoys sampled every 15 minutes for 2 hours (9 samples each) in a
south-westward flow that converges onto a front along lat = 28.8 - 0.3 (lon + 88.6).
Positions are in degrees, velocities in m/s, times in ISO 8601 UTC.
"""
from datetime import datetime, timedelta, timezone
import csv
import os
import sys

import numpy as np

M_PER_DEG = 111_000.0


def velocity(lon, lat):
    # distance across the front, positive on the north-west side
    d = (lat - 28.8) + 0.3 * (lon + 88.6)
    conv = -0.25 * np.tanh(d / 0.02)
    return -0.2 + 0.3 * conv * 0.3, -0.15 + conv


def main(path):
    rng = np.random.default_rng(20160125)
    t0 = datetime(2016, 1, 25, tzinfo=timezone.utc)
    starts = np.column_stack([rng.uniform(-88.70, -88.50, 19), rng.uniform(28.72, 28.88, 19)])
    rows = []
    for b, (lon, lat) in enumerate(starts):
        for k in range(9):
            u, v = velocity(lon, lat)
            u += 0.02 * rng.standard_normal()
            v += 0.02 * rng.standard_normal()
            t = t0 + timedelta(minutes=15 * k)
            rows.append([f"L{b:03d}", t.strftime("%Y-%m-%dT%H:%M:%SZ"),
                         "%.6f" % lat, "%.6f" % lon, "%.4f" % u, "%.4f" % v])
            lon += u * 900.0 / (M_PER_DEG * np.cos(np.radians(lat)))
            lat += v * 900.0 / M_PER_DEG
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "time", "lat", "lon", "u", "v"])
        w.writerows(rows)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         os.path.join(os.path.dirname(__file__), "..", "src", "helmgp", "data", "laser_like.csv"))
