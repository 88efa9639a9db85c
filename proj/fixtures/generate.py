#!/usr/bin/env python3
"""Regenerates the synthetic time-series fixtures.

step_series.csv: 15-min load/wind on a 20 MVA base. Quiet stretches of load
(13 MW +/- a daily swing) are interrupted by plateau events: a two-interval
ramp-up precursor (+0.8, +1.6 MW), a jump of 4-8 MW held for 8 intervals, then
a drop back. The first 1920 rows are training history; the 40 rows after it
form the run window and contain one event with a 6 MW jump at run step 8.

Usage: python3 generate.py  (writes next to this file)
"""

import csv
import datetime as dt
import math
import pathlib

import numpy as np

HERE = pathlib.Path(__file__).resolve().parent
STEP = dt.timedelta(minutes=15)
START = dt.datetime(2024, 3, 1, 0, 0, 0)
HISTORY = 1920
RUN = 40
PLATEAU = 8


def base_load(i):
    return 13.0 + 1.0 * math.sin(2.0 * math.pi * i / 96.0)


def build(seed=20240301):
    rng = np.random.default_rng(seed)
    n = HISTORY + RUN
    extra = np.zeros(n)

    def event(at, jump):
        extra[at - 2] += 0.8
        extra[at - 1] += 1.6
        extra[at:at + PLATEAU] += jump

    i = 30
    while i < HISTORY - 40:
        event(i, rng.uniform(4.0, 8.0))
        i += PLATEAU + int(rng.integers(30, 60))
    event(HISTORY + 8, 6.0)

    load = np.array([base_load(i) for i in range(n)]) + extra + rng.normal(0.0, 0.15, n)
    wind = np.empty(n)
    level = 2.0
    for j in range(n):
        level += 0.1 * (2.0 - level) + rng.normal(0.0, 0.12)
        wind[j] = max(0.0, level)
    return load, wind


def write(path, load, wind):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["timestamp", "load_mw", "wind_mw"])
        for j, (l, v) in enumerate(zip(load, wind)):
            t = START + j * STEP
            w.writerow([t.strftime("%Y-%m-%dT%H:%M:%SZ"), f"{l:.6f}", f"{v:.6f}"])


if __name__ == "__main__":
    load, wind = build()
    write(HERE / "step_series.csv", load, wind)
