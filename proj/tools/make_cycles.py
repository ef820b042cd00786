#!/usr/bin/env python3
"""Regenerates the bundled synthetic stop-and-go lead-vehicle cycles."""
import math
import sys
from pathlib import Path

# (idle s, peak m/s, accel s, cruise s, decel s)
SHORT = [(8, 11.0, 14, 25, 12), (10, 17.0, 22, 45, 18), (8, 8.0, 10, 20, 9), (10, 14.0, 18, 30, 14)]
LONG = [(8, 11.0, 14, 25, 12), (10, 17.0, 22, 45, 18), (8, 8.0, 10, 20, 9), (10, 20.0, 26, 60, 20),
        (12, 13.0, 16, 35, 13), (9, 6.0, 8, 15, 7), (10, 15.0, 20, 40, 16), (8, 10.0, 12, 22, 10)]


def build(trips, duration):
    v = []
    for idle, peak, acc, cruise, dec in trips:
        v += [0.0] * idle
        v += [peak * 0.5 * (1 - math.cos(math.pi * t / acc)) for t in range(acc)]
        v += [peak * (1 + 0.06 * math.sin(2 * math.pi * t / max(cruise, 1))) for t in range(cruise)]
        v += [peak * 0.5 * (1 + math.cos(math.pi * t / dec)) for t in range(dec)]
    if len(v) > duration:
        sys.exit(f"trips exceed {duration} s ({len(v)})")
    v += [0.0] * (duration - len(v))
    return v


def write(path, v):
    with open(path, "w") as f:
        f.write("t,v\n")
        for t, s in enumerate(v):
            f.write(f"{t},{s:.4f}\n")


if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data/cycles")
    out.mkdir(parents=True, exist_ok=True)
    write(out / "stopgo_300.csv", build(SHORT, 300))
    write(out / "stopgo_600.csv", build(LONG, 600))
