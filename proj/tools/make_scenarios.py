#!/usr/bin/env python3
"""Regenerates scenarios/*.json. Run from the repository root."""
import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "scenarios"

SPEED = 1.5          # m/s cruise
ACCEL = 2.0          # m/s^2, simulator ramp_accel
BETA = 0.8           # rad/s^2 yaw acceleration
HEIGHT = 2.5         # m


def leg(distance, speed=SPEED, direction=0.0):
    # Trapezoidal profile: distance = v * (T - v / a).
    return {"kind": "horizontal", "duration": round(distance / speed + speed / ACCEL, 4),
            "magnitude": speed, "direction": direction}


def turn(angle):
    # Rest-to-rest yaw: angle = beta * (D / 2)^2.
    d = 2.0 * math.sqrt(abs(angle) / BETA)
    return {"kind": "yaw", "duration": round(d, 4), "magnitude": math.copysign(BETA, angle)}


def hover(d):
    return {"kind": "hover", "duration": d}


def array(ident, x, y, z=0.0, clock=0.0):
    return {"id": ident, "origin": [x, y, z], "layout": "respeaker6", "clock_offset": clock}


def square(side, laps=1):
    segs = [hover(2.0)]
    for lap in range(laps):
        for i in range(4):
            segs.append(leg(side))
            if i < 3:
                segs.append(turn(math.pi / 2))
    segs.append(hover(1.0))
    return segs


def base(name, segments, start, arrays, **extra):
    doc = {"name": name, "seed": 7, "profile": "mini2", "segments": segments,
           "start_position": start, "start_yaw": 0.0, "arrays": arrays, "hop": 0.1}
    doc.update(extra)
    return doc


def write(doc):
    OUT.mkdir(exist_ok=True)
    (OUT / f"{doc['name']}.json").write_text(json.dumps(doc, indent=2) + "\n")


def main():
    centre = [array("A", 0.0, 0.0)]
    write(base("hover_5s", [hover(5.0)], [2.0, 1.0, 2.0], centre))

    start10 = [-5.0, -5.0, HEIGHT]
    write(base("los_square_10m", square(10.0), start10, centre))
    # Wall between the array and the middle of the second side (x = 5): partial obstruction.
    write(base("plos_square_10m", square(10.0), start10, centre,
               obstacles=[{"min": [2.0, -0.4, 0.0], "max": [2.5, 1.2, 4.0]}]))
    # Wall hiding the whole second side and its corners.
    write(base("nlos_square_10m", square(10.0), start10, centre,
               obstacles=[{"min": [2.0, -3.0, 0.0], "max": [2.5, 3.0, 4.0]}]))

    for side in (5, 10, 15):
        h = side / 2.0
        write(base(f"range_{side}m", square(float(side)), [-h, -h, HEIGHT], centre))

    # Short L-shaped route next to a band-limited noise source 1 m from the array.
    route = [hover(2.0), leg(6.0), turn(math.pi / 2), leg(6.0), hover(1.0)]
    for f in (300, 600, 900):
        for spl in (50, 55, 60, 65):
            write(base(f"noise_{f}hz_{spl}db", route, [-3.0, -3.0, HEIGHT], centre,
                       noise_sources=[{"position": [1.0, 0.0, 0.5], "center_freq": f,
                                       "bandwidth": 100.0, "spl": spl}]))

    # 20 m corridor flight along y = 0 past four arrays with skewed clocks.
    clocks = [0.0, 0.012, -0.031, 0.047]
    xs = [0.0, 20.0 / 3.0, 40.0 / 3.0, 20.0]
    corridor = [hover(2.0), leg(20.0), hover(1.0)]
    beacon = {"low": 16000.0, "high": 20000.0, "period": 1.0, "length": 0.1, "spl": 70.0,
              "first_emission": 0.05, "speaker": [10.0, 0.0, 0.5]}
    zig = [array(f"A{i}", x, 3.0 if i % 2 else -3.0, 0.0, clocks[i]) for i, x in enumerate(xs)]
    line = [array(f"A{i}", x, -3.0, 0.0, clocks[i]) for i, x in enumerate(xs)]
    write(base("zigzag_20m", corridor, [0.0, 0.0, HEIGHT], zig, beacon=beacon))
    write(base("line_20m", corridor, [0.0, 0.0, HEIGHT], line, beacon=beacon))

    # Sync scenarios: three arrays around a hovering drone, beacon level swept.
    tri = [array("B0", 0.0, 0.0, 0.0, 0.0), array("B1", 8.0, 0.0, 0.0, 0.02), array("B2", 4.0, 7.0, 0.0, -0.05)]
    for spl in (40, 60, 70):
        b = dict(beacon, spl=float(spl), speaker=[4.0, 2.5, 0.5])
        write(base(f"beacon_vol_{spl}db", [hover(2.0), leg(4.0), hover(2.0)], [2.0, 2.0, HEIGHT], tri, beacon=b))


if __name__ == "__main__":
    main()
