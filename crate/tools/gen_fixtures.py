#!/usr/bin/env python3
"""Regenerates the hand-built scenes under fixtures/."""

import json
import math
from pathlib import Path

RES = 1.9
OUT = Path(__file__).resolve().parent.parent / "fixtures"


def r(v):
    return round(v, 6)


def node_rows(n_rows, cols):
    return [[{"col": c, "x": r(i * RES), "y": r(c * RES)} for c in cols] for i in range(n_rows)]


def obj(id_, cat, x, y, speed, heading):
    return {"id": id_, "category": cat, "x": r(x), "y": r(y), "speed": speed, "heading": r(heading)}


def write_json(name, value):
    (OUT / name).write_text(json.dumps(value, indent=1) + "\n")


def write_lines(name, lines):
    (OUT / name).write_text("".join(json.dumps(l, separators=(",", ":")) + "\n" for l in lines))


def intersection():
    # four-lane approach to an intersection, lanes centred on cols -3, -1, 1, 3
    length, half = 76.0, 7.6
    rows = int(length / RES + 1e-9) + 1
    return {
        "coords": "local",
        "origin": {"lat": 39.98, "lon": 116.32},
        "centerlines": {"main": [[0, 0], [length, 0]]},
        "sampling": {"centerline": "main", "half_width": half, "resolution": RES},
        "statics": [
            {"kind": "curb", "geometry": {"polyline": [[0, half], [length, half]]}},
            {"kind": "curb", "geometry": {"polyline": [[0, -half], [length, -half]]}},
            {"kind": "solid_lane_line", "geometry": {"polyline": [[0, 0], [length, 0]]}},
            {"kind": "pothole", "geometry": {"point": [49.4, -1.9]}},
        ],
        "maneuver_sets": {
            "left": {"rows": node_rows(rows, range(1, 4))},
            "straight": {"rows": node_rows(rows, range(0, 3))},
            "right": {"rows": node_rows(rows, range(-3, 2))},
        },
        "destinations": {"left": [length, 5.7], "straight": [length, 1.9], "right": [length, -5.7]},
        "units": {"rsu-1": [0.0, 10.0], "rsu-2": [length, 10.0]},
        "road_polygon": [[0, -half], [length, -half], [length, half], [0, half]],
    }


def intersection_frames():
    frames = []
    for t in range(4):
        frames.append({
            "t": float(t),
            "dynamics": [
                obj("icv", "small_vehicle", 4 + 8 * t, 1.9, 8.0, 0.0),
                obj("hdv-1", "large_vehicle", -5 + 14 * t, -5.7, 14.0, 0.0),
                obj("ped-1", "pedestrian", 30.0, 9.5 - 1.2 * t, 1.2, -math.pi / 2),
                obj("nm-1", "non_motorized", 20 + 4 * t, -7.0, 4.0, 0.0),
                obj("car-p", "small_vehicle", 60.0, 5.7, 0.0, 0.0),
            ],
        })
    return frames


def quant_map():
    # three lanes (cols -2, 0, 2); ego lane blocked by a roadblock and a collision
    length, half = 80.0, 5.7
    rows = int(length / RES + 1e-9) + 1
    end = r((rows - 1) * RES)
    return {
        "coords": "local",
        "origin": {"lat": 39.98, "lon": 116.32},
        "centerlines": {"main": [[0, 0], [length, 0]]},
        "sampling": {"centerline": "main", "half_width": half, "resolution": RES},
        "statics": [
            {"kind": "curb", "geometry": {"polyline": [[0, half], [length, half]]}},
            {"kind": "curb", "geometry": {"polyline": [[0, -half], [length, -half]]}},
            {"kind": "roadblock", "geometry": {"point": [28.0, 0.0]}},
        ],
        "maneuver_sets": {"left": {"rows": node_rows(rows, range(0, 4))}},
        "destinations": {"left": [end, 3.8]},
        "units": {"rsu-1": [30.0, 8.0]},
        "road_polygon": [[0, -half], [length, -half], [length, half], [0, half]],
    }


def quant_scenario():
    header = {
        "map_prior": "quant_leftturn_map.json",
        "lane": [[0, 0], [80, 0]],
        "icv": "icv",
        "hazard": "ped",
        "maneuver": "left",
    }
    frame = {
        "t": 0.0,
        "dynamics": [
            obj("icv", "small_vehicle", 2.0, 0.0, 8.0, 0.0),
            obj("veh-a", "small_vehicle", 30.5, 0.3, 0.0, 0.2),
            obj("veh-b", "small_vehicle", 32.0, -0.4, 0.0, -0.3),
            obj("veh-rl", "large_vehicle", -6.0, 3.8, 9.0, 0.0),
            obj("ped", "pedestrian", 60.0, 12.0, 1.5, -math.pi / 2),
        ],
    }
    return [header, frame]


def main():
    OUT.mkdir(exist_ok=True)
    write_json("intersection_dair.json", intersection())
    write_lines("intersection_frames.jsonl", intersection_frames())
    write_json("quant_leftturn_map.json", quant_map())
    write_lines("quant_leftturn.jsonl", quant_scenario())


if __name__ == "__main__":
    main()
