#!/usr/bin/env python3
"""Regenerates the scenario templates in scenarios/.

usage: make_scenarios.py [OUT_DIR]
"""
import json
import os
import sys

MiB = 1 << 20
GiB = 1 << 30


def wl(pattern, op, size, streams=1, rate=None, whole=None):
    return {"pattern": pattern, "op": op, "request_size": size, "streams": streams,
            "rate_limit": rate, "whole_file": whole, "extent_bytes": GiB}


def scen(name, clients, duration=600, server=None, tuner=None):
    s = {
        "name": name,
        "sim": {"duration_s": duration, "tick_ms": 10, "seed": 1, "page_size": 4096, "flush_age_s": 1.0},
        "server": {"capacity": 1.25e9, "rpc_overhead": 0.0004, "rtt": 0.0005, "extent_overhead": 2e-05,
                   "congestion_knee": 128.0 * MiB, "congestion_exponent": 2.0},
        "tuner": {"enabled": True, "period_s": 10.0, "improve_eps": 0.02, "contention_drop": 0.3,
                  "supply_hold": 0.9, "idle_threshold": 1e6, "mppr_bounds": [16, 4096], "mrif_bounds": [1, 256],
                  "initial_direction": "multiply", "initial_param": "max_pages_per_rpc",
                  "direction_memory": "per_param"},
        "defaults": {"max_pages_per_rpc": 256, "max_rpcs_in_flight": 8},
        "clients": clients,
    }
    if server:
        s["server"].update(server)
    if tuner:
        s["tuner"].update(tuner)
    return s


def client(cid, phases, max_dirty=256 * MiB, params=None):
    c = {"id": cid, "max_dirty_bytes": max_dirty}
    if params:
        c["params"] = params
    c["schedule"] = [{"start_s": float(t), "workload": w} for t, w in phases]
    return c


STANDALONE = {
    "seqwrite-1m": wl("sequential", "write", MiB),
    "seqwrite-8k": wl("sequential", "write", 8192),
    "randwrite-1m": wl("random", "write", MiB),
    "randwrite-8k": wl("random", "write", 8192),
    "randwrite-16m": wl("random", "write", 16 * MiB),
    "fivestream-randwrite-1m": wl("random", "write", MiB, 5),
    "fivestream-randwrite-8k": wl("random", "write", 8192, 5),
    "fivestream-seqwrite-1m": wl("sequential", "write", MiB, 5),
    "fivestream-seqwrite-16m": wl("sequential", "write", 16 * MiB, 5),
    "seqrw-1m": wl("sequential", "readwrite", MiB),
    "randrw-1m": wl("random", "readwrite", MiB),
    "wholefile-write-16m": wl("sequential", "write", 16 * MiB, 1, None, GiB),
    "wholefile-rw-16m": wl("sequential", "readwrite", 16 * MiB, 1, None, GiB),
}

DYNAMIC = [
    wl("sequential", "write", MiB),
    wl("random", "readwrite", MiB),
    wl("random", "write", 8192, 5),
    wl("sequential", "readwrite", 16 * MiB),
    wl("random", "write", 16 * MiB),
    wl("sequential", "readwrite", MiB),
    wl("random", "write", MiB, 5),
]

MULTI = [
    ("node1", wl("random", "write", MiB, 5)),
    ("node2", wl("random", "write", MiB)),
    ("node3", wl("random", "readwrite", MiB)),
    ("node4", wl("sequential", "readwrite", MiB)),
    ("node5", wl("sequential", "readwrite", MiB, 1, None, GiB)),
]

# Four storage servers behind 10 Gb links, folded into one queue.
FOUR_SERVERS = {"capacity": 5e9}


def templates():
    out = {}
    for n, w in STANDALONE.items():
        out["standalone-" + n] = scen("standalone-" + n, [client("node1", [(0, w)])])
    out["dynamic-6x300"] = scen("dynamic-6x300", [client("node1", [(300 * i, w) for i, w in enumerate(DYNAMIC)])],
                                duration=2100)
    out["multiclient-5"] = scen("multiclient-5", [client(c, [(0, w)]) for c, w in MULTI], server=FOUR_SERVERS)
    # node1 writes faster than the server drains it once its window doubles
    hog = client("node1", [(0, wl("sequential", "write", 16 * MiB, 1, 1.5e9))], max_dirty=16 * GiB,
                 params={"max_pages_per_rpc": 4096, "max_rpcs_in_flight": 8})
    out["multiclient-5-contention"] = scen("multiclient-5-contention",
                                           [hog] + [client(c, [(0, w)]) for c, w in MULTI[1:]],
                                           server=FOUR_SERVERS, tuner={"initial_param": "max_rpcs_in_flight"})
    return out


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "scenarios")
    for name, s in templates().items():
        with open(os.path.join(out_dir, name + ".json"), "w") as f:
            json.dump(s, f, indent=2)
            f.write("\n")


if __name__ == "__main__":
    main()
