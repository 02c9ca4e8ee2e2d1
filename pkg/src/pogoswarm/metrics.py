"""Metrics recomputed from traces alone.

Everything here works off the record stream, never off live world state:
a metrics report from a file equals the one the run would have produced,
which is the whole point of keeping traces canonical.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

from .geometry import Pose2D
from .irnet import ChannelParams, MsgType, reachable_faces

HOP_SENTINEL = 255
NEIGHBOR_WINDOW_S = 1.0


@dataclass(frozen=True, slots=True)
class MetricRow:
    name: str
    tick: int
    value: float


def _start_config(records: list[dict]) -> dict | None:
    for rec in records:
        if rec["kind"] == "meta" and rec["data"].get("event") == "start":
            return rec["data"]["config"]
    return None


def _sample_ticks(records: list[dict], sample_every: int) -> list[int]:
    last = records[-1]["tick"] if records else 0
    return list(range(0, last + 1, sample_every))


def compute_metrics(records: list[dict]) -> list[MetricRow]:
    config = _start_config(records)
    if config is None:
        return []
    sample_every = config["sample_every"]
    dt = config["dt"]
    n_robots = len(config["robots"])
    samples = _sample_ticks(records, sample_every)
    rows: list[MetricRow] = []

    # deliveries: frame_rx plus radio-carried signals; drops: every frame_drop
    delivered_ticks = []
    dropped_ticks = []
    rx_events = []  # (tick, receiver, sender)
    for rec in records:
        kind = rec["kind"]
        if kind == "frame_rx":
            delivered_ticks.append(rec["tick"])
            rx_events.append((rec["tick"], rec["entity"], rec["data"]["sender"]))
        elif kind == "signal" and "sender" in rec["data"]:
            delivered_ticks.append(rec["tick"])
            rx_events.append((rec["tick"], rec["entity"], rec["data"]["sender"]))
        elif kind == "frame_drop":
            dropped_ticks.append(rec["tick"])
    delivered_ticks.sort()
    dropped_ticks.sort()

    di = wi = 0
    prev = -1
    window_ticks = max(1, int(round(NEIGHBOR_WINDOW_S / dt)))
    for s in samples:
        d = 0
        while di < len(delivered_ticks) and delivered_ticks[di] <= s:
            if delivered_ticks[di] > prev:
                d += 1
            di += 1
        w = 0
        while wi < len(dropped_ticks) and dropped_ticks[wi] <= s:
            if dropped_ticks[wi] > prev:
                w += 1
            wi += 1
        rows.append(MetricRow("delivered_frames", s, float(d)))
        rows.append(MetricRow("dropped_frames", s, float(w)))
        prev = s

    if n_robots:
        rx_events.sort()
        lo = hi = 0
        for s in samples:
            start = s - window_ticks
            while lo < len(rx_events) and rx_events[lo][0] <= start:
                lo += 1
            while hi < len(rx_events) and rx_events[hi][0] <= s:
                hi += 1
            neighbors: dict[int, set[int]] = {}
            for tick, receiver, sender in rx_events[lo:hi]:
                if sender < n_robots and receiver < n_robots:
                    neighbors.setdefault(receiver, set()).add(sender)
            degree = sum(len(v) for v in neighbors.values()) / n_robots
            rows.append(MetricRow("mean_neighbor_count", s, degree))

    hop_tick = hop_convergence_tick(records, config)
    if hop_tick is not None:
        rows.append(MetricRow("hop_convergence_tick", hop_tick, float(hop_tick)))
    return rows


def communication_graph(config: dict) -> list[set[int]]:
    """Static who-can-hear-whom adjacency from a run's start configuration."""
    channel = ChannelParams(
        range_m=config["channel"]["range"],
        tx_half_angle=config["channel"]["tx_half_angle"],
        rx_half_angle=config["channel"]["rx_half_angle"],
        bitrate=config["channel"]["bitrate"],
        collision_policy=config["channel"]["collision_policy"],
    )
    robots = config["robots"]
    poses = [Pose2D(r["x"], r["y"], r["theta"]) for r in robots]
    radii = [r["radius"] for r in robots]
    arena = config["arena"]
    segments = [((w["p1"][0], w["p1"][1]), (w["p2"][0], w["p2"][1]))
                for w in config.get("walls", [])]
    segments += [
        (tuple(arena[i]), tuple(arena[(i + 1) % len(arena)]))
        for i in range(len(arena))
    ]
    discs = [(poses[i].x, poses[i].y, radii[i], i) for i in range(len(robots))]
    discs += [(o["x"], o["y"], o["radius"], -1 - k)
              for k, o in enumerate(config.get("objects", []))]
    adjacency: list[set[int]] = [set() for _ in robots]
    for u in range(len(robots)):
        for v in range(len(robots)):
            if u == v:
                continue
            occ = [(x, y, r) for x, y, r, owner in discs if owner not in (u, v)]
            for face in range(4):
                if reachable_faces(poses[u], face, poses[v], channel,
                                   occ, tuple(segments)):
                    adjacency[u].add(v)
                    break
    return adjacency


def bfs_hops(adjacency: list[set[int]], seeds: list[int]) -> list[int]:
    hops = [HOP_SENTINEL] * len(adjacency)
    frontier = list(seeds)
    for s in seeds:
        hops[s] = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in adjacency[u]:
                if hops[u] + 1 < hops[v]:
                    hops[v] = hops[u] + 1
                    nxt.append(v)
        frontier = nxt
    return hops


def hop_convergence_tick(records: list[dict], config: dict | None = None) -> int | None:
    """First tick at which every robot's advertised hop matches BFS distance.

    Advertisements are the single-byte user frames the gradient demo sends;
    a run without any hop_gradient robots yields None, a run that never
    converges yields -1.
    """
    if config is None:
        config = _start_config(records)
    if config is None:
        return None
    robots = config["robots"]
    gradient_ids = [r["id"] for r in robots if r["program"] == "hop_gradient"]
    if not gradient_ids:
        return None
    seeds = [r["id"] for r in robots if r["program"] == "hop_gradient"
             and r["params"].get("seed")]
    adjacency = communication_graph(config)
    oracle = bfs_hops(adjacency, seeds)

    current: dict[int, int] = {}
    matched = 0
    target = len(gradient_ids)
    want = {i: oracle[i] for i in gradient_ids}
    for rec in records:
        if rec["kind"] != "frame_tx":
            continue
        entity = rec["entity"]
        if entity not in want:
            continue
        data = rec["data"]
        if data["msg_type"] != int(MsgType.USER) or len(data["payload"]) != 2:
            continue
        hop = int(data["payload"], 16)
        old = current.get(entity)
        if old == hop:
            continue
        if old is not None and old == want[entity]:
            matched -= 1
        current[entity] = hop
        if hop == want[entity]:
            matched += 1
            if matched == target:
                return rec["tick"]
    return -1


def live_metric_rows(records: list[dict]) -> list[MetricRow]:
    """The delivered/dropped counters the run emitted while it happened."""
    rows = []
    for rec in records:
        if rec["kind"] == "metric":
            rows.append(MetricRow("delivered_frames", rec["tick"],
                                  float(rec["data"]["delivered"])))
            rows.append(MetricRow("dropped_frames", rec["tick"],
                                  float(rec["data"]["dropped"])))
    return rows


def write_metrics_csv(rows: list[MetricRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "tick", "value"])
        for row in rows:
            value = row.value
            text = repr(int(value)) if float(value).is_integer() else repr(value)
            writer.writerow([row.name, row.tick, text])


def read_metrics_csv(path: str) -> list[MetricRow]:
    rows = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for name, tick, value in reader:
            rows.append(MetricRow(name, int(tick), float(value)))
    return rows
