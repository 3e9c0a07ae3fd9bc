"""Synthetic stream generators with known ground truth.

All randomness comes from numpy's default_rng (PCG64); identical seed
and config give byte-identical streams. Salient items use small integer
ids; noise observations get globally unique ids offset by 2**32 so
tests can tell the two apart cheaply.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .evaluation import Schedule

NOISE_BASE = 2 ** 32


@dataclass
class GenConfig:
    p_min: float = 0.01
    p_ns: float = 0.01
    p_max: float = 1.0
    o_min: int = 50      # min occurrences of every salient item per period
    l_min: int = 0       # min length of a stable period
    recycle: bool = False
    desired_len: int = 10000
    start_high: bool = True  # oscillate mode starts at the high rate

    def __post_init__(self):
        if self.p_min + self.p_ns >= 1.0:
            raise ValueError("p_min + p_ns must be below 1")
        if not (self.p_min < self.p_max <= 1.0):
            raise ValueError("p_max must be in (p_min, 1]")


class ItemAllocator:
    """Hands out fresh salient ids (1, 2, ...) and unique noise ids."""

    def __init__(self):
        self.next_salient = 1
        self.next_noise = NOISE_BASE

    def fresh(self):
        i = self.next_salient
        self.next_salient += 1
        return i

    def noise(self):
        i = self.next_noise
        self.next_noise += 1
        return i


@dataclass
class GeneratedStream:
    observations: list
    schedule: Schedule


def gen_binary_stationary(tp, n, rng):
    """n iid draws of item 1 with probability tp, else item 0."""
    if not (0.0 < tp <= 1.0):
        raise ValueError("tp must be in (0, 1]")
    obs = (rng.random(n) < tp).astype(int).tolist()
    sd = {1: tp}
    if tp < 1.0:
        sd[0] = 1.0 - tp
    sched = Schedule([(1, sd)])
    return GeneratedStream(obs, sched)


def gen_single_nonstationary(mode, cfg, n, rng):
    """Binary stream whose item-1 probability changes between stable
    periods. A period may end only once item 1 has been seen at least
    o_min times and the period is long enough: o_min/0.025 steps in
    oscillate mode (rates alternate 0.25 <-> 0.025), l_min in uniform
    mode (each new rate drawn from U(0.01, 1.0))."""
    if mode not in ("oscillate", "uniform"):
        raise ValueError("mode must be 'oscillate' or 'uniform'")
    obs = []
    entries = []
    high = cfg.start_high
    while len(obs) < n:
        if mode == "oscillate":
            tp = 0.25 if high else 0.025
            high = not high
            min_len = math.ceil(cfg.o_min / 0.025)
        else:
            tp = rng.uniform(0.01, 1.0)
            min_len = cfg.l_min
        entries.append((len(obs) + 1, {1: tp, 0: 1.0 - tp}))
        seen = 0
        plen = 0
        while (seen < cfg.o_min or plen < min_len) and len(obs) < n:
            o = 1 if rng.random() < tp else 0
            obs.append(o)
            plen += 1
            seen += o
    return GeneratedStream(obs[:n], Schedule(entries))


def gen_sd(cfg, rng, alloc):
    """Draw a fresh SD: probabilities drawn uniformly from the remaining
    mass (capped at p_max, floored at p_min) until less than
    p_ns + p_min is left. recycle reassigns a shuffled permutation to
    items 1..k; otherwise every item id is brand new."""
    probs = []
    left = 1.0
    while left > cfg.p_ns + cfg.p_min:
        pmax = min(left - cfg.p_ns, cfg.p_max)
        p = rng.uniform(cfg.p_min, pmax)
        probs.append(p)
        left -= p
    if cfg.recycle:
        order = rng.permutation(len(probs))
        return {i + 1: probs[order[i]] for i in range(len(probs))}
    return {alloc.fresh(): p for p in probs}


def draw_item(p, rng, alloc):
    """Sample a salient item proportional to its probability, or a fresh
    unique noise id with the unallocated probability."""
    x = rng.random()
    acc = 0.0
    for i, pr in p.items():
        acc += pr
        if x < acc:
            return i
    return alloc.noise()


def gen_subseq(p, cfg, rng, alloc):
    """Draw iid from p until every salient item has at least o_min
    occurrences and the length is at least l_min."""
    if not p:
        raise ValueError("cannot draw from an empty SD")
    counts = dict.fromkeys(p, 0)
    seq = []
    while min(counts.values()) < cfg.o_min or len(seq) < cfg.l_min:
        o = draw_item(p, rng, alloc)
        seq.append(o)
        if o in counts:
            counts[o] += 1
    return seq


def gen_sequence(cfg, rng):
    """Concatenate stable subsequences, regenerating the SD each time,
    until the stream reaches desired_len."""
    alloc = ItemAllocator()
    obs = []
    entries = []
    while len(obs) < cfg.desired_len:
        p = gen_sd(cfg, rng, alloc)
        entries.append((len(obs) + 1, p))
        obs.extend(gen_subseq(p, cfg, rng, alloc))
    return GeneratedStream(obs, Schedule(entries))


def stream_to_text(stream):
    """Item-per-line export of the observations."""
    return "".join("%d\n" % o for o in stream.observations)


def schedule_to_csv(schedule):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["start_t", "item_id", "prob"])
    for start_t, sd in schedule.entries:
        for i in sorted(sd):
            w.writerow([start_t, i, repr(sd[i])])
    return buf.getvalue()


def stream_from_text(obs_text, schedule_csv=None):
    obs = [int(line) for line in obs_text.splitlines() if line.strip()]
    sched = None
    if schedule_csv is not None:
        rows = list(csv.reader(io.StringIO(schedule_csv)))[1:]
        by_start = {}
        for row in rows:
            if not row:
                continue
            by_start.setdefault(int(row[0]), {})[int(row[1])] = float(row[2])
        sched = Schedule(sorted(by_start.items()))
    return GeneratedStream(obs, sched)
