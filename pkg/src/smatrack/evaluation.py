"""Scoring of prediction streams: the noise referee, bounded log-loss,
quadratic loss, deviation rates, the optimal-loss oracle, and paired
sign tests."""

import bisect
import math
from collections import deque

from scipy.stats import binomtest

from .sd_core import FcConfig, filter_cap


class Referee:
    """Third-party noise marker: an observation is flagged NS while its
    prior occurrence count is at most c_ns. With a window limit W set,
    counts cover only the last W observations."""

    def __init__(self, c_ns=2, window=None):
        self.c_ns = c_ns
        self.window = window
        self.recent_freq = {}
        self._recent = deque() if window else None

    def is_ns(self, o):
        flagged = self.recent_freq.get(o, 0) <= self.c_ns
        self.recent_freq[o] = self.recent_freq.get(o, 0) + 1
        if self.window:
            self._recent.append(o)
            if len(self._recent) > self.window:
                old = self._recent.popleft()
                self.recent_freq[old] -= 1
                if self.recent_freq[old] == 0:
                    del self.recent_freq[old]
        return flagged


def logloss_rule_ns(o, q, marked_ns, cfg=FcConfig()):
    """Bounded log-loss of one prediction. The raw map is filter-capped;
    a hit scores -ln of the capped weight, a miss scores -ln p_ns, and a
    miss the referee marked as noise scores -ln of the unallocated mass
    (at least p_ns by construction). Always in [0, -ln p_ns]."""
    qp = filter_cap(q, cfg)
    prob = qp.get(o, 0.0)
    if prob >= cfg.p_min and prob > 0.0:
        return -math.log(prob)
    if not marked_ns:
        return -math.log(cfg.p_ns)
    return -math.log(1.0 - sum(qp.values()))


def avg_logloss_ns(preds, obs, referee, cfg=FcConfig()):
    if len(preds) != len(obs):
        raise ValueError("preds and obs must have equal length")
    if not obs:
        return 0.0
    total = 0.0
    for q, o in zip(preds, obs):
        total += logloss_rule_ns(o, q, referee.is_ns(o), cfg)
    return total / len(obs)


def quad_rule(q, o, cfg=FcConfig()):
    """Quadratic (Brier-style) loss against the one-hot outcome, applied
    to the filter-capped map; in [0, 2]."""
    qp = filter_cap(q, cfg)
    loss = (1.0 - qp.get(o, 0.0)) ** 2
    for i, v in qp.items():
        if i != o:
            loss += v * v
    return loss


def deviates(p_hat, tp, d):
    """1 iff the estimate is zero or off from the true probability by
    more than a factor of d in either direction."""
    if tp <= 0.0:
        raise ValueError("tp must be positive")
    if p_hat == 0.0:
        return 1
    return 1 if max(tp / p_hat, p_hat / tp) > d else 0


def dev_rate(estimates, tp, d):
    if len(estimates) == 0:
        return 0.0
    return sum(deviates(p, tp, d) for p in estimates) / len(estimates)


def multidev(o, q, p, d, mode, p_min=0.01):
    """Multi-item deviation score for one time step. obs mode scores the
    observed item only (a noise observation deviates iff the predictor
    gives it salient mass); any mode is the max over the true support."""
    if mode == "obs":
        if o in p:
            return deviates(q.get(o, 0.0), p[o], d)
        return 1 if q.get(o, 0.0) >= p_min else 0
    if mode == "any":
        return max((deviates(q.get(i, 0.0), p[i], d) for i in p), default=0)
    raise ValueError("mode must be 'obs' or 'any'")


class Schedule:
    """Ground-truth SD per time step: a list of (start_t, sd) with
    strictly increasing 1-based start times."""

    def __init__(self, entries):
        self.entries = list(entries)
        self._starts = [s for s, _ in self.entries]

    def at(self, t):
        k = bisect.bisect_right(self._starts, t) - 1
        if k < 0:
            raise ValueError("time %d precedes the schedule" % t)
        return self.entries[k][1]


def optimal_logloss(obs, schedule):
    """Mean loss of the generating distribution itself: -ln P(o) for
    salient observations, -ln u(P) for noise."""
    if not obs:
        return 0.0
    total = 0.0
    for t, o in enumerate(obs, start=1):
        p = schedule.at(t)
        if o in p:
            total += -math.log(p[o])
        else:
            total += -math.log(1.0 - sum(p.values()))
    return total / len(obs)


def sign_test(losses_a, losses_b):
    """Per-sequence paired comparison: (wins_a, wins_b, ties, p_value)
    where a win is a strictly lower loss and the p-value is a two-sided
    exact binomial test with ties dropped."""
    if len(losses_a) != len(losses_b):
        raise ValueError("paired loss lists must have equal length")
    wins_a = sum(1 for a, b in zip(losses_a, losses_b) if a < b)
    wins_b = sum(1 for a, b in zip(losses_a, losses_b) if b < a)
    ties = len(losses_a) - wins_a - wins_b
    n = wins_a + wins_b
    p_value = 1.0 if n == 0 else binomtest(wins_a, n, 0.5).pvalue
    return wins_a, wins_b, ties, p_value
