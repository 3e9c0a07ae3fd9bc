"""Sparse moving-average predictors.

All predictors follow the same prequential contract: predict() returns
the current item -> probability map (without mutating state), then
update(o) consumes the observation. predict() at time t never depends
on the observation at t.
"""

import math
import statistics


def decay_rate(beta, beta_min):
    """Harmonic decay: 1 -> 1/2 -> 1/3 -> ..., floored at beta_min."""
    return max(1.0 / (1.0 / beta + 1.0), beta_min)


def binomial_significance(ema_pr, q_pr, q_count):
    """Binomial-tail score q_count * KL2(q_pr || ema_pr). A score of ~5
    corresponds to roughly 99% confidence that the queue proportion and
    the EMA weight disagree."""
    q, e = q_pr, ema_pr
    if q == e:
        return 0.0
    if e <= 0.0 or e >= 1.0:
        return math.inf  # q != e is impossible under a degenerate e
    kl2 = 0.0
    if q > 0.0:
        kl2 += q * math.log(q / e)
    if q < 1.0:
        kl2 += (1.0 - q) * math.log((1.0 - q) / (1.0 - e))
    return q_count * kl2


class Ema:
    """Sparse EMA over a growing item set: weaken every weight by
    (1 - beta), then boost the observed item by beta. The weight map is
    always a semi-distribution. With harmonic=True the rate decays as
    1/(1/beta + 1) down to beta_min after every update."""

    def __init__(self, beta=0.01, harmonic=False, beta_min=0.001, beta0=1.0):
        self.harmonic = harmonic
        self.beta_min = beta_min
        self.beta = beta0 if harmonic else beta
        self.weights = {}

    def get_params(self):
        return {"beta": self.beta, "harmonic": self.harmonic,
                "beta_min": self.beta_min}

    def predict(self):
        return dict(self.weights)

    def update(self, o):
        b = self.beta
        w = self.weights
        if b >= 1.0:
            w.clear()  # everything else would weaken to exactly 0
        else:
            for i in w:
                w[i] *= (1.0 - b)
        w[o] = w.get(o, 0.0) + b
        if self.harmonic:
            self.beta = decay_rate(b, self.beta_min)


class Queue:
    """Bounded list of count cells for one item, newest (cell0) first.
    Each cell holds 1 positive plus the negatives observed while it was
    the newest cell."""

    __slots__ = ("cells", "qcap")

    def __init__(self, qcap=3):
        self.cells = []
        self.qcap = qcap

    @property
    def nc(self):
        return len(self.cells)

    def positive_update(self):
        self.cells.insert(0, 1)
        if len(self.cells) > self.qcap:
            self.cells.pop()

    def negative_update(self):
        if self.cells:
            self.cells[0] += 1

    def get_count(self):
        return sum(self.cells)

    def get_pr(self):
        if len(self.cells) <= 1:
            return 0.0  # grace period
        return (len(self.cells) - 1) / (self.get_count() - 1)

    def get_pr_completed_only(self):
        # Alternative estimate that ignores the partial cell0.
        if len(self.cells) <= 2:
            return 0.0
        return (len(self.cells) - 2) / (sum(self.cells[1:]) - 1)


class Queues:
    """Per-item queues of count cells; PR read off as
    (cells - 1) / (total count - 1). A heart-beat prune keeps the map
    bounded: stale queues (cell0 count > s2) are dropped, and when the
    map reaches 2*s1 entries it is cut back to the s1 freshest."""

    def __init__(self, qcap=3, s1=100, s2=100000, prune_every=1000,
                 completed_only=False):
        self.qcap = qcap
        self.s1 = s1
        self.s2 = s2
        self.prune_every = prune_every
        self.completed_only = completed_only
        self.q_map = {}
        self.t = 0

    def get_params(self):
        return {"qcap": self.qcap, "s1": self.s1, "s2": self.s2}

    def _pr(self, q):
        return q.get_pr_completed_only() if self.completed_only else q.get_pr()

    def predict(self):
        out = {}
        for i, q in self.q_map.items():
            pr = self._pr(q)
            if pr > 0.0:
                out[i] = pr
        return out

    def update(self, o):
        if o not in self.q_map:
            self.q_map[o] = Queue(self.qcap)
        for i, q in self.q_map.items():
            if i == o:
                q.positive_update()
            else:
                q.negative_update()
        self.t += 1
        if self.prune_every and self.t % self.prune_every == 0:
            self.prune()

    def prune(self):
        """Returns the set of item ids dropped."""
        dropped = {i for i, q in self.q_map.items()
                   if q.cells and q.cells[0] > self.s2}
        for i in dropped:
            del self.q_map[i]
        if len(self.q_map) >= 2 * self.s1:
            # Freshest first: smallest cell0 count, ties to smaller id.
            keep = sorted(self.q_map, key=lambda i: (self.q_map[i].cells[0], i))
            for i in keep[self.s1:]:
                dropped.add(i)
                del self.q_map[i]
        return dropped


class SingleCellMle:
    """One-cell variant: PR is the maximum-likelihood 1/c where c counts
    the steps since the item was last observed (inclusive). Kept for its
    worst-case PR-spread properties; not a practical predictor."""

    def __init__(self):
        self.c_map = {}

    def get_params(self):
        return {}

    def predict(self):
        return {i: 1.0 / c for i, c in self.c_map.items()}

    def update(self, o):
        for i in self.c_map:
            if i != o:
                self.c_map[i] += 1
        self.c_map[o] = 1


class TimestampQueues:
    """Queues variant with O(1) updates: cells store the value of a
    per-predictor clock instead of counts, and no negative updates are
    needed. PR = (cells - 1) / (clock - oldest stamp), which matches the
    plain Queues estimate step for step."""

    REBASE_AT = 2 ** 62

    def __init__(self, qcap=3):
        self.qcap = qcap
        self.clock = 0
        self.q_map = {}  # item -> list of stamps, newest first

    def get_params(self):
        return {"qcap": self.qcap}

    def pr(self, i):
        q = self.q_map.get(i)
        if q is None or len(q) <= 1:
            return 0.0
        return (len(q) - 1) / (self.clock - q[-1])

    def predict(self):
        out = {}
        for i in self.q_map:
            p = self.pr(i)
            if p > 0.0:
                out[i] = p
        return out

    def update(self, o):
        self.clock += 1
        q = self.q_map.setdefault(o, [])
        q.insert(0, self.clock)
        if len(q) > self.qcap:
            q.pop()
        if self.clock > self.REBASE_AT:
            self._rebase()

    def _rebase(self):
        base = min(q[-1] for q in self.q_map.values())
        self.clock -= base
        for q in self.q_map.values():
            for j in range(len(q)):
                q[j] -= base


class Box:
    """Fixed window of the last K observations with exact counts;
    PR = count in window / window length."""

    def __init__(self, k=100):
        self.k = k
        self.window = []
        self.head = 0  # index of the oldest retained observation
        self.counts = {}

    def get_params(self):
        return {"k": self.k}

    @property
    def nc(self):
        return len(self.window) - self.head

    def predict(self):
        n = self.nc
        if n == 0:
            return {}
        return {i: c / n for i, c in self.counts.items()}

    def update(self, o):
        self.window.append(o)
        self.counts[o] = self.counts.get(o, 0) + 1
        if self.nc > self.k:
            old = self.window[self.head]
            self.head += 1
            self.counts[old] -= 1
            if self.counts[old] == 0:
                del self.counts[old]
            if self.head > 2 * self.k:  # compact occasionally
                self.window = self.window[self.head:]
                self.head = 0


class Dyal:
    """EMA with a per-edge learning rate and a per-edge queue. The queue
    acts as a change detector: when its proportion disagrees with the
    EMA weight by a significant binomial-tail score, the weight and rate
    are reset from the queue ("listening"); otherwise the edge follows a
    plain EMA step with harmonic rate decay down to beta_min."""

    def __init__(self, beta_min=0.01, qcap=3, sig_thresh=5.0, p_min=0.01,
                 s1=100, s2=100000, prune_every=1000):
        self.beta_min = beta_min
        self.sig_thresh = sig_thresh
        self.p_min = p_min
        self.queues = Queues(qcap=qcap, s1=s1, s2=s2, prune_every=None)
        self.prune_every = prune_every
        self.ema_map = {}
        self.rate_map = {}
        self.t = 0

    def get_params(self):
        return {"beta_min": self.beta_min, "qcap": self.queues.qcap,
                "sig_thresh": self.sig_thresh, "p_min": self.p_min}

    def predict(self):
        return dict(self.ema_map)

    def _q_info(self, i):
        q = self.queues.q_map.get(i)
        if q is None:
            return 0.0, 0
        return q.get_pr(), q.get_count()

    def _queue_rate(self, q_count):
        return min(1.0, max(1.0 / q_count, self.beta_min))

    def update(self, o):
        q_pr, q_count = self._q_info(o)  # read before the queue update
        self.queues.update(o)
        self.t += 1
        if self.prune_every and self.t % self.prune_every == 0:
            for i in self.queues.prune():
                self.ema_map.pop(i, None)
                self.rate_map.pop(i, None)
        free = self.weaken_edges(o)
        if q_pr == 0.0:
            return  # o is currently noise-level; queue only
        ema_pr = self.ema_map.get(o, 0.0)
        if self._significantly_high(ema_pr, q_pr, q_count):
            self.rate_map[o] = self._queue_rate(q_count)
            delta = min(q_pr - ema_pr, free)
        else:
            beta = self.rate_map[o]
            delta = min((1.0 - ema_pr) * beta, free)
            self.rate_map[o] = decay_rate(beta, self.beta_min)
        self.ema_map[o] = ema_pr + delta

    def _significantly_high(self, ema_pr, q_pr, q_count):
        if ema_pr == 0.0:
            return True
        if q_pr <= ema_pr:
            return False
        return binomial_significance(ema_pr, q_pr, q_count) >= self.sig_thresh

    def _significantly_low(self, ema_pr, q_pr, q_count):
        if ema_pr <= q_pr:
            return False
        return binomial_significance(ema_pr, q_pr, q_count) >= self.sig_thresh

    def weaken_edges(self, o):
        """Weaken every edge except o's, possibly resetting an edge from
        its queue, and drop edges that have sunk below p_min. Returns the
        free mass 1 - (surviving weight, including o's untouched weight)."""
        used = 0.0
        for i in list(self.rate_map):
            if i == o:
                used += self.ema_map[i]
                continue
            q_pr, q_count = self._q_info(i)
            if max(self.ema_map[i], q_pr) < self.p_min:
                del self.ema_map[i]
                del self.rate_map[i]
                continue
            if self._significantly_low(self.ema_map[i], q_pr, q_count):
                if q_pr > 0.0:
                    self.ema_map[i] = q_pr
                else:
                    del self.ema_map[i]
                    del self.rate_map[i]
                    continue
                self.rate_map[i] = self._queue_rate(q_count)
            else:
                beta = self.rate_map[i]
                self.ema_map[i] *= (1.0 - beta)
                self.rate_map[i] = decay_rate(beta, self.beta_min)
            used += self.ema_map[i]
        return max(0.0, 1.0 - used)

    def max_rate(self):
        return max(self.rate_map.values(), default=0.0)

    def median_rate(self):
        if not self.rate_map:
            return 0.0
        return statistics.median(self.rate_map.values())
