"""Sparse probability maps and the filter-and-cap transform.

A probability map ("PR map") is a plain dict: item id -> probability
weight. Zero-valued entries are never stored, so membership doubles as
a positivity test. A semi-distribution (SD) is a PR map whose values
sum to at most 1; the remainder u = 1 - sum is implicit noise mass.
"""

import csv
import io
import math
from dataclasses import dataclass

# Slack on the SD sum invariant. Violations beyond this are programming
# errors, not data errors.
SUM_SLACK = 1e-12


@dataclass(frozen=True)
class FcConfig:
    p_min: float = 0.01  # filter threshold: entries below this are dropped
    p_ns: float = 0.01   # mass reserved for not-seen/noise items

    def __post_init__(self):
        if not (0.0 <= self.p_min < 1.0 and 0.0 <= self.p_ns < 1.0):
            raise ValueError("p_min and p_ns must be in [0, 1)")


def allocated(m):
    """Total mass a(Q) of a probability map."""
    return sum(m.values())


def unallocated(m):
    """Implicit noise mass u(Q) = 1 - a(Q)."""
    return 1.0 - allocated(m)


def is_semi_distribution(m):
    return all(0.0 < v <= 1.0 for v in m.values()) and \
        allocated(m) <= 1.0 + SUM_SLACK


def scale_drop(m, alpha, p_min):
    """Scale every value by alpha, dropping entries that land below p_min."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    out = {}
    for i, v in m.items():
        s = alpha * v
        if s >= p_min:
            out[i] = s
    return out


def filter_cap(m, cfg=FcConfig()):
    """Filter-and-cap: drop sub-p_min entries, then scale down if needed
    so the sum is at most 1 - p_ns. Output is a semi-distribution with
    min value >= p_min; idempotent."""
    q = scale_drop(m, 1.0, cfg.p_min)
    s = sum(q.values())
    if s <= 1.0 - cfg.p_ns + SUM_SLACK:
        return q
    return scale_drop(q, (1.0 - cfg.p_ns) / s, cfg.p_min)


def augment(p):
    """Turn an SD into a full distribution by assigning the unallocated
    mass to the reserved item 0. A zero-mass entry is omitted."""
    if not p:
        raise ValueError("cannot augment an empty map")
    u = unallocated(p)
    out = dict(p)
    if u > 0.0:
        out[0] = u + out.get(0, 0.0)
    return out


def entropy(p):
    """Entropy -sum p_i ln p_i of a non-empty SD."""
    if not p:
        raise ValueError("entropy of an empty map")
    return -sum(v * math.log(v) for v in p.values())


def kl(p, q):
    """KL divergence over sup(P). Returns math.inf when some P(i) > 0
    has Q(i) = 0; callers that aggregate must use kl_bounded instead."""
    if not p:
        raise ValueError("kl with empty first argument")
    total = 0.0
    for i, pv in p.items():
        qv = q.get(i, 0.0)
        if qv == 0.0:
            return math.inf
        total += pv * math.log(pv / qv)
    return total


def kl_bounded(p, q, p_ns):
    """KL with denominators floored at p_ns: sum p_i ln(p_i / max(q_i, p_ns)).
    Finite for p_ns > 0; can be negative."""
    if not p:
        raise ValueError("kl_bounded with empty first argument")
    total = 0.0
    for i, pv in p.items():
        qv = max(q.get(i, 0.0), p_ns)
        if qv == 0.0:
            return math.inf
        total += pv * math.log(pv / qv)
    return total


def kl_ns(p, q, cfg=FcConfig()):
    """Bounded KL between augmented P and the augmented filter-capped Q.
    This is the divergence part of the bounded log-loss."""
    fq = filter_cap(q, cfg)
    # An empty capped map is pure noise: all mass on the reserved item.
    aq = augment(fq) if fq else {0: 1.0}
    return kl_bounded(augment(p), aq, cfg.p_ns)


def logloss_ns_expected(p, q, cfg=FcConfig()):
    """Expected bounded log-loss of predicting Q when P generates the data."""
    return entropy(augment(p)) + kl_ns(p, q, cfg)


def distortion_threshold(p_ns):
    """The probability level p0 solving p_ns = p0 * (1-p0)^((1-p0)/p0),
    found by bisection to 1e-10. Below p0 an item's mass can be shifted
    to noise profitably under the bounded scoring; p0 is between 2*p_ns
    and e*p_ns for small p_ns."""
    if not (0.0 < p_ns < 0.5):
        raise ValueError("p_ns must be in (0, 0.5)")

    def f(p):
        return p * (1.0 - p) ** ((1.0 - p) / p) - p_ns

    lo, hi = p_ns, 1.0 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < 1e-10:
            break
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sd_to_csv(m):
    """Serialize a probability map as `item_id,prob` rows sorted by id."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["item_id", "prob"])
    for i in sorted(m):
        w.writerow([i, repr(m[i])])
    return buf.getvalue()


def sd_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    out = {}
    for row in rows[1:]:
        if not row:
            continue
        out[int(row[0])] = float(row[1])
    return out
