"""Experiment runner: wires generators or ingested files to predictors
and the scoring stack, and writes per-sequence, aggregate, sign-test,
and trace CSVs."""

import csv
import math
import os
import statistics
from dataclasses import dataclass, field

import numpy as np

from . import predictors, synth
from .evaluation import (Referee, deviates, logloss_rule_ns, multidev,
                         optimal_logloss, quad_rule, sign_test)
from .sd_core import FcConfig, filter_cap


class ConfigError(ValueError):
    pass


PREDICTOR_KINDS = ("ema", "harmonic-ema", "queues", "ts-queues", "box", "dyal")


def make_predictor(kind, param):
    if kind == "ema":
        return predictors.Ema(beta=float(param))
    if kind == "harmonic-ema":
        return predictors.Ema(harmonic=True, beta_min=float(param))
    if kind == "queues":
        return predictors.Queues(qcap=int(param))
    if kind == "ts-queues":
        return predictors.TimestampQueues(qcap=int(param))
    if kind == "box":
        return predictors.Box(k=int(param))
    if kind == "dyal":
        return predictors.Dyal(beta_min=float(param))
    raise ConfigError("unknown predictor kind: %r" % (kind,))


@dataclass
class EvalConfig:
    p_min: float = 0.01
    p_ns: float = 0.01
    c_ns: int = 2
    window: int = None
    dev_ds: tuple = (1.5, 2.0)

    def fc(self):
        return FcConfig(self.p_min, self.p_ns)


@dataclass
class TrialResult:
    metrics: dict = field(default_factory=dict)


def run_prequential(pred, obs, ecfg, schedule=None, track_item=None):
    """One predict-score-update pass over a sequence. Log-loss and quad
    loss are always reported; deviation metrics require a ground-truth
    schedule (against the tracked item in the single-item setting, or
    all salient items otherwise)."""
    fc = ecfg.fc()
    ref = Referee(ecfg.c_ns, ecfg.window)
    n = len(obs)
    loss_sum = 0.0
    quad_sum = 0.0
    dev_single = {d: 0 for d in ecfg.dev_ds}
    dev_obs = {d: 0 for d in ecfg.dev_ds}
    dev_any = {d: 0 for d in ecfg.dev_ds}
    neg_log_pns = -math.log(fc.p_ns) if fc.p_ns > 0 else math.inf
    for t, o in enumerate(obs, start=1):
        q = pred.predict()
        qp = filter_cap(q, fc)
        ns = ref.is_ns(o)
        # Bounded log-loss, on the capped map (same rule as
        # evaluation.logloss_rule_ns, with the cap hoisted out).
        prob = qp.get(o, 0.0)
        if prob > 0.0:
            loss_sum += -math.log(prob)
        elif not ns:
            loss_sum += neg_log_pns
        else:
            loss_sum += -math.log(1.0 - sum(qp.values()))
        quad = (1.0 - qp.get(o, 0.0)) ** 2
        for i, v in qp.items():
            if i != o:
                quad += v * v
        quad_sum += quad
        if schedule is not None:
            p = schedule.at(t)
            if track_item is not None:
                tp = p[track_item]
                est = q.get(track_item, 0.0)
                for d in ecfg.dev_ds:
                    dev_single[d] += deviates(est, tp, d)
            else:
                for d in ecfg.dev_ds:
                    dev_obs[d] += multidev(o, q, p, d, "obs", fc.p_min)
                    dev_any[d] += multidev(o, q, p, d, "any", fc.p_min)
        pred.update(o)
    res = TrialResult()
    res.metrics["avg_logloss_ns"] = loss_sum / n if n else 0.0
    res.metrics["avg_quad"] = quad_sum / n if n else 0.0
    if schedule is not None and n:
        for d in ecfg.dev_ds:
            if track_item is not None:
                res.metrics["dev_rate_d%g" % d] = dev_single[d] / n
            else:
                res.metrics["dev_rate_obs_d%g" % d] = dev_obs[d] / n
                res.metrics["dev_rate_any_d%g" % d] = dev_any[d] / n
    return res


def run_trace(pred, obs, item):
    """Per-step trajectory of the predictor's estimate for one item
    (the prediction issued before each observation)."""
    out = []
    for o in obs:
        out.append(pred.predict().get(item, 0.0))
        pred.update(o)
    return out


def run_conditional(lines, predictor_factory, ecfg, snapshot_every=None):
    """Per-context prediction: each item, when observed, predicts the
    next item on its line; every context has its own predictor and its
    own referee. Returns (pooled average loss, per-event losses,
    snapshots of the running average)."""
    fc = ecfg.fc()
    preds = {}
    refs = {}
    losses = []
    snapshots = []
    total = 0.0
    for line in lines:
        for a, b in zip(line, line[1:]):
            if a not in preds:
                preds[a] = predictor_factory()
                refs[a] = Referee(ecfg.c_ns, ecfg.window)
            q = preds[a].predict()
            ns = refs[a].is_ns(b)
            loss = logloss_rule_ns(b, q, ns, fc)
            losses.append(loss)
            total += loss
            preds[a].update(b)
            if snapshot_every and len(losses) % snapshot_every == 0:
                snapshots.append((len(losses), total / len(losses)))
    avg = total / len(losses) if losses else 0.0
    return avg, losses, snapshots


def run_self_concat(obs, k, dyal):
    """Run a predictor over the sequence repeated k times and record the
    learning-rate spread per step: (max rate, median rate, out-degree).
    Recurring max-rate spikes past the first pass are evidence that the
    sequence's distribution drifts."""
    trace = []
    for _ in range(k):
        for o in obs:
            dyal.update(o)
            trace.append((dyal.max_rate(), dyal.median_rate(),
                          len(dyal.ema_map)))
    return trace


@dataclass
class ExperimentSpec:
    kind: str                      # stationary-single | nonstat-single |
                                   # multi-item | real-file | self-concat
    roster: list                   # of (label, predictor kind, param)
    out_dir: str = None
    n_seqs: int = 200
    seq_len: int = 10000
    seed: int = 0
    tp: float = 0.1                # stationary-single
    mode: str = "oscillate"        # nonstat-single
    gen: synth.GenConfig = None    # nonstat-single / multi-item
    eval_cfg: EvalConfig = field(default_factory=EvalConfig)
    input_path: str = None         # real-file / self-concat
    concat_k: int = 10

    def __post_init__(self):
        kinds = ("stationary-single", "nonstat-single", "multi-item",
                 "real-file", "self-concat")
        if self.kind not in kinds:
            raise ConfigError("unknown experiment kind: %r" % (self.kind,))
        for label, pkind, _param in self.roster:
            if pkind not in PREDICTOR_KINDS:
                raise ConfigError("roster entry %r: unknown predictor %r"
                                  % (label, pkind))


def ingest_sequence(path):
    """Read a one-token-per-line file, interning tokens to ids in
    first-seen order; empty lines are skipped."""
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise IOError("cannot read %s: %s" % (path, e))
    ids = {}
    obs = []
    for line in text.splitlines():
        tok = line.strip()
        if not tok:
            continue
        if tok not in ids:
            ids[tok] = len(ids)
        obs.append(ids[tok])
    return obs


def _gen_stream(spec, rng):
    if spec.kind == "stationary-single":
        return synth.gen_binary_stationary(spec.tp, spec.seq_len, rng)
    gen = spec.gen or synth.GenConfig()
    if spec.kind == "nonstat-single":
        return synth.gen_single_nonstationary(spec.mode, gen,
                                              spec.seq_len, rng)
    if spec.kind == "multi-item":
        return synth.gen_sequence(gen, rng)
    raise ConfigError("kind %r does not generate streams" % (spec.kind,))


def run_experiment(spec):
    """Run every roster entry over every sequence. Returns a dict with
    per-sequence rows, aggregates, and pairwise sign tests; writes the
    corresponding CSVs when spec.out_dir is set."""
    rows = []  # (seq_id, method, param, metric, value)
    losses_by_method = {}
    single = spec.kind in ("stationary-single", "nonstat-single")

    if spec.kind == "real-file":
        seqs = [(0, synth.GeneratedStream(ingest_sequence(spec.input_path),
                                          None))]
    else:
        seeds = np.random.SeedSequence(spec.seed).spawn(spec.n_seqs)
        seqs = [(k, _gen_stream(spec, np.random.default_rng(s)))
                for k, s in enumerate(seeds)]

    for seq_id, stream in seqs:
        if stream.schedule is not None:
            opt = optimal_logloss(stream.observations, stream.schedule)
            rows.append((seq_id, "optimal", "", "avg_logloss_ns", opt))
        for label, pkind, param in spec.roster:
            pred = make_predictor(pkind, param)
            res = run_prequential(pred, stream.observations, spec.eval_cfg,
                                  schedule=stream.schedule,
                                  track_item=1 if single else None)
            for metric, value in res.metrics.items():
                rows.append((seq_id, label, param, metric, value))
            losses_by_method.setdefault(label, []).append(
                res.metrics["avg_logloss_ns"])

    aggregates = _aggregate(rows)
    tests = []
    labels = [label for label, _, _ in spec.roster]
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            a, b = labels[i], labels[j]
            wa, wb, ties, p = sign_test(losses_by_method[a],
                                        losses_by_method[b])
            tests.append((a, b, wa, wb, ties, p))

    if spec.out_dir:
        os.makedirs(spec.out_dir, exist_ok=True)
        _write_csv(os.path.join(spec.out_dir, "per_seq.csv"),
                   ["seq_id", "method", "param", "metric", "value"],
                   [(s, m, p, k, repr(v)) for s, m, p, k, v in rows])
        _write_csv(os.path.join(spec.out_dir, "aggregate.csv"),
                   ["method", "param", "metric", "mean", "std"],
                   [(m, p, k, repr(mu), repr(sd))
                    for m, p, k, mu, sd in aggregates])
        _write_csv(os.path.join(spec.out_dir, "sign_tests.csv"),
                   ["method_a", "method_b", "wins_a", "wins_b", "ties",
                    "p_value"],
                   [(a, b, wa, wb, t, repr(p))
                    for a, b, wa, wb, t, p in tests])
    return {"rows": rows, "aggregates": aggregates, "sign_tests": tests,
            "losses_by_method": losses_by_method}


def _aggregate(rows):
    by_key = {}
    for _seq, method, param, metric, value in rows:
        by_key.setdefault((method, param, metric), []).append(value)
    out = []
    for (method, param, metric), vals in sorted(by_key.items(),
                                                key=lambda kv: repr(kv[0])):
        mu = sum(vals) / len(vals)
        sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out.append((method, param, metric, mu, sd))
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
