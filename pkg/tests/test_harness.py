import csv
import math
import os

import numpy as np
import pytest
from click.testing import CliRunner

from smatrack import harness, synth
from smatrack.cli import cli
from smatrack.evaluation import Referee, avg_logloss_ns
from smatrack.harness import (ConfigError, EvalConfig, ExperimentSpec,
                              ingest_sequence, make_predictor,
                              run_conditional, run_experiment,
                              run_prequential, run_self_concat, run_trace)
from smatrack.predictors import Dyal, Ema


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


class EmptyPredictor:
    def predict(self):
        return {}

    def update(self, o):
        pass

    def get_params(self):
        return {}


# --- ingestion --------------------------------------------------------------

def test_ingest_interning(tmp_path):
    p = tmp_path / "seq.txt"
    p.write_text("ls\ncat\nls\n")
    assert ingest_sequence(str(p)) == [0, 1, 0]


def test_ingest_empty_and_blank_lines(tmp_path):
    p = tmp_path / "seq.txt"
    p.write_text("")
    assert ingest_sequence(str(p)) == []
    p.write_text("a\n\n\nb\na\n")
    assert ingest_sequence(str(p)) == [0, 1, 0]


def test_ingest_missing_file():
    with pytest.raises(IOError):
        ingest_sequence("/nonexistent/nope.txt")


def test_ingest_deterministic(tmp_path):
    p = tmp_path / "seq.txt"
    p.write_text("\n".join("abcab" * 100) + "\n")
    assert ingest_sequence(str(p)) == ingest_sequence(str(p))


# --- run_prequential --------------------------------------------------------

def test_prequential_empty_predictor_all_ns():
    res = run_prequential(EmptyPredictor(), [1, 1, 1], EvalConfig())
    assert res.metrics["avg_logloss_ns"] == 0.0


def test_prequential_bounded():
    res = run_prequential(Dyal(), [1, 1, 1, 1, 2, 2, 2, 2], EvalConfig())
    assert 0.0 <= res.metrics["avg_logloss_ns"] <= -math.log(0.01)


def test_prequential_agrees_with_reference_scorer():
    # the inlined loss/quad loop must match the reference functions
    rng = np.random.default_rng(0)
    obs = rng.integers(0, 5, size=300).tolist()
    pred_a = Ema(beta=0.05)
    res = run_prequential(pred_a, obs, EvalConfig())
    pred_b = Ema(beta=0.05)
    preds = []
    for o in obs:
        preds.append(pred_b.predict())
        pred_b.update(o)
    ref = avg_logloss_ns(preds, obs, Referee(c_ns=2))
    assert close(res.metrics["avg_logloss_ns"], ref, 1e-12)


def test_prequential_single_item_dev_metrics():
    s = synth.gen_binary_stationary(0.1, 2000, np.random.default_rng(1))
    res = run_prequential(Ema(harmonic=True, beta_min=0.001),
                          s.observations, EvalConfig(),
                          schedule=s.schedule, track_item=1)
    assert "dev_rate_d1.5" in res.metrics
    assert 0.0 <= res.metrics["dev_rate_d1.5"] <= 1.0


def test_prequential_multi_item_dev_metrics():
    s = synth.gen_sequence(synth.GenConfig(o_min=10, desired_len=2000),
                           np.random.default_rng(2))
    res = run_prequential(Dyal(), s.observations, EvalConfig(),
                          schedule=s.schedule)
    assert "dev_rate_obs_d1.5" in res.metrics
    assert "dev_rate_any_d2" in res.metrics
    assert res.metrics["dev_rate_obs_d1.5"] <= \
        res.metrics["dev_rate_any_d1.5"] + 1e-12


# --- predictor registry -----------------------------------------------------

def test_make_predictor_kinds():
    for kind, param in [("ema", "0.01"), ("harmonic-ema", "0.001"),
                        ("queues", "3"), ("ts-queues", "3"),
                        ("box", "100"), ("dyal", "0.01")]:
        p = make_predictor(kind, param)
        assert p.predict() == {}


def test_make_predictor_unknown():
    with pytest.raises(ConfigError):
        make_predictor("nope", "1")


# --- conditional runs -------------------------------------------------------

def test_conditional_abcd_scores_three():
    avg, losses, _ = run_conditional([["a", "b", "c", "d"]],
                                     lambda: Dyal(), EvalConfig())
    assert len(losses) == 3


def test_conditional_repeated_pair_converges():
    lines = [["a", "b"]] * 2000
    avg, losses, _ = run_conditional(lines, lambda: Dyal(beta_min=0.01),
                                     EvalConfig())
    # late losses approach the capped optimum -ln 0.99
    late = losses[-100:]
    assert sum(late) / len(late) < 0.1


def test_conditional_snapshots():
    lines = [["a", "b", "a"]] * 500
    avg, losses, snaps = run_conditional(lines, lambda: Ema(0.05),
                                         EvalConfig(), snapshot_every=100)
    assert snaps and snaps[0][0] == 100
    assert close(snaps[-1][1], sum(losses[:snaps[-1][0]]) / snaps[-1][0])


def test_conditional_last_item_not_a_context():
    lines = [["a", "b", "c"]]
    avg, losses, _ = run_conditional(lines, lambda: Ema(0.05), EvalConfig())
    # two events: a->b and b->c; c never predicts
    assert len(losses) == 2


# --- self-concat traces -----------------------------------------------------

def test_self_concat_stationary_flat():
    rng = np.random.default_rng(3)
    obs = rng.integers(0, 3, size=400).tolist()
    trace = run_self_concat(obs, 10, Dyal(beta_min=0.01))
    first_pass = [mx for mx, _, _ in trace[:400]]
    rest = [mx for mx, _, _ in trace[2 * 400:]]
    # after the first pass the max rate settles near the floor
    assert max(rest) <= 0.2
    assert sum(rest) / len(rest) < sum(first_pass) / len(first_pass)


def test_self_concat_drifting_spikes():
    rng = np.random.default_rng(4)
    # two very different halves: repeating them re-triggers learning
    obs = rng.integers(0, 3, size=200).tolist() + \
        rng.integers(10, 13, size=200).tolist()
    trace = run_self_concat(obs, 10, Dyal(beta_min=0.01))
    spikes = 0
    for k in range(1, 10):
        seg = [mx for mx, _, _ in trace[k * 400:(k + 1) * 400]]
        if max(seg) >= 0.2:
            spikes += 1
    assert spikes >= 8  # a spike in (nearly) every later pass


def test_self_concat_k1_length():
    obs = [1, 2, 3]
    assert len(run_self_concat(obs, 1, Dyal())) == 3


# --- run_experiment ---------------------------------------------------------

def _small_spec(tmp_path, **kw):
    args = dict(kind="stationary-single",
                roster=[("ema:0.05", "ema", "0.05"),
                        ("queues:3", "queues", "3")],
                out_dir=str(tmp_path / "out"), n_seqs=4, seq_len=500,
                seed=7, tp=0.2)
    args.update(kw)
    return ExperimentSpec(**args)


def test_experiment_writes_csvs(tmp_path):
    res = run_experiment(_small_spec(tmp_path))
    out = tmp_path / "out"
    for name in ("per_seq.csv", "aggregate.csv", "sign_tests.csv"):
        assert (out / name).exists()
    assert res["sign_tests"]


def test_experiment_deterministic(tmp_path):
    run_experiment(_small_spec(tmp_path, out_dir=str(tmp_path / "a")))
    run_experiment(_small_spec(tmp_path, out_dir=str(tmp_path / "b")))
    for name in ("per_seq.csv", "aggregate.csv", "sign_tests.csv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_experiment_roster_isolation(tmp_path):
    full = run_experiment(_small_spec(tmp_path, out_dir=None))
    solo = run_experiment(_small_spec(tmp_path, out_dir=None,
                                      roster=[("ema:0.05", "ema", "0.05")]))
    assert full["losses_by_method"]["ema:0.05"] == \
        solo["losses_by_method"]["ema:0.05"]


def test_experiment_aggregates_recomputable(tmp_path):
    res = run_experiment(_small_spec(tmp_path, out_dir=None))
    by_key = {}
    for _seq, m, p, k, v in res["rows"]:
        by_key.setdefault((m, p, k), []).append(v)
    for m, p, k, mu, sd in res["aggregates"]:
        vals = by_key[(m, p, k)]
        assert close(mu, sum(vals) / len(vals))


def test_experiment_multi_item_has_optimal(tmp_path):
    spec = _small_spec(tmp_path, kind="multi-item", out_dir=None, n_seqs=2,
                       gen=synth.GenConfig(o_min=10, desired_len=1000))
    res = run_experiment(spec)
    assert any(m == "optimal" for _s, m, _p, _k, _v in res["rows"])


def test_experiment_real_file(tmp_path):
    p = tmp_path / "seq.txt"
    p.write_text("\n".join(["a", "b"] * 200) + "\n")
    spec = _small_spec(tmp_path, kind="real-file", input_path=str(p),
                       out_dir=None, roster=[("dyal:0.01", "dyal", "0.01")])
    res = run_experiment(spec)
    assert len(res["losses_by_method"]["dyal:0.01"]) == 1


def test_experiment_rejects_bad_roster(tmp_path):
    with pytest.raises(ConfigError):
        _small_spec(tmp_path, roster=[("x", "nope", "1")])


def test_experiment_rejects_bad_kind(tmp_path):
    with pytest.raises(ConfigError):
        _small_spec(tmp_path, kind="nope")


# --- trace helper -----------------------------------------------------------

def test_run_trace_tracks_estimates():
    est = run_trace(Ema(beta=0.5), [1, 1, 1], 1)
    assert est[0] == 0.0
    assert close(est[1], 0.5) and close(est[2], 0.75)


# --- CLI --------------------------------------------------------------------

def test_cli_gen_and_run_roundtrip(tmp_path):
    runner = CliRunner()
    gen_dir = str(tmp_path / "gen")
    r = runner.invoke(cli, ["gen", "--kind", "binary", "--tp", "0.2",
                            "--n", "300", "--seed", "1", "--out", gen_dir])
    assert r.exit_code == 0, r.output
    assert os.path.exists(os.path.join(gen_dir, "stream.txt"))
    assert os.path.exists(os.path.join(gen_dir, "schedule.csv"))

    out_dir = str(tmp_path / "run")
    r = runner.invoke(cli, ["run", "--kind", "stationary-single",
                            "--method", "ema:0.05", "--method", "queues:3",
                            "--n-seqs", "3", "--seq-len", "300",
                            "--out", out_dir])
    assert r.exit_code == 0, r.output
    with open(os.path.join(out_dir, "per_seq.csv"), newline="") as f:
        rows = list(csv.DictReader(f))
    assert {row["method"] for row in rows} == \
        {"ema:0.05", "queues:3", "optimal"}


def test_cli_compare(tmp_path):
    out_dir = str(tmp_path / "run")
    runner = CliRunner()
    r = runner.invoke(cli, ["run", "--kind", "stationary-single",
                            "--method", "ema:0.05", "--method", "box:50",
                            "--n-seqs", "4", "--seq-len", "300",
                            "--out", out_dir])
    assert r.exit_code == 0, r.output
    r = runner.invoke(cli, ["compare", "--per-seq",
                            os.path.join(out_dir, "per_seq.csv"),
                            "--a", "ema:0.05", "--b", "box:50"])
    assert r.exit_code == 0, r.output
    assert "wins" in r.output


def test_cli_trace(tmp_path):
    p = tmp_path / "seq.txt"
    p.write_text("\n".join(["a", "b", "c"] * 50) + "\n")
    out_dir = str(tmp_path / "trace")
    runner = CliRunner()
    r = runner.invoke(cli, ["trace", "--input", str(p), "--method",
                            "dyal:0.01", "--self-concat", "3",
                            "--track-item", "0", "--out", out_dir])
    assert r.exit_code == 0, r.output
    with open(os.path.join(out_dir, "rate_trace.csv"), newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 450
    assert os.path.exists(os.path.join(out_dir, "estimate_trace.csv"))


def test_cli_ingest_check(tmp_path):
    p = tmp_path / "seq.txt"
    p.write_text("a\nb\na\n")
    runner = CliRunner()
    r = runner.invoke(cli, ["ingest-check", str(p)])
    assert r.exit_code == 0
    assert "3 observations, 2 unique" in r.output


def test_cli_exit_codes(tmp_path):
    import subprocess
    import sys
    env = dict(os.environ)
    # config error: unknown method kind
    r = subprocess.run([sys.executable, "-m", "smatrack.cli", "run",
                        "--kind", "stationary-single", "--method", "bogus:1",
                        "--out", str(tmp_path / "x")],
                       capture_output=True, env=env)
    assert r.returncode == 2
    # runtime error: unreadable input file
    r = subprocess.run([sys.executable, "-m", "smatrack.cli",
                        "ingest-check", "/nonexistent/nope.txt"],
                       capture_output=True, env=env)
    assert r.returncode == 1
    # success
    p = tmp_path / "ok.txt"
    p.write_text("a\n")
    r = subprocess.run([sys.executable, "-m", "smatrack.cli",
                        "ingest-check", str(p)],
                       capture_output=True, env=env)
    assert r.returncode == 0


def test_cli_config_file_defaults(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("# defaults\np_ns=0.001\nc_ns=2\n")
    out_dir = str(tmp_path / "run")
    runner = CliRunner()
    r = runner.invoke(cli, ["run", "--kind", "stationary-single",
                            "--method", "ema:0.05", "--n-seqs", "2",
                            "--seq-len", "200", "--config", str(cfg),
                            "--out", out_dir])
    assert r.exit_code == 0, r.output
