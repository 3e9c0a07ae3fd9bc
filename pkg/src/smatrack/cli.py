"""Command-line front end.

Subcommands: gen (write a synthetic stream), run (score a roster of
predictors), compare (paired sign test from a per-sequence CSV), trace
(estimate / learning-rate trajectories), ingest-check (validate a token
file). Exit codes: 0 success, 2 configuration error, 1 runtime error.
"""

import csv
import os
import sys

import click
import numpy as np

from . import harness, predictors, synth
from .evaluation import sign_test
from .harness import ConfigError, EvalConfig, ExperimentSpec


def _parse_method(text):
    try:
        kind, param = text.split(":", 1)
    except ValueError:
        raise click.UsageError(
            "method must look like kind:param, e.g. dyal:0.01")
    if kind not in harness.PREDICTOR_KINDS:
        raise click.UsageError("unknown predictor kind: %r" % (kind,))
    return text, kind, param


def _read_config_file(path):
    """Plain key=value lines; blank lines and # comments ignored."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise click.UsageError("bad config line: %r" % (line,))
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _eval_config(cfg_file, p_min, p_ns, c_ns, referee_window, dev):
    base = _read_config_file(cfg_file) if cfg_file else {}
    return EvalConfig(
        p_min=p_min if p_min is not None else float(base.get("p_min", 0.01)),
        p_ns=p_ns if p_ns is not None else float(base.get("p_ns", 0.01)),
        c_ns=c_ns if c_ns is not None else int(base.get("c_ns", 2)),
        window=referee_window if referee_window is not None
        else (int(base["referee_window"]) if "referee_window" in base
              else None),
        dev_ds=tuple(dev) if dev else (1.5, 2.0))


@click.group()
def cli():
    pass


@cli.command()
@click.option("--kind", type=click.Choice(["binary", "nonstat", "multi"]),
              required=True)
@click.option("--tp", type=float, default=0.1, show_default=True)
@click.option("--mode", type=click.Choice(["oscillate", "uniform"]),
              default="oscillate", show_default=True)
@click.option("--o-min", type=int, default=50, show_default=True)
@click.option("--l-min", type=int, default=0, show_default=True)
@click.option("--p-max", type=float, default=1.0, show_default=True)
@click.option("--recycle", is_flag=True)
@click.option("--n", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def gen(kind, tp, mode, o_min, l_min, p_max, recycle, n, seed, out):
    """Generate a synthetic stream: stream.txt plus schedule.csv."""
    rng = np.random.default_rng(seed)
    if kind == "binary":
        stream = synth.gen_binary_stationary(tp, n, rng)
    else:
        gcfg = synth.GenConfig(o_min=o_min, l_min=l_min, p_max=p_max,
                               recycle=recycle, desired_len=n)
        if kind == "nonstat":
            stream = synth.gen_single_nonstationary(mode, gcfg, n, rng)
        else:
            stream = synth.gen_sequence(gcfg, rng)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "stream.txt"), "w") as f:
        f.write(synth.stream_to_text(stream))
    with open(os.path.join(out, "schedule.csv"), "w") as f:
        f.write(synth.schedule_to_csv(stream.schedule))
    click.echo("wrote %d observations to %s" % (len(stream.observations),
                                                out))


@cli.command()
@click.option("--kind", type=click.Choice(["stationary-single",
                                           "nonstat-single", "multi-item",
                                           "real-file"]), required=True)
@click.option("--method", "methods", multiple=True, required=True,
              help="kind:param, e.g. dyal:0.01; repeatable.")
@click.option("--n-seqs", type=int, default=50, show_default=True)
@click.option("--seq-len", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tp", type=float, default=0.1, show_default=True)
@click.option("--mode", type=click.Choice(["oscillate", "uniform"]),
              default="oscillate", show_default=True)
@click.option("--o-min", type=int, default=50, show_default=True)
@click.option("--l-min", type=int, default=0, show_default=True)
@click.option("--p-max", type=float, default=1.0, show_default=True)
@click.option("--recycle", is_flag=True)
@click.option("--input", "input_path", type=click.Path())
@click.option("--config", "cfg_file", type=click.Path(exists=True),
              help="key=value defaults file; flags win.")
@click.option("--p-min", type=float, default=None)
@click.option("--p-ns", type=float, default=None)
@click.option("--c-ns", type=int, default=None)
@click.option("--referee-window", type=int, default=None)
@click.option("--d", "dev", type=float, multiple=True,
              help="deviation threshold; repeatable.")
@click.option("--out", type=click.Path(), required=True)
def run(kind, methods, n_seqs, seq_len, seed, tp, mode, o_min, l_min,
        p_max, recycle, input_path, cfg_file, p_min, p_ns, c_ns,
        referee_window, dev, out):
    """Score a roster of predictors; writes per_seq.csv, aggregate.csv
    and sign_tests.csv."""
    if kind == "real-file" and not input_path:
        raise click.UsageError("--input is required with --kind real-file")
    roster = [_parse_method(m) for m in methods]
    gcfg = synth.GenConfig(o_min=o_min, l_min=l_min, p_max=p_max,
                           recycle=recycle, desired_len=seq_len)
    spec = ExperimentSpec(
        kind=kind, roster=roster, out_dir=out, n_seqs=n_seqs,
        seq_len=seq_len, seed=seed, tp=tp, mode=mode, gen=gcfg,
        eval_cfg=_eval_config(cfg_file, p_min, p_ns, c_ns, referee_window,
                              dev),
        input_path=input_path)
    result = harness.run_experiment(spec)
    for method, param, metric, mu, sd in result["aggregates"]:
        if metric == "avg_logloss_ns":
            click.echo("%-24s %s  %.4f +- %.4f" % (method, metric, mu, sd))
    click.echo("results in %s" % out)


@cli.command()
@click.option("--per-seq", "per_seq", type=click.Path(exists=True),
              required=True)
@click.option("--a", "method_a", required=True)
@click.option("--b", "method_b", required=True)
@click.option("--metric", default="avg_logloss_ns", show_default=True)
def compare(per_seq, method_a, method_b, metric):
    """Paired sign test between two methods from a per_seq.csv."""
    vals = {method_a: {}, method_b: {}}
    with open(per_seq, newline="") as f:
        for row in csv.DictReader(f):
            if row["metric"] == metric and row["method"] in vals:
                vals[row["method"]][int(row["seq_id"])] = float(row["value"])
    common = sorted(set(vals[method_a]) & set(vals[method_b]))
    if not common:
        raise click.UsageError("no common sequences for those methods")
    wa, wb, ties, p = sign_test([vals[method_a][s] for s in common],
                                [vals[method_b][s] for s in common])
    click.echo("%s vs %s: wins %d, losses %d, ties %d, p=%.3g"
               % (method_a, method_b, wa, wb, ties, p))


@cli.command()
@click.option("--input", "input_path", type=click.Path(), required=True)
@click.option("--method", default="dyal:0.01", show_default=True)
@click.option("--self-concat", "concat_k", type=int, default=1,
              show_default=True,
              help="repeat the sequence this many times.")
@click.option("--track-item", type=int, default=None,
              help="also trace this item's estimate.")
@click.option("--out", type=click.Path(), required=True)
def trace(input_path, method, concat_k, track_item, out):
    """Learning-rate (and optional estimate) trajectories on a token
    file; self-concatenation makes drift visible as rate spikes."""
    _label, kind, param = _parse_method(method)
    obs = harness.ingest_sequence(input_path)
    os.makedirs(out, exist_ok=True)
    if kind != "dyal":
        raise click.UsageError("rate traces require a dyal method")
    pred = harness.make_predictor(kind, param)
    rows = harness.run_self_concat(obs, concat_k, pred)
    path = os.path.join(out, "rate_trace.csv")
    harness._write_csv(path, ["t", "max_rate", "median_rate", "out_degree"],
                       [(t + 1, repr(mx), repr(md), deg)
                        for t, (mx, md, deg) in enumerate(rows)])
    if track_item is not None:
        est = harness.run_trace(harness.make_predictor(kind, param),
                                obs * concat_k, track_item)
        harness._write_csv(os.path.join(out, "estimate_trace.csv"),
                           ["t", "estimate"],
                           [(t + 1, repr(v)) for t, v in enumerate(est)])
    click.echo("wrote %s" % path)


@cli.command("ingest-check")
@click.argument("path", type=click.Path())
def ingest_check(path):
    """Validate a one-token-per-line input file."""
    obs = harness.ingest_sequence(path)
    click.echo("%d observations, %d unique items" % (len(obs),
                                                     len(set(obs))))


def main():
    try:
        cli.main(standalone_mode=False)
    except click.UsageError as e:
        click.echo("error: %s" % e.format_message(), err=True)
        sys.exit(2)
    except click.exceptions.Exit as e:
        sys.exit(e.exit_code)
    except click.Abort:
        sys.exit(1)
    except ConfigError as e:
        click.echo("error: %s" % e, err=True)
        sys.exit(2)
    except Exception as e:
        click.echo("error: %s" % e, err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
