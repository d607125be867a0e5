"""``boxswarm`` command line: datasets, training, evaluation sweeps, missions, bandwidth."""

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys

import numpy as np

from boxswarm.errors import BoxSwarmError, ConfigError, MissionError
from boxswarm.gnn.evaluate import eval_assignment
from boxswarm.gnn.graph import gen_dataset
from boxswarm.gnn.io import load_dataset, load_params, save_dataset, save_params
from boxswarm.gnn.model import GnnConfig, init_params
from boxswarm.gnn.train import REFERENCE_MODEL, REFERENCE_TRAINING, TrainConfig, train
from boxswarm.protocol import bandwidth_estimate
from boxswarm.registration import BoxSet, box_icp
from boxswarm.sim.config import load_config
from boxswarm.sim.mission import reference_params, run_mission
from boxswarm.sim.scene import SyntheticDetector, ViewRegime, make_scene, render_view, sample_pose

SCHEMA_VERSION = 1
EVAL_FIELDS = ("schema_version", "config_hash", "n_a", "n_g", "trials", "optimality_pct", "diversity_pct")
REG_FIELDS = ("schema_version", "config_hash", "jitter_frac", "max_rotation", "pairs", "accuracy_pct",
              "perfect_pairs", "mean_iterations", "mean_final_cost")
BW_FIELDS = ("schema_version", "config_hash", "n_w", "d_h", "bytes", "latency_s", "framed_bytes")


def run_config(args, exclude=("func", "out", "out_csv")):
    """Resolved arguments of a run and their short digest."""
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in exclude}
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return cfg, hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_csv(path, fields, rows, cfg, digest):
    """CSV with a leading ``#`` line holding the schema version, config hash and full config."""
    buf = io.StringIO()
    buf.write(f"# boxswarm schema_version={SCHEMA_VERSION} config_hash={digest} config={json.dumps(cfg, sort_keys=True)}\n")
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({"schema_version": SCHEMA_VERSION, "config_hash": digest, **row})
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dataset(n_a, n_g, count, g_max, seed):
    """Random labeled graphs, ghost-padded to ``g_max`` slots when there are fewer goals."""
    return gen_dataset(n_a, n_g, count, g_max=g_max, seed=seed, n_target=g_max if n_g < g_max else None)


def cmd_gen_dataset(args):
    items = _dataset(args.n_a, args.n_g, args.count, args.g_max, args.seed)
    save_dataset(items, args.out, g_max=args.g_max)
    print(f"wrote {len(items)} graphs to {args.out}")


def cmd_train(args):
    if args.dataset:
        items = load_dataset(args.dataset)
    else:
        items = _dataset(args.n_a, args.n_g, args.count, args.g_max, args.data_seed)
    model = GnnConfig(g_max=args.g_max, hidden=args.hidden, hidden_global=args.hidden_global,
                      rounds=args.rounds, residual=not args.no_residual)
    hyper = TrainConfig(epochs=args.epochs, batch=args.batch, lr=args.lr, optimizer=args.optimizer,
                        schedule=args.schedule, ce_scale=args.ce_scale, seed=args.seed)

    def log(epoch, loss, seconds):
        if not args.quiet:
            print(f"epoch {epoch + 1}/{hyper.epochs} loss {loss:.6f} ({seconds:.1f} s)", file=sys.stderr)

    result = train(init_params(model, seed=args.seed), items, hyper, log=log)
    save_params(result.params, args.out)
    cfg, digest = run_config(args)
    if args.curve:
        write_csv(args.curve, ("schema_version", "config_hash", "epoch", "loss"),
                  [{"epoch": i + 1, "loss": v} for i, v in enumerate(result.loss_curve)], cfg, digest)
    print(f"trained {result.params.count()} weights in {result.seconds:.1f} s; final loss "
          f"{result.loss_curve[-1]:.6f}; saved to {args.out}")


def cmd_eval_assign(args):
    params = load_params(args.params) if args.params else reference_params()
    rows = []
    for n_g in range(args.n_g_min, args.n_g_max + 1):
        s = eval_assignment(params, args.n_a, n_g, args.trials, seed=args.seed)
        rows.append({"n_a": args.n_a, "n_g": n_g, "trials": args.trials,
                     "optimality_pct": round(s.optimality_pct, 4), "diversity_pct": round(s.diversity_pct, 4)})
    cfg, digest = run_config(args)
    write_csv(args.out, EVAL_FIELDS, rows, cfg, digest)
    if args.out not in (None, "-"):
        head = "n_g".ljust(16) + "".join(f"{r['n_g']:>8}" for r in rows)
        print(head)
        print("Optimality (%)".ljust(16) + "".join(f"{r['optimality_pct']:8.1f}" for r in rows))
        print("Diversity (%)".ljust(16) + "".join(f"{r['diversity_pct']:8.1f}" for r in rows))


def registration_trial(scene, regime, jitter, rng):
    """Register a reference view onto a posed view; returns the ICP result and whether every box matched."""
    ref = BoxSet(scene.corners(), scene.ids)
    view = render_view(scene, sample_pose(scene, rng, regime), SyntheticDetector(1.0, jitter), rng)
    result = box_icp(ref, view.observed)
    truth = np.empty(len(ref), dtype=int)
    for local, scene_id in enumerate(view.truth):
        truth[scene_id] = local
    return result, bool(np.array_equal(result.matching, truth))


def cmd_eval_registration(args):
    rows = []
    rotations = [args.max_rotation] + ([math.pi] if args.stress else [])
    for max_rot in rotations:
        for frac in args.noise:
            rng = np.random.default_rng([args.seed, int(round(frac * 1e6)), int(round(max_rot * 1e6))])
            scene = make_scene(9, 4096.0, rng)
            box = np.mean([min(b.size) for b in scene.boxes])
            regime = ViewRegime(max_rotation=max_rot)
            correct = 0
            iters = []
            costs = []
            for _ in range(args.pairs):
                result, ok = registration_trial(scene, regime, frac * box, rng)
                correct += ok
                iters.append(result.iterations)
                costs.append(result.final_cost)
            rows.append({"jitter_frac": frac, "max_rotation": round(max_rot, 6), "pairs": args.pairs,
                         "accuracy_pct": round(100.0 * correct / args.pairs, 4), "perfect_pairs": correct,
                         "mean_iterations": round(float(np.mean(iters)), 4),
                         "mean_final_cost": round(float(np.mean(costs)), 6)})
    cfg, digest = run_config(args)
    write_csv(args.out, REG_FIELDS, rows, cfg, digest)


def cmd_simulate(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    report = run_mission(cfg)
    header = json.dumps({"record": "config", "schema_version": report.schema_version,
                         "config_hash": report.config_hash, "config": cfg.to_dict()}, sort_keys=True)
    text = header + "\n" + report.to_jsonl()
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    if args.out not in (None, "-"):
        print(f"consensus_ok={report.consensus_ok} goals={report.goals} optimal={report.optimal}")


def cmd_bandwidth(args):
    lo, hi = args.n_w
    rows = []
    for n_w in range(lo, hi + 1, args.step):
        b = bandwidth_estimate(n_w, args.d_h, args.link_bps)
        rows.append({"n_w": n_w, "d_h": args.d_h, "bytes": b.bytes, "latency_s": round(b.latency, 9),
                     "framed_bytes": b.framed_bytes})
    cfg, digest = run_config(args)
    write_csv(args.out, BW_FIELDS, rows, cfg, digest)


def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def build_parser():
    p = argparse.ArgumentParser(prog="boxswarm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    pos_int = _positive(int)
    pos_float = _positive(float)

    g = sub.add_parser("gen-dataset", help="write a labeled random-graph dataset")
    g.add_argument("--n-a", type=pos_int, default=5)
    g.add_argument("--n-g", type=pos_int, default=10)
    g.add_argument("--count", type=pos_int, default=5000)
    g.add_argument("--g-max", type=pos_int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_dataset)

    m, h = REFERENCE_MODEL, REFERENCE_TRAINING
    t = sub.add_parser("train", help="train assignment weights (defaults are the reference recipe)")
    t.add_argument("--dataset", help="dataset file; generated on the fly when omitted")
    t.add_argument("--n-a", type=pos_int, default=5)
    t.add_argument("--n-g", type=pos_int, default=10)
    t.add_argument("--count", type=pos_int, default=5000)
    t.add_argument("--data-seed", type=int, default=1)
    t.add_argument("--g-max", type=pos_int, default=m.g_max)
    t.add_argument("--hidden", type=pos_int, default=m.hidden)
    t.add_argument("--hidden-global", type=pos_int, default=m.hidden_global)
    t.add_argument("--rounds", type=pos_int, default=m.rounds)
    t.add_argument("--no-residual", action="store_true", default=not m.residual)
    t.add_argument("--epochs", type=pos_int, default=h.epochs)
    t.add_argument("--batch", type=pos_int, default=h.batch)
    t.add_argument("--lr", type=pos_float, default=h.lr)
    t.add_argument("--optimizer", choices=("sgd", "momentum", "adam"), default=h.optimizer)
    t.add_argument("--schedule", choices=("constant", "cosine"), default=h.schedule)
    t.add_argument("--ce-scale", type=pos_float, default=h.ce_scale)
    t.add_argument("--seed", type=int, default=h.seed)
    t.add_argument("--curve", help="write the per-epoch loss curve as CSV")
    t.add_argument("--quiet", action="store_true")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval-assign", help="optimality/diversity sweep over goal counts")
    e.add_argument("--params", help="parameter file (default: bundled reference weights)")
    e.add_argument("--n-a", type=pos_int, default=5)
    e.add_argument("--n-g-min", type=pos_int, default=5)
    e.add_argument("--n-g-max", type=pos_int, default=10)
    e.add_argument("--trials", type=pos_int, default=5000)
    e.add_argument("--seed", type=int, default=99)
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_eval_assign)

    r = sub.add_parser("eval-registration", help="Box-ICP matching accuracy over random view pairs")
    r.add_argument("--pairs", type=pos_int, default=200)
    r.add_argument("--noise", type=float, nargs="+", default=[0.0, 0.005, 0.01],
                   help="corner jitter std as a fraction of the mean short box side")
    r.add_argument("--max-rotation", type=float, default=math.pi / 4)
    r.add_argument("--stress", action="store_true", help="add rows with rotations up to pi")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default="-")
    r.set_defaults(func=cmd_eval_registration)

    s = sub.add_parser("simulate", help="run one mission from a TOML config")
    s.add_argument("config")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--out", default="-", help="JSONL report")
    s.add_argument("--out-csv", help="per-agent CSV report")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bandwidth", help="message size and latency table")
    b.add_argument("--n-w", type=int, nargs=2, default=(0, 20), metavar=("LO", "HI"))
    b.add_argument("--step", type=pos_int, default=1)
    b.add_argument("--d-h", type=int, default=32)
    b.add_argument("--link-bps", type=pos_float, default=1_000_000.0)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bandwidth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except MissionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return 1
    except BoxSwarmError as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
