"""Command-line entry point: ``eightpt <subcommand> ...``.

Exit codes: 0 on success, 1 on operational errors (one ``error: ...`` line
on stderr), 2 when a verification subcommand finds a failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

log = logging.getLogger("eightpt")


class VerificationFailure(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _write_text(text: str, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------- commands

def cmd_synth_gen(args):
    from .synthetic import generate_dataset

    meta = generate_dataset(args.dist, args.count, args.seed, args.out, threads=args.threads,
                            stream=args.stream)
    log.info("wrote %s (%d instances, acceptance %.3f)", args.out, args.count, meta["acceptance_rate"])


def _load_train_config(path, task):
    from .mlp import MlpConfig, output_dim_for

    raw = {}
    if path:
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config must be a JSON object")
    raw = dict(raw)
    raw.setdefault("output_dim", output_dim_for(task))
    return MlpConfig.from_dict(raw)


def cmd_train(args):
    from .mlp import save_model, train
    from .synthetic import generate_instances, load_dataset

    config = _load_train_config(args.config, args.task)
    if args.seed is not None:
        config.seed = args.seed
    if args.train:
        data = load_dataset(args.train)
        X = data["feature"]
        Y = data["quat"] if args.task == "rotation" else data["t_dir"]
        source = {"train_file": args.train}
    else:
        if not args.dist:
            raise ValueError("either --train FILE or --dist is required")
        insts, _ = generate_instances(args.dist, args.count, args.data_seed, threads=args.threads, stream="train")
        X = np.array([i.feature for i in insts])
        Y = np.array([i.quat if args.task == "rotation" else i.t_dir for i in insts])
        source = {"dist": args.dist, "count": args.count, "data_seed": args.data_seed, "stream": "train"}
    if args.shuffle_labels:
        Y = Y[np.random.default_rng([config.seed, 99]).permutation(len(Y))]
    model, curve = train(config, X, Y, args.task, log_every=1 if args.verbose else 0)
    save_model(model, args.out, extra={"source": source, "seed": config.seed, "loss_curve": curve,
                                       "shuffled_labels": bool(args.shuffle_labels)})
    log.info("final epoch loss %.5f", curve[-1] if curve else float("nan"))


def cmd_eval(args):
    from .mlp import evaluate, load_model
    from .synthetic import load_dataset

    model = load_model(args.model)
    data = load_dataset(args.test)
    Y = data["quat"] if model.task == "rotation" else data["t_dir"]
    report = evaluate(model, data["feature"], Y, args.threshold)
    out = report.to_dict(include_errors=args.errors)
    out.update({"task": model.task, "model": args.model, "test": args.test})
    _write_json(out, args.out)


def cmd_chance(args):
    from .mlp import chance_baseline

    report = chance_baseline(args.dist, args.task, args.draws, args.seed, pool_size=args.pool,
                             threshold=args.threshold, threads=args.threads)
    out = report.to_dict()
    out.update({"dist": args.dist, "task": args.task, "draws": args.draws, "seed": args.seed, "pool": args.pool})
    _write_json(out, args.out)


def _read_correspondence_csv(path):
    from .eight_point import CorrespondenceSet

    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"u", "v", "u2", "v2"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for r in reader:
            rows.append([float(r["u"]), float(r["v"]), float(r["u2"]), float(r["v2"])])
    if not rows:
        raise ValueError(f"{path}: no correspondences")
    a = np.array(rows)
    return CorrespondenceSet(a[:, :2], a[:, 2:])


def cmd_eight_point(args):
    from .eight_point import decompose_essential, epipolar_residuals, normal_matrix, build_design_matrix, solve_essential

    c = _read_correspondence_csv(args.input)
    E = solve_essential(normal_matrix(build_design_matrix(c)))
    dec = decompose_essential(E, c)
    out = dec.to_dict()
    out["n"] = len(c)
    out["max_abs_residual"] = float(np.max(np.abs(epipolar_residuals(E, c))))
    _write_json(out, args.out)


def cmd_verify_identity(args):
    from .compact import verify_identity

    result = verify_identity(args.trials, args.grids, args.seed)
    _write_json(result, args.out)
    if result["failures"]:
        raise VerificationFailure(f"{result['failures']} of {result['trials']} trials exceeded tolerance")


def cmd_quantize_sweep(args):
    from .analysis import QuantSweepConfig, quantization_sweep, sweep_csv, sweep_metadata

    cfg = QuantSweepConfig(levels=tuple(args.levels), instances=args.count, seed=args.seed,
                           n_points=args.points, min_correspondences=args.min_correspondences,
                           shared_instances=args.shared)
    rows = quantization_sweep(cfg, threads=args.threads)
    _write_text(sweep_csv(rows), args.out)
    if args.out not in (None, "-"):
        _write_json(sweep_metadata(cfg, rows), f"{args.out}.meta.json")


def cmd_attention_sweep(args):
    from .attention import attention_sweep

    steps = None if args.steps is None else sorted({round(i * args.p / args.steps) for i in range(args.steps + 1)})
    rows = attention_sweep(args.p, steps, args.matched_logit, args.unmatched_logit)
    lines = ["p,m_fraction,mode,energy_fraction"]
    lines += [f"{r['p']},{r['m_fraction']!r},{r['mode']},{r['energy_fraction']!r}" for r in rows]
    _write_text("\n".join(lines) + "\n", args.out)


def cmd_emm_demo(args):
    from .attention import emm_feature_length, emm_forward
    from .compact import PatchGrid

    grid = PatchGrid(args.grid)
    dim = args.heads * args.head_dim
    rng = np.random.default_rng(args.seed)
    q1, k2, v2 = (rng.normal(size=(grid.P, dim)) for _ in range(3))
    per_head = emm_forward(q1, k2, v2, grid, args.heads)
    out = {
        "patches": grid.P, "heads": args.heads, "head_dim": args.head_dim, "seed": args.seed,
        "per_head_shape": list(per_head[0].shape),
        "feature_length": emm_feature_length(dim, args.heads),
        "feature_length_formula": "2 * heads * (head_dim + 6)^2",
    }
    _write_json(out, args.out)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eightpt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def threads_arg(sp):
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads (output is identical for any value)")

    s = sub.add_parser("synth-gen", help="generate a synthetic (1/N) UtU dataset as JSONL")
    s.add_argument("--dist", required=True, choices=["3d", "2dl", "2dm", "2ds"], help="pose distribution")
    s.add_argument("--count", type=int, required=True, help="number of accepted instances")
    s.add_argument("--seed", type=int, required=True, help="master seed")
    s.add_argument("--out", required=True, help="output JSONL path (a .meta.json sidecar is written too)")
    s.add_argument("--stream", default="synth", help="seed-stream tag; use distinct tags for train/test")
    threads_arg(s)
    s.set_defaults(func=cmd_synth_gen)

    s = sub.add_parser("train", help="train the pose MLP")
    s.add_argument("--task", required=True, choices=["rotation", "translation"], help="regression target")
    s.add_argument("--dist", choices=["3d", "2dl", "2dm", "2ds"], help="generate training data from this distribution")
    s.add_argument("--train", help="training JSONL file (instead of --dist)")
    s.add_argument("--count", type=int, default=20000, help="instances to generate with --dist")
    s.add_argument("--data-seed", type=int, default=0, help="master seed for generated training data")
    s.add_argument("--config", help="JSON file with MLP settings (unknown keys are rejected)")
    s.add_argument("--seed", type=int, help="override the config's training seed")
    s.add_argument("--shuffle-labels", action="store_true", help="permute targets (null-model control)")
    s.add_argument("--out", required=True, help="output model file")
    threads_arg(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a trained model on a JSONL test set")
    s.add_argument("--model", required=True, help="model file written by train")
    s.add_argument("--test", required=True, help="test JSONL file")
    s.add_argument("--threshold", type=float, default=30.0, help="threshold in degrees for percent-within")
    s.add_argument("--errors", action="store_true", help="include per-sample errors in the report")
    s.add_argument("--out", help="report path (default stdout)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("chance", help="Monte Carlo chance baseline")
    s.add_argument("--dist", required=True, choices=["3d", "2dl", "2dm", "2ds"], help="pose distribution")
    s.add_argument("--task", required=True, choices=["rotation", "translation"], help="error type")
    s.add_argument("--draws", type=int, default=100_000, help="number of (truth, guess) pairs")
    s.add_argument("--pool", type=int, default=4000, help="accepted poses sampled for the two pools")
    s.add_argument("--seed", type=int, default=0, help="master seed")
    s.add_argument("--threshold", type=float, default=30.0, help="threshold in degrees for percent-within")
    s.add_argument("--out", help="report path (default stdout)")
    threads_arg(s)
    s.set_defaults(func=cmd_chance)

    s = sub.add_parser("eight-point", help="estimate E and pose from a correspondence CSV")
    s.add_argument("--input", required=True, help="CSV with columns u,v,u2,v2 in normalized coordinates")
    s.add_argument("--out", help="JSON output path (default stdout)")
    s.set_defaults(func=cmd_eight_point)

    s = sub.add_parser("verify-identity", help="check expand(Phi^T A Phi) == U^T U on random matchings")
    s.add_argument("--trials", type=int, default=200, help="number of random indicators")
    s.add_argument("--grids", type=_int_list, default=[4, 8, 16, 24], help="comma-separated grid sizes")
    s.add_argument("--seed", type=int, default=0, help="master seed")
    s.add_argument("--out", help="JSON summary path (default stdout)")
    s.set_defaults(func=cmd_verify_identity)

    s = sub.add_parser("quantize-sweep", help="pose error caused by snapping correspondences to a grid")
    s.add_argument("--levels", type=_int_list, default=[4, 8, 16, 24, 48, 96], help="comma-separated patches per axis")
    s.add_argument("--count", type=int, default=2000, help="instances per level")
    s.add_argument("--seed", type=int, default=0, help="master seed")
    s.add_argument("--points", type=int, default=10_000, help="3D points sampled per instance")
    s.add_argument("--min-correspondences", type=int, default=20, help="redraw instances with fewer shared points")
    s.add_argument("--shared", action="store_true", help="reuse the same instances at every level")
    s.add_argument("--out", help="CSV output path (default stdout)")
    threads_arg(s)
    s.set_defaults(func=cmd_quantize_sweep)

    s = sub.add_parser("attention-sweep", help="attention mass on matches, single vs dual softmax")
    s.add_argument("--p", type=int, default=576, help="patch count")
    s.add_argument("--steps", type=int, default=None, help="number of match-count steps (default every count)")
    s.add_argument("--matched-logit", type=float, default=100.0, help="logit at matched pairs")
    s.add_argument("--unmatched-logit", type=float, default=1.0, help="logit elsewhere")
    s.add_argument("--out", help="CSV output path (default stdout)")
    s.set_defaults(func=cmd_attention_sweep)

    s = sub.add_parser("emm-demo", help="print output shapes of the essential-matrix attention block")
    s.add_argument("--heads", type=int, default=3, help="attention heads")
    s.add_argument("--head-dim", type=int, default=64, help="value dimension per head")
    s.add_argument("--grid", type=int, default=24, help="patches per axis")
    s.add_argument("--seed", type=int, default=0, help="seed for the random tokens")
    s.add_argument("--out", help="JSON output path (default stdout)")
    s.set_defaults(func=cmd_emm_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except VerificationFailure as exc:
        print(f"verification-failed: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, FloatingPointError, KeyError) as exc:
        msg = str(exc).replace("\n", " ")
        if isinstance(exc, OSError) and exc.filename:
            msg = f"{exc.strerror}: {exc.filename}"
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
