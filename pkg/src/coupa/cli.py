"""Command-line surface: generate, train, eval, predict, serve-sim.

All verbs take long-form flags, exit 0 on success and exit 1 with a
one-line diagnostic on stderr otherwise. A JSON config file can preset
the model / training / protocol / generator sections; explicit flags win
over the file.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import data_synth as ds
from . import serving as sv
from .metrics import ScoredLabel, evaluate
from .model import ABLATE_NONE, ABLATE_POSITION, ABLATE_TIME, CoupaModel, ModelConfig, TrainConfig

_TUPLE_FIELDS = {"mlp_sizes", "monotone_hidden", "time_frequencies",
                 "position_type_fractions", "position_profiles"}


def _build(dc_type, section: dict, overrides: dict):
    """Dataclass from config-file section plus non-None flag overrides."""
    values = {}
    names = {f.name for f in dataclasses.fields(dc_type)}
    for src in (section, overrides):
        for key, value in src.items():
            if value is None:
                continue
            if key not in names:
                raise ValueError(f"unknown {dc_type.__name__} field {key!r}")
            if key in _TUPLE_FIELDS and isinstance(value, list):
                value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
            values[key] = value
    return dc_type(**values)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    section = dict(cfg.get("generator", {}))
    if "category_profiles" in section:
        section["category_profiles"] = [ds.CategoryProfile(**p)
                                        for p in section["category_profiles"]]
    overrides = {"n_users": args.users, "n_items": args.items,
                 "n_categories": args.categories, "horizon_days": args.days,
                 "seed": args.seed}
    spec = _build(ds.GeneratorSpec, section, overrides)
    events, truth = ds.generate_events(spec)
    ds.write_events(args.out, events)
    truth.save(args.truth_out or args.out + ".truth.npz")
    clicks = sum(e.label for e in events)
    print(f"wrote {len(events)} events ({clicks} clicks) to {args.out}")
    return 0


def _protocol(cfg: dict, args) -> ds.SampleProtocol:
    overrides = {"seed": getattr(args, "protocol_seed", None),
                 "train_days": getattr(args, "train_days", None)}
    return _build(ds.SampleProtocol, cfg.get("protocol", {}), overrides)


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    events = ds.read_events(args.events)
    protocol = _protocol(cfg, args)
    split = ds.build_samples(events, protocol)

    model_section = dict(cfg.get("model", {}))
    if "n_positions" not in model_section:
        model_section["n_positions"] = max(e.position for e in events) + 1
    model_cfg = _build(ModelConfig, model_section,
                       {"ablate": args.ablate, "seed": args.model_seed})
    train_cfg = _build(TrainConfig, cfg.get("train", {}),
                       {"learning_rate": args.lr, "batch_size": args.batch_size,
                        "epochs": args.epochs, "seed": args.seed,
                        "negatives_per_positive": args.negatives,
                        "temporal_weight": args.alpha, "l2": args.l2})

    model = CoupaModel(model_cfg, split.vocabulary)
    extra = {"train": dataclasses.asdict(train_cfg),
             "protocol": dataclasses.asdict(protocol)}
    trace = model.train(split, train_cfg, checkpoint_path=args.out,
                        log_path=args.log, extra_config=extra)
    last = trace[-1] if trace else {"train_loss": float("nan"), "val_gauc": float("nan")}
    print(f"trained {train_cfg.epochs} epochs on {len(split.train)} samples; "
          f"final loss {last['train_loss']:.4f}, validation gauc {last['val_gauc']:.4f}; "
          f"checkpoint at {args.out}")
    return 0


def _load_model(args) -> tuple[CoupaModel, dict]:
    model = CoupaModel.load(args.checkpoint)
    config = model.checkpoint_config
    ablate = getattr(args, "ablate", None)
    if ablate and ablate != model.config.ablate:
        if ablate == ABLATE_TIME:
            model.encoder.disabled = True
        elif ablate == ABLATE_POSITION:
            raise ValueError("a position-module ablation needs a checkpoint trained "
                             "with --ablate position-module")
    return model, config


def _split_for_checkpoint(args, config: dict) -> ds.DatasetSplit:
    events = ds.read_events(args.events)
    section = config.get("protocol", {})
    protocol = _build(ds.SampleProtocol, section, {})
    return ds.build_samples(events, protocol)


def cmd_eval(args) -> int:
    model, config = _load_model(args)
    split = _split_for_checkpoint(args, config)
    samples = split.validation if args.split == "validation" else split.test
    if not samples:
        raise ValueError(f"no {args.split} samples to evaluate")
    scores = model.score_samples(samples)
    report = evaluate([ScoredLabel(s.user_id, float(p), s.label)
                       for s, p in zip(samples, scores)],
                      baseline_gauc=args.baseline_gauc, baseline_name=args.baseline_name)
    text = report.to_text()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_predict(args) -> int:
    model, config = _load_model(args)
    split = _split_for_checkpoint(args, config)
    samples = split.test or split.train
    scores = model.predict_scores(samples)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("user_id\tscore\tlabel\n")
        for s, p in zip(samples, scores):
            fh.write(f"{s.user_id}\t{float(p)!r}\t{s.label}\n")
    print(f"wrote {len(samples)} scores to {args.out}")
    return 0


def cmd_serve_sim(args) -> int:
    model, _ = _load_model(args)
    events = ds.read_events(args.events)
    requests = sv.read_requests(args.requests)
    item_categories = {e.item_id: e.category_id for e in events}
    lines: list[str] = []
    for i, request in enumerate(requests):
        store = sv.TierStore.from_events(events, request.timestamp)
        sim = sv.ServingSimulator(model, store, item_categories, top_m=args.top_m)
        result = sim.serve(request)
        lines.extend(sv.format_result(i, request, result))
    out = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("request\tuser_id\ttimestamp\trank\tchannel\tscore\tcontents\n")
            fh.write(out)
    else:
        sys.stdout.write(out)
    print(f"served {len(requests)} requests")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coupa",
                                     description="continuous-time, position-aware recommender")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic event log")
    g.add_argument("--out", required=True)
    g.add_argument("--truth-out")
    g.add_argument("--config")
    g.add_argument("--users", type=int)
    g.add_argument("--items", type=int)
    g.add_argument("--categories", type=int)
    g.add_argument("--days", type=float)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a model on an event log")
    t.add_argument("--events", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config")
    t.add_argument("--log")
    t.add_argument("--ablate", choices=[ABLATE_NONE, ABLATE_TIME, ABLATE_POSITION])
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--negatives", type=int)
    t.add_argument("--alpha", type=float)
    t.add_argument("--l2", type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--model-seed", type=int)
    t.add_argument("--protocol-seed", type=int)
    t.add_argument("--train-days", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="metric report for a checkpoint on a test split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--events", required=True)
    e.add_argument("--out")
    e.add_argument("--split", choices=["test", "validation"], default="test")
    e.add_argument("--ablate", choices=[ABLATE_TIME, ABLATE_POSITION])
    e.add_argument("--baseline-gauc", type=float)
    e.add_argument("--baseline-name")
    e.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="serving-time scores for the test samples")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    s = sub.add_parser("serve-sim", help="two-stage serving over a request file")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--events", required=True)
    s.add_argument("--requests", required=True)
    s.add_argument("--out")
    s.add_argument("--top-m", type=int, default=sv.TOP_M_CHANNELS)
    s.set_defaults(func=cmd_serve_sim)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
