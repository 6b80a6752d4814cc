"""Command-line surface: gen | train | eval | explain | export-rules."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataio, evaluate, trainer
from .config import ConfigError, add_config_flags, build_config, overrides_from_args
from .memory import ConsistencyError, MemoryExhaustedError
from .relational import VocabularyError, build_vocab
from .worldgen import GenConfig, GenerationError, clean_config, generate_rule_set, generate_split
from .worlds import generate_counts, relation_names

USER_ERRORS = (
    ConfigError, GenerationError, VocabularyError, ConsistencyError,
    MemoryExhaustedError, dataio.DataFormatError, FileNotFoundError, ValueError,
)


def _len_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        lo_i, hi_i = int(lo), int(hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from exc
    if lo_i > hi_i:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    return lo_i, hi_i


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hornmine",
        description="Horn-rule induction over relation graphs: generate worlds, "
        "train the rule memory and policy-value network, evaluate, and explain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic world")
    g.add_argument("--relations", type=int, default=20)
    g.add_argument("--rules", type=int, default=20)
    g.add_argument("--train-len", type=_len_range, default=(2, 3), metavar="LO:HI")
    g.add_argument("--test-len", type=_len_range, default=(4, 6), metavar="LO:HI")
    g.add_argument("--train-n", type=int, default=2000)
    g.add_argument("--test-n", type=int, default=300)
    g.add_argument("--noise", type=float, default=0.0, help="train-split corruption rate")
    g.add_argument("--distractors", type=int, default=5)
    g.add_argument("--alias-2hop", type=float, default=0.0,
                   help="probability of a consistent 2-hop parallel channel (train split)")
    g.add_argument("--chain-bias", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train on a generated world")
    t.add_argument("--data", required=True, help="train JSONL")
    t.add_argument("--vocab", required=True, help="vocab JSON from gen")
    t.add_argument("--out", required=True, help="checkpoint directory")
    t.add_argument("--config", default=None, help="key=value config file")
    t.add_argument("--eval-data", default=None, help="optional test JSONL for per-epoch metrics")
    t.add_argument("--rules", default=None, help="optional ground rules JSON for recall metrics")
    t.add_argument("--quiet", action="store_true")
    add_config_flags(t)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--data", required=True)
    e.add_argument("--model", required=True, help="checkpoint directory")
    e.add_argument("--rules", default=None)
    e.add_argument("--sims", type=int, default=64)
    e.add_argument("--policy-only", action="store_true")
    e.add_argument("--max-paths", type=int, default=4)
    e.add_argument("--max-hops", type=int, default=20)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--csv", default=None, help="write metrics CSV here")

    x = sub.add_parser("explain", help="print the deduction trace for one sample")
    x.add_argument("--data", required=True)
    x.add_argument("--model", required=True)
    x.add_argument("--sample", type=int, required=True, help="0-based sample index")
    x.add_argument("--sims", type=int, default=64)
    x.add_argument("--policy-only", action="store_true")
    x.add_argument("--max-paths", type=int, default=4)
    x.add_argument("--max-hops", type=int, default=20)
    x.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("export-rules", help="dump the learned rules of a checkpoint")
    r.add_argument("--model", required=True)
    r.add_argument("--out", default=None, help="write JSON here instead of stdout")
    return parser


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lo = min(args.train_len[0], args.test_len[0])
    hi = max(args.train_len[1], args.test_len[1])
    base = GenConfig(
        num_relations=args.relations, num_rules=args.rules,
        min_len=lo, max_len=hi,
        noise_rate=args.noise, distractor_edges=args.distractors,
        alias_2hop_prob=args.alias_2hop, chain_bias=args.chain_bias, seed=args.seed,
    )
    rng = np.random.default_rng(args.seed)
    rules = generate_rule_set(base, rng)
    vocab = build_vocab(known_names=relation_names(args.relations), n_invented=1)

    gen_train = replace(base, min_len=args.train_len[0], max_len=args.train_len[1])
    gen_test = replace(clean_config(base), min_len=args.test_len[0], max_len=args.test_len[1])
    weights = {l: 1.0 for l in range(gen_train.min_len, gen_train.max_len + 1)}
    train = generate_split(rules, gen_train, args.train_n, weights, rng)
    lengths = list(range(gen_test.min_len, gen_test.max_len + 1))
    counts = {l: args.test_n // len(lengths) for l in lengths}
    for i in range(args.test_n - sum(counts.values())):
        counts[lengths[i % len(lengths)]] += 1
    test = generate_counts(rules, gen_test, counts, rng)

    dataio.write_samples(out / "train.jsonl", train, vocab)
    dataio.write_samples(out / "test.jsonl", test, vocab)
    dataio.write_ground_rules(out / "ground_rules.json", rules, vocab)
    dataio.write_vocab(out / "vocab.json", vocab)
    print(f"wrote {len(train)} train / {len(test)} test samples to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = build_config(args.config, overrides_from_args(args))
    known = dataio.load_known_names(args.vocab)
    vocab = build_vocab(known_names=known, n_invented=cfg.n_invented, use_dummy=cfg.use_dummy)
    dataset = dataio.load_samples(args.data, vocab)
    eval_set = dataio.load_samples(args.eval_data, vocab) if args.eval_data else None
    rules = dataio.load_ground_rules(args.rules, vocab) if args.rules else None
    log = None if args.quiet else print
    net, memory, history = trainer.train(
        dataset, cfg, vocab,
        ckpt_dir=args.out, eval_set=eval_set, ground_rules=rules, log=log,
    )
    print(f"trained {cfg.epochs} epochs; {len(memory.heads)} stored rules; "
          f"{len(memory.export_rules())} exported; checkpoint at {args.out}")
    return 0


def cmd_eval(args) -> int:
    net, memory, _cfg, vocab = dataio.load_checkpoint(args.model)
    samples = dataio.load_samples(args.data, vocab)
    rules = dataio.load_ground_rules(args.rules, vocab) if args.rules else None
    metrics = evaluate.evaluate(
        samples, net, memory, vocab,
        ground_rules=rules, sims=args.sims, policy_only=args.policy_only,
        max_paths=args.max_paths, max_hops=args.max_hops, seed=args.seed,
    )
    print(metrics.table())
    if args.csv:
        hop_keys = sorted(metrics.per_hop)
        dataio.write_metrics_csv(args.csv, [metrics.as_row()], hop_keys)
    return 0


def cmd_explain(args) -> int:
    net, memory, _cfg, vocab = dataio.load_checkpoint(args.model)
    samples = dataio.load_samples(args.data, vocab)
    if not 0 <= args.sample < len(samples):
        raise ValueError(f"sample index {args.sample} out of range (0..{len(samples) - 1})")
    item = samples[args.sample]
    outcome = evaluate.predict(
        item, net, memory, vocab,
        sims=args.sims, policy_only=args.policy_only,
        max_paths=args.max_paths, max_hops=args.max_hops, seed=args.seed,
    )
    if outcome.prediction is None:
        print(f"INVALID ({outcome.reason})", file=sys.stderr)
        return 1
    trace = evaluate.build_trace(item, outcome, vocab)
    x, y = trace.query
    print(f"query {x} -> {y}: predicted {vocab.name(outcome.prediction)} "
          f"(target {vocab.name(item.sample.target)})")
    for line in trace.render(vocab):
        print("  " + line)
    return 0


def cmd_export_rules(args) -> int:
    _net, memory, _cfg, vocab = dataio.load_checkpoint(args.model)
    if args.out:
        dataio.write_exported_rules(args.out, memory)
        print(f"wrote {len(memory.export_rules())} rules to {args.out}")
    else:
        for body, head, score in memory.export_rules():
            print(f"{vocab.name(head)} <= {vocab.name(body[0])}, {vocab.name(body[1])}"
                  f"   # score {score:.3f}")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "explain": cmd_explain,
    "export-rules": cmd_export_rules,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
