"""Experiment presets: one place where world shapes and training settings for the
packaged experiments live, shared by the scripts and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import TrainConfig
from .relational import RelationVocab, build_vocab
from .worldgen import (
    GenConfig,
    GroundRuleSet,
    LabeledSample,
    clean_config,
    generate_rule_set,
    generate_sample,
    generate_split,
    reachable_lengths,
)


@dataclass(frozen=True)
class WorldSpec:
    name: str
    gen_train: GenConfig
    gen_test: GenConfig
    train_weights: dict[int, float]
    test_counts: dict[int, int]
    n_train: int
    train_cfg: TrainConfig
    eval_sims: int = 64
    eval_max_paths: int = 4
    eval_policy_only: bool = False
    seed: int = 0


@dataclass(frozen=True)
class BuiltWorld:
    spec: WorldSpec
    rules: GroundRuleSet
    vocab: RelationVocab
    train: list[LabeledSample]
    test: list[LabeledSample]


def relation_names(m: int) -> list[str]:
    return [f"r{i}" for i in range(m)]


def generate_counts(
    rules: GroundRuleSet, cfg: GenConfig, counts: dict[int, int], rng: np.random.Generator
) -> list[LabeledSample]:
    """Exactly counts[length] samples per resolution length, shuffled."""
    reach = reachable_lengths(rules, cfg.max_len)
    out: list[LabeledSample] = []
    for length in sorted(counts):
        for _ in range(counts[length]):
            out.append(generate_sample(rules, length, cfg, rng, reach=reach))
    order = rng.permutation(len(out))
    return [out[i] for i in order]


def build_world(spec: WorldSpec) -> BuiltWorld:
    rng = np.random.default_rng(spec.seed)
    span = replace(
        spec.gen_train,
        min_len=min(spec.gen_train.min_len, spec.gen_test.min_len),
        max_len=max(spec.gen_train.max_len, spec.gen_test.max_len),
    )
    rules = generate_rule_set(span, rng)
    vocab = build_vocab(
        known_names=relation_names(spec.gen_train.num_relations),
        n_invented=spec.train_cfg.n_invented,
        use_dummy=spec.train_cfg.use_dummy,
    )
    train = (
        generate_split(rules, spec.gen_train, spec.n_train, spec.train_weights, rng)
        if spec.n_train > 0
        else []
    )
    test = generate_counts(rules, spec.gen_test, spec.test_counts, rng)
    return BuiltWorld(spec=spec, rules=rules, vocab=vocab, train=train, test=test)


def tiny_world(seed: int = 11) -> WorldSpec:
    """Small fast world for integration tests."""
    gen = GenConfig(num_relations=6, num_rules=6, min_len=2, max_len=3,
                    distractor_edges=3, seed=seed)
    return WorldSpec(
        name="tiny",
        gen_train=gen,
        gen_test=clean_config(gen),
        train_weights={2: 1.0, 3: 1.0},
        test_counts={2: 20, 3: 20},
        n_train=80,
        train_cfg=TrainConfig(
            epochs=2, n_invented=6, sims=12, warmup_episodes=40, seed=seed,
        ),
        eval_sims=24,
        seed=seed,
    )


def oracle_world(seed: int = 23) -> WorldSpec:
    """Clean world for frozen-memory inference against the span oracle:
    200 samples across resolution lengths 2..7, no training.

    With an untrained value head the search is blind, so deep samples need a
    large budget before the surviving line outweighs path-corrupting merges."""
    gen = GenConfig(num_relations=10, num_rules=12, min_len=2, max_len=7,
                    distractor_edges=5, chain_bias=0.6, seed=seed)
    counts = {l: 34 for l in range(2, 8)}
    counts[2] = 30  # 30 + 5*34 = 200
    return WorldSpec(
        name="oracle",
        gen_train=gen,
        gen_test=clean_config(gen),
        train_weights={},
        test_counts=counts,
        n_train=0,
        train_cfg=TrainConfig(n_invented=8, seed=seed),
        eval_sims=1024,
        seed=seed,
    )


def systematicity_world(seed: int = 31) -> WorldSpec:
    """Train on short compositions, test far longer ones.

    Evaluation here trusts the learned policy directly: the value head only ever
    saw depth <= 3 states, and lookahead steered by a miscalibrated value does
    worse than the policy it is meant to improve once paths get long."""
    gen = GenConfig(num_relations=20, num_rules=20, min_len=2, max_len=10,
                    distractor_edges=5, chain_bias=0.6, seed=seed)
    return WorldSpec(
        name="systematicity",
        gen_train=replace(gen, max_len=3),
        gen_test=replace(clean_config(gen), min_len=4),
        train_weights={2: 1.0, 3: 1.0},
        test_counts={l: 100 for l in range(4, 11)},
        n_train=2000,
        train_cfg=TrainConfig(
            epochs=4, n_invented=12, sims=48, vt_pos=0.35, seed=seed,
        ),
        eval_sims=8,
        eval_policy_only=True,
        seed=seed,
    )


def noisy_world(seed: int = 47) -> WorldSpec:
    """Average resolution length ~3.2 with 10% corrupted train targets."""
    gen = GenConfig(num_relations=20, num_rules=20, min_len=2, max_len=5,
                    distractor_edges=5, chain_bias=0.6, noise_rate=0.1, seed=seed)
    return WorldSpec(
        name="noisy",
        gen_train=gen,
        gen_test=clean_config(gen),
        train_weights={2: 0.4, 3: 0.2, 4: 0.2, 5: 0.2},
        test_counts={2: 120, 3: 60, 4: 60, 5: 60},
        n_train=2000,
        train_cfg=TrainConfig(
            epochs=3, n_invented=20, sims=48, vt_pos=0.35, seed=seed,
        ),
        eval_sims=64,
        seed=seed,
    )


def no_simple_world(seed: int = 61) -> WorldSpec:
    """No length-2 training data; a fraction of train graphs carry a consistent
    2-hop parallel channel so final merges can still ground known-headed rules."""
    gen = GenConfig(num_relations=14, num_rules=16, min_len=2, max_len=7,
                    distractor_edges=4, chain_bias=0.6, alias_2hop_prob=0.5, seed=seed)
    return WorldSpec(
        name="no_simple",
        gen_train=replace(gen, min_len=3, max_len=5),
        gen_test=clean_config(gen),
        train_weights={3: 1.0, 4: 1.0, 5: 1.0},
        test_counts={l: 50 for l in range(2, 8)},
        n_train=1500,
        train_cfg=TrainConfig(
            epochs=3, n_invented=50, sims=48, vt_pos=0.8, seed=seed,
        ),
        eval_sims=96,
        seed=seed,
    )


def with_invented(spec: WorldSpec, n_invented: int) -> WorldSpec:
    return replace(spec, train_cfg=replace(spec.train_cfg, n_invented=n_invented))


PRESETS = {
    "tiny": tiny_world,
    "oracle": oracle_world,
    "systematicity": systematicity_world,
    "noisy": noisy_world,
    "no-simple": no_simple_world,
}
