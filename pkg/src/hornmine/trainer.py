"""Training loop: curriculum ordering, episode rollout, rule-memory updates,
replay buffer, and network optimization."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .env import BASE_CHANNELS, EXTRA_CHANNELS, featurize, reset, step, terminal_reward
from .mcts import search, select_action
from .memory import MemoryExhaustedError, RuleMemory, ScoredAction
from .net import NetSample, NumericError, PolicyValueNet, make_net_sample
from .relational import RelationVocab, sample_paths
from .worldgen import LabeledSample


@dataclass
class EpisodeStep:
    state: object  # SparseState
    pi: np.ndarray
    action: ScoredAction


@dataclass
class EpisodeTrace:
    steps: list[EpisodeStep]
    final_rel: int | None
    z: float
    outcome: str  # hit | known_miss | unresolved | aborted | no_path | instant
    item: LabeledSample


@dataclass
class TrainState:
    net: PolicyValueNet
    memory: RuleMemory
    replay: deque
    episodes: int = 0
    losses: list[float] = field(default_factory=list)


def curriculum_sort(dataset: list[LabeledSample], epoch: int, seed: int) -> list[LabeledSample]:
    """Epoch 1: easiest first, ascending resolution length (stable). Later epochs:
    a seeded shuffle of the natural order."""
    if epoch <= 1:
        return sorted(dataset, key=lambda it: it.resolution_len)
    rng = np.random.default_rng(seed + epoch)
    order = rng.permutation(len(dataset))
    return [dataset[i] for i in order]


def run_episode(
    item: LabeledSample,
    net: PolicyValueNet,
    memory: RuleMemory,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> EpisodeTrace:
    """Roll one sample: search, play, resolve heads (mutating memory), then apply
    the terminal score update, rewrite consolidation, decay, and pruning."""
    vocab = memory.vocab
    y = item.sample.target
    paths = sample_paths(item.sample.graph, item.sample.query, cfg.max_paths, rng, cfg.max_hops)
    if len(paths) == 0:
        return EpisodeTrace([], None, 0.0, "no_path", item)
    state = reset(paths.paths, paths.walks, target=y)
    if state.terminal:
        z = terminal_reward(state.final_rel, y, vocab)
        return EpisodeTrace([], state.final_rel, float(z), "instant", item)

    budget = 2 * state.initial_total
    params = cfg.search_params("train")
    steps: list[EpisodeStep] = []
    while not state.terminal and len(steps) < budget:
        sparse = featurize(state, memory, extra_channels=cfg.extra_channels)
        result = search(state, net, memory, vocab, params, rng, target=y)
        body = select_action(result, "sample", rng)
        action = memory.resolve_head(body, rng)
        pi = np.asarray(result.pi, dtype=float)
        steps.append(EpisodeStep(sparse, pi, action))
        state = step(state, body, action.head)

    if not state.terminal:
        z = 0.0
        outcome = "aborted"
    else:
        z = float(terminal_reward(state.final_rel, y, vocab))
        simple = len(steps) == 1
        soften = simple and cfg.simple_bonuses
        outcome = memory.apply_episode_end([s.action.body for s in steps], y, soften_wrong=soften)
        if simple and cfg.simple_bonuses:
            body = steps[-1].action.body
            if outcome == "hit":
                memory.add_score(body, cfg.v_true)
            elif outcome == "known_miss":
                memory.add_score(body, cfg.v_wrong)
    memory.decay_scores()
    memory.prune()
    if __debug__:
        memory.check_invariants()
    return EpisodeTrace(steps, state.final_rel, z, outcome, item)


def push_replay(replay: deque, trace: EpisodeTrace) -> None:
    for s in trace.steps:
        replay.append(make_net_sample(s.state, s.pi, trace.z))


def sample_batch(replay: deque, batch_size: int, rng: np.random.Generator) -> list[NetSample]:
    idx = rng.integers(len(replay), size=batch_size)
    return [replay[int(i)] for i in idx]


def train(
    dataset: list[LabeledSample],
    cfg: TrainConfig,
    vocab: RelationVocab,
    ckpt_dir: str | Path | None = None,
    eval_set: list[LabeledSample] | None = None,
    ground_rules=None,
    log=None,
) -> tuple[PolicyValueNet, RuleMemory, list[dict]]:
    """Full training run; returns the net, the rule memory, and per-epoch metrics."""
    from . import dataio, evaluate

    cfg.validate()
    if not dataset:
        raise ValueError("empty training dataset")
    rng = np.random.default_rng(cfg.seed)
    k = BASE_CHANNELS + (EXTRA_CHANNELS if cfg.extra_channels else 0)
    net = PolicyValueNet(
        vocab.total, k, hidden=cfg.hidden, l2=cfg.l2, clip_norm=cfg.clip_norm, seed=cfg.seed
    )
    memory = RuleMemory(vocab, cfg.score_params())
    replay: deque = deque(maxlen=cfg.replay_capacity)
    ts = TrainState(net, memory, replay)
    history: list[dict] = []
    hop_keys = sorted({it.resolution_len for it in (eval_set or dataset)})

    for epoch in range(1, cfg.epochs + 1):
        order = curriculum_sort(dataset, epoch, cfg.seed)
        for item in order:
            try:
                trace = run_episode(item, net, memory, cfg, rng)
            except MemoryExhaustedError:
                if ckpt_dir is not None:
                    dataio.save_checkpoint(ckpt_dir, net, memory, cfg)
                raise
            push_replay(replay, trace)
            ts.episodes += 1
            if (
                cfg.net_training
                and ts.episodes > cfg.warmup_episodes
                and len(replay) >= cfg.batch_size
            ):
                batch = sample_batch(replay, cfg.batch_size, rng)
                try:
                    ts.losses.append(net.train_step(batch, cfg.lr))
                except NumericError:
                    if ckpt_dir is not None:
                        dataio.save_checkpoint(ckpt_dir, net, memory, cfg)
                    raise

        row = epoch_metrics(epoch, net, memory, vocab, cfg, eval_set, ground_rules)
        history.append(row)
        if log is not None:
            log(
                f"epoch {epoch}/{cfg.epochs}: rules={len(memory.heads)} "
                f"recall={row['rule_recall']:.3f} acc={row['accuracy']:.3f} "
                f"loss={np.mean(ts.losses[-200:]) if ts.losses else float('nan'):.4f}"
            )
        if ckpt_dir is not None:
            dataio.save_checkpoint(Path(ckpt_dir) / f"epoch_{epoch:02d}", net, memory, cfg)

    memory.prune()
    if ckpt_dir is not None:
        dataio.save_checkpoint(ckpt_dir, net, memory, cfg)
        dataio.write_exported_rules(Path(ckpt_dir) / "rules.json", memory)
        dataio.write_metrics_csv(Path(ckpt_dir) / "metrics.csv", history, hop_keys)
    return net, memory, history


def epoch_metrics(
    epoch: int,
    net: PolicyValueNet,
    memory: RuleMemory,
    vocab: RelationVocab,
    cfg: TrainConfig,
    eval_set,
    ground_rules,
) -> dict:
    from . import evaluate

    row: dict = {"epoch": epoch, "accuracy": float("nan"), "invalid_ratio": float("nan")}
    row["rule_recall"] = (
        evaluate.rule_recall(memory, ground_rules) if ground_rules is not None else float("nan")
    )
    if eval_set:
        m = evaluate.evaluate(
            eval_set, net, memory, vocab,
            ground_rules=ground_rules, sims=cfg.sims, seed=cfg.seed,
        )
        row.update(m.as_row())
    return row
