"""Inference and metrics: greedy prediction, rule recall, invalid-rate accounting,
and replayable deduction traces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import BASE_CHANNELS, EnvState, _merge_path, featurize, reset, step, valid_actions
from .memory import Body, ConsistencyError, RuleMemory
from .mcts import SearchParams, search, select_action
from .net import PolicyValueNet
from .relational import RelationVocab, sample_paths
from .worldgen import GroundRuleSet, LabeledSample

INVALID = None  # prediction sentinel: no known relation produced


class ExplanationUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class TraceStep:
    head: int
    body: Body
    src: str
    mid: str
    dst: str


@dataclass(frozen=True)
class DeductionTrace:
    """Rule applications that reduced the winning path, in play order."""

    query: tuple[str, str]
    prediction: int
    start_path: tuple[int, ...]
    steps: tuple[TraceStep, ...]

    def replay(self) -> int:
        """Re-run the recorded merges over the start path; must end at the
        prediction (one relation left)."""
        path = self.start_path
        for s in self.steps:
            path, _, hits = _merge_path(path, None, s.body, s.head)
        if len(path) != 1:
            raise ConsistencyError(f"trace replay left {len(path)} relations")
        return path[0]

    def render(self, vocab: RelationVocab) -> list[str]:
        lines = []
        for s in self.steps:
            lines.append(
                f"({s.src} -{vocab.name(s.head)}-> {s.dst})  <=  "
                f"({s.src} -{vocab.name(s.body[0])}-> {s.mid}, "
                f"{s.mid} -{vocab.name(s.body[1])}-> {s.dst})"
            )
        return lines


@dataclass
class PredictOutcome:
    prediction: int | None
    reason: str  # ok | no_path | dead_end | invented_final | budget
    played: list[tuple[Body, int]] = field(default_factory=list)
    state: EnvState | None = None
    start_paths: tuple[tuple[int, ...], ...] = ()
    start_walks: tuple[tuple[int, ...], ...] = ()


def _stored_moves(state: EnvState, memory: RuleMemory) -> list[Body]:
    return [b for b in valid_actions(state) if b in memory.heads]


def predict(
    item: LabeledSample,
    net: PolicyValueNet,
    memory: RuleMemory,
    vocab: RelationVocab,
    sims: int = 64,
    policy_only: bool = False,
    max_paths: int = 4,
    max_hops: int = 20,
    seed: int = 0,
) -> PredictOutcome:
    """Greedy inference. The answer is INVALID (None) when no path connects the
    query, no stored rule applies at some step, or the final relation is invented.
    Memory is never written: only stored bodies are playable."""
    rng = np.random.default_rng(seed)
    paths = sample_paths(item.sample.graph, item.sample.query, max_paths, rng, max_hops)
    if len(paths) == 0:
        return PredictOutcome(INVALID, "no_path")
    state = reset(paths.paths, paths.walks)
    out = PredictOutcome(INVALID, "ok", state=state,
                         start_paths=paths.paths, start_walks=paths.walks)
    params = SearchParams(sims=sims, c_puct=1.5, tau=1.0, mode="eval")
    budget = 2 * state.initial_total
    while not state.terminal:
        if len(out.played) >= budget:
            out.reason = "budget"
            return out
        moves = _stored_moves(state, memory)
        if not moves:
            out.reason = "dead_end"
            out.state = state
            return out
        if len(moves) == 1:
            body = moves[0]
        elif policy_only:
            sparse = featurize(state, memory, extra_channels=net.k > BASE_CHANNELS)
            rho, _ = net.policy_value(sparse)
            prior = dict(zip(sparse.order, rho))
            body = max(moves, key=lambda b: (prior[b], [-x for x in b]))
        else:
            result = search(state, net, memory, vocab, params, rng)
            body = select_action(result, "argmax", rng)
        head = memory.heads[body]
        out.played.append((body, head))
        state = step(state, body, head)
    out.state = state
    final = state.final_rel
    assert final is not None
    if vocab.is_known(final):
        out.prediction = final
        out.reason = "ok"
    else:
        out.reason = "invented_final"
    return out


def build_trace(item: LabeledSample, outcome: PredictOutcome, vocab: RelationVocab) -> DeductionTrace:
    """Reconstruct the rule applications that reduced the winning path."""
    if outcome.prediction is INVALID or outcome.state is None:
        raise ExplanationUnavailable(f"prediction is INVALID ({outcome.reason})")
    win = next(i for i, p in enumerate(outcome.state.paths) if len(p) == 1)
    path = outcome.start_paths[win]
    walk = outcome.start_walks[win]
    names = item.sample.graph.node_names
    steps: list[TraceStep] = []
    for body, head in outcome.played:
        merged, new_walk, hits = _merge_path(path, walk, body, head)
        if hits == 0:
            continue
        pos = next(i for i in range(len(path) - 1) if (path[i], path[i + 1]) == body)
        steps.append(
            TraceStep(
                head=head, body=body,
                src=names[walk[pos]], mid=names[walk[pos + 1]], dst=names[walk[pos + 2]],
            )
        )
        path, walk = merged, new_walk
    trace = DeductionTrace(
        query=(names[item.sample.query[0]], names[item.sample.query[1]]),
        prediction=outcome.prediction,
        start_path=outcome.start_paths[win],
        steps=tuple(steps),
    )
    if trace.replay() != outcome.prediction:
        raise ConsistencyError("trace replay does not reproduce the prediction")
    return trace


def explain(
    item: LabeledSample,
    net: PolicyValueNet,
    memory: RuleMemory,
    vocab: RelationVocab,
    **kwargs,
) -> DeductionTrace:
    outcome = predict(item, net, memory, vocab, **kwargs)
    return build_trace(item, outcome, vocab)


# -- metrics ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    rule_recall: float
    invalid_ratio: float
    per_hop: dict[int, float]
    n: int

    def as_row(self) -> dict:
        row = {
            "accuracy": self.accuracy,
            "rule_recall": self.rule_recall,
            "invalid_ratio": self.invalid_ratio,
        }
        for k, v in sorted(self.per_hop.items()):
            row[f"hop_{k}_acc"] = v
        return row

    def table(self) -> str:
        rows = [
            ("samples", str(self.n)),
            ("accuracy", f"{self.accuracy:.4f}"),
            ("rule_recall", "n/a" if np.isnan(self.rule_recall) else f"{self.rule_recall:.4f}"),
            ("invalid_ratio", f"{self.invalid_ratio:.4f}"),
        ]
        rows += [(f"hop_{k}_acc", f"{v:.4f}") for k, v in sorted(self.per_hop.items())]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def rule_recall(memory: RuleMemory, ground_rules: GroundRuleSet) -> float:
    """Fraction of ground rules exactly matched by exported (head, body) triples."""
    if not ground_rules.rules:
        return float("nan")
    exported = {(head, body) for body, head, _score in memory.export_rules()}
    hit = sum(1 for r in ground_rules.rules if (r.head, r.body) in exported)
    return hit / len(ground_rules.rules)


def evaluate(
    test_set: list[LabeledSample],
    net: PolicyValueNet,
    memory: RuleMemory,
    vocab: RelationVocab,
    ground_rules: GroundRuleSet | None = None,
    sims: int = 64,
    policy_only: bool = False,
    max_paths: int = 4,
    max_hops: int = 20,
    seed: int = 0,
) -> Metrics:
    """Accuracy (INVALID counts as wrong), recall vs ground rules, invalid ratio,
    and a per-resolution-length accuracy breakdown. Strictly read-only."""
    if not test_set:
        raise ValueError("empty test set")
    mem_before = memory.state_hash()
    net_before = net.params_hash()
    correct = 0
    invalid = 0
    hop_total: dict[int, int] = {}
    hop_hit: dict[int, int] = {}
    for i, item in enumerate(test_set):
        out = predict(
            item, net, memory, vocab,
            sims=sims, policy_only=policy_only,
            max_paths=max_paths, max_hops=max_hops, seed=seed + 7919 * i,
        )
        hops = item.resolution_len
        hop_total[hops] = hop_total.get(hops, 0) + 1
        if out.prediction is INVALID:
            invalid += 1
        elif out.prediction == item.sample.target:
            correct += 1
            hop_hit[hops] = hop_hit.get(hops, 0) + 1
    if memory.state_hash() != mem_before or net.params_hash() != net_before:
        raise ConsistencyError("evaluation mutated the model")
    n = len(test_set)
    per_hop = {k: hop_hit.get(k, 0) / t for k, t in sorted(hop_total.items())}
    recall = rule_recall(memory, ground_rules) if ground_rules is not None else float("nan")
    return Metrics(
        accuracy=correct / n,
        rule_recall=recall,
        invalid_ratio=invalid / n,
        per_hop=per_hop,
        n=n,
    )
