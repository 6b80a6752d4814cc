"""PUCT tree search over merge actions, guided by the policy-value network.

Each episode step builds a fresh tree. Simulations resolve rule heads by lookup
only: an unstored body maps to a fixed placeholder id, so the search never writes
to the rule memory. Evaluation-mode search additionally restricts branching to
bodies already stored in memory, since an unstored body at prediction time can
never finish at a known relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import BASE_CHANNELS, EnvState, featurize, step, terminal_reward, valid_actions
from .memory import Body, RuleMemory
from .net import PolicyValueNet
from .relational import RelationVocab

EVAL_KNOWN_VALUE = 0.1  # terminal bonus during evaluation, where the label is unseen


@dataclass(frozen=True)
class SearchParams:
    sims: int = 64
    c_puct: float = 1.5
    tau: float = 1.0
    dirichlet_alpha: float = 0.3
    dirichlet_weight: float = 0.25
    mode: str = "train"  # "train" | "eval"

    def validate(self) -> None:
        if self.sims < 1:
            raise ValueError("sims must be >= 1")
        if self.mode not in ("train", "eval"):
            raise ValueError(f"unknown search mode {self.mode!r}")


@dataclass
class SearchNode:
    state: EnvState
    moves: list[Body]
    P: np.ndarray
    N: np.ndarray
    W: np.ndarray
    children: dict[int, "SearchNode"] = field(default_factory=dict)

    @property
    def total_visits(self) -> int:
        return int(self.N.sum())

    def q_values(self) -> np.ndarray:
        q = np.zeros_like(self.W)
        seen = self.N > 0
        q[seen] = self.W[seen] / self.N[seen]
        return q


@dataclass(frozen=True)
class SearchResult:
    moves: tuple[Body, ...]
    pi: np.ndarray
    visits: np.ndarray
    root_value: float


class _Searcher:
    def __init__(
        self,
        net: PolicyValueNet,
        memory: RuleMemory,
        vocab: RelationVocab,
        params: SearchParams,
        target: int | None,
        rng: np.random.Generator,
    ):
        self.net = net
        self.memory = memory
        self.vocab = vocab
        self.params = params
        self.target = target
        self.rng = rng
        self.extra = net.k > BASE_CHANNELS
        self.placeholder = memory.placeholder_id()

    def sim_head(self, body: Body) -> int:
        head = self.memory.heads.get(body)
        return self.placeholder if head is None else head

    def node_moves(self, state: EnvState) -> list[Body]:
        moves = valid_actions(state)
        if self.params.mode == "eval":
            moves = [b for b in moves if b in self.memory.heads]
        return moves

    def leaf_value(self, state: EnvState) -> float:
        if state.terminal:
            assert state.final_rel is not None
            if self.params.mode == "train":
                assert self.target is not None
                return terminal_reward(state.final_rel, self.target, self.vocab)
            return EVAL_KNOWN_VALUE if self.vocab.is_known(state.final_rel) else 0.0
        return 0.0  # dead end: non-terminal with no searchable move

    def expand(self, state: EnvState) -> tuple[SearchNode, float]:
        moves = [] if state.terminal else self.node_moves(state)
        if not moves:
            empty = np.zeros(0)
            return SearchNode(state, [], empty, empty.copy(), empty.copy()), self.leaf_value(state)
        sparse = featurize(state, self.memory, extra_channels=self.extra)
        rho, value = self.net.policy_value(sparse)
        if self.params.mode == "eval":
            keep = {b: p for b, p in zip(sparse.order, rho)}
            pri = np.asarray([keep[b] for b in moves])
            total = pri.sum()
            pri = pri / total if total > 0 else np.full(len(moves), 1.0 / len(moves))
        else:
            pri = rho
        n = len(moves)
        node = SearchNode(state, moves, pri, np.zeros(n), np.zeros(n))
        return node, value

    def select_index(self, node: SearchNode) -> int:
        total = node.total_visits
        if total == 0:
            return int(np.argmax(node.P))
        u = node.q_values() + self.params.c_puct * node.P * np.sqrt(total) / (1.0 + node.N)
        return int(np.argmax(u))

    def run(self, root_state: EnvState) -> tuple[SearchNode, SearchResult]:
        p = self.params
        root, _ = self.expand(root_state)
        if not root.moves:
            raise ValueError("root has no searchable actions")
        if p.mode == "train" and p.dirichlet_weight > 0 and len(root.moves) > 1:
            noise = self.rng.dirichlet([p.dirichlet_alpha] * len(root.moves))
            root.P = (1.0 - p.dirichlet_weight) * root.P + p.dirichlet_weight * noise
        for _ in range(p.sims):
            node = root
            trail: list[tuple[SearchNode, int]] = []
            while True:
                idx = self.select_index(node)
                trail.append((node, idx))
                child = node.children.get(idx)
                if child is None:
                    body = node.moves[idx]
                    next_state = step(node.state, body, self.sim_head(body))
                    child, value = self.expand(next_state)
                    node.children[idx] = child
                    break
                if child.state.terminal or not child.moves:
                    value = self.leaf_value(child.state)
                    break
                node = child
            for parent, idx in trail:
                parent.N[idx] += 1
                parent.W[idx] += value
        pi = visit_policy(root.N, p.tau)
        root_value = float(root.W.sum() / max(root.total_visits, 1))
        result = SearchResult(tuple(root.moves), pi, root.N.copy(), root_value)
        return root, result


def visit_policy(visits: np.ndarray, tau: float) -> np.ndarray:
    """Turn root visit counts into a play distribution, pi_i proportional to N_i^(1/tau)."""
    if tau <= 1e-3:
        pi = np.zeros(len(visits))
        pi[int(np.argmax(visits))] = 1.0
        return pi
    powered = np.asarray(visits, dtype=float) ** (1.0 / tau)
    return powered / powered.sum()


def search(
    root: EnvState,
    net: PolicyValueNet,
    memory: RuleMemory,
    vocab: RelationVocab,
    params: SearchParams,
    rng: np.random.Generator,
    target: int | None = None,
) -> SearchResult:
    """Run PUCT simulations from `root` and return the visit distribution.

    `target` is the queried relation, required in train mode (terminal leaves are
    scored against it) and ignored in eval mode.
    """
    params.validate()
    if root.terminal:
        raise ValueError("cannot search a terminal state")
    if params.mode == "train" and target is None:
        raise ValueError("train-mode search needs the target relation")
    _, result = _Searcher(net, memory, vocab, params, target, rng).run(root)
    return result


def select_action(result: SearchResult, mode: str, rng: np.random.Generator) -> Body:
    """Pick the move to play: `sample` draws from pi, `argmax` takes the max-pi
    move with lowest-pair tie-break (moves are already in sorted order)."""
    if mode == "sample":
        return result.moves[int(rng.choice(len(result.moves), p=result.pi))]
    if mode == "argmax":
        return result.moves[int(np.argmax(result.pi))]
    raise ValueError(f"unknown selection mode {mode!r}")
