"""Deduction episode environment: path merging, action validity, features, rewards.

A state is the current list of relation paths for one query. An action is an
ordered relation pair; applying it replaces every non-overlapping left-to-right
occurrence of the pair, in every path, with the action's head. The episode ends
when any path shrinks to a single relation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .memory import Body, RuleMemory
from .relational import RelationVocab

BASE_CHANNELS = 9
EXTRA_CHANNELS = 2


class IllegalActionError(ValueError):
    pass


class InvalidEpisodeError(ValueError):
    pass


@dataclass(frozen=True)
class EnvState:
    paths: tuple[tuple[int, ...], ...]
    walks: tuple[tuple[int, ...], ...] | None
    target: int | None
    steps: int
    terminal: bool
    final_rel: int | None
    initial_total: int

    def total_len(self) -> int:
        return sum(len(p) for p in self.paths)


def _terminal_scan(paths: tuple[tuple[int, ...], ...]) -> int | None:
    for i, p in enumerate(paths):
        if len(p) == 1:
            return i
    return None


def reset(
    paths: list[tuple[int, ...]] | tuple[tuple[int, ...], ...],
    walks: list[tuple[int, ...]] | None = None,
    target: int | None = None,
) -> EnvState:
    if not paths or any(len(p) == 0 for p in paths):
        raise InvalidEpisodeError("need at least one nonempty path")
    paths_t = tuple(tuple(p) for p in paths)
    walks_t = tuple(tuple(w) for w in walks) if walks is not None else None
    total = sum(len(p) for p in paths_t)
    hit = _terminal_scan(paths_t)
    return EnvState(
        paths=paths_t,
        walks=walks_t,
        target=target,
        steps=0,
        terminal=hit is not None,
        final_rel=paths_t[hit][0] if hit is not None else None,
        initial_total=total,
    )


def valid_actions(state: EnvState) -> list[Body]:
    """Ordered relation pairs adjacent in at least one current path, sorted."""
    if state.terminal:
        raise InvalidEpisodeError("terminal state has no actions")
    pairs = {
        (p[i], p[i + 1]) for p in state.paths for i in range(len(p) - 1)
    }
    if not pairs:
        raise InvalidEpisodeError("non-terminal state with no adjacent pair")
    return sorted(pairs)


def _merge_path(
    path: tuple[int, ...], walk: tuple[int, ...] | None, body: Body, head: int
) -> tuple[tuple[int, ...], tuple[int, ...] | None, int]:
    """Replace non-overlapping left-to-right occurrences of body with head."""
    out: list[int] = []
    wout: list[int] | None = [walk[0]] if walk is not None else None
    i = 0
    hits = 0
    while i < len(path):
        if i + 1 < len(path) and path[i] == body[0] and path[i + 1] == body[1]:
            out.append(head)
            if wout is not None:
                wout.append(walk[i + 2])
            i += 2
            hits += 1
        else:
            out.append(path[i])
            if wout is not None:
                wout.append(walk[i + 1])
            i += 1
    return tuple(out), tuple(wout) if wout is not None else None, hits


def step(state: EnvState, body: Body, head: int) -> EnvState:
    """Apply the merge to every path; terminal on the first path reaching length 1."""
    if state.terminal:
        raise InvalidEpisodeError("cannot step a terminal state")
    new_paths: list[tuple[int, ...]] = []
    new_walks: list[tuple[int, ...]] | None = [] if state.walks is not None else None
    total_hits = 0
    for idx, path in enumerate(state.paths):
        walk = state.walks[idx] if state.walks is not None else None
        merged, mwalk, hits = _merge_path(path, walk, body, head)
        total_hits += hits
        new_paths.append(merged)
        if new_walks is not None:
            new_walks.append(mwalk)
    if total_hits == 0:
        raise IllegalActionError(f"pair {body} is not adjacent in any path")
    paths_t = tuple(new_paths)
    hit = _terminal_scan(paths_t)
    return EnvState(
        paths=paths_t,
        walks=tuple(new_walks) if new_walks is not None else None,
        target=state.target,
        steps=state.steps + 1,
        terminal=hit is not None,
        final_rel=paths_t[hit][0] if hit is not None else None,
        initial_total=state.initial_total,
    )


def terminal_reward(final: int, y: int, vocab: RelationVocab) -> int:
    if final == y:
        return 1
    if vocab.is_invented(final):
        return 0
    return -1


@dataclass(frozen=True)
class SparseState:
    """Feature block over relation pairs, stored only at pairs present in the paths.

    `order` is the sorted valid-action list; `cells` maps each of those pairs to its
    feature vector. dense() materializes the full (total, total, k) tensor.
    """

    total: int
    k: int
    order: tuple[Body, ...]
    cells: dict[Body, np.ndarray]

    def dense(self) -> np.ndarray:
        t = np.zeros((self.total, self.total, self.k))
        for (i, j), vec in self.cells.items():
            t[i, j, :] = vec
        return t

    def flat_input(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened nonzero input coordinates and values for the network."""
        idx: list[int] = []
        vals: list[float] = []
        for (i, j), vec in self.cells.items():
            base = (i * self.total + j) * self.k
            for c, v in enumerate(vec):
                if v != 0.0:
                    idx.append(base + c)
                    vals.append(v)
        return np.asarray(idx, dtype=np.int64), np.asarray(vals)

    def action_ids(self) -> np.ndarray:
        return np.asarray([i * self.total + j for i, j in self.order], dtype=np.int64)


def featurize(
    state: EnvState,
    memory: RuleMemory,
    extra_channels: bool = False,
) -> SparseState:
    """Per-pair channels: occurrence stats, body/head known flags, memory score.

    Channels: 0 occurrence count over all paths; 1 most frequent start position
    (0-indexed, ties to the smallest); 2 count at that position; 3 first body
    element known; 4 second body element known; 5 pair stored in memory; 6 both
    body elements known; 7 stored head known; 8 stored score. The optional extras
    are the max and min per-path occurrence counts over paths containing the pair.
    """
    if state.terminal:
        raise InvalidEpisodeError("cannot featurize a terminal state")
    vocab = memory.vocab
    k = BASE_CHANNELS + (EXTRA_CHANNELS if extra_channels else 0)
    counts: dict[Body, int] = {}
    pos_counts: dict[Body, dict[int, int]] = {}
    per_path: dict[Body, list[int]] = {}
    for path in state.paths:
        path_counts: dict[Body, int] = {}
        for i in range(len(path) - 1):
            pair = (path[i], path[i + 1])
            counts[pair] = counts.get(pair, 0) + 1
            pos_counts.setdefault(pair, {})
            pos_counts[pair][i] = pos_counts[pair].get(i, 0) + 1
            path_counts[pair] = path_counts.get(pair, 0) + 1
        for pair, c in path_counts.items():
            per_path.setdefault(pair, []).append(c)
    cells: dict[Body, np.ndarray] = {}
    for pair in counts:
        vec = np.zeros(k)
        vec[0] = counts[pair]
        by_pos = pos_counts[pair]
        best = max(by_pos.items(), key=lambda kv: (kv[1], -kv[0]))
        vec[1] = best[0]
        vec[2] = best[1]
        vec[3] = 1.0 if vocab.is_known(pair[0]) else 0.0
        vec[4] = 1.0 if vocab.is_known(pair[1]) else 0.0
        stored = pair in memory.heads
        vec[5] = 1.0 if stored else 0.0
        vec[6] = vec[3] * vec[4]
        vec[7] = 1.0 if stored and not vocab.is_invented(memory.heads[pair]) else 0.0
        vec[8] = memory.scores.get(pair, 0.0)
        if extra_channels:
            vec[9] = max(per_path[pair])
            vec[10] = min(per_path[pair])
        cells[pair] = vec
    return SparseState(total=vocab.total, k=k, order=tuple(sorted(counts)), cells=cells)
