"""Relational-graph data model: relation vocabulary, graphs, samples, and path extraction.

Relations and nodes are interned to dense integer ids. Paths between the queried
node pair are simple (no repeated node) directed walks recorded as relation-id
sequences, with the node walk kept alongside so explanations can re-attach entities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class VocabularyError(ValueError):
    """A relation name or id does not fit the vocabulary in use."""


class ConfigError(ValueError):
    """A configuration value violates its documented constraints."""


@dataclass(frozen=True)
class RelationVocab:
    """Dense id space: known relations first, then invented ids, then an optional dummy.

    Known ids are 0..m-1 in first-seen order. Invented ids are m..m+n-1; they are
    never observed in data. The dummy relation, when enabled, takes the last id and
    counts as known for pair validity and scoring, but is never a rule head or a
    query target.
    """

    known_names: tuple[str, ...]
    n_invented: int
    use_dummy: bool = False
    _index: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n_invented < 0:
            raise ConfigError("n_invented must be >= 0")
        if len(set(self.known_names)) != len(self.known_names):
            raise VocabularyError("duplicate relation names")
        self._index.update({name: i for i, name in enumerate(self.known_names)})

    @property
    def m(self) -> int:
        return len(self.known_names)

    @property
    def total(self) -> int:
        return self.m + self.n_invented + (1 if self.use_dummy else 0)

    @property
    def dummy_id(self) -> int | None:
        return self.total - 1 if self.use_dummy else None

    def known_ids(self) -> range:
        return range(self.m)

    def invented_ids(self) -> range:
        return range(self.m, self.m + self.n_invented)

    def is_invented(self, r: int) -> bool:
        return self.m <= r < self.m + self.n_invented

    def is_known(self, r: int) -> bool:
        # The dummy counts as known wherever a known/invented dichotomy is needed.
        return 0 <= r < self.m or (self.use_dummy and r == self.total - 1)

    def name(self, r: int) -> str:
        if 0 <= r < self.m:
            return self.known_names[r]
        if self.is_invented(r):
            return f"_u{r - self.m}"
        if self.use_dummy and r == self.total - 1:
            return "_dm"
        raise VocabularyError(f"relation id {r} out of range")

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise VocabularyError(f"unknown relation name {name!r}") from None


def build_vocab(
    known_names: list[str] | tuple[str, ...], n_invented: int, use_dummy: bool = False
) -> RelationVocab:
    """Final vocabulary for a dataset: observed names plus n_invented fresh ids.

    `known_names` is the first-seen interning order produced by the loader, so ids
    in already-loaded samples stay valid.
    """
    if n_invented <= 0:
        raise ConfigError("number of invented relations must be positive")
    return RelationVocab(tuple(known_names), n_invented, use_dummy)


@dataclass(frozen=True)
class RelGraph:
    """Directed multigraph; edges are (source node idx, relation id, target node idx)."""

    node_names: tuple[str, ...]
    edges: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        nn = len(self.node_names)
        for s, _, t in self.edges:
            if not (0 <= s < nn and 0 <= t < nn):
                raise ValueError("edge references a missing node")

    def out_edges(self) -> dict[int, list[tuple[int, int]]]:
        adj: dict[int, list[tuple[int, int]]] = {i: [] for i in range(len(self.node_names))}
        for s, r, t in self.edges:
            adj[s].append((r, t))
        return adj


@dataclass(frozen=True)
class Sample:
    """One query over one graph; target is absent at pure-inference time."""

    graph: RelGraph
    query: tuple[int, int]
    target: int | None = None

    def __post_init__(self) -> None:
        x, y = self.query
        if x == y:
            raise ValueError("query nodes must differ")
        nn = len(self.graph.node_names)
        if not (0 <= x < nn and 0 <= y < nn):
            raise ValueError("query node missing from graph")


@dataclass(frozen=True)
class PathSet:
    """Relation paths X->Y with their node walks (len(walk) == len(path) + 1)."""

    paths: tuple[tuple[int, ...], ...]
    walks: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.paths)


def enumerate_simple_paths(
    graph: RelGraph, x: int, y: int, max_hops: int, limit: int | None = None
) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All simple directed X->Y paths up to max_hops, as (relations, nodes) pairs.

    Deterministic order. With `limit`, stops after limit+1 paths so callers can
    detect overflow without paying for full enumeration on dense graphs.
    """
    adj = graph.out_edges()
    out: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    # Iterative DFS; stack entries are (node, rels-so-far, nodes-so-far).
    stack: list[tuple[int, tuple[int, ...], tuple[int, ...]]] = [(x, (), (x,))]
    while stack:
        node, rels, nodes = stack.pop()
        if len(rels) >= max_hops:
            continue
        for r, t in sorted(adj[node], reverse=True):
            if t == y:
                out.append((rels + (r,), nodes + (y,)))
                if limit is not None and len(out) > limit:
                    return out
            elif t not in nodes:
                stack.append((t, rels + (r,), nodes + (t,)))
    out.sort(key=lambda pw: (len(pw[0]), pw[0]))
    return out


def sample_paths(
    graph: RelGraph,
    query: tuple[int, int],
    L: int,
    rng: np.random.Generator,
    max_hops: int = 20,
) -> PathSet:
    """Up to L simple relation paths between the queried nodes.

    Full enumeration when the graph holds at most L simple paths; otherwise L
    distinct paths drawn by seeded random walk with restart. No path -> empty set.
    """
    if L < 1:
        raise ConfigError("L must be >= 1")
    x, y = query
    found = enumerate_simple_paths(graph, x, y, max_hops, limit=L)
    if len(found) <= L:
        paths = tuple(p for p, _ in found)
        walks = tuple(w for _, w in found)
        return PathSet(paths, walks)

    adj = graph.out_edges()
    picked: dict[tuple[int, ...], tuple[int, ...]] = {}
    budget = 400 * L
    while len(picked) < L and budget > 0:
        budget -= 1
        node = x
        rels: list[int] = []
        nodes: list[int] = [x]
        while len(rels) < max_hops:
            cand = [(r, t) for r, t in adj[node] if t not in nodes or t == y]
            if not cand:
                break
            r, t = cand[rng.integers(len(cand))]
            rels.append(r)
            nodes.append(t)
            if t == y:
                picked.setdefault(tuple(rels), tuple(nodes))
                break
            node = t
    if len(picked) < L:
        for p, w in found:  # top up from the partial enumeration
            picked.setdefault(p, w)
            if len(picked) >= L:
                break
    items = sorted(picked.items(), key=lambda pw: (len(pw[0]), pw[0]))[:L]
    return PathSet(tuple(p for p, _ in items), tuple(w for _, w in items))


def shortest_hops(graph: RelGraph, x: int, y: int) -> int | None:
    """BFS hop count X->Y; None when unreachable. Curriculum/per-hop bucketing proxy."""
    if x == y:
        return 0
    adj = graph.out_edges()
    seen = {x}
    frontier = [x]
    hops = 0
    while frontier:
        hops += 1
        nxt: list[int] = []
        for node in frontier:
            for _, t in adj[node]:
                if t == y:
                    return hops
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
    return None
