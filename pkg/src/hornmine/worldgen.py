"""Synthetic relational worlds with known ground-truth Horn rules.

A world is a functional rule set (each body pair composes to at most one head)
plus sampled query graphs. Every emitted sample carries a resolution path whose
composition is unambiguous and reachable under the engine's merge-all semantics,
so a brute-force oracle can certify targets independently of the learner.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .memory import Body
from .relational import RelGraph, RelationVocab, Sample, enumerate_simple_paths

MAX_RULESET_TRIES = 200
MAX_PATH_TRIES = 60
MAX_EDGE_TRIES = 40
DENSITY_CAP = 64  # reject graphs once x->y simple paths stop being enumerable cheaply


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GroundRule:
    head: int
    body: Body


@dataclass(frozen=True)
class GroundRuleSet:
    rules: tuple[GroundRule, ...]

    def rule_map(self) -> dict[Body, int]:
        return {r.body: r.head for r in self.rules}

    def validate(self, num_relations: int) -> None:
        seen: dict[Body, int] = {}
        for r in self.rules:
            ids = (r.head, r.body[0], r.body[1])
            if any(not 0 <= i < num_relations for i in ids):
                raise GenerationError(f"rule {r} uses an out-of-range relation")
            if seen.get(r.body, r.head) != r.head:
                raise GenerationError(f"two heads for body {r.body}")
            seen[r.body] = r.head


@dataclass(frozen=True)
class GenConfig:
    num_relations: int
    num_rules: int
    min_len: int = 2
    max_len: int = 5
    noise_rate: float = 0.0
    distractor_edges: int = 6
    alias_2hop_prob: float = 0.0
    max_parallel_paths: int = 4
    chain_bias: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.num_relations < 2:
            raise GenerationError("need at least 2 relations")
        if not 1 <= self.num_rules <= self.num_relations**2:
            raise GenerationError("num_rules must fit in the body-pair space")
        if not 2 <= self.min_len <= self.max_len:
            raise GenerationError("resolution length range must satisfy 2 <= min <= max")
        if not 0.0 <= self.noise_rate < 1.0:
            raise GenerationError("noise_rate must lie in [0, 1)")
        if not 0.0 <= self.alias_2hop_prob <= 1.0:
            raise GenerationError("alias_2hop_prob must lie in [0, 1]")


@dataclass(frozen=True)
class LabeledSample:
    """A sample plus generator-side metadata the learner never sees."""

    sample: Sample
    resolution_len: int
    clean: bool


# -- rule sets -------------------------------------------------------------------


def reachable_lengths(rules: GroundRuleSet, cap: int) -> dict[int, set[int]]:
    """For each relation, the set of resolution-path lengths (<= cap) that can
    compose to it. Every relation is reachable at length 1 by itself."""
    heads: dict[int, set[int]] = {}
    for r in rules.rules:
        for rel in (r.head, r.body[0], r.body[1]):
            heads.setdefault(rel, set()).add(1)
    for r in rules.rules:
        heads.setdefault(r.head, {1})
    changed = True
    while changed:
        changed = False
        for r in rules.rules:
            la = heads.get(r.body[0], {1})
            lb = heads.get(r.body[1], {1})
            tgt = heads.setdefault(r.head, {1})
            for a, b in itertools.product(la, lb):
                if a + b <= cap and a + b not in tgt:
                    tgt.add(a + b)
                    changed = True
    return heads


def generate_rule_set(cfg: GenConfig, rng: np.random.Generator) -> GroundRuleSet:
    """Sample a functional rule set where every length in the configured range is
    realizable by some relation."""
    cfg.validate()
    m = cfg.num_relations
    need = set(range(cfg.min_len, cfg.max_len + 1))
    for _ in range(MAX_RULESET_TRIES):
        bodies: set[Body] = set()
        rules: list[GroundRule] = []
        heads_so_far: list[int] = []
        while len(rules) < cfg.num_rules:
            if heads_so_far and rng.random() < cfg.chain_bias:
                b0 = int(rng.choice(heads_so_far))
            else:
                b0 = int(rng.integers(m))
            body = (b0, int(rng.integers(m)))
            if body in bodies:
                body = (int(rng.integers(m)), int(rng.integers(m)))
                if body in bodies:
                    continue
            head = int(rng.integers(m))
            bodies.add(body)
            rules.append(GroundRule(head, body))
            heads_so_far.append(head)
        rule_set = GroundRuleSet(tuple(rules))
        reach = reachable_lengths(rule_set, cfg.max_len)
        covered = set().union(*reach.values())
        if need <= covered:
            return rule_set
    raise GenerationError(
        f"no rule set covering lengths {sorted(need)} after {MAX_RULESET_TRIES} tries"
    )


# -- oracles ----------------------------------------------------------------------


def forward_chain_oracle(rules: GroundRuleSet, path: list[int]) -> set[int]:
    """All relations derivable from `path` over every binary reduction order,
    via dynamic programming on contiguous spans."""
    if not path:
        raise GenerationError("oracle needs a nonempty path")
    rmap = rules.rule_map()
    n = len(path)
    spans: dict[tuple[int, int], set[int]] = {(i, i): {path[i]} for i in range(n)}
    for width in range(2, n + 1):
        for i in range(n - width + 1):
            j = i + width - 1
            out: set[int] = set()
            for k in range(i, j):
                for a in spans[(i, k)]:
                    for b in spans[(k + 1, j)]:
                        head = rmap.get((a, b))
                        if head is not None:
                            out.add(head)
            spans[(i, j)] = out
    return spans[(0, n - 1)]


def mergeable_to(rules: GroundRuleSet, path: list[int], target: int) -> bool:
    """Whether merge-all-occurrences play with the ground rules can reduce `path`
    to exactly [target]. Stricter than the span oracle: each move rewrites every
    non-overlapping occurrence of the chosen pair at once."""
    rmap = rules.rule_map()
    start = tuple(path)
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        if len(cur) == 1:
            if cur[0] == target:
                return True
            continue
        for body in {(cur[i], cur[i + 1]) for i in range(len(cur) - 1)}:
            head = rmap.get(body)
            if head is None:
                continue
            nxt: list[int] = []
            i = 0
            while i < len(cur):
                if i + 1 < len(cur) and (cur[i], cur[i + 1]) == body:
                    nxt.append(head)
                    i += 2
                else:
                    nxt.append(cur[i])
                    i += 1
            t = tuple(nxt)
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return False


def sample_resolution_path(
    rules: GroundRuleSet,
    y: int,
    length: int,
    reach: dict[int, set[int]],
    rng: np.random.Generator,
) -> list[int]:
    """Expand y into a relation path of exactly `length` edges by recursively
    applying rules backwards, splitting the length across the two body slots."""

    def build(rel: int, size: int) -> list[int]:
        if size == 1:
            return [rel]
        options: list[tuple[GroundRule, int]] = []
        for r in rules.rules:
            if r.head != rel:
                continue
            la_all = reach.get(r.body[0], {1})
            lb_all = reach.get(r.body[1], {1})
            options.extend(
                (r, la) for la in la_all if 1 <= size - la and (size - la) in lb_all
            )
        if not options:
            raise GenerationError(f"relation {rel} has no derivation of length {size}")
        rule, la = options[int(rng.integers(len(options)))]
        return build(rule.body[0], la) + build(rule.body[1], size - la)

    return build(y, length)


# -- graph assembly -----------------------------------------------------------------


def _paths_ok(
    rules: GroundRuleSet,
    graph: RelGraph,
    x: int,
    yn: int,
    y: int,
    target_len: int,
    allowed_short: set[tuple[int, ...]],
    max_hops: int,
    cap: int,
) -> bool:
    """Every simple x->y relation path must be consistent: no known relation other
    than y derivable, and nothing shorter than the resolution path may derive at
    all (pre-approved alias paths excepted)."""
    found = enumerate_simple_paths(graph, x, yn, max_hops=max_hops, limit=DENSITY_CAP)
    if len(found) > min(cap, DENSITY_CAP):
        return False
    for rel_path, _walk in found:
        derivable = forward_chain_oracle(rules, list(rel_path))
        if derivable - {y}:
            return False
        if len(rel_path) < target_len and derivable and tuple(rel_path) not in allowed_short:
            return False
    return True


def generate_sample(
    rules: GroundRuleSet,
    target_len: int,
    cfg: GenConfig,
    rng: np.random.Generator,
    reach: dict[int, set[int]] | None = None,
) -> LabeledSample:
    """Build one query graph: a fresh resolution path realizing `target_len`,
    optional consistent 2-hop alias, distractor edges, and optional label noise."""
    cfg.validate()
    if not cfg.min_len <= target_len <= cfg.max_len:
        raise GenerationError(f"target length {target_len} outside configured range")
    if reach is None:
        reach = reachable_lengths(rules, cfg.max_len)
    candidates = sorted(r for r, ls in reach.items() if target_len in ls)
    if not candidates:
        raise GenerationError(f"no relation admits resolution length {target_len}")

    for _ in range(MAX_PATH_TRIES):
        y = int(candidates[int(rng.integers(len(candidates)))])
        rel_path = sample_resolution_path(rules, y, target_len, reach, rng)
        if forward_chain_oracle(rules, rel_path) != {y}:
            continue
        if not mergeable_to(rules, rel_path, y):
            continue
        sample = _assemble_graph(rules, rel_path, y, target_len, cfg, rng)
        if sample is None:
            continue
        target = y
        clean = True
        if cfg.noise_rate > 0 and rng.random() < cfg.noise_rate:
            others = [r for r in range(cfg.num_relations) if r != y]
            target = int(others[int(rng.integers(len(others)))])
            clean = False
        final = Sample(graph=sample.graph, query=sample.query, target=target)
        return LabeledSample(sample=final, resolution_len=target_len, clean=clean)
    raise GenerationError(
        f"could not realize an unambiguous sample of length {target_len}"
    )


def _assemble_graph(
    rules: GroundRuleSet,
    rel_path: list[int],
    y: int,
    target_len: int,
    cfg: GenConfig,
    rng: np.random.Generator,
) -> Sample | None:
    n_core = target_len + 1
    names = [f"e{i}" for i in range(n_core)]
    edges: list[tuple[int, int, int]] = [
        (i, rel_path[i], i + 1) for i in range(target_len)
    ]
    x, yn = 0, target_len
    allowed_short: set[tuple[int, ...]] = set()

    if cfg.alias_2hop_prob > 0 and target_len > 2 and rng.random() < cfg.alias_2hop_prob:
        alias_rules = [r for r in rules.rules if r.head == y]
        if alias_rules:
            rule = alias_rules[int(rng.integers(len(alias_rules)))]
            mid = len(names)
            names.append(f"e{mid}")
            edges.append((x, rule.body[0], mid))
            edges.append((mid, rule.body[1], yn))
            allowed_short.add(rule.body)

    max_hops = cfg.max_len + 3
    extra_nodes = max(2, cfg.distractor_edges // 2)
    for _ in range(extra_nodes):
        names.append(f"e{len(names)}")

    def graph_now() -> RelGraph:
        return RelGraph(node_names=tuple(names), edges=tuple(edges))

    if not _paths_ok(
        rules, graph_now(), x, yn, y, target_len, allowed_short, max_hops,
        cfg.max_parallel_paths,
    ):
        return None

    added = 0
    tries = 0
    edge_set = set(edges)
    while added < cfg.distractor_edges and tries < MAX_EDGE_TRIES * max(cfg.distractor_edges, 1):
        tries += 1
        src = int(rng.integers(len(names)))
        dst = int(rng.integers(len(names)))
        rel = int(rng.integers(cfg.num_relations))
        cand = (src, rel, dst)
        if src == dst or cand in edge_set:
            continue
        if src == x and dst == yn:
            continue
        edges.append(cand)
        edge_set.add(cand)
        if _paths_ok(
            rules, graph_now(), x, yn, y, target_len, allowed_short, max_hops,
            cfg.max_parallel_paths,
        ):
            added += 1
        else:
            edges.pop()
            edge_set.discard(cand)

    graph = graph_now()
    return Sample(graph=graph, query=(x, yn), target=y)


def generate_split(
    rules: GroundRuleSet,
    cfg: GenConfig,
    n: int,
    length_weights: dict[int, float],
    rng: np.random.Generator,
) -> list[LabeledSample]:
    """Generate n samples with resolution lengths drawn from `length_weights`."""
    lengths = sorted(length_weights)
    bad = [l for l in lengths if not cfg.min_len <= l <= cfg.max_len]
    if bad:
        raise GenerationError(f"lengths {bad} outside configured range")
    weights = np.asarray([length_weights[l] for l in lengths], dtype=float)
    weights = weights / weights.sum()
    reach = reachable_lengths(rules, cfg.max_len)
    out = []
    for _ in range(n):
        target_len = int(rng.choice(lengths, p=weights))
        out.append(generate_sample(rules, target_len, cfg, rng, reach=reach))
    return out


def uniform_weights(lo: int, hi: int) -> dict[int, float]:
    return {l: 1.0 for l in range(lo, hi + 1)}


def average_resolution_length(samples: list[LabeledSample]) -> float:
    return float(np.mean([s.resolution_len for s in samples]))


def clean_config(cfg: GenConfig) -> GenConfig:
    """The same world without label noise or alias channels, for test splits."""
    return replace(cfg, noise_rate=0.0, alias_2hop_prob=0.0)
