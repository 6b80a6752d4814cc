"""Dynamic rule memory: two tables keyed by body pairs plus the invented-id buffer.

`heads` maps an ordered body pair to its head relation, `scores` maps the same keys
to running evidence scores. The two tables always share their key set. Invented
relation ids live either in the free buffer or inside at least one stored rule,
never both.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .relational import ConfigError, RelationVocab

Body = tuple[int, int]


class MemoryExhaustedError(RuntimeError):
    """No invented id can be produced: buffer empty and nothing recyclable."""


class ConsistencyError(RuntimeError):
    """The memory violated an internal contract (e.g. last trace body missing)."""


@dataclass(frozen=True)
class ScoreParams:
    """Step, episode-end, decay, and pruning constants for the score table."""

    v0: float = 0.6
    v1: float = 0.3
    v2: float = -0.05
    v3: float = -0.1
    v4: float = -0.3
    vt_pos: float = 0.35
    vt_neg: float = -1.0
    eps: float = 0.003
    sigma: float = -1.2
    v_true: float = 0.5
    v_wrong: float = -0.2

    def validate(self) -> None:
        if not (self.v0 > self.v1 > 0 > self.v2 > self.v3 > self.v4):
            raise ConfigError("step scores must satisfy v0 > v1 > 0 > v2 > v3 > v4")
        if not (self.vt_neg < 0 < self.vt_pos):
            raise ConfigError("episode-end scores must satisfy vt_neg < 0 < vt_pos")
        if self.eps <= 0:
            raise ConfigError("decay factor must be positive")
        if self.sigma >= 0:
            raise ConfigError("prune threshold must be negative")


@dataclass(frozen=True)
class ScoredAction:
    """A resolved action: body pair, resolved head, and the step-score delta applied."""

    body: Body
    head: int
    delta: float
    was_new: bool


class RuleMemory:
    def __init__(self, vocab: RelationVocab, params: ScoreParams | None = None):
        self.vocab = vocab
        self.params = params or ScoreParams()
        self.params.validate()
        self.heads: dict[Body, int] = {}
        self.scores: dict[Body, float] = {}
        self.free: list[int] = sorted(vocab.invented_ids())

    # -- helpers -------------------------------------------------------------

    def _known(self, r: int) -> bool:
        return not self.vocab.is_invented(r)

    def __len__(self) -> int:
        return len(self.heads)

    def __contains__(self, body: Body) -> bool:
        return body in self.heads

    def add_score(self, body: Body, delta: float) -> None:
        self.scores[body] += delta

    def placeholder_id(self) -> int:
        """Stand-in head for unresolved bodies inside search simulations."""
        if self.free:
            return self.free[0]
        ids = self.vocab.invented_ids()
        if len(ids) == 0:
            raise ConfigError("placeholder requires at least one invented id")
        return ids[-1]

    def _referenced(self, u: int) -> bool:
        for body, head in self.heads.items():
            if head == u or body[0] == u or body[1] == u:
                return True
        return False

    def _sweep_free(self) -> list[int]:
        """Return unreferenced invented ids to the buffer (the accounting invariant)."""
        freed = []
        in_free = set(self.free)
        for u in self.vocab.invented_ids():
            if u not in in_free and not self._referenced(u):
                freed.append(u)
        if freed:
            self.free = sorted(self.free + freed)
        return freed

    def _remove(self, body: Body) -> tuple[Body, int, float]:
        head = self.heads.pop(body)
        score = self.scores.pop(body)
        return (body, head, score)

    def seed_rule(self, body: Body, head: int, score: float = 1.0) -> None:
        """Install a rule directly, e.g. to run inference with known-good rules.

        Only known-headed rules can be seeded; invented ids are managed internally.
        """
        if any(self.vocab.is_invented(r) for r in (head, body[0], body[1])):
            raise ConsistencyError("seeded rules must use known relations only")
        if self.heads.get(body, head) != head:
            raise ConsistencyError(f"body {body} already maps to {self.heads[body]}")
        self.heads[body] = head
        self.scores[body] = float(score)

    # -- step-level operations -----------------------------------------------

    def resolve_head(self, body: Body, rng: np.random.Generator) -> ScoredAction:
        """Look the body up; on a miss, draw a fresh invented head and store the rule.

        Recycles the worst invented-headed rule first when the buffer is empty.
        The step score is computed from the resolved action and added to the entry.
        """
        if body in self.heads:
            head = self.heads[body]
            was_new = False
        else:
            if not self.free:
                self.recycle_when_empty()
            head = self.free.pop(int(rng.integers(len(self.free))))
            self.heads[body] = head
            self.scores[body] = 0.0
            was_new = True
        delta = self.score_case(body, head, was_new)
        self.scores[body] += delta
        return ScoredAction(body, head, delta, was_new)

    def score_case(self, body: Body, head: int, was_new: bool) -> float:
        """Step score for a resolved action; invented relations are penalized."""
        p = self.params
        body_known = self._known(body[0]) and self._known(body[1])
        if not was_new:
            if self._known(head):
                return p.v0 if body_known else p.v1
            return p.v2
        return p.v3 if body_known else p.v4

    # -- episode-level operations ----------------------------------------------

    def apply_episode_end(
        self, trace_bodies: list[Body], y: int, soften_wrong: bool = False
    ) -> str:
        """Terminal score update for every trace action, then rewrite consolidation.

        Returns "hit" (final relation equals the target), "known_miss" (known but
        wrong), or "unresolved" (invented). Bodies evicted mid-episode by recycling
        are skipped; the last body must still be present. With `soften_wrong` the
        known-miss overwrite is suppressed (the caller applies the simple-sample
        allowance instead).
        """
        if not trace_bodies:
            raise ConsistencyError("episode trace is empty")
        last = trace_bodies[-1]
        if last not in self.heads:
            raise ConsistencyError("last trace body missing from memory")
        r = self.heads[last]
        p = self.params
        if r == y:
            outcome = "hit"
            for body in trace_bodies:
                if body in self.scores:
                    self.scores[body] += p.vt_pos
        elif self._known(r):
            outcome = "known_miss"
            if not soften_wrong:
                for body in trace_bodies:
                    if body in self.scores:
                        self.scores[body] = p.vt_neg
        else:
            outcome = "unresolved"
        self.backtrack_rewrite(last, y)
        return outcome

    def backtrack_rewrite(self, last_body: Body, y: int) -> None:
        """Replace the final invented head with the target everywhere in memory.

        No-op when the final relation is known. Value pass first, then key pass:
        a rewritten key displaces an existing entry only when that entry's head is
        invented; against a known-headed survivor the old key is simply dropped and
        the survivor keeps its score.
        """
        if last_body not in self.heads:
            raise ConsistencyError("last action body missing from memory")
        r = self.heads[last_body]
        if self._known(r):
            return
        for body, head in list(self.heads.items()):
            if head == r:
                self.heads[body] = y
        for body in sorted(b for b in self.heads if r in b):
            new_key = (y if body[0] == r else body[0], y if body[1] == r else body[1])
            head, score = self.heads[body], self.scores[body]
            self._remove(body)
            if new_key not in self.heads or self.vocab.is_invented(self.heads[new_key]):
                if new_key in self.heads:
                    self._remove(new_key)
                self.heads[new_key] = head
                self.scores[new_key] = score
        self._sweep_free()

    def decay_scores(self) -> None:
        """Once per episode: negatives sink by (1+eps), positives shrink by (1-eps)."""
        eps = self.params.eps
        for body, s in self.scores.items():
            if s < 0:
                self.scores[body] = s * (1.0 + eps)
            elif s > 0:
                self.scores[body] = s * (1.0 - eps)

    def prune(self) -> list[tuple[Body, int, float]]:
        """Drop entries under the threshold, cascade through their invented heads."""
        removed: list[tuple[Body, int, float]] = []
        sigma = self.params.sigma
        bad_heads: set[int] = set()
        for body in sorted(b for b, s in self.scores.items() if s < sigma):
            entry = self._remove(body)
            removed.append(entry)
            if self.vocab.is_invented(entry[1]):
                bad_heads.add(entry[1])
        while bad_heads:
            u = bad_heads.pop()
            for body in sorted(
                b for b, h in self.heads.items() if h == u or u in b
            ):
                if body not in self.heads:
                    continue
                entry = self._remove(body)
                removed.append(entry)
                if self.vocab.is_invented(entry[1]):
                    bad_heads.add(entry[1])
        if removed:
            self._sweep_free()
        return removed

    def recycle_when_empty(self) -> int | None:
        """Free the invented id heading the lowest-scored rule; drop rules touching it."""
        if self.free:
            return None
        candidates = [
            (self.scores[body], head, body)
            for body, head in self.heads.items()
            if self.vocab.is_invented(head)
        ]
        if not candidates:
            raise MemoryExhaustedError("invented buffer empty and no invented-headed rule")
        _, victim, _ = min(candidates, key=lambda c: (c[0], c[1]))
        for body in sorted(b for b, h in self.heads.items() if h == victim or victim in b):
            self._remove(body)
        self._sweep_free()
        if victim not in self.free:  # zombie references elsewhere would be a bug here
            raise ConsistencyError("recycled id still referenced")
        return victim

    # -- export / audit --------------------------------------------------------

    def export_rules(self, score_floor: float = 0.0) -> list[tuple[Body, int, float]]:
        """All-known rules above the floor, best first. Invented scaffolding stays internal."""
        out = [
            (body, head, self.scores[body])
            for body, head in self.heads.items()
            if self._known(head) and self._known(body[0]) and self._known(body[1])
            and self.scores[body] > score_floor
        ]
        out.sort(key=lambda r: (-r[2], r[1], r[0]))
        return out

    def check_invariants(self) -> None:
        if set(self.heads) != set(self.scores):
            raise ConsistencyError("head and score tables disagree on keys")
        headed: dict[int, int] = {}
        for body, head in self.heads.items():
            if self.vocab.is_invented(head):
                headed[head] = headed.get(head, 0) + 1
        for u, count in headed.items():
            if count > 1:
                raise ConsistencyError(f"invented id {u} heads {count} rules")
        in_free = set(self.free)
        if len(in_free) != len(self.free):
            raise ConsistencyError("duplicate ids in the free buffer")
        for u in self.vocab.invented_ids():
            referenced = self._referenced(u)
            if (u in in_free) == referenced:
                raise ConsistencyError(
                    f"invented id {u}: free={u in in_free} referenced={referenced}"
                )

    def state_hash(self) -> str:
        blob = json.dumps(
            {
                "rules": sorted(
                    (list(b), h, self.scores[b]) for b, h in self.heads.items()
                ),
                "free": sorted(self.free),
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- serialization -----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "params": {k: getattr(self.params, k) for k in ScoreParams.__dataclass_fields__},
            "rules": [
                {"body": list(body), "head": head, "score": self.scores[body]}
                for body, head in sorted(self.heads.items())
            ],
            "free": sorted(self.free),
        }

    @classmethod
    def from_dict(cls, data: dict, vocab: RelationVocab) -> "RuleMemory":
        mem = cls(vocab, ScoreParams(**data["params"]))
        mem.heads = {tuple(r["body"]): r["head"] for r in data["rules"]}
        mem.scores = {tuple(r["body"]): r["score"] for r in data["rules"]}
        mem.free = sorted(data["free"])
        return mem

    def clone(self) -> "RuleMemory":
        return RuleMemory.from_dict(self.to_dict(), self.vocab)
