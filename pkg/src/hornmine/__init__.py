"""hornmine: Horn-rule induction and relational reasoning over graph data.

The engine frames multi-hop relation deduction as a sequence of pair-merge
decisions guided by Monte Carlo tree search and a small policy-value network,
while a dynamic rule memory turns the played merges into explicit dyadic rules
(head <= body0, body1) that can be exported, inspected, and replayed.
"""

__version__ = "0.1.0"

from .config import TrainConfig, build_config
from .memory import RuleMemory, ScoreParams
from .relational import RelGraph, RelationVocab, Sample, build_vocab
from .worldgen import GenConfig, GroundRule, GroundRuleSet

__all__ = [
    "TrainConfig",
    "build_config",
    "RuleMemory",
    "ScoreParams",
    "RelGraph",
    "RelationVocab",
    "Sample",
    "build_vocab",
    "GenConfig",
    "GroundRule",
    "GroundRuleSet",
    "__version__",
]
