"""File formats: sample JSONL, rule/vocab JSON, checkpoints, and metrics CSV.

Every JSON artifact carries a leading format_version; JSONL files start with a
{"format_version": 1} header line and the CSV starts with a version comment.
Relations and nodes are stored by name so files stay readable and independent
of id assignment.
"""

from __future__ import annotations

import json
from pathlib import Path

from .config import TrainConfig, load_config_json, save_config_json
from .memory import RuleMemory
from .net import PolicyValueNet
from .relational import RelGraph, RelationVocab, Sample, build_vocab
from .worldgen import GroundRule, GroundRuleSet, LabeledSample

FORMAT_VERSION = 1


class DataFormatError(ValueError):
    pass


# -- samples ------------------------------------------------------------------------


def sample_to_record(item: LabeledSample, vocab: RelationVocab) -> dict:
    g = item.sample.graph
    return {
        "nodes": list(g.node_names),
        "edges": [
            [g.node_names[s], vocab.name(r), g.node_names[d]] for s, r, d in g.edges
        ],
        "query": [g.node_names[item.sample.query[0]], g.node_names[item.sample.query[1]]],
        "target": vocab.name(item.sample.target),
        "length": item.resolution_len,
        "clean": item.clean,
    }


def record_to_sample(rec: dict, vocab: RelationVocab) -> LabeledSample:
    nodes = list(rec["nodes"])
    index = {name: i for i, name in enumerate(nodes)}
    if len(index) != len(nodes):
        raise DataFormatError("duplicate node names")
    edges = tuple(
        (index[s], vocab.id_of(r), index[d]) for s, r, d in rec["edges"]
    )
    graph = RelGraph(node_names=tuple(nodes), edges=edges)
    sample = Sample(
        graph=graph,
        query=(index[rec["query"][0]], index[rec["query"][1]]),
        target=vocab.id_of(rec["target"]),
    )
    return LabeledSample(
        sample=sample,
        resolution_len=int(rec.get("length") or 0) or _fallback_len(sample),
        clean=bool(rec.get("clean", True)),
    )


def _fallback_len(sample: Sample) -> int:
    from .relational import shortest_hops

    hops = shortest_hops(sample.graph, *sample.query)
    return hops if hops is not None else 0


def write_samples(path: str | Path, items: list[LabeledSample], vocab: RelationVocab) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"format_version": FORMAT_VERSION}) + "\n")
        for item in items:
            fh.write(json.dumps(sample_to_record(item, vocab)) + "\n")


def load_samples(path: str | Path, vocab: RelationVocab) -> list[LabeledSample]:
    out: list[LabeledSample] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if lineno == 1 and set(rec) == {"format_version"}:
                continue
            try:
                out.append(record_to_sample(rec, vocab))
            except (KeyError, ValueError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        raise DataFormatError(f"{path}: no samples")
    return out


# -- rules and vocab -----------------------------------------------------------------


def write_ground_rules(path: str | Path, rules: GroundRuleSet, vocab: RelationVocab) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "rules": [
            {"head": vocab.name(r.head), "body": [vocab.name(r.body[0]), vocab.name(r.body[1])]}
            for r in rules.rules
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_ground_rules(path: str | Path, vocab: RelationVocab) -> GroundRuleSet:
    payload = json.loads(Path(path).read_text())
    rules = tuple(
        GroundRule(
            head=vocab.id_of(r["head"]),
            body=(vocab.id_of(r["body"][0]), vocab.id_of(r["body"][1])),
        )
        for r in payload["rules"]
    )
    return GroundRuleSet(rules)


def write_vocab(path: str | Path, vocab: RelationVocab) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "known_names": list(vocab.known_names),
        "n_invented": vocab.n_invented,
        "use_dummy": vocab.use_dummy,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_vocab(path: str | Path) -> RelationVocab:
    payload = json.loads(Path(path).read_text())
    return build_vocab(
        known_names=payload["known_names"],
        n_invented=int(payload["n_invented"]),
        use_dummy=bool(payload.get("use_dummy", False)),
    )


def load_known_names(path: str | Path) -> list[str]:
    return list(json.loads(Path(path).read_text())["known_names"])


# -- exported rules (human-facing) ----------------------------------------------------


def write_exported_rules(path: str | Path, memory: RuleMemory) -> None:
    vocab = memory.vocab
    payload = {
        "format_version": FORMAT_VERSION,
        "rules": [
            {
                "head": vocab.name(head),
                "body": [vocab.name(body[0]), vocab.name(body[1])],
                "score": round(score, 6),
            }
            for body, head, score in memory.export_rules()
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


# -- checkpoints ----------------------------------------------------------------------


def save_checkpoint(
    ckpt_dir: str | Path,
    net: PolicyValueNet,
    memory: RuleMemory,
    cfg: TrainConfig,
) -> None:
    d = Path(ckpt_dir)
    d.mkdir(parents=True, exist_ok=True)
    net.save(str(d / "net.npz"))
    (d / "memory.json").write_text(json.dumps(memory.to_dict(), indent=2) + "\n")
    write_vocab(d / "vocab.json", memory.vocab)
    save_config_json(cfg, d / "config.json")


def load_checkpoint(ckpt_dir: str | Path) -> tuple[PolicyValueNet, RuleMemory, TrainConfig, RelationVocab]:
    d = Path(ckpt_dir)
    for name in ("net.npz", "memory.json", "vocab.json", "config.json"):
        if not (d / name).exists():
            raise DataFormatError(f"checkpoint missing {name}")
    vocab = load_vocab(d / "vocab.json")
    cfg = load_config_json(d / "config.json")
    memory = RuleMemory.from_dict(json.loads((d / "memory.json").read_text()), vocab)
    net = PolicyValueNet.load(str(d / "net.npz"))
    return net, memory, cfg, vocab


# -- metrics ---------------------------------------------------------------------------


def metrics_csv_lines(rows: list[dict], hop_keys: list[int]) -> list[str]:
    header = ["accuracy", "rule_recall", "invalid_ratio"] + [f"hop_{k}_acc" for k in hop_keys]
    lines = [f"# format_version={FORMAT_VERSION}", ",".join(header)]
    for row in rows:
        cells = [f"{row.get(col, float('nan')):.6f}" for col in header]
        lines.append(",".join(cells))
    return lines


def write_metrics_csv(path: str | Path, rows: list[dict], hop_keys: list[int]) -> None:
    Path(path).write_text("\n".join(metrics_csv_lines(rows, hop_keys)) + "\n")


# -- GraphLog-style corpus reader -------------------------------------------------------


def read_graphlog_split(world_dir: str | Path, split: str, vocab: RelationVocab | None = None):
    """Read a GraphLog-style world directory: <split>.jsonl lines holding
    {"edges": [[src, dst, rel], ...], "query": [src, dst], "target": rel}.
    With vocab=None, relation names observed across splits define the vocabulary
    (sorted), and (samples, names) is returned instead.
    """
    d = Path(world_dir)
    path = d / f"{split}.jsonl"
    if not path.exists():
        raise FileNotFoundError(path)
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                if set(rec) == {"format_version"}:
                    continue
                records.append(rec)
    names_needed = sorted(
        {e[2] for rec in records for e in rec["edges"]} | {rec["target"] for rec in records}
    )
    made_vocab = vocab is None
    if vocab is None:
        vocab = build_vocab(known_names=names_needed, n_invented=1)
    out = []
    for rec in records:
        nodes = sorted({str(e[0]) for e in rec["edges"]} | {str(e[1]) for e in rec["edges"]}
                       | set(map(str, rec["query"])))
        index = {n: i for i, n in enumerate(nodes)}
        graph = RelGraph(
            node_names=tuple(nodes),
            edges=tuple((index[str(s)], vocab.id_of(r), index[str(d_)]) for s, d_, r in rec["edges"]),
        )
        sample = Sample(
            graph=graph,
            query=(index[str(rec["query"][0])], index[str(rec["query"][1])]),
            target=vocab.id_of(rec["target"]),
        )
        out.append(LabeledSample(sample=sample, resolution_len=_fallback_len(sample), clean=True))
    if made_vocab:
        return out, names_needed
    return out
