"""Training configuration: one flat dataclass, a key=value file format, and
auto-generated CLI overrides for every field."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .memory import ConfigError, ScoreParams
from .mcts import SearchParams


@dataclass(frozen=True)
class TrainConfig:
    # schedule
    epochs: int = 10
    lr: float = 0.01
    seed: int = 0
    replay_capacity: int = 50_000
    batch_size: int = 64
    warmup_episodes: int = 200
    net_training: bool = True  # False: visit-count-only policy ablation
    # rule memory
    n_invented: int = 50
    v0: float = 0.6
    v1: float = 0.3
    v2: float = -0.05
    v3: float = -0.1
    v4: float = -0.3
    vt_pos: float = 0.35
    vt_neg: float = -1.0
    v_true: float = 0.5
    v_wrong: float = -0.2
    eps: float = 0.003
    sigma: float = -1.2
    simple_bonuses: bool = True
    use_dummy: bool = False
    # paths
    max_paths: int = 4
    max_hops: int = 20
    # search
    sims: int = 64
    c_puct: float = 1.5
    tau: float = 1.0
    dirichlet_alpha: float = 0.3
    dirichlet_weight: float = 0.25
    # network
    hidden: int = 128
    l2: float = 1e-4
    clip_norm: float = 5.0
    extra_channels: bool = False

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.n_invented < 1:
            raise ConfigError("n_invented must be >= 1")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ConfigError("replay capacity must hold at least one batch")
        if self.max_paths < 1:
            raise ConfigError("max_paths must be >= 1")
        if self.sims < 1:
            raise ConfigError("sims must be >= 1")
        self.score_params().validate()

    def score_params(self) -> ScoreParams:
        return ScoreParams(
            v0=self.v0, v1=self.v1, v2=self.v2, v3=self.v3, v4=self.v4,
            vt_pos=self.vt_pos, vt_neg=self.vt_neg, eps=self.eps, sigma=self.sigma,
            v_true=self.v_true, v_wrong=self.v_wrong,
        )

    def search_params(self, mode: str) -> SearchParams:
        return SearchParams(
            sims=self.sims, c_puct=self.c_puct, tau=self.tau,
            dirichlet_alpha=self.dirichlet_alpha, dirichlet_weight=self.dirichlet_weight,
            mode=mode,
        )


def _parse_value(kind: type, raw: str):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {raw!r}")
    return kind(raw)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat `key = value` file; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_config(
    file: str | Path | None = None, overrides: dict[str, object] | None = None
) -> TrainConfig:
    """Defaults, then config file, then explicit overrides; validated."""
    kinds = {f.name: f.type for f in fields(TrainConfig)}
    types = {"int": int, "float": float, "bool": bool, "str": str}
    values: dict[str, object] = {}
    if file is not None:
        for key, raw in read_config_file(file).items():
            if key not in kinds:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _parse_value(types[str(kinds[key])], raw)
    for key, val in (overrides or {}).items():
        if key not in kinds:
            raise ConfigError(f"unknown config key {key!r}")
        if val is not None:
            values[key] = val
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def add_config_flags(parser) -> None:
    """Register one --flag per TrainConfig field (booleans take true/false)."""
    types = {"int": int, "float": float, "str": str}
    for f in fields(TrainConfig):
        name = "--" + f.name.replace("_", "-")
        if str(f.type) == "bool":
            parser.add_argument(
                name, default=None, type=lambda s: _parse_value(bool, s),
                metavar="BOOL", help=f"override {f.name} (default {f.default})",
            )
        else:
            parser.add_argument(
                name, default=None, type=types[str(f.type)],
                help=f"override {f.name} (default {f.default})",
            )


def overrides_from_args(args) -> dict[str, object]:
    names = {f.name for f in fields(TrainConfig)}
    return {k: v for k, v in vars(args).items() if k in names and v is not None}


def save_config_json(cfg: TrainConfig, path: str | Path) -> None:
    payload = {"format_version": 1, **dataclasses.asdict(cfg)}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_config_json(path: str | Path) -> TrainConfig:
    payload = json.loads(Path(path).read_text())
    payload.pop("format_version", None)
    cfg = TrainConfig(**payload)
    cfg.validate()
    return cfg
