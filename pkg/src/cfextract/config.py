"""Per-command run settings: defaults <- INI file section <- command-line flags.

Defaults are the published tuned settings where one applies.
Fields left as ``None`` in ``train-neural`` are filled per task: span
extraction and classification each have their own tuned set.
"""

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class GenDataConfig:
    n: int = 2000
    seed: int = 0
    counterfactual_ratio: float = 0.5
    no_consequent_ratio: float = 0.2
    vocab_size: int = 60
    delimiter: str = ","


@dataclass
class StatsConfig:
    data: str = ""
    task: int = 1
    bucket_width: int = 10
    limit: int = 100
    tokenizer: str = "whitespace"
    bpe_merges: int = 0
    delimiter: str = ","
    seed: int = 0


@dataclass
class TrainBaselineConfig:
    train: str = ""
    kind: str = "svm"
    split_mode: str = "head-n"
    split_n: int = 3000
    split_seed: int = 0
    min_df: int = 1
    seed: int = 0
    delimiter: str = ","


@dataclass
class TrainNeuralConfig:
    task: int = 2
    train: str = ""
    split_mode: str = None
    split_n: int = None
    split_seed: int = 0
    tokenizer: str = "whitespace"
    bpe_merges: int = 0
    max_len: int = 64
    layers: int = 2
    heads: int = 4
    d_model: int = 64
    d_ff: int = 128
    dropout: float = None
    batch_size: int = None
    lr: float = None
    epochs: int = None
    max_updates: int = 0
    max_grad_norm: float = None
    weight_decay: float = None
    adam_eps: float = 1e-8
    patience: int = 5
    lookahead: bool = None
    lookahead_k: int = 5
    lookahead_alpha: float = 0.47
    max_antecedent_len: int = 116
    max_consequent_len: int = 56
    seed: int = 0
    delimiter: str = ","

    TASK_DEFAULTS = {
        # span extraction: tuned settings, including Lookahead
        2: dict(split_mode="random-n", split_n=355, dropout=0.0415, batch_size=64,
                lr=1.263e-5, epochs=100, max_grad_norm=7.739, weight_decay=0.02, lookahead=True),
        # classification: best batch size and learning rate plus shared settings
        1: dict(split_mode="head-n", split_n=3000, dropout=0.1, batch_size=96, lr=3e-5,
                epochs=8, max_grad_norm=1.0, weight_decay=0.0, lookahead=False),
    }

    def resolve(self):
        if self.task not in self.TASK_DEFAULTS:
            raise ConfigError(f"task must be 1 or 2, got {self.task}")
        for key, value in self.TASK_DEFAULTS[self.task].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        return self


@dataclass
class PredictConfig:
    checkpoint: str = ""
    data: str = ""
    joint: bool = True
    delimiter: str = ","
    seed: int = 0


@dataclass
class EnsembleSearchConfig:
    pool: str = ""
    gold: str = ""
    task: int = 2
    method: str = "greedy"
    top_k: int = 10
    tokenizer: str = "whitespace"
    bpe_file: str = ""
    max_len: int = 64
    max_antecedent_len: int = 116
    max_consequent_len: int = 56
    delimiter: str = ","
    seed: int = 0


@dataclass
class EvaluateConfig:
    task: int = 2
    pred: str = ""
    gold: str = ""
    delimiter: str = ","
    seed: int = 0


@dataclass
class GradCheckConfig:
    configs: int = 10
    trials: int = 1
    seed: int = 0
    threshold: float = 1e-4


COMMANDS = {
    "gen-data": GenDataConfig,
    "stats": StatsConfig,
    "train-baseline": TrainBaselineConfig,
    "train-neural": TrainNeuralConfig,
    "predict": PredictConfig,
    "ensemble-search": EnsembleSearchConfig,
    "evaluate": EvaluateConfig,
    "grad-check": GradCheckConfig,
}


REQUIRED = {
    "stats": ["data"],
    "train-baseline": ["train"],
    "train-neural": ["train"],
    "predict": ["checkpoint", "data"],
    "ensemble-search": ["pool", "gold"],
    "evaluate": ["pred", "gold"],
}
CHOICES = {
    "task": (1, 2),
    "kind": ("svm", "logistic", "nb", "mlp"),
    "split_mode": ("head-n", "random-n"),
    "tokenizer": ("whitespace", "bpe"),
    "method": ("greedy", "exhaustive"),
}


def require_inputs(command, config):
    """Raise unless every input path the command needs is set."""
    for key in REQUIRED.get(command, []):
        if not getattr(config, key):
            raise ConfigError(f"{command}: {key} is required")


def validate(command, config):
    for key, allowed in CHOICES.items():
        if hasattr(config, key) and getattr(config, key) not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {getattr(config, key)!r}")
    if getattr(config, "tokenizer", None) == "bpe" and hasattr(config, "bpe_file") \
            and not config.bpe_file:
        raise ConfigError("tokenizer = bpe needs bpe_file")
    return config


def _field_types(cls):
    return {f.name: f.type for f in fields(cls)}


def parse_value(kind, raw, key):
    if raw is None:
        return None
    if not isinstance(raw, str):
        return raw
    try:
        if kind in (bool, "bool"):
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None
    return raw


def load_config(command, path=None, overrides=None):
    """Merge defaults, the ``[command]`` section of ``path`` and ``overrides``."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    cls = COMMANDS[command]
    types = _field_types(cls)
    values = {}
    if path:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            text = Path(path).read_text(encoding="utf-8")
            parser.read_string(text, source=str(path))
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: missing [section] header") from None
        except configparser.ParsingError as exc:
            lines = ", ".join(str(n) for n, _ in exc.errors)
            raise ConfigError(f"{path}: malformed line(s) {lines}") from None
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            if section not in COMMANDS:
                raise ConfigError(f"{path}: unknown section [{section}]")
        if parser.has_section(command):
            for key, raw in parser.items(command):
                if key not in types:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{command}]")
                values[key] = parse_value(types[key], raw, key)
    for key, value in (overrides or {}).items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r} for {command}")
        if value is not None:
            values[key] = parse_value(types[key], value, key)
    config = cls(**values)
    if hasattr(config, "resolve"):
        config.resolve()
    return validate(command, config)


def dump_config(command, config):
    """INI text that ``load_config`` reads back to the same values."""
    lines = [f"[{command}]"]
    for key, value in dataclasses.asdict(config).items():
        if value is not None:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
