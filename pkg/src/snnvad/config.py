"""Run configuration: a flat ``key = value`` file plus command-line overrides.

Grammar, one assignment per line::

    # comment
    arch = "h1"          # strings may be quoted or bare
    epochs = 20          # integers, floats, true/false
    schedule = [0.7, 0.4, 0.2, 0.15]

Keys are the field names of :class:`RunConfig`. Unknown keys are rejected.
"""
from __future__ import annotations

import ast
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .network import ARCHITECTURES
from .pruning import DEFAULT_SCHEDULE, TicketSchedule
from .training import BATCH_SIZE, LEARNING_RATE, LOSS_CONFIGS


@dataclass
class RunConfig:
    data: str | None = None
    labels: str | None = None
    out: str | None = None
    history: str | None = None
    arch: str = "h1"
    loss: str = "balanced"
    epochs: int = 10
    seed: int = 0
    rho: float = 0.0
    schedule: tuple = DEFAULT_SCHEDULE
    T: int = 100
    batch_size: int = BATCH_SIZE
    lr: float = LEARNING_RATE
    max_steps: int | None = None
    smooth: int = 11

    def validate(self):
        if self.arch not in ARCHITECTURES:
            raise ValidationError(f"arch must be one of {sorted(ARCHITECTURES)}, got {self.arch!r}")
        if self.loss not in LOSS_CONFIGS:
            raise ValidationError(f"loss must be one of {sorted(LOSS_CONFIGS)}, got {self.loss!r}")
        for name in ("epochs", "seed", "T", "batch_size", "smooth"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValidationError(f"{name} must be an integer, got {value!r}")
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if self.T < 1 or self.batch_size < 1:
            raise ValidationError("T and batch_size must be positive")
        if self.smooth < 0 or (self.smooth and self.smooth % 2 == 0):
            raise ValidationError("smooth must be 0 (off) or an odd window size")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValidationError("max_steps must be positive")
        if not self.lr > 0:
            raise ValidationError("lr must be positive")
        self.rho = float(self.rho)
        self.schedule = TicketSchedule(tuple(self.schedule)).keep_fractions
        return self


def parse_value(text):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if text.lower() in ("none", "null"):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _strip_comment(line):
    quote = None
    for i, ch in enumerate(line):
        if ch in "\"'":
            quote = None if quote == ch else (ch if quote is None else quote)
        elif ch == "#" and quote is None:
            return line[:i]
    return line


def parse_config_text(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key.isidentifier():
            raise ValidationError(f"config line {lineno}: invalid key {key!r}")
        values[key] = parse_value(value)
    return values


def load_config(path=None, **overrides):
    """Build a validated :class:`RunConfig`; non-``None`` overrides win over file values."""
    values = {}
    if path is not None:
        try:
            values = parse_config_text(Path(path).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**values).validate()
