"""Run configuration: defaults, ``key = value`` config files and CLI overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .evaluation import RelevanceRule, SplitSpec
from .factorization import Hyperparams
from .profiles import NormalizationSpec, ProfileSelector

_ALIASES = {"lambda": "lam", "lambda_": "lam", "eta": "learning_rate", "top-k": "top_k"}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    events: str | None = None
    posts: str | None = None
    users: str | None = None
    weights: str | None = None
    output_dir: str = "."

    d: int = 16
    lam: float = 0.05
    alpha: float = 0.1
    learning_rate: float = 0.02
    epochs: int = 200
    seed: int = 0
    init_scale: float = 0.1
    include_diagonal: bool = True
    zero_samples: int = 10
    max_halvings: int = 20

    test_fraction: float = 0.2
    split_seed: int = 0
    relevance_threshold: float | None = None
    normalization: str = "log1p_then_minmax"
    rating_min: float = 0.0
    rating_max: float = 5.0

    top_k: int = 50
    threshold: float = 0.01
    stop_words: str | None = None

    selector: str = "all"
    selectors: str = "all,direct,social,reading"
    k: int = 10
    candidates: str = "test"
    clamp: bool = True

    def update(self, values: dict) -> "RunConfig":
        """Apply overrides; ``None`` values are skipped."""
        known = {f.name: f for f in fields(self)}
        for raw_key, value in values.items():
            if value is None:
                continue
            key = _ALIASES.get(raw_key, raw_key).replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {raw_key!r}")
            setattr(self, key, self._coerce(known[key], value))
        return self

    @staticmethod
    def _coerce(f: dataclasses.Field, value):
        if not isinstance(value, str):
            return value
        kind = str(f.type)
        try:
            if kind.startswith("bool"):
                return _parse_bool(value)
            if kind.startswith("int"):
                return int(value)
            if kind.startswith("float"):
                return None if value.strip().lower() in ("", "none") else float(value)
        except ValueError:
            raise ConfigError(f"{f.name}: cannot parse {value!r}") from None
        return value

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls().update(parse_config_text(Path(path).read_text(encoding="utf-8"), str(path)))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(d=self.d, lam=self.lam, alpha=self.alpha, learning_rate=self.learning_rate,
                           epochs=self.epochs, seed=self.seed, init_scale=self.init_scale,
                           include_diagonal=self.include_diagonal, zero_samples=self.zero_samples,
                           max_halvings=self.max_halvings)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.test_fraction, self.split_seed)

    def relevance(self) -> RelevanceRule:
        return RelevanceRule(self.relevance_threshold)

    def normalization_spec(self) -> NormalizationSpec:
        return NormalizationSpec(self.normalization, self.rating_min, self.rating_max)

    def profile_selector(self) -> ProfileSelector:
        return ProfileSelector.parse(self.selector)

    def profile_selectors(self) -> list[ProfileSelector]:
        return [ProfileSelector.parse(s) for s in self.selectors.split(",") if s.strip()]


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        values[key] = value
    return values
