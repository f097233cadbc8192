"""Pipeline configuration: defaults < key=value file < command-line flags."""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .corpus import DEFAULT_SAMPLE_PER_WEEK, DEFAULT_WINDOW, StudyWindow
from .errors import ConfigError, DataError
from .lda import LdaConfig

ENV_CONFIG = "TOPIC_TRENDS_CONFIG"


@dataclass(frozen=True)
class PipelineConfig:
    window: StudyWindow = DEFAULT_WINDOW
    sample_per_week: int = DEFAULT_SAMPLE_PER_WEEK
    seed: int = 0
    k: int = 10
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 200
    min_df: int = 5
    max_df_ratio: float = 0.5
    stoplist: str | None = None  # None: bundled list
    domain_terms: str | None = None
    gazetteer: str | None = None
    heldout_fraction: float = 0.1
    english_only: bool = True
    top_terms: int = 10

    def __post_init__(self):
        if self.sample_per_week < 1:
            raise ConfigError("sample_per_week must be positive")
        if self.min_df < 1:
            raise ConfigError("min_df must be >= 1")
        if not 0 < self.max_df_ratio <= 1:
            raise ConfigError("max_df_ratio must lie in (0, 1]")
        if not 0 < self.heldout_fraction < 1:
            raise ConfigError("heldout_fraction must lie in (0, 1)")
        if self.top_terms < 1:
            raise ConfigError("top_terms must be >= 1")
        self.lda()  # validates K, alpha, beta, iterations, burn_in

    def lda(self) -> LdaConfig:
        return LdaConfig(self.k, self.alpha, self.beta, self.iterations, self.burn_in, self.seed)

    def check_files(self) -> None:
        for name in ("stoplist", "domain_terms", "gazetteer"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise DataError(f"{name} file not found: {path}")

    def echo(self) -> list[str]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "alpha" and value is None:
                value = self.lda().resolved_alpha
            elif value is None:
                value = "bundled"
            out.append(f"{f.name}={value}")
        return out


def _convert(name: str, raw: str, base: Path | None):
    kind = {f.name: f.type for f in fields(PipelineConfig)}[name]
    raw = raw.strip()
    try:
        if name == "window":
            return StudyWindow.parse(raw)
        if name == "english_only":
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
        if name == "alpha":
            return None if raw.lower() in ("", "auto") else float(raw)
        if name in ("stoplist", "domain_terms", "gazetteer"):
            if raw.lower() in ("", "bundled"):
                return None
            path = Path(raw).expanduser()
            if base is not None and not path.is_absolute():
                path = base / path
            return str(path)
        if kind in ("int",):
            return int(raw)
        if kind in ("float",):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    raise ConfigError(f"unsupported option {name}")


def _known() -> set[str]:
    return {f.name for f in fields(PipelineConfig)}


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; '#' starts a comment line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc.strerror}") from exc
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), delimiters=("=",))
    try:
        parser.read_string("[pipeline]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    values = {}
    for key, raw in parser["pipeline"].items():
        name = key.replace("-", "_")
        if name not in _known():
            raise ConfigError(f"{path}: unknown option {key!r}")
        values[name] = _convert(name, raw, path.parent)
    return values


def resolve(config_path=None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults, then the config file (explicit or $TOPIC_TRENDS_CONFIG), then overrides."""
    values: dict = {}
    config_path = config_path or os.environ.get(ENV_CONFIG) or None
    if config_path:
        values.update(read_config_file(config_path))
    for name, raw in (overrides or {}).items():
        if raw is None:
            continue
        values[name] = _convert(name, raw, None) if isinstance(raw, str) else raw
    cfg = replace(PipelineConfig(), **values)
    cfg.check_files()
    return cfg


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
