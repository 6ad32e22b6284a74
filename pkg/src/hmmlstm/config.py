"""INI run configuration with explicit defaults for every tunable."""
from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .regime import MODES


@dataclass
class SeriesSource:
    name: str
    source: str
    frequency: str | None = None
    transform: str = "none"
    scale: str = "percent"
    method: str | None = None
    role: str = "feature"


@dataclass
class HmmSettings:
    n_states: int = 4
    seed: int = 0
    pseudocount: float = 1.0
    max_iter: int = 500
    tol: float = 1e-6
    variance_floor: float = 1e-4
    stable_state: int = 0


@dataclass
class ModelSettings:
    n_lags: int = 24
    horizon: int = 1
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    hidden1: int = 50
    hidden2: int = 50
    dense: int = 25
    clip_norm: float = 5.0
    weight_decay: float = 0.0
    train_fraction: float = 0.7
    split_date: str = ""
    folds: int = 5
    modes: str = "original, states, means, all"

    @property
    def mode_list(self) -> list[str]:
        return [m.strip() for m in self.modes.split(",") if m.strip()]


@dataclass
class ForecastSettings:
    mode: str = "all"
    horizon: int = 12
    n_lags: int = 48
    ensemble_size: int = 20
    base_seed: int = 0
    epochs: int = 100
    lower_pct: float = 5.0
    upper_pct: float = 95.0


@dataclass
class ExplainSettings:
    mode: str = "means"
    m: int = 50
    output_index: int = 0
    baseline: str = "zeros"
    magnitude: bool = False


@dataclass
class RunConfig:
    series: list[SeriesSource]
    target: str
    start: str = ""
    end: str = ""
    label: str = ""
    out_dir: Path = Path("out")
    base_dir: Path = Path(".")
    hmm: HmmSettings = field(default_factory=HmmSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    forecast: ForecastSettings = field(default_factory=ForecastSettings)
    explain: ExplainSettings = field(default_factory=ExplainSettings)

    def resolve(self, path: str) -> str:
        if "://" in path or os.path.isabs(path):
            return path
        return str(self.base_dir / path)

    def validate(self) -> None:
        if not self.target:
            raise ConfigError("[data] target is required")
        for m in self.model.mode_list + [self.forecast.mode, self.explain.mode]:
            if m not in MODES:
                raise ConfigError(f"unknown mode {m!r}; choose from {MODES}")
        if self.hmm.n_states < 1:
            raise ConfigError("hmm.n_states must be >= 1")
        if not 0 < self.model.train_fraction < 1:
            raise ConfigError("model.train_fraction must be in (0, 1)")
        for name in ("n_lags", "horizon", "epochs", "batch_size", "folds"):
            if getattr(self.model, name) < 1:
                raise ConfigError(f"model.{name} must be >= 1")
        if self.forecast.ensemble_size < 2:
            raise ConfigError("forecast.ensemble_size must be >= 2")
        if self.explain.m < 1:
            raise ConfigError("explain.m must be >= 1")
        if self.explain.baseline not in ("zeros", "train_mean"):
            raise ConfigError("explain.baseline must be zeros or train_mean")

    def to_ini(self) -> str:
        """Every resolved setting, including defaults, as INI text."""
        cp = configparser.ConfigParser(interpolation=None)
        cp["data"] = {"target": self.target, "start": self.start, "end": self.end, "label": self.label}
        cp["output"] = {"dir": str(self.out_dir)}
        for s in self.series:
            cp[f"series.{s.name}"] = {k: "" if v is None else str(v) for k, v in asdict(s).items() if k != "name"}
        for section in ("hmm", "model", "forecast", "explain"):
            cp[section] = {k: str(v) for k, v in asdict(getattr(self, section)).items()}
        lines = []
        for sect in cp.sections():
            lines.append(f"[{sect}]")
            lines += [f"{k} = {v}" for k, v in cp[sect].items()]
            lines.append("")
        return "\n".join(lines)


def _coerce(cls, section: configparser.SectionProxy | None, label: str):
    obj = cls()
    if section is None:
        return obj
    known = {f.name: f for f in fields(cls)}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"unknown key {label}.{key}")
        default = getattr(obj, key)
        try:
            if isinstance(default, bool):
                value = section.getboolean(key)
            elif isinstance(default, int):
                value = int(raw)
            elif isinstance(default, float):
                value = float(raw)
            else:
                value = raw
        except ValueError as exc:
            raise ConfigError(f"invalid value for {label}.{key}: {raw!r}") from exc
        setattr(obj, key, value)
    return obj


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if "data" not in cp:
        raise ConfigError("config needs a [data] section")
    data = cp["data"]
    series = []
    for sect in cp.sections():
        if not sect.startswith("series."):
            continue
        s = cp[sect]
        if "source" not in s:
            raise ConfigError(f"[{sect}] needs a source")
        series.append(
            SeriesSource(
                name=sect[len("series."):],
                source=s["source"],
                frequency=s.get("frequency") or None,
                transform=s.get("transform", "none"),
                scale=s.get("scale", "percent"),
                method=s.get("method") or None,
                role=s.get("role", "feature"),
            )
        )
    base = path.parent
    out = Path(cp.get("output", "dir", fallback="out"))
    cfg = RunConfig(
        series=series,
        target=data.get("target", ""),
        start=data.get("start", ""),
        end=data.get("end", ""),
        label=data.get("label", ""),
        out_dir=out if out.is_absolute() else base / out,
        base_dir=base,
        hmm=_coerce(HmmSettings, cp["hmm"] if "hmm" in cp else None, "hmm"),
        model=_coerce(ModelSettings, cp["model"] if "model" in cp else None, "model"),
        forecast=_coerce(ForecastSettings, cp["forecast"] if "forecast" in cp else None, "forecast"),
        explain=_coerce(ExplainSettings, cp["explain"] if "explain" in cp else None, "explain"),
    )
    cfg.validate()
    return cfg
