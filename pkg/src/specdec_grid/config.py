"""Run configuration: INI-style ``[section]`` / ``key = value`` text.

Every hyperparameter is a named key. ``tau`` and ``delta`` may be left as
``none`` to pick the decoder-specific default.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .engine import ConfigError, DecodeConfig, Decoder
from .locality import RejectionMode
from .metrics import CostModel

REFERENCE_TAU = 1e-4
# Vocabulary against which the reference tau is read; tau is rescaled by the
# uniform-mass ratio so the threshold sits at the same multiple of 1/V.
TAU_REFERENCE_VOCAB = 16384
DEFAULT_K = 1000
DEFAULT_DELTA_MULOSD = 0.1
DEFAULT_DELTA_LANTERN = 0.4
DEFAULT_RADIUS = 3
REFERENCE_TAU_GRID = (1e-5, 5e-5, 1e-4, 1e-3)


def scaled_tau(vocab_size: int, tau: float = REFERENCE_TAU) -> float:
    return tau * TAU_REFERENCE_VOCAB / vocab_size


def default_tau_grid() -> tuple[float, ...]:
    logs = {round(10 ** (-5 + 0.5 * i), 12) for i in range(9)}
    return tuple(sorted(logs | set(REFERENCE_TAU_GRID)))


@dataclass
class ModelSection:
    seed: int = 0
    vocab: int = 16
    height: int = 16
    width: int = 16
    temperature: float = 1.0
    dim: int = 4
    noise: float = 0.3
    drafter_seed: int = 1
    codebook_seed: int = 2
    sampler_seed: int = 3
    factors: tuple = (2, 4)


@dataclass
class DecodeSection:
    decoder: str = "mulosd"
    r: int = 4
    tau: Optional[float] = None
    k: int = DEFAULT_K
    delta: Optional[float] = None
    mode: str = "expand"
    radius: int = DEFAULT_RADIUS
    draft_window_rows: int = 1
    window_tokens: int = 4
    seed: int = 0
    conditioning: int = 0


@dataclass
class CostSection:
    c_seq: float = 1.0
    c_par: float = 1.0
    c_resample_overhead: float = 0.05


@dataclass
class BenchSection:
    axis: str = "tau"
    values: tuple = ()
    seeds: int = 20
    base_seed: int = 0
    workers: int = 1


@dataclass
class VerifySection:
    vocab: int = 3
    height: int = 2
    width: int = 2
    window: int = 2
    model_seeds: int = 5
    noise: float = 0.5
    delta: float = 0.2
    tvd_samples: int = 1000
    trace_seeds: int = 20
    geometry_max_side: int = 4


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    decode: DecodeSection = field(default_factory=DecodeSection)
    cost: CostSection = field(default_factory=CostSection)
    bench: BenchSection = field(default_factory=BenchSection)
    verify: VerifySection = field(default_factory=VerifySection)

    # -- text round trip -----------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for sec in dataclasses.fields(self):
            lines.append(f"[{sec.name}]")
            obj = getattr(self, sec.name)
            for f in dataclasses.fields(obj):
                lines.append(f"{f.name} = {_format(getattr(obj, f.name))}")
            lines.append("")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_text(cls, text: str, overrides: list[str] = ()) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        cfg = cls()
        for section in parser.sections():
            for key, raw in parser.items(section):
                cfg.set(section, key, raw)
        for item in overrides:
            dotted, eq, raw = item.partition("=")
            section, dot, key = dotted.strip().partition(".")
            if not eq or not dot:
                raise ConfigError(f"override {item!r} is not section.key=value")
            cfg.set(section, key, raw)
        return cfg

    @classmethod
    def load(cls, path: str | Path | None, overrides: list[str] = ()) -> "RunConfig":
        text = Path(path).read_text() if path else ""
        return cls.from_text(text, overrides)

    def set(self, section: str, key: str, raw: str) -> None:
        sec = getattr(self, section.strip(), None)
        if not dataclasses.is_dataclass(sec):
            raise ConfigError(f"unknown config section [{section}]")
        key = key.strip()
        fields = {f.name: f for f in dataclasses.fields(sec)}
        if key not in fields:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        default = fields[key].default
        if default is dataclasses.MISSING:
            default = fields[key].default_factory()
        try:
            setattr(sec, key, _parse(raw.strip(), default, fields[key].type))
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc

    # -- derived objects ------------------------------------------------------
    def decode_config(self, vocab_size: int | None = None) -> DecodeConfig:
        d = self.decode
        v = vocab_size or self.model.vocab
        try:
            decoder = Decoder(d.decoder)
        except ValueError:
            raise ConfigError(f"unknown decoder {d.decoder!r}") from None
        tau = d.tau if d.tau is not None else scaled_tau(v)
        if d.delta is not None:
            delta = d.delta
        else:
            delta = DEFAULT_DELTA_LANTERN if decoder is Decoder.LANTERN else DEFAULT_DELTA_MULOSD
        try:
            mode = RejectionMode.parse(d.mode, d.radius)
        except ValueError:
            raise ConfigError(f"unknown rejection mode {d.mode!r}") from None
        try:
            return DecodeConfig.make(
                decoder, k=d.k, delta=delta, tau=tau, mode=mode,
                r=d.r, draft_window_rows=d.draft_window_rows,
                window_tokens=d.window_tokens, seed=d.seed, conditioning=d.conditioning,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def cost_model(self) -> CostModel:
        c = self.cost
        return CostModel(c.c_seq, c.c_par, c.c_resample_overhead)


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _scalar(raw: str):
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def _parse(raw: str, default, annotation):
    if raw.lower() == "none":
        if default is None or "Optional" in str(annotation):
            return None
        raise ValueError("none not allowed")
    if isinstance(default, tuple):
        return tuple(_scalar(x.strip()) for x in raw.split(",") if x.strip())
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float) or (default is None and "float" in str(annotation)):
        return float(raw)
    return raw
