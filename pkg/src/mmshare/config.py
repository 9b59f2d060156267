"""INI-style configuration: sections of ``key = value`` lines over the default network parameters.

Every key is optional; unknown sections or keys are rejected. Lists are
comma-separated. ``dump_config`` writes the fully resolved configuration in a
canonical order, so ``digest(load(dump(c))) == digest(c)``.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from mmshare.channel import AntennaPattern, ChannelParams, RateConfig
from mmshare.duopoly import MarketParams
from mmshare.errors import ConfigError, InvalidParameterError
from mmshare.simengine import SimConfig


@dataclass(frozen=True)
class GameSettings:
    grid_resolution: float = 1e-4
    region_resolution: float = 0.01

    def __post_init__(self):
        if self.grid_resolution <= 0 or self.region_resolution <= 0:
            raise InvalidParameterError("grid_resolution and region_resolution must be > 0")


@dataclass(frozen=True)
class Config:
    sim: SimConfig = field(default_factory=SimConfig)
    market: MarketParams = field(default_factory=MarketParams)
    game: GameSettings = field(default_factory=GameSettings)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _words(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


# section -> key -> (parser, attribute path)
_SCHEMA: dict[str, dict[str, tuple]] = {
    "network": {
        "bs_density_per_km2": (float, "sim.bs_density_per_km2"),
        "user_density_per_km2": (float, "sim.user_density_per_km2"),
        "area_width_m": (float, "sim.area_width_m"),
        "area_height_m": (float, "sim.area_height_m"),
        "n1": (float, "sim.n1"),
    },
    "rate": {f.name: (float, f"rate.{f.name}") for f in fields(RateConfig)},
    "antenna": {
        "bs_main_lobe_db": (float, "bs.main_lobe_gain_db"),
        "bs_back_lobe_db": (float, "bs.back_lobe_gain_db"),
        "bs_beamwidth_deg": (float, "bs.beamwidth_deg"),
        "ue_main_lobe_db": (float, "ue.main_lobe_gain_db"),
        "ue_back_lobe_db": (float, "ue.back_lobe_gain_db"),
        "ue_beamwidth_deg": (float, "ue.beamwidth_deg"),
    },
    "channel": {f.name: (float, f"channel.{f.name}") for f in fields(ChannelParams)},
    "scheduler": {
        "gamma": (float, "sim.gamma"),
        "rate_unit_bps": (float, "sim.rate_unit_bps"),
        "psi1": (float, "sim.psi1"),
    },
    "simulation": {
        "regimes": (_words, "sim.regimes"),
        "psi_grid": (_floats, "sim.psi_grid"),
        "slots_per_drop": (int, "sim.slots_per_drop"),
        "num_drops": (int, "sim.num_drops"),
        "base_seed": (int, "sim.base_seed"),
        "interference_mode": (str, "sim.interference_mode"),
        "workers": (int, "sim.workers"),
    },
    "market": {
        **{f.name: (float, f"market.{f.name}") for f in fields(MarketParams)},
        "grid_resolution": (float, "game.grid_resolution"),
        "region_resolution": (float, "game.region_resolution"),
    },
}


def _defaults() -> dict[str, dict]:
    cfg = Config()
    return {
        "sim": {f.name: getattr(cfg.sim, f.name) for f in fields(SimConfig)},
        "rate": {f.name: getattr(cfg.sim.rate, f.name) for f in fields(RateConfig)},
        "channel": {f.name: getattr(cfg.sim.channel, f.name) for f in fields(ChannelParams)},
        "bs": {f.name: getattr(cfg.sim.bs_pattern, f.name) for f in fields(AntennaPattern)},
        "ue": {f.name: getattr(cfg.sim.ue_pattern, f.name) for f in fields(AntennaPattern)},
        "market": {f.name: getattr(cfg.market, f.name) for f in fields(MarketParams)},
        "game": {f.name: getattr(cfg.game, f.name) for f in fields(GameSettings)},
    }


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip().lower()
            continue
        if current == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return i
    return None


def _where(text: str, section: str, key: str | None = None) -> str:
    line = _line_of(text, section, key) if key else None
    loc = f"[{section}]" + (f" {key}" if key else "")
    return f"line {line}: {loc}" if line else loc


def parse_config(text: str, source: str = "<config>") -> Config:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}: key outside of a [section]") from None
    except configparser.ParsingError as exc:
        lines = ", ".join(f"line {n}: {ln!r}" for n, ln in exc.errors)
        raise ConfigError(f"{source}: cannot parse {lines}") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}: duplicate key {exc.option!r} in [{exc.section}]") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}: duplicate section [{exc.section}]") from None
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    values = _defaults()
    for section in parser.sections():
        sec = section.strip().lower()
        if sec not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]; expected one of {sorted(_SCHEMA)}")
        for key, raw in parser.items(section):
            spec = _SCHEMA[sec].get(key)
            if spec is None:
                raise ConfigError(f"{source}: {_where(text, sec, key)}: unknown key {key!r}")
            conv, path = spec
            try:
                value = conv(raw.strip())
            except ValueError:
                raise ConfigError(
                    f"{source}: {_where(text, sec, key)}: cannot interpret {raw!r} as {conv.__name__.lstrip('_')}"
                ) from None
            group, attr = path.split(".")
            values[group][attr] = value

    def build(section: str, factory, kwargs):
        try:
            return factory(**kwargs)
        except InvalidParameterError as exc:
            raise ConfigError(f"{source}: [{section}] {exc}") from None

    rate = build("rate", RateConfig, values["rate"])
    channel = build("channel", ChannelParams, values["channel"])
    bs = build("antenna", AntennaPattern, values["bs"])
    ue = build("antenna", AntennaPattern, values["ue"])
    sim_kw = dict(values["sim"], rate=rate, channel=channel, bs_pattern=bs, ue_pattern=ue)
    sim = build("simulation", SimConfig, sim_kw)
    market = build("market", MarketParams, values["market"])
    game = build("market", GameSettings, values["game"])
    return Config(sim, market, game)


def load_config(path: str | Path | None) -> Config:
    """Read a configuration file; ``None`` yields the defaults."""
    if path is None:
        return Config()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: Config) -> str:
    sources = {
        "sim": cfg.sim,
        "rate": cfg.sim.rate,
        "channel": cfg.sim.channel,
        "bs": cfg.sim.bs_pattern,
        "ue": cfg.sim.ue_pattern,
        "market": cfg.market,
        "game": cfg.game,
    }
    out = []
    for section, keys in _SCHEMA.items():
        out.append(f"[{section}]")
        for key, (_, path) in keys.items():
            group, attr = path.split(".")
            out.append(f"{key} = {_fmt(getattr(sources[group], attr))}")
        out.append("")
    return "\n".join(out)


def digest(cfg: Config) -> str:
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()


def with_sim(cfg: Config, **changes) -> Config:
    return replace(cfg, sim=replace(cfg.sim, **changes))


def with_market(cfg: Config, **changes) -> Config:
    return replace(cfg, market=replace(cfg.market, **changes))
