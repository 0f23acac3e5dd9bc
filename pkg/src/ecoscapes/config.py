"""Run configuration: YAML file plus environment, validated up front.

An empty (or absent) config file means all defaults: stub chat backend,
5 km box side, 1 % cloud ceiling, 1024 px image cap, manual images under
``satellite_data/``. Unknown keys are rejected rather than ignored so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ecoscapes.errors import (
    MissingTokenError,
    OutOfRangeValueError,
    UnknownKeyError,
)
from ecoscapes.geo import DEFAULT_GEOCODER_URL, DEFAULT_USER_AGENT

API_TOKEN_ENV = "ECOSCAPES_API_TOKEN"

BACKEND_KINDS = ("stub", "remote")


@dataclass
class Config:
    geocoder_url: str = DEFAULT_GEOCODER_URL
    user_agent: str = DEFAULT_USER_AGENT
    satellite_api_url: str = ""
    chat_api_url: str = ""
    api_token: str | None = None          # literal token; env var wins otherwise
    api_token_env: str = API_TOKEN_ENV
    backend: str = "stub"                 # chat backend kind: stub | remote
    rgb_model: str = "360VL"
    water_model: str = "360VL"
    moisture_model: str = "360VL"
    report_model: str = "InternLM"
    temperature: float = 0.0
    true_color_gain: float = 2.5
    bbox_side_m: float = 5000.0
    max_cloud: float = 0.01
    water_threshold: int = 128
    water_opening_radius: int = 1
    water_min_area_fraction: float = 0.0005
    water_significance_cutoff: float = 0.001
    invert_manual_water: bool = False
    max_side: int = 1024
    output_dir: str = "output"
    manual_root: str = "satellite_data"
    reference_date: dt.date | None = field(default=None)

    def __post_init__(self):
        checks = (
            (self.backend in BACKEND_KINDS,
             f"backend must be one of {BACKEND_KINDS}, got {self.backend!r}"),
            (self.bbox_side_m > 0, f"bbox_side_m must be > 0: {self.bbox_side_m}"),
            (0.0 < self.max_cloud <= 1.0,
             f"max_cloud must be in (0, 1]: {self.max_cloud}"),
            (0 <= self.water_threshold <= 255,
             f"water_threshold must be in [0, 255]: {self.water_threshold}"),
            (self.water_opening_radius >= 0,
             f"water_opening_radius must be >= 0: {self.water_opening_radius}"),
            (0.0 <= self.water_min_area_fraction < 1.0,
             "water_min_area_fraction must be in [0, 1): "
             f"{self.water_min_area_fraction}"),
            (0.0 <= self.water_significance_cutoff <= 1.0,
             "water_significance_cutoff must be in [0, 1]: "
             f"{self.water_significance_cutoff}"),
            (self.max_side >= 1, f"max_side must be >= 1: {self.max_side}"),
            (self.temperature >= 0.0,
             f"temperature must be >= 0: {self.temperature}"),
            (self.true_color_gain > 0.0,
             f"true_color_gain must be > 0: {self.true_color_gain}"),
        )
        for ok, message in checks:
            if not ok:
                raise OutOfRangeValueError(message)

    @property
    def bbox_half_width_m(self) -> float:
        # The documented box side is the full width; acquisition frames
        # +/- half of it around the center.
        return self.bbox_side_m / 2.0

    def resolve_token(self, env) -> str | None:
        """Literal token if set, else the configured environment variable."""
        if self.api_token is not None:
            return self.api_token
        return env.get(self.api_token_env)

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.reference_date is not None:
            out["reference_date"] = self.reference_date.isoformat()
        return out


def load_config(path=None, env=None) -> Config:
    """Parse, default, and validate a YAML config file.

    ``path=None`` (or an empty file) yields pure defaults. A token is
    demanded at load time only when the remote chat backend is selected;
    the satellite API path checks credentials itself, later, so manual
    image workflows never need one.
    """
    env = env if env is not None else {}
    raw = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        loaded = yaml.safe_load(text)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise UnknownKeyError(f"config root must be a mapping, got {type(loaded)}")
        raw = loaded

    known = {f.name for f in fields(Config)}
    unknown = set(raw) - known
    if unknown:
        raise UnknownKeyError(f"unknown config key(s): {sorted(unknown)}")

    if isinstance(raw.get("reference_date"), str):
        try:
            raw["reference_date"] = dt.date.fromisoformat(raw["reference_date"])
        except ValueError as e:
            raise OutOfRangeValueError(f"bad reference_date: {e}") from e

    try:
        config = Config(**raw)
    except TypeError as e:
        raise UnknownKeyError(str(e)) from e

    if config.backend == "remote" and config.resolve_token(env) is None:
        raise MissingTokenError(
            "backend=remote needs an API token: set the "
            f"{config.api_token_env} environment variable or the api_token key"
        )
    return config


def dump_config(config: Config) -> str:
    """Serialize a config back to YAML; load(dump(x)) is stable."""
    return yaml.safe_dump(config.to_dict(), sort_keys=True,
                          allow_unicode=True, default_flow_style=False)
