"""Run configuration: flat ``key = value`` files with typed, validated keys."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .adversarial import GanHyperParams
from .baselines import MlcHyperParams
from .errors import ConfigError

MODEL_KINDS = ("CFWGAN_GP", "CFGAN_VANILLA", "MLC", "ITEMPOP")
FORMATS = ("ML100K", "ML1M")

_COMMON = {
    "model": str,
    "dataset": str,
    "format": str,
    "seed": int,
    "split_seed": int,
    "test_ratio": float,
    "valid_ratio": float,
    "retrain": bool,
}
_COMMON_DEFAULTS = {
    "format": "ML100K",
    "seed": 0,
    "split_seed": 0,
    "test_ratio": 0.2,
    "valid_ratio": 0.2,
    "retrain": True,
}


def _fields(cls, skip=("seed", "loss")) -> dict[str, type]:
    types = {"float": float, "int": int, "bool": bool, "str": str}
    return {f.name: types[f.type] for f in dataclasses.fields(cls) if f.name not in skip}


_GAN_KEYS = _fields(GanHyperParams)
_MLC_KEYS = _fields(MlcHyperParams)


def model_keys(model: str) -> dict[str, type]:
    if model in ("CFWGAN_GP", "CFGAN_VANILLA"):
        return _GAN_KEYS
    if model == "MLC":
        return _MLC_KEYS
    return {}


@dataclass
class RunConfig:
    model: str
    dataset: str
    format: str = "ML100K"
    seed: int = 0
    split_seed: int = 0
    test_ratio: float = 0.2
    valid_ratio: float = 0.2
    retrain: bool = True
    params: dict = field(default_factory=dict)

    def hyperparams(self):
        if self.model in ("CFWGAN_GP", "CFGAN_VANILLA"):
            loss = "WGAN_GP" if self.model == "CFWGAN_GP" else "VANILLA_GAN"
            return GanHyperParams(seed=self.seed, loss=loss, **self.params)
        if self.model == "MLC":
            return MlcHyperParams(seed=self.seed, **self.params)
        return None

    def items(self) -> list[tuple[str, object]]:
        out = [(k, getattr(self, k)) for k in _COMMON]
        out += sorted(self.params.items())
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.items())

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(key: str, raw: str, typ: type):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from None


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def build_config(raw: dict[str, str], check_paths: bool = True) -> RunConfig:
    """Validate raw string values and fill in every default."""
    raw = dict(raw)
    model = raw.get("model", "").strip().upper()
    if model not in MODEL_KINDS:
        raise ConfigError(f"model: expected one of {', '.join(MODEL_KINDS)}, got {raw.get('model')!r}")
    raw["model"] = model
    specific = model_keys(model)
    for key in raw:
        if key not in _COMMON and key not in specific:
            raise ConfigError(f"{key}: unknown key for model {model}")
    if "dataset" not in raw or not raw["dataset"]:
        raise ConfigError("dataset: missing dataset path")

    common = dict(_COMMON_DEFAULTS)
    common.update({k: _coerce(k, v, _COMMON[k]) for k, v in raw.items() if k in _COMMON})
    common["format"] = common["format"].upper()
    if common["format"] not in FORMATS:
        raise ConfigError(f"format: expected one of {', '.join(FORMATS)}")
    for key in ("test_ratio", "valid_ratio"):
        if not 0 < common[key] < 1:
            raise ConfigError(f"{key}: must be in (0, 1), got {common[key]}")
    if check_paths and not Path(common["dataset"]).is_file():
        raise ConfigError(f"dataset: file not found: {common['dataset']}")

    params = {k: _coerce(k, v, specific[k]) for k, v in raw.items() if k in specific}
    cfg = RunConfig(**common, params=params)
    try:
        hp = cfg.hyperparams()
    except ValueError as exc:
        raise ConfigError(str(exc).replace("invalid hyperparameter ", "")) from None
    if hp is not None:
        filled = hp.as_dict()
        cfg.params = {k: filled[k] for k in specific}
    return cfg


def preset_names() -> list[str]:
    root = resources.files("cfwgan") / "presets"
    return sorted(p.name[: -len(".cfg")] for p in root.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    path = resources.files("cfwgan") / "presets" / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(preset_names())})")
    return path.read_text(encoding="utf-8")


def load_config(path_or_preset, overrides: dict | None = None, check_paths: bool = True) -> RunConfig:
    """Load a config file, or a shipped preset by name, applying string ``overrides``."""
    path = Path(path_or_preset)
    if path.is_file():
        raw = parse_text(path.read_text(encoding="utf-8"), str(path))
    elif str(path_or_preset) in preset_names():
        raw = parse_text(preset_text(str(path_or_preset)), str(path_or_preset))
    else:
        raise ConfigError(f"config: no such file or preset {str(path_or_preset)!r}")
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = _format(v)
    return build_config(raw, check_paths)


def write_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(cfg.to_text(), encoding="utf-8")
