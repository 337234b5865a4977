"""Run configuration files.

A run is described by a TOML file::

    seed = 0
    output = "runs/toy"

    [dataset]
    kind = "toy"                 # or "file"
    train_amplitudes = [1.0, 1.4]
    test_amplitudes = [1.2]
    nx = 600
    nt = 201

    [[stages]]
    architecture = [600, 100, 5]
    activation = "tanh"
    iterations = 10000
    lr = 1e-3
    beta1 = 0.1
    beta2 = 1e-3

    [gp]
    kernel = "matern15"          # or "rbf"; optional "noise" overrides sigma^2

    [prediction]
    n_samples = 50
    seed = 0

For ``kind = "file"`` the dataset section names ``train_file`` and
``test_file`` (MLSD files), or a single ``file`` plus ``train_indices``.
Learning rate and both loss weights have no defaults.
"""

import json
import sys
from dataclasses import dataclass, field

from .errors import ConfigError
from .rom import StageConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class RunConfig:
    dataset: dict
    stages: list
    gp: dict = field(default_factory=dict)
    prediction: dict = field(default_factory=dict)
    output: str = "run"
    seed: int = 0

    def stage_configs(self):
        kind = self.gp.get("kernel", "matern15")
        noise = self.gp.get("noise")
        return [StageConfig(gp_kind=kind, gp_noise=noise, **s) for s in self.stages]

    @property
    def n_samples(self):
        return int(self.prediction.get("n_samples", 0))

    @property
    def prediction_seed(self):
        return int(self.prediction.get("seed", self.seed))

    def to_dict(self):
        return {
            "seed": self.seed,
            "output": self.output,
            "dataset": dict(self.dataset),
            "stages": [dict(s) for s in self.stages],
            "gp": dict(self.gp),
            "prediction": dict(self.prediction),
        }


_STAGE_REQUIRED = ("architecture", "iterations", "lr", "beta1", "beta2")
_STAGE_OPTIONAL = ("activation", "substeps")


def _require(section, key, where):
    if key not in section:
        raise ConfigError(f"missing required field '{where}.{key}'")
    return section[key]


def _number(value, where, positive=False, nonneg=False, integer=False):
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if integer:
        ok = ok and float(value).is_integer()
    if not ok or (positive and value <= 0) or (nonneg and value < 0):
        raise ConfigError(f"invalid value for '{where}': {value!r}")
    return int(value) if integer else float(value)


def _validate_stage(i, s):
    where = f"stages[{i}]"
    if not isinstance(s, dict):
        raise ConfigError(f"'{where}' must be a table")
    unknown = set(s) - set(_STAGE_REQUIRED) - set(_STAGE_OPTIONAL)
    if unknown:
        raise ConfigError(f"unknown field(s) in '{where}': {sorted(unknown)}")
    arch = _require(s, "architecture", where)
    if (not isinstance(arch, list) or len(arch) < 2
            or not all(isinstance(d, int) and d > 0 for d in arch)):
        raise ConfigError(f"invalid value for '{where}.architecture': {arch!r}")
    out = {
        "architecture": list(arch),
        "iterations": _number(_require(s, "iterations", where), f"{where}.iterations",
                              nonneg=True, integer=True),
        "lr": _number(_require(s, "lr", where), f"{where}.lr", positive=True),
        "beta1": _number(_require(s, "beta1", where), f"{where}.beta1", nonneg=True),
        "beta2": _number(_require(s, "beta2", where), f"{where}.beta2", nonneg=True),
        "activation": s.get("activation", "tanh"),
    }
    if out["activation"] not in ("tanh", "softplus"):
        raise ConfigError(f"invalid value for '{where}.activation': {out['activation']!r}")
    if "substeps" in s:
        out["substeps"] = _number(s["substeps"], f"{where}.substeps", positive=True, integer=True)
    return out


def _validate_dataset(d):
    if not isinstance(d, dict):
        raise ConfigError("'dataset' must be a table")
    kind = _require(d, "kind", "dataset")
    if kind == "toy":
        for key in ("train_amplitudes", "test_amplitudes"):
            vals = _require(d, key, "dataset")
            if not isinstance(vals, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
                raise ConfigError(f"invalid value for 'dataset.{key}': {vals!r}")
        out = dict(d)
        out.setdefault("nx", 600)
        out.setdefault("nt", 201)
        for key in ("nx", "nt"):
            _number(out[key], f"dataset.{key}", integer=True)
        return out
    if kind == "file":
        if "file" in d:
            _require(d, "train_indices", "dataset")
        else:
            _require(d, "train_file", "dataset")
        return dict(d)
    raise ConfigError(f"invalid value for 'dataset.kind': {kind!r} (expected 'toy' or 'file')")


def parse_config(raw):
    """Validate a parsed config mapping into a :class:`RunConfig`."""
    if "dataset" not in raw:
        raise ConfigError("missing required section 'dataset'")
    dataset = _validate_dataset(raw["dataset"])
    stages = raw.get("stages")
    if not stages:
        raise ConfigError("missing required section 'stages' (at least one [[stages]] table)")
    stages = [_validate_stage(i, s) for i, s in enumerate(stages)]
    gp = dict(raw.get("gp", {}))
    if gp.get("kernel", "matern15") not in ("rbf", "matern15"):
        raise ConfigError(f"invalid value for 'gp.kernel': {gp['kernel']!r}")
    if "noise" in gp:
        _number(gp["noise"], "gp.noise", nonneg=True)
    prediction = dict(raw.get("prediction", {}))
    if "n_samples" in prediction:
        _number(prediction["n_samples"], "prediction.n_samples", nonneg=True, integer=True)
    seed = _number(raw.get("seed", 0), "seed", nonneg=True, integer=True)
    return RunConfig(dataset, stages, gp, prediction, str(raw.get("output", "run")), seed)


def load_config(path):
    """Read a TOML run config, or the config echoed in a stack manifest (JSON)."""
    path = str(path)
    try:
        if path.endswith(".json"):
            with open(path) as fh:
                raw = json.load(fh)
            raw = raw.get("config", raw)
        else:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if raw is None:
        raise ConfigError(f"{path}: no config found")
    return parse_config(raw)
