"""Run configuration: INI-style file plus command-line flags.

File layout (every key optional, unknown sections/keys rejected)::

    [model]
    kind = twopoint        ; twopoint | gaussian | cpd | brownian
    p = 0.25
    a_up = 1
    a_down = 1
    mu = -0.5              ; gaussian: step mean; brownian: drift magnitude
    sigma = 1
    c = 2
    rho = 1
    nu = 1

    [run]
    seed = 1
    workers = 1
    budget = 1000000
    horizon = 10000
    replications = 2000
    batches = 10
    y = 9
    lambda = 2
    x_grid = 0,1,2,5,10
    k_max = 10
    step_cap = 10000000
    out = report.json
    format = json
    reproducible = false

Precedence: built-in defaults < file < flags.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import UsageError
from .models import Model, build_model

COMMANDS = ("gamma", "constants", "identity-check", "simulate", "tail", "tail-fit", "poisson")
MODEL_KEYS = {"kind": str, "p": float, "a_up": float, "a_down": float, "mu": float, "sigma": float,
              "c": float, "rho": float, "nu": float}
KIND_PARAMS = {
    "twopoint": ("p", "a_up", "a_down"),
    "gaussian": ("mu", "sigma"),
    "cpd": ("c", "rho", "nu"),
    "brownian": ("mu", "sigma"),
}


def _bool(text: str) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_grid(text: str | list) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


@dataclass
class RunConfig:
    command: str
    model: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    budget: int = 10**6
    horizon: float | None = None
    replications: int = 2000
    batches: int = 10
    y: float | None = None
    lam: float | None = None
    x_grid: list[float] | None = None
    k_max: int = 10
    step_cap: int = 10**7
    out: str | None = None
    format: str = "json"
    reproducible: bool = False

    RUN_KEYS = {"seed": int, "workers": int, "budget": int, "horizon": float, "replications": int,
                "batches": int, "y": float, "lambda": float, "x_grid": parse_grid, "k_max": int,
                "step_cap": int, "out": str, "format": str, "reproducible": _bool}

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, not {self.format!r}")
        if not 0 <= self.seed < 2**64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")

    def build_model(self) -> Model:
        params = dict(self.model)
        kind = params.pop("kind", None)
        if kind is None:
            raise UsageError("no model kind given (--model or [model] kind)")
        if kind not in KIND_PARAMS:
            raise UsageError(f"unknown model kind {kind!r}")
        extra = set(params) - set(KIND_PARAMS[kind])
        if extra:
            raise UsageError(f"parameters {sorted(extra)} do not apply to {kind}")
        if kind == "brownian" and "mu" in params:
            params["mu_abs"] = params.pop("mu")
        return build_model(kind, **params)

    def resolved(self) -> dict:
        """Logical configuration echoed in reports (execution-only keys omitted)."""
        skip = {"workers", "out", "reproducible", "lam"}
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}
        d["lambda"] = self.lam
        return d


def _convert(key: str, raw, table: dict):
    try:
        return table[key](raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {key}: {raw!r} ({exc})") from None


def read_config_file(path: str | Path) -> tuple[dict, dict]:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    unknown = set(parser.sections()) - {"model", "run"}
    if unknown:
        raise UsageError(f"unknown config sections {sorted(unknown)}")
    model, run = {}, {}
    for section, table, dest in (("model", MODEL_KEYS, model), ("run", RunConfig.RUN_KEYS, run)):
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in table:
                raise UsageError(f"unknown key {key!r} in [{section}]")
            dest[key] = _convert(key, raw, table)
    return model, run


def make_config(command: str, file_model: dict, file_run: dict, flag_model: dict, flag_run: dict) -> RunConfig:
    model = {**file_model, **{k: v for k, v in flag_model.items() if v is not None}}
    run = {**file_run, **{k: v for k, v in flag_run.items() if v is not None}}
    if "lambda" in run:
        run["lam"] = run.pop("lambda")
    return RunConfig(command=command, model=model, **run)
