"""Experiment configuration: dataclass plus YAML loading and sweep parsing."""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .ambiguity import parse_ambiguity
from .measure import Marginal, PowerMarginal, TabulatedMarginal, UNIFORM

EXPERIMENTS = ("rank", "fig6", "fig7", "contest", "seeking")


class ConfigError(ValueError):
    pass


def parse_marginal(text) -> Marginal:
    """``uniform``, ``power:<alpha>`` / ``power(<alpha>)`` (F(z) = z^alpha), or
    ``tabulated:<csv path>`` with rows of (theta, F(theta))."""
    if isinstance(text, Marginal):
        return text
    s = str(text).strip()
    low = s.lower()
    if low == "uniform":
        return UNIFORM
    m = re.fullmatch(r"power\s*(?::\s*(.+)|\((.+)\))", low)
    if m:
        try:
            return PowerMarginal(float(m.group(1) or m.group(2)))
        except ValueError as exc:
            raise ConfigError(f"bad marginal {text!r}: {exc}") from None
    if low.startswith("tabulated:"):
        path = s.split(":", 1)[1]
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2)
            return TabulatedMarginal(data[:, 0], data[:, 1], name=f"tabulated({Path(path).name})")
        except (OSError, ValueError, IndexError) as exc:
            raise ConfigError(f"bad tabulated marginal {path!r}: {exc}") from None
    raise ConfigError(f"unknown marginal {text!r}; use 'uniform', 'power:<alpha>' or 'tabulated:<csv>'")


def parse_sweep(spec) -> list[float]:
    """A list of numbers, or ``log:<lo>:<hi>:<num>`` / ``lin:<lo>:<hi>:<num>``,
    optionally prefixed with ``0+`` to prepend a zero."""
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, str):
        s = spec.strip().lower()
        zero = s.startswith("0+")
        if zero:
            s = s[2:]
        kind, *args = s.split(":")
        try:
            lo, hi, num = float(args[0]), float(args[1]), int(args[2])
        except (IndexError, ValueError):
            raise ConfigError(f"bad sweep {spec!r}") from None
        if kind == "log":
            if lo <= 0:
                raise ConfigError("log sweeps need a positive lower end")
            vals = np.geomspace(lo, hi, num)
        elif kind == "lin":
            vals = np.linspace(lo, hi, num)
        else:
            raise ConfigError(f"bad sweep kind {kind!r} in {spec!r}")
        out = [float(v) for v in vals]
        return ([0.0] + out) if zero else out
    try:
        return [float(v) for v in spec]
    except (TypeError, ValueError):
        raise ConfigError(f"bad sweep {spec!r}") from None


DEFAULTS = {
    "rank": dict(etas=[0.0, 0.05, 0.2, 0.5], auctions=["fpa", "spa", "apa", "war"]),
    "fig6": dict(etas="0+log:1e-3:1:21", marginals=["power:1", "power:1.5"],
                 auctions=["spa", "apa"]),
    "fig7": dict(etas="lin:0:1:15", zetas="lin:0:0.9:15", auctions=["fpa-affiliated", "spa"]),
    "contest": dict(etas=[0.2], kappas=[0.0, 0.25, 0.5, 0.75, 1.0], auctions=["fpa", "apa"]),
    "seeking": dict(etas=[0.0, 0.05, 0.2, 0.5], auctions=["fpa", "spa", "apa", "war"]),
}


@dataclass
class ExperimentConfig:
    experiment: str = "rank"
    marginal: str = "uniform"
    marginals: list = field(default_factory=list)
    n: int = 200
    ambiguity: str = "kl:0.2:joint"
    etas: list = field(default_factory=list)
    zetas: list = field(default_factory=list)
    kappas: list = field(default_factory=list)
    auctions: list = field(default_factory=list)
    out: str = "results"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        for key, val in DEFAULTS[self.experiment].items():
            if not getattr(self, key):
                setattr(self, key, val)
        self.etas = parse_sweep(self.etas)
        self.zetas = parse_sweep(self.zetas) if self.zetas else []
        self.kappas = parse_sweep(self.kappas) if self.kappas else []
        for name in ("etas", "zetas", "kappas"):
            vals = getattr(self, name)
            if name == "etas" and not vals:
                raise ConfigError("the eta sweep is empty")
            if len(vals) > 1 and np.any(np.diff(vals) <= 0):
                raise ConfigError(f"{name} must be strictly increasing, got {vals}")
        if self.experiment == "fig7" and not self.zetas:
            raise ConfigError("fig7 needs a zeta sweep")
        if any(not 0 <= z < 1 for z in self.zetas):
            raise ConfigError("zeta values must lie in [0, 1)")
        if any(not 0 <= k <= 1 for k in self.kappas):
            raise ConfigError("contest fractions must lie in [0, 1]")
        self.n = int(self.n)
        if self.n < 2:
            raise ConfigError("grid size must be at least 2")
        self.workers = max(1, int(self.workers))
        self.seed = int(self.seed)
        try:
            parse_ambiguity(self.ambiguity)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        parse_marginal(self.marginal)
        for m in self.marginals:
            parse_marginal(m)

    @property
    def quantitative(self) -> bool:
        return self.n >= 50

    def as_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        data = self.as_dict()
        data.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**data)


def load_config(path, experiment=None, **overrides) -> ExperimentConfig:
    """Read a YAML mapping of :class:`ExperimentConfig` fields."""
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if experiment is not None:
        data.setdefault("experiment", experiment)
        if data["experiment"] != experiment:
            raise ConfigError(f"config is for {data['experiment']!r}, not {experiment!r}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
