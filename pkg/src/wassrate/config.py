"""Experiment configuration files, measure files and distribution specs.

Config files are INI text::

    [space]
    spec = discrete(16, 1)

    [distribution]
    spec = uniform

    [experiment]
    r = 1
    n_grid = 2^4..2^12
    trials = 200
    seed = 0
    output = results/example1.csv

    [bound.thm1]
    mode = limit

    [bound.thm3]
    mode = exact
"""

from __future__ import annotations

import configparser
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import errors
from .metric import DiscreteMeasure, FiniteMetricSpace, point_mass, space_from_spec, uniform

#: Distribution specs that bypass finite spaces (exact closed-form risk on [0, 1]).
CONTINUOUS_UNIFORM = "continuous-uniform"


@dataclass
class ExperimentConfig:
    space_spec: str
    distribution_spec: str = "uniform"
    r: float = 1.0
    n_grid: List[int] = field(default_factory=lambda: [2**k for k in range(4, 13)])
    trials: int = 100
    seed: int = 0
    bound_specs: List[Dict[str, str]] = field(default_factory=list)
    output_path: Optional[str] = None

    def __post_init__(self):
        self.n_grid = [int(n) for n in self.n_grid]
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise errors.ConfigError("n_grid must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise errors.ConfigError("n_grid must be strictly increasing")
        if int(self.trials) != self.trials or self.trials < 1:
            raise errors.ConfigError("trials must be a positive integer")
        self.trials = int(self.trials)
        self.r = float(self.r)
        if not self.r >= 1:
            raise errors.ConfigError("r must be >= 1")
        self.seed = int(self.seed)

    @property
    def continuous(self) -> bool:
        return self.distribution_spec.strip() == CONTINUOUS_UNIFORM

    def to_dict(self) -> dict:
        return asdict(self)


def parse_int_list(text: str) -> List[int]:
    """``"16, 32, 64"`` or a doubling range ``"2^4..2^12"``."""
    text = text.strip()
    m = re.fullmatch(r"2\^(\d+)\s*\.\.\s*2\^(\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return [2**k for k in range(lo, hi + 1)]
    try:
        return [int(float(t)) for t in re.split(r"[,\s]+", text) if t]
    except ValueError as exc:
        raise errors.ConfigError(f"cannot parse integer list {text!r}") from exc


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(t) for t in re.split(r"[,\s]+", text.strip()) if t]
    except ValueError as exc:
        raise errors.ConfigError(f"cannot parse number list {text!r}") from exc


def read_ini(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    path = Path(path)
    if not path.exists():
        raise errors.ConfigError(f"config file not found: {path}")
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise errors.ConfigError(f"malformed config {path}: {exc}") from exc
    return cp


def config_from_parser(cp: configparser.ConfigParser) -> ExperimentConfig:
    if not cp.has_option("space", "spec"):
        raise errors.ConfigError("missing [space] spec")
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    kwargs = {
        "space_spec": cp.get("space", "spec"),
        "distribution_spec": cp.get("distribution", "spec", fallback="uniform"),
    }
    try:
        if "r" in exp:
            kwargs["r"] = float(exp["r"])
        if "n_grid" in exp:
            kwargs["n_grid"] = parse_int_list(exp["n_grid"])
        if "trials" in exp:
            kwargs["trials"] = int(exp["trials"])
        if "seed" in exp:
            kwargs["seed"] = int(exp["seed"])
    except ValueError as exc:
        raise errors.ConfigError(f"bad [experiment] value: {exc}") from exc
    if "output" in exp:
        kwargs["output_path"] = exp["output"]
    bounds = []
    for name in cp.sections():
        if name.startswith("bound."):
            block = dict(cp[name])
            block["kind"] = name.split(".", 1)[1]
            bounds.append(block)
    kwargs["bound_specs"] = bounds
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    return config_from_parser(read_ini(path))


# --------------------------------------------------------------------------
# measures


_DIST_RE = re.compile(r"^\s*([a-z-]+)\s*(?:\(\s*([^)]*)\))?\s*$")


def measure_from_spec(spec: str, space: FiniteMetricSpace, n: Optional[int] = None) -> DiscreteMeasure:
    """``uniform``, ``point-mass(i)``, ``weights(w0, w1, ...)``, ``hard-instance(k)`` or a file path.

    ``hard-instance(k)`` is the first member of the hard family for sample
    size ``n`` on a k-point space.
    """
    m = _DIST_RE.match(spec)
    if m is None or Path(spec).exists():
        return load_measure(spec, space)
    name, arg = m.group(1), (m.group(2) or "").strip()
    if name == "uniform":
        return uniform(space)
    if name == "point-mass":
        return point_mass(space, int(arg or 0))
    if name == "weights":
        return DiscreteMeasure(space, parse_float_list(arg))
    if name == "hard-instance":
        from .bounds import hard_instance_family

        k = int(arg) if arg else space.size
        if k != space.size:
            raise errors.ConfigError(f"hard-instance({k}) needs a {k}-point space, got {space.size}")
        if n is None:
            raise errors.ConfigError("hard-instance needs a sample size")
        return DiscreteMeasure(space, hard_instance_family(k, n).members[0])
    raise errors.ConfigError(f"unknown distribution spec {spec!r}")


def load_measure(path, space: FiniteMetricSpace) -> DiscreteMeasure:
    """Text file of ``index weight`` lines; unlisted points get weight 0."""
    path = Path(path)
    if not path.exists():
        raise errors.ConfigError(f"measure file not found: {path}")
    w = np.zeros(space.size)
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise errors.InvalidMeasure(f"{path}:{lineno}: expected 'index weight'")
        try:
            i, val = int(parts[0]), float(parts[1])
        except ValueError as exc:
            raise errors.InvalidMeasure(f"{path}:{lineno}: {exc}") from exc
        if not 0 <= i < space.size:
            raise errors.InvalidMeasure(f"{path}:{lineno}: index {i} outside the space")
        w[i] += val
    return DiscreteMeasure(space, w)


def save_measure(P: DiscreteMeasure, path) -> None:
    lines = [f"{i} {P.weights[i]!r}" for i in P.support]
    Path(path).write_text("\n".join(lines) + "\n")


def space_for(config: ExperimentConfig) -> Optional[FiniteMetricSpace]:
    if config.continuous:
        return None
    return space_from_spec(config.space_spec)


def parse_index_list(text: str) -> List[int]:
    return parse_int_list(text)


def overrides_from_pairs(pairs: Sequence[str]) -> Dict[str, str]:
    out = {}
    for p in pairs:
        if "=" not in p:
            raise errors.ConfigError(f"override {p!r} is not key=value")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out
