"""Plain-text run configs.

INI-style sections::

    [system]
    type = toral                 # toral | finite | translation | shift
    matrices = 2,1,1,1; 5,3,3,2  # row-major 2x2 integer matrices
    metric = eigen               # eigen | standard

    [run]
    k = 1,2,3,4
    mode = quadrant
    eps = 0.1, 0.05, 0.02, 0.01, 0.005
    n_min = 3
    n_max = 7
    scheme = expanding
    samples = 200000
    seed = 0
    quantity = sep-lower

Finite systems give ``points``, ``generators`` (1-based cycle notation, one
entry per generator separated by ``;``) and ``metric_table`` (a CSV file
relative to the config).  Translations give ``alphas`` as ``x,y`` pairs;
shifts give ``q`` and ``window``.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .entropy import DEFAULT_EPS, DEFAULT_N_RANGE, QUANTITIES
from .lattice import IndexSetMode
from .systems import (SCHEMES, SampleConfig, ShiftSystem, System, TranslationSystem, ValidationError,
                      make_finite, make_toral, parse_cycles)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    system: dict[str, str]
    k: list[int] | None = None
    mode: str = "quadrant"
    eps: list[float] = field(default_factory=lambda: list(DEFAULT_EPS))
    n_min: int = DEFAULT_N_RANGE[0]
    n_max: int = DEFAULT_N_RANGE[1]
    scheme: str | None = None
    samples: int | None = None
    seed: int = 0
    quantity: str = "sep-lower"
    out: str | None = None
    base_dir: str = "."

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("base_dir")
        # hash the sidecar table's bytes, not just its name
        table = self.system.get("metric_table")
        if table:
            p = Path(self.base_dir) / table.strip()
            if p.exists():
                d["metric_table_sha256"] = hashlib.sha256(p.read_bytes()).hexdigest()
        return d

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def sample_config(self, S: System) -> SampleConfig:
        from .systems import ToralSystem
        toral = isinstance(S, ToralSystem)
        scheme = self.scheme or ("expanding" if toral else "grid")
        count = self.samples or (200_000 if toral else 441)
        return SampleConfig(scheme, count, self.seed)


def _ints(field_name: str, text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise ConfigError(field_name, f"expected integers, got {text!r}") from None


def _floats(field_name: str, text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(field_name, f"expected numbers, got {text!r}") from None


def parse_matrices(text: str, field_name: str = "system.matrices") -> list[list[int]]:
    mats = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        vals = _ints(field_name, chunk)
        if len(vals) != 4:
            raise ConfigError(field_name, f"each matrix needs 4 integers, got {chunk.strip()!r}")
        mats.append(vals)
    if not mats:
        raise ConfigError(field_name, "no matrices given")
    return mats


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(path.read_text())
    except configparser.Error as exc:
        raise ConfigError("config", str(exc)) from None
    if not cp.has_section("system"):
        raise ConfigError("system", "missing [system] section")
    run = cp["run"] if cp.has_section("run") else {}
    cfg = RunConfig(system=dict(cp["system"]), base_dir=str(path.parent))
    if "k" in run:
        cfg.k = _ints("run.k", run["k"])
    if "mode" in run:
        cfg.mode = run["mode"].strip()
    if "eps" in run:
        cfg.eps = _floats("run.eps", run["eps"])
    for key in ("n_min", "n_max", "samples", "seed"):
        if key in run:
            (v,) = _ints(f"run.{key}", run[key]) or [None]
            setattr(cfg, key, v)
    if "scheme" in run:
        cfg.scheme = run["scheme"].strip()
    if "quantity" in run:
        cfg.quantity = run["quantity"].strip()
    if "out" in run:
        cfg.out = run["out"].strip()
    return cfg


def validate(cfg: RunConfig, S: System) -> None:
    try:
        IndexSetMode(cfg.mode)
    except ValueError:
        raise ConfigError("run.mode", f"expected strict or quadrant, got {cfg.mode!r}") from None
    if cfg.k is not None:
        bad = [k for k in cfg.k if not 1 <= k <= 2**S.d]
        if bad:
            raise ConfigError("run.k", f"values {bad} outside 1..{2**S.d}")
    if not cfg.eps or any(e <= 0 for e in cfg.eps) or any(b >= a for a, b in zip(cfg.eps, cfg.eps[1:])):
        raise ConfigError("run.eps", f"schedule must be positive and strictly decreasing, got {cfg.eps}")
    if cfg.n_min < 1 or cfg.n_max - cfg.n_min < 2:
        raise ConfigError("run.n_min/n_max", f"need n_min >= 1 and at least 3 values, got {cfg.n_min}..{cfg.n_max}")
    if cfg.scheme is not None and cfg.scheme not in SCHEMES:
        raise ConfigError("run.scheme", f"expected one of {SCHEMES}, got {cfg.scheme!r}")
    if cfg.samples is not None and cfg.samples < 1:
        raise ConfigError("run.samples", "must be >= 1")
    if cfg.quantity not in QUANTITIES:
        raise ConfigError("run.quantity", f"expected one of {QUANTITIES}, got {cfg.quantity!r}")


def _read_table(path: Path) -> np.ndarray:
    if not path.exists():
        raise ConfigError("system.metric_table", f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    try:
        return np.array([[float(v) for v in r] for r in rows])
    except ValueError:
        raise ConfigError("system.metric_table", f"non-numeric entry in {path}") from None


def build_system(cfg: RunConfig) -> System:
    sysd = cfg.system
    kind = sysd.get("type", "").strip()
    try:
        if kind == "toral":
            mats = parse_matrices(sysd.get("matrices", ""))
            return make_toral(mats, sysd.get("metric", "eigen").strip())
        if kind == "finite":
            if "points" not in sysd:
                raise ConfigError("system.points", "missing")
            (N,) = _ints("system.points", sysd["points"])
            gens_text = sysd.get("generators")
            if not gens_text:
                raise ConfigError("system.generators", "missing")
            try:
                gens = [parse_cycles(g, N) for g in gens_text.split(";")]
            except ValidationError as exc:
                raise ConfigError("system.generators", str(exc)) from None
            if "metric_table" not in sysd:
                raise ConfigError("system.metric_table", "missing")
            table = _read_table(Path(cfg.base_dir) / sysd["metric_table"].strip())
            return make_finite(N, gens, table)
        if kind == "translation":
            pairs = [_floats("system.alphas", c) for c in sysd.get("alphas", "").split(";") if c.strip()]
            if not pairs or any(len(p) != 2 for p in pairs):
                raise ConfigError("system.alphas", "expected ';'-separated x,y pairs")
            return TranslationSystem(pairs)
        if kind == "shift":
            (q,) = _ints("system.q", sysd.get("q", "2"))
            (W,) = _ints("system.window", sysd.get("window", "8"))
            return ShiftSystem(q, W)
    except ValidationError as exc:
        raise ConfigError(f"system ({kind})", str(exc)) from None
    raise ConfigError("system.type", f"expected toral, finite, translation or shift, got {kind!r}")
