"""Experiment configuration: flat INI sections, ``section.key`` overrides."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from ..designs import make_design
from ..procpipe import CHANNEL_SOURCE_NAMES
from ..sources import SOURCE_NAMES

MODES = ("state", "process", "verify-designs", "bound")
DESIGN_FAMILIES = ("mub", "sic", "pauli")
FROM_THEOREM = "from-theorem"

# Keys understood in [source]; everything listed here is parsed as a number
# except ``state``.
SOURCE_KEYS = {
    "state": str,
    "omega": float,
    "theta0": float,
    "step": float,
    "window": int,
    "strength": float,
    "p0": float,
    "p_start": float,
    "p_end": float,
    "horizon": int,
    "gain": float,
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


@dataclass
class ExperimentConfig:
    mode: str = "state"
    family: str = "mub"
    size: int = 2
    output_family: str | None = None
    output_size: int | None = None
    strategy: str = "iid"
    source_params: dict = field(default_factory=dict)
    rounds: int | None = None
    r: int = 1
    eps: float = 0.2
    delta: float = 0.05
    tau: float | None = None
    trials: int = 1
    seed: int = 0
    workers: int = 1
    out: str | None = None
    choi_tol: float = 1e-9

    @property
    def rounds_from_theorem(self) -> bool:
        return self.rounds is None

    def flat(self) -> dict[str, str]:
        """Every setting as ``section.key -> text``; embedded verbatim in summaries."""
        items = {
            "experiment.mode": self.mode,
            "experiment.trials": str(self.trials),
            "experiment.seed": str(self.seed),
            "design.family": self.family,
            "design.size": str(self.size),
            "design.output_family": self.output_family or self.family,
            "design.output_size": str(self.output_size if self.output_size is not None else self.size),
            "source.strategy": self.strategy,
            "rounds.N": FROM_THEOREM if self.rounds is None else str(self.rounds),
            "rounds.r": str(self.r),
            "rounds.eps": repr(self.eps),
            "rounds.delta": repr(self.delta),
            "rounds.tau": "default" if self.tau is None else repr(self.tau),
            "tolerance.choi": repr(self.choi_tol),
        }
        for key in sorted(self.source_params):
            val = self.source_params[key]
            items[f"source.{key}"] = repr(val) if isinstance(val, float) else str(val)
        return items


def _parse_number(kind, text: str, name: str, problems: list[str]):
    try:
        return kind(text)
    except (TypeError, ValueError):
        problems.append(f"{name}: expected {kind.__name__}, got {text!r}")
        return None


def parse_overrides(items: Iterable[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError([f"override {item!r} must look like section.key=value"])
        out[key.strip()] = value.strip()
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    return {f"{sec}.{key}": val for sec in parser.sections() for key, val in parser.items(sec)}


def config_from_flat(flat: Mapping[str, str]) -> ExperimentConfig:
    """Validate a ``section.key -> text`` mapping; all problems are reported together."""
    problems: list[str] = []
    cfg = ExperimentConfig()
    known = set()

    def get(key, kind=str, attr=None):
        known.add(key)
        if key not in flat:
            return
        val = _parse_number(kind, flat[key], key, problems) if kind is not str else flat[key].strip()
        if val is not None:
            setattr(cfg, attr or key.split(".")[1], val)

    get("experiment.mode")
    get("experiment.trials", int)
    get("experiment.seed", int)
    get("experiment.workers", int)
    get("experiment.out")
    get("design.family")
    get("design.size", int)
    get("design.output_family", str, "output_family")
    get("design.output_size", int, "output_size")
    get("source.strategy")
    get("rounds.r", int)
    get("rounds.eps", float)
    get("rounds.delta", float)
    get("rounds.tau", float)
    get("tolerance.choi", float, "choi_tol")
    known.add("rounds.N")
    n_text = flat.get("rounds.N", FROM_THEOREM).strip()
    if n_text != FROM_THEOREM:
        cfg.rounds = _parse_number(int, n_text, "rounds.N", problems)

    for key, text in flat.items():
        section, _, name = key.partition(".")
        if section == "source" and name != "strategy":
            kind = SOURCE_KEYS.get(name)
            if kind is None:
                problems.append(f"{key}: unknown source parameter")
                continue
            val = _parse_number(kind, text, key, problems) if kind is not str else text.strip()
            if val is not None:
                cfg.source_params[name] = val
        elif key not in known:
            problems.append(f"{key}: unknown setting")

    problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg: ExperimentConfig) -> list[str]:
    problems = []
    if cfg.mode not in MODES:
        problems.append(f"experiment.mode: must be one of {MODES}, got {cfg.mode!r}")
    if cfg.trials is None or cfg.trials < 1:
        problems.append("experiment.trials: must be >= 1")
    if cfg.seed is None or not 0 <= cfg.seed < 2**64:
        problems.append("experiment.seed: must be an unsigned 64-bit integer")
    if cfg.workers is None or cfg.workers < 1:
        problems.append("experiment.workers: must be >= 1")
    if cfg.rounds is not None and cfg.rounds < 1:
        problems.append("rounds.N: must be >= 1 or 'from-theorem'")
    if not cfg.eps or cfg.eps <= 0:
        problems.append("rounds.eps: must be positive")
    if cfg.delta is None or not 0 < cfg.delta < 1:
        problems.append("rounds.delta: must lie in (0, 1)")
    if cfg.tau is not None and cfg.tau <= 0:
        problems.append("rounds.tau: must be positive")
    for fam_key, fam, size in (
        ("design.family", cfg.family, cfg.size),
        ("design.output_family", cfg.output_family or cfg.family, cfg.output_size or cfg.size),
    ):
        if fam not in DESIGN_FAMILIES:
            problems.append(f"{fam_key}: must be one of {DESIGN_FAMILIES}, got {fam!r}")
            continue
        try:
            make_design(fam, size)
        except ValueError as exc:
            problems.append(f"{fam_key}: {exc}")
    if cfg.mode in ("state", "process") and not problems:
        dim = make_design(cfg.family, cfg.size).dim
        if cfg.mode == "state":
            if cfg.strategy not in SOURCE_NAMES:
                problems.append(f"source.strategy: must be one of {SOURCE_NAMES}, got {cfg.strategy!r}")
            if not 1 <= cfg.r <= dim:
                problems.append(f"rounds.r: must satisfy 1 <= r <= {dim}")
        else:
            if cfg.strategy not in CHANNEL_SOURCE_NAMES:
                problems.append(f"source.strategy: must be one of {CHANNEL_SOURCE_NAMES}, got {cfg.strategy!r}")
            out_dim = make_design(cfg.output_family or cfg.family, cfg.output_size or cfg.size).dim
            if out_dim != dim:
                problems.append("design.output_size: output design dimension must equal the input one")
            if dim not in (2, 4):
                problems.append("design.size: process mode supports d in {2, 4}")
    return problems


def load_config(path: str | Path | None = None, overrides: Iterable[str] = (), **cli) -> ExperimentConfig:
    """Config file, then ``--override`` items, then explicit CLI flags (``seed``, ``trials``, ``out``, ``workers``)."""
    flat = read_config_file(path) if path else {}
    flat.update(parse_overrides(overrides))
    for key, section in (("seed", "experiment"), ("trials", "experiment"), ("out", "experiment"), ("workers", "experiment")):
        if cli.get(key) is not None:
            flat[f"{section}.{key}"] = str(cli[key])
    if cli.get("mode"):
        flat["experiment.mode"] = cli["mode"]
    return config_from_flat(flat)
