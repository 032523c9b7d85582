"""Experiment configuration: JSON in, fully resolved JSON echoed to the output directory."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .. import __version__
from ..dynamics import ConsensusGains
from ..errors import ValidationError
from ..generators import FamilySpec

EXPERIMENTS = ("sweep", "formation", "third-order")

# Per-experiment defaults. Disturbance magnitudes are not given in the source
# experiments; these are the documented choices and can be overridden.
DEFAULTS: dict[str, dict[str, Any]] = {
    "sweep": {
        "family": {"kind": "random_regular", "params": {"k": 4}, "seed": 0, "weight": 1.0},
        "sizes": [64, 121, 256, 529, 1024],
        "seeds": [0, 1, 2, 3, 4],
        "gains": None,
        "leader": 0,
        "disturbance": {},
        "settings": {},
    },
    "formation": {
        "family": {"kind": "random_regular", "params": {"k": 4}, "seed": 0, "weight": 1.0},
        "sizes": [20, 100],
        "seeds": [0],
        "gains": [1.0, 2.0],
        "leader": 0,
        "disturbance": {"node": 1, "order": 1, "value": -1.0, "time": 1.0},
        "settings": {"dt": 0.01, "horizon": 400.0, "band": 0.02, "record_every": 10,
                     "plot_window": 60.0, "plot_every": 5, "v_star": 25.0, "spacing": 10.0},
    },
    "third-order": {
        "family": {"kind": "random_regular", "params": {"k": 4}, "seed": 0, "weight": 1.0},
        "sizes": [60],
        "seeds": [0],
        "gains": [0.1, 1.0, 1.0],
        "leader": 0,
        "disturbance": {"node": 9, "order": 2, "value": 0.1, "time": 1.0,
                        "ground_time": 30.0, "repeat_time": 31.0},
        "settings": {"dt": 0.01, "horizon": 60.0, "record_every": 10, "max_resample": 100},
    },
}


@dataclass
class ExperimentConfig:
    name: str
    family: FamilySpec
    sizes: list[int]
    seeds: list[int]
    gains: ConsensusGains | None = None
    leader: int | None = 0
    disturbance: dict[str, Any] = field(default_factory=dict)
    settings: dict[str, Any] = field(default_factory=dict)
    output_dir: str = "."

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.name not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.name!r}; expected one of {EXPERIMENTS}")
        if not self.sizes or any(int(n) < 2 for n in self.sizes):
            raise ValidationError("sizes must be a non-empty list of integers >= 2")
        if not self.seeds or any(not 0 <= int(s) < 2**64 for s in self.seeds):
            raise ValidationError("seeds must be a non-empty list of 64-bit unsigned integers")
        if self.leader is not None and (self.leader < 0 or self.leader >= min(self.sizes)):
            raise ValidationError(f"leader {self.leader} is not a node of every size")
        if self.name == "formation":
            if self.gains is None or self.gains.order != 2:
                raise ValidationError("formation demo needs second-order gains")
            if self.leader is None:
                raise ValidationError("formation demo compares against a grounded run; set a leader")
            if self.disturbance.get("node") == self.leader:
                raise ValidationError("the disturbed vehicle must not be the leader")
        if self.name == "third-order":
            if self.gains is None or self.gains.order != 3:
                raise ValidationError("third-order demo needs three gains")
            if self.leader is None:
                raise ValidationError("third-order demo grounds a node; set a leader")
        if self.name == "sweep" and self.family.kind != "random_regular":
            raise ValidationError("scaling sweep compares random regular graphs against lattices")

    def setting(self, key: str):
        return self.settings.get(key, DEFAULTS[self.name]["settings"].get(key))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "family": self.family.to_dict(),
            "sizes": [int(n) for n in self.sizes],
            "seeds": [int(s) for s in self.seeds],
            "gains": None if self.gains is None else list(self.gains.a),
            "leader": self.leader,
            "disturbance": dict(sorted(self.disturbance.items())),
            "settings": dict(sorted(self.settings.items())),
            "output_dir": str(self.output_dir),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        name = d.get("name")
        if name not in DEFAULTS:
            raise ValidationError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
        base = DEFAULTS[name]
        unknown = set(d) - {"name", "output_dir", "software_version", *base}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        gains = d.get("gains", base["gains"])
        return cls(
            name=name,
            family=FamilySpec.from_dict(d.get("family", base["family"])),
            sizes=[int(n) for n in d.get("sizes", base["sizes"])],
            seeds=[int(s) for s in d.get("seeds", base["seeds"])],
            gains=None if gains is None else ConsensusGains(tuple(gains)),
            leader=d.get("leader", base["leader"]),
            disturbance={**base["disturbance"], **d.get("disturbance", {})},
            settings={**base["settings"], **d.get("settings", {})},
            output_dir=d.get("output_dir", "."),
        )


def default_config(name: str, **overrides) -> ExperimentConfig:
    return ExperimentConfig.from_dict({"name": name, **overrides})


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return ExperimentConfig.from_dict(data)


def save_config(cfg: ExperimentConfig, out_dir: str | os.PathLike) -> Path:
    """Write the resolved config (with the software version) as ``config.json``."""
    path = Path(out_dir) / "config.json"
    data = {**cfg.to_dict(), "software_version": __version__}
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path
