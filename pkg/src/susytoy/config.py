"""Run configuration: constants, region parameters, grids and output paths.

The file format is JSON.  Every key is optional; missing keys take the
defaults below.  Example::

    {"constants": {"C3": 0.1156, "C_q": 1.0, "q": 1.2, "C_alpha": 0.0},
     "region": {"kappa": 1.4142135623730951, "delta": 0.8, "M_rule": "lambda"},
     "grid": {"half_width": 14.0, "spacing": 0.1},
     "output": {"dir": "results"}}
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .clr import BoundConstants
from .geometry import RegionSpec, partition

__all__ = ["Config", "DEFAULTS", "load_config"]

DEFAULTS: dict = {
    "constants": {"C3": 1.0, "C_q": 1.0, "q": 1.2, "C_alpha": 0.0},
    "region": {"kappa": math.sqrt(2.0), "delta": 0.8, "M_rule": "lambda", "M": None},
    "grid": {"half_width": 14.0, "spacing": 0.1},
    "fiber": {"spacing": 0.005, "margin": 0.05, "c": 0.5},
    "workers": 1,
    "output": {"dir": "results"},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in out:
            raise KeyError(f"unknown config key {key!r}")
        if isinstance(out[key], dict) and isinstance(val, dict):
            for k in val:
                if k not in out[key]:
                    raise KeyError(f"unknown config key {key}.{k}")
            out[key].update(val)
        else:
            out[key] = val
    return out


@dataclass
class Config:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @property
    def constants(self) -> BoundConstants:
        c = self.data["constants"]
        return BoundConstants(c["C3"], c["C_q"], c["q"])

    @property
    def C_alpha(self) -> float:
        return float(self.data["constants"]["C_alpha"])

    def region(self, lam: float = 0.0) -> RegionSpec:
        """RegionSpec under the configured M rule.

        ``lambda``: M = (c1 + c2 + lambda)^(2/3), with c1 from the partition
        profile.  ``fixed``: M taken from ``region.M``.
        """
        r = self.data["region"]
        if r["M_rule"] == "fixed":
            if r["M"] is None:
                raise ValueError("M_rule 'fixed' needs region.M")
            return RegionSpec(float(r["M"]), r["kappa"], r["delta"])
        if r["M_rule"] != "lambda":
            raise ValueError(f"unknown M_rule {r['M_rule']!r}")
        c1 = partition(RegionSpec(1.0, r["kappa"], r["delta"])).c1
        return RegionSpec.for_lambda(lam, c1, r["kappa"], r["delta"])

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output"]["dir"])

    def __getitem__(self, key):
        return self.data[key]


def load_config(path: str | Path | None = None) -> Config:
    if path is None:
        return Config()
    return Config(_merge(DEFAULTS, json.loads(Path(path).read_text())))
