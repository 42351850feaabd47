"""Experiment configuration: a single JSON document drives every run.

A config is fully deterministic: the seed fixes all randomness, and two runs
with the same config produce byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .banks import bank_records
from .errors import ConfigError
from .geometry import ChartDomain


@dataclass
class ExperimentConfig:
    seed: int = 1234
    chart: dict = field(default_factory=lambda: {
        "kind": "flat_torus", "dim": 2,
        "extent": [[0.0, 1.0], [0.0, 1.0]],
        "resolution": [256, 256], "boundary_margin": 0.0,
    })
    refinements: list = field(default_factory=lambda: [128, 256])
    p_values: list = field(default_factory=lambda: [1.0, 2.0])
    budget: int = 96
    norm_trials: int = 64
    diffeos: list = field(default_factory=list)
    scalar_fields: list = field(default_factory=list)
    vector_fields: list = field(default_factory=list)
    operators: list = field(default_factory=list)
    decay: dict = field(default_factory=lambda: {
        "dims": [1, 2], "p_values": [1.0, 2.0], "n_values": [2, 4, 8],
        "resolution": 512,
    })
    vitali: dict = field(default_factory=lambda: {
        "resolution": 512, "bump_center": [0.5, 0.5], "bump_radius": 0.14,
        "region_radius": 0.45, "eps_factor": 0.05, "max_balls": 4000,
    })
    rotation: dict = field(default_factory=lambda: {
        "resolution": 192, "samples": 8, "bins": 24,
    })
    contravariance: dict = field(default_factory=lambda: {
        "pairs": 20, "tolerance": 5e-3,
    })

    def validate(self) -> None:
        if not self.refinements:
            raise ConfigError("refinements must list at least one resolution")
        if any(int(r) < 16 for r in self.refinements):
            raise ConfigError("refinement resolutions below 16 are not useful")
        if not self.operators:
            raise ConfigError("no operators configured")
        for rec in self.operators:
            if "expected" not in rec or rec["expected"] not in ("consistent", "falsified"):
                raise ConfigError(
                    f"operator {rec.get('name', '?')}: expected must be "
                    f"'consistent' or 'falsified'"
                )
        ChartDomain.from_json_dict(self.chart)

    def base_chart(self, resolution=None) -> ChartDomain:
        rec = dict(self.chart)
        if resolution is not None:
            rec["resolution"] = [int(resolution)] * int(rec["dim"])
        return ChartDomain.from_json_dict(rec)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def default_operators() -> list:
    return [
        {"name": "tanh", "kind": "pointwise_scalar", "rho": "tanh",
         "applies_to": "scalar", "expected": "consistent"},
        {"name": "relu", "kind": "pointwise_scalar", "rho": "relu",
         "applies_to": "scalar", "expected": "consistent"},
        {"name": "abs", "kind": "pointwise_scalar", "rho": "abs",
         "applies_to": "scalar", "expected": "consistent"},
        {"name": "blur", "kind": "gaussian_blur", "sigma": 0.05,
         "applies_to": "scalar", "expected": "falsified"},
        {"name": "local_avg", "kind": "local_average", "radius": 0.1,
         "applies_to": "scalar", "expected": "falsified"},
        {"name": "sup", "kind": "sup",
         "applies_to": "scalar", "expected": "consistent"},
        {"name": "lam_neg", "kind": "scalar_multiple", "lam": -1.5,
         "applies_to": "vector", "expected": "consistent"},
        {"name": "lam_zero", "kind": "scalar_multiple", "lam": 0.0,
         "applies_to": "vector", "expected": "consistent"},
        {"name": "lam_two", "kind": "scalar_multiple", "lam": 2.0,
         "applies_to": "vector", "expected": "consistent"},
        {"name": "gain_tanh", "kind": "vector_gain", "rho": "tanh",
         "applies_to": "vector", "expected": "falsified"},
        {"name": "vec_blur", "kind": "gaussian_blur", "sigma": 0.05,
         "applies_to": "vector", "expected": "falsified"},
    ]


def default_config() -> ExperimentConfig:
    records = bank_records()
    cfg = ExperimentConfig(
        diffeos=records["diffeos"],
        scalar_fields=records["scalar_fields"],
        vector_fields=records["vector_fields"],
        operators=default_operators(),
    )
    cfg.validate()
    return cfg
