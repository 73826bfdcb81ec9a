"""Experiment configuration: one JSON file drives the whole pipeline.

The config gathers every parameter of the protocol (geometry, wavenumber
interval, phantoms, noise, weight exponents, regularization, CG and
forward-solver settings) plus a master seed.  A canonical hash of the
normalized document is embedded in every output container so mismatched
intermediates are caught.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .datapipe import NoiseSpec
from .descent import CGParams
from .errors import ConfigurationError
from .forward import ForwardParams
from .grids import DomainSpec, InclusionSpec, WavenumberGrid

__all__ = ["ExperimentConfig", "load_config"]


@dataclass(frozen=True)
class ScanParams:
    # Step ~0.02 resolves the pi/k oscillation of the incident/scattered
    # interference; coarser sampling aliases the M(a) curve.
    a_min: float = -7.9
    a_max: float = 2.0
    n_samples: int = 496


@dataclass(frozen=True)
class ExperimentConfig:
    domain: DomainSpec = field(default_factory=DomainSpec)
    wavenumbers: WavenumberGrid = field(default_factory=WavenumberGrid)
    inclusions: tuple[InclusionSpec, ...] = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    mu: float = 8.0
    lam: float = 8.0
    alpha: float = 1e-5
    rho: float = 0.0
    cg: CGParams = field(default_factory=CGParams)
    forward: ForwardParams = field(default_factory=ForwardParams)
    propagation_epsilon: float | None = None   # None: use h_z
    scan: ScanParams = field(default_factory=ScanParams)
    flip_vz_sign: bool = False
    output_dir: str = "runs/out"
    seed: int = 0

    def __post_init__(self):
        for inc in self.inclusions:
            inc.validate(self.domain)
        if self.propagation_epsilon is not None and self.propagation_epsilon <= 0.0:
            raise ConfigurationError("propagation epsilon must be positive")

    @property
    def epsilon(self) -> float:
        return self.propagation_epsilon if self.propagation_epsilon is not None else self.domain.hz

    def to_dict(self) -> dict:
        return {
            "domain": {
                "half_width": self.domain.half_width,
                "front_xi": self.domain.front_xi,
                "back_z": self.domain.back_z,
                "meas_z": self.domain.meas_z,
                "nx": self.domain.nx,
                "ny": self.domain.ny,
                "nz": self.domain.nz,
            },
            "wavenumbers": {
                "k_min": self.wavenumbers.k_min,
                "k_max": self.wavenumbers.k_max,
                "nk": self.wavenumbers.nk,
            },
            "inclusions": [
                {"center": list(i.center), "radius": i.radius, "c_max": i.c_max} for i in self.inclusions
            ],
            "noise": {"delta": self.noise.delta, "seed": self.noise.seed},
            "mu": self.mu,
            "lambda": self.lam,
            "alpha": self.alpha,
            "rho": self.rho,
            "cg": {
                "initial_step": self.cg.initial_step,
                "step_floor": self.cg.step_floor,
                "max_iterations": self.cg.max_iterations,
            },
            "forward": {
                "radius_factor": self.forward.radius_factor,
                "cube_n": self.forward.cube_n,
                "tol": self.forward.tol,
                "restart": self.forward.restart,
                "max_matvecs": self.forward.max_matvecs,
            },
            "propagation_epsilon": self.propagation_epsilon,
            "scan": {"a_min": self.scan.a_min, "a_max": self.scan.a_max, "n_samples": self.scan.n_samples},
            "flip_vz_sign": self.flip_vz_sign,
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def config_hash(self) -> str:
        doc = self.to_dict()
        doc.pop("output_dir")  # where results land is not part of the experiment
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        try:
            domain = DomainSpec(**doc.get("domain", {}))
            kgrid = WavenumberGrid(**doc.get("wavenumbers", {}))
            inclusions = tuple(
                InclusionSpec(tuple(i["center"]), i["radius"], i["c_max"]) for i in doc.get("inclusions", [])
            )
            noise_doc = dict(doc.get("noise", {}))
            noise_doc.setdefault("seed", doc.get("seed", 0))
            return ExperimentConfig(
                domain=domain,
                wavenumbers=kgrid,
                inclusions=inclusions,
                noise=NoiseSpec(**noise_doc),
                mu=doc.get("mu", 8.0),
                lam=doc.get("lambda", 8.0),
                alpha=doc.get("alpha", 1e-5),
                rho=doc.get("rho", 0.0),
                cg=CGParams(**doc.get("cg", {})),
                forward=ForwardParams(**doc.get("forward", {})),
                propagation_epsilon=doc.get("propagation_epsilon"),
                scan=ScanParams(**doc.get("scan", {})),
                flip_vz_sign=doc.get("flip_vz_sign", False),
                output_dir=doc.get("output_dir", "runs/out"),
                seed=doc.get("seed", 0),
            )
        except (TypeError, KeyError) as exc:
            raise ConfigurationError(f"malformed config: {exc}") from exc

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
        return ExperimentConfig.from_dict(doc)


def load_config(path: str | Path, seed_override: int | None = None, out_override: str | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(Path(path).read_text())
    if seed_override is not None or out_override is not None:
        doc = cfg.to_dict()
        if seed_override is not None:
            doc["seed"] = seed_override
            doc["noise"]["seed"] = seed_override
        if out_override is not None:
            doc["output_dir"] = out_override
        cfg = ExperimentConfig.from_dict(doc)
    return cfg
