"""Non-policy constraint parameters and their population distributions.

Each episode draws a population spec (a mean and std for each of the four
parameters) and then individual values for the two agents from it. The
eight population numbers form the vector that the fitting stage optimises.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PARAM_NAMES = ("nu_ped", "nu_veh", "w_ped", "w_veh")

# (mean range, std range) per parameter
RANGES: dict[str, tuple[tuple[float, float], tuple[float, float]]] = {
    "nu_ped": ((0.01, 0.1), (0.001, 0.01)),
    "nu_veh": ((0.01, 0.1), (0.001, 0.01)),
    "w_ped": ((0.05, 0.5), (0.005, 0.05)),
    "w_veh": ((1.0, 10.0), (0.1, 1.0)),
}

PHI_NAMES = (
    "mu_nu_ped", "sigma_nu_ped",
    "mu_nu_veh", "sigma_nu_veh",
    "mu_w_ped", "sigma_w_ped",
    "mu_w_veh", "sigma_w_veh",
)

PHI_BOUNDS = np.array(
    [bound for name in PARAM_NAMES for bound in RANGES[name]],
    dtype=float,
)

TRUNCATION_TRIES = 100


@dataclass(frozen=True)
class NonPolicyParams:
    nu_ped: float
    nu_veh: float
    w_ped: float
    w_veh: float

    def __post_init__(self) -> None:
        for name in PARAM_NAMES:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def ped_own(self) -> tuple[float, float]:
        return self.nu_ped, self.w_ped

    def veh_own(self) -> tuple[float, float]:
        return self.nu_veh, self.w_veh


@dataclass(frozen=True)
class PopulationSpec:
    mu_nu_ped: float
    sigma_nu_ped: float
    mu_nu_veh: float
    sigma_nu_veh: float
    mu_w_ped: float
    sigma_w_ped: float
    mu_w_veh: float
    sigma_w_veh: float

    def __post_init__(self) -> None:
        for name in PHI_NAMES:
            if name.startswith("sigma") and getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_phi(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PHI_NAMES], dtype=float)

    @classmethod
    def from_phi(cls, phi: Sequence[float]) -> "PopulationSpec":
        phi = np.asarray(phi, dtype=float).reshape(-1)
        if phi.shape != (8,):
            raise ValueError(f"phi must have 8 elements, got {phi.shape}")
        return cls(**{n: float(v) for n, v in zip(PHI_NAMES, phi)})

    def ped_stats(self) -> tuple[float, float, float, float]:
        """Population (mu, sigma) of the pedestrian's nu and w."""
        return self.mu_nu_ped, self.sigma_nu_ped, self.mu_w_ped, self.sigma_w_ped

    def veh_stats(self) -> tuple[float, float, float, float]:
        return self.mu_nu_veh, self.sigma_nu_veh, self.mu_w_veh, self.sigma_w_veh

    @classmethod
    def midpoint(cls) -> "PopulationSpec":
        return cls.from_phi(PHI_BOUNDS.mean(axis=1))


def sample_population_spec(rng: np.random.Generator) -> PopulationSpec:
    return PopulationSpec.from_phi(rng.uniform(PHI_BOUNDS[:, 0], PHI_BOUNDS[:, 1]))


def _truncated_normal(mu: float, sigma: float, rng: np.random.Generator) -> float:
    if sigma <= 0:
        return max(mu, 0.0)
    for _ in range(TRUNCATION_TRIES):
        value = rng.normal(mu, sigma)
        if value >= 0:
            return float(value)
    return max(mu, 0.0)


def sample_agent_params(spec: PopulationSpec, rng: np.random.Generator) -> NonPolicyParams:
    values = {}
    for name in PARAM_NAMES:
        values[name] = _truncated_normal(getattr(spec, f"mu_{name}"), getattr(spec, f"sigma_{name}"), rng)
    values["w_veh"] = max(values["w_veh"], 1.0)
    return NonPolicyParams(**values)


def clamp_phi(phi: Sequence[float]) -> np.ndarray:
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.shape != (8,):
        raise ValueError(f"phi must have 8 elements, got {phi.shape}")
    return np.clip(phi, PHI_BOUNDS[:, 0], PHI_BOUNDS[:, 1])


def phi_to_unit(phi: Sequence[float]) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return (phi - PHI_BOUNDS[:, 0]) / (PHI_BOUNDS[:, 1] - PHI_BOUNDS[:, 0])


def unit_to_phi(u: Sequence[float]) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return PHI_BOUNDS[:, 0] + u * (PHI_BOUNDS[:, 1] - PHI_BOUNDS[:, 0])
