"""Neo-Hookean constitutive model and material parameter handling.

Stress is measured as first Piola-Kirchhoff (conjugate to the deformation
gradient F). ``energy_density`` is the matching strain energy; the two are
kept analytically consistent so finite differences of one can validate the
other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvertedElementError, ParameterError


def lame_from_young_poisson(young_modulus: float, poisson_ratio: float) -> tuple[float, float]:
    """Convert Young's modulus / Poisson ratio into the Lame pair (mu, lambda)."""
    if young_modulus <= 0.0:
        raise ParameterError(f"Young's modulus must be positive, got {young_modulus}")
    if not 0.0 <= poisson_ratio < 0.5:
        raise ParameterError(f"Poisson ratio must lie in [0, 0.5), got {poisson_ratio}")
    mu = young_modulus / (2.0 * (1.0 + poisson_ratio))
    lam = young_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio))
    return mu, lam


@dataclass(frozen=True)
class Material:
    """Elastic material; the Lame parameters are derived on construction."""

    young_modulus: float
    poisson_ratio: float
    density: float
    mu: float = field(init=False)
    lam: float = field(init=False)

    def __post_init__(self):
        if self.density <= 0.0:
            raise ParameterError(f"density must be positive, got {self.density}")
        mu, lam = lame_from_young_poisson(self.young_modulus, self.poisson_ratio)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)


def neo_hookean_stress(F: np.ndarray, mu: float, lam: float,
                       particle: int | None = None) -> np.ndarray:
    """First Piola-Kirchhoff stress P = mu (F - F^-T) + lambda log(J) F^-T.

    Raises InvertedElementError for det(F) <= 0; the simulation kernels
    instead clamp log(J) and report the event, but standalone evaluation is
    strict so misuse surfaces early.
    """
    F = np.asarray(F, dtype=np.float64)
    J = float(np.linalg.det(F))
    if J <= 0.0:
        raise InvertedElementError(f"det(F) = {J} is not positive", particle)
    F_inv_T = np.linalg.inv(F).T
    return mu * (F - F_inv_T) + lam * np.log(J) * F_inv_T


def energy_density(F: np.ndarray, mu: float, lam: float) -> float:
    """Strain energy density whose gradient with respect to F is the stress.

    Psi(F) = mu/2 (tr(F^T F) - 3) - mu log J + lambda/2 log^2 J
    """
    F = np.asarray(F, dtype=np.float64)
    J = float(np.linalg.det(F))
    if J <= 0.0:
        raise InvertedElementError(f"det(F) = {J} is not positive")
    log_j = np.log(J)
    i1 = float(np.trace(F.T @ F))
    return 0.5 * mu * (i1 - 3.0) - mu * log_j + 0.5 * lam * log_j * log_j


def pack_materials(materials: list[Material]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten a material list into (mu, lambda, density) arrays for the kernels."""
    mu = np.array([m.mu for m in materials], dtype=np.float64)
    lam = np.array([m.lam for m in materials], dtype=np.float64)
    rho = np.array([m.density for m in materials], dtype=np.float64)
    return mu, lam, rho
