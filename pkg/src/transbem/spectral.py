"""Predicted eigenvalue accumulation points and clustering diagnostics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .formulations import FormulationKind, FormulationSystem
from .linalg import condition_number, eigenvalues

OPERATOR_PRODUCT_VD = "OperatorProductVD"

# Clustering radii. Calibrated once on the icosphere fixtures (L=2 and L=3)
# and frozen: 0.15 is the acceptance radius, 0.05 and 0.1 are diagnostics.
CLUSTER_RADII = (0.05, 0.1, 0.15)

DENSE_CAP = 6000
CONVENTION = "strong-form M^-1 A"


class NoPredictionError(ValueError):
    pass


class DimensionCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralPrediction:
    kind: str
    density_ratio: float
    points: tuple


def accumulation_points(kind, rho_plus, rho_minus) -> SpectralPrediction:
    """Accumulation points of the strong-form spectrum for high-frequency modes.

    ``kind`` is a :class:`FormulationKind` or ``"OperatorProductVD"`` for the
    product of a single-layer and a hypersingular operator.
    """
    if rho_plus <= 0 or rho_minus <= 0:
        raise ValueError("densities must be positive")
    ratio = rho_minus / rho_plus
    if kind == OPERATOR_PRODUCT_VD:
        return SpectralPrediction(OPERATOR_PRODUCT_VD, ratio, (0.25 + 0j,))
    kind = FormulationKind.parse(kind)
    if kind is FormulationKind.HIGH_CONTRAST_NEUMANN:
        s = 0.5 * math.sqrt(rho_plus / rho_minus)
        pts = (complex(0.5, s), complex(0.5, -s))
    elif kind is FormulationKind.HIGH_CONTRAST_DIRICHLET:
        s = 0.5 * math.sqrt(rho_minus / rho_plus)
        pts = (complex(0.5, s), complex(0.5, -s))
    elif kind is FormulationKind.CALDERON_PMCHWT:
        pts = (complex(0.5 + rho_plus / (4 * rho_minus) + rho_minus / (4 * rho_plus)),)
    else:
        raise NoPredictionError(f"no accumulation point prediction for {kind.value}")
    return SpectralPrediction(kind.value, ratio, pts)


@dataclass(frozen=True)
class ClusterMetrics:
    radii: tuple
    fractions: tuple
    median_distance: float
    min_modulus: float

    def fraction_within(self, r) -> float:
        return self.fractions[self.radii.index(r)]


def cluster_metrics(eigs, prediction: SpectralPrediction, radii=CLUSTER_RADII) -> ClusterMetrics:
    eigs = np.asarray(eigs, dtype=complex).ravel()
    if eigs.size == 0:
        raise ValueError("empty spectrum")
    pts = np.asarray(prediction.points, dtype=complex)
    dist = np.abs(eigs[:, None] - pts[None, :]).min(axis=1)
    fractions = tuple(float(np.mean(dist <= r)) for r in radii)
    return ClusterMetrics(tuple(radii), fractions, float(np.median(dist)), float(np.abs(eigs).min()))


@dataclass
class SpectralReport:
    kind: str
    dimension: int
    eigenvalues: np.ndarray
    condition: float
    prediction: SpectralPrediction | None
    metrics: ClusterMetrics | None
    metadata: dict = field(default_factory=dict)
    convention: str = CONVENTION

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "dimension": self.dimension,
            "convention": self.convention,
            "condition_number": self.condition,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "prediction": None,
            "metrics": None,
            "metadata": self.metadata,
        }
        if self.prediction is not None:
            out["prediction"] = {
                "density_ratio": self.prediction.density_ratio,
                "points": [[p.real, p.imag] for p in self.prediction.points],
            }
        if self.metrics is not None:
            out["metrics"] = {
                "radii": list(self.metrics.radii),
                "fractions": list(self.metrics.fractions),
                "median_distance": self.metrics.median_distance,
                "min_modulus": self.metrics.min_modulus,
            }
        return out

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    def write_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["index", "re", "im"])
            for i, z in enumerate(self.eigenvalues):
                w.writerow([i, repr(float(z.real)), repr(float(z.imag))])


def sorted_spectrum(eigs):
    """Deterministic ordering (by real, then imaginary part) for output files."""
    eigs = np.asarray(eigs, dtype=complex)
    return eigs[np.lexsort((eigs.imag, eigs.real))]


def spectral_report(system: FormulationSystem, cap=DENSE_CAP, with_condition=True) -> SpectralReport:
    """Dense strong-form spectrum, condition number and clustering of a
    single-object system."""
    if system.dimension > cap:
        raise DimensionCapError(f"system dimension {system.dimension} exceeds dense cap {cap}")
    A = system.strong_dense()
    eigs = sorted_spectrum(eigenvalues(A))
    kappa = condition_number(A) if with_condition else float("nan")
    try:
        pred = accumulation_points(system.kind, system.exterior.rho, system.interiors[0].rho)
    except NoPredictionError:
        pred = None
    if pred is not None and system.n_objects > 1:
        pred = None
    metrics = cluster_metrics(eigs, pred) if pred is not None else None
    meta = {
        "k_exterior": system.k_exterior,
        "k_interior": system.k_interiors,
        "density_ratio": system.density_ratios,
        "n_vertices": [s.n for s in system.spaces],
    }
    return SpectralReport(system.kind.value, system.dimension, eigs, kappa, pred, metrics, meta)
