"""Acoustic media: densities, wavespeeds and wavenumbers (lossless only)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Material:
    rho: float
    c: float
    name: str = "custom"

    def __post_init__(self):
        for label, value in (("rho", self.rho), ("c", self.c)):
            if isinstance(value, complex) or not math.isfinite(value) or value <= 0:
                raise ValueError(f"{label} must be a positive real number, got {value!r}")

    def wavenumber(self, f: float) -> float:
        return wavenumber(f, self.c)

    def compressibility(self) -> float:
        return 1.0 / (self.c ** 2 * self.rho)

    def with_density(self, rho: float, constant_compressibility: bool = False) -> "Material":
        """Copy with a new density; the wavespeed either stays fixed or follows
        ``c = 1/sqrt(beta * rho)`` at this material's compressibility."""
        c = wavespeed_from_compressibility(self.compressibility(), rho) if constant_compressibility else self.c
        return replace(self, rho=rho, c=c)


# Published characteristic values (kg/m^3, m/s)
MATERIALS = {
    "air": Material(1.225, 340.0, "air"),
    "fat": Material(917.0, 1412.0, "fat"),
    "water": Material(1025.0, 1500.0, "water"),
    "bone": Material(1912.0, 4080.0, "bone"),
    "basalt": Material(2740.0, 3350.0, "basalt"),
    "iron": Material(7725.0, 4094.0, "iron"),
}


def builtin_material(name: str) -> Material:
    try:
        return MATERIALS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown material {name!r}; choose from {sorted(MATERIALS)}") from None


def wavenumber(f: float, c: float) -> float:
    if isinstance(f, complex) or isinstance(c, complex) or f <= 0 or c <= 0:
        raise ValueError("frequency and wavespeed must be positive reals")
    return 2.0 * math.pi * f / c


def wavespeed_from_compressibility(beta: float, rho: float) -> float:
    if beta <= 0 or rho <= 0:
        raise ValueError("compressibility and density must be positive")
    return 1.0 / math.sqrt(beta * rho)


@dataclass(frozen=True)
class MediumPair:
    exterior: Material
    interior: Material
    frequency: float

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")

    @property
    def k_plus(self) -> float:
        return self.exterior.wavenumber(self.frequency)

    @property
    def k_minus(self) -> float:
        return self.interior.wavenumber(self.frequency)

    @property
    def rho_plus(self) -> float:
        return self.exterior.rho

    @property
    def rho_minus(self) -> float:
        return self.interior.rho

    @property
    def density_ratio(self) -> float:
        """Interior over exterior density."""
        return self.interior.rho / self.exterior.rho

    @classmethod
    def from_wavenumbers(cls, k_plus, k_minus, rho_plus=1.0, rho_minus=1.0):
        """Pair with prescribed wavenumbers at unit frequency (``c = 2*pi/k``)."""
        return cls(Material(rho_plus, 2 * math.pi / k_plus), Material(rho_minus, 2 * math.pi / k_minus), 1.0)
