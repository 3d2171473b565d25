"""Galerkin boundary element solvers for acoustic transmission at high-contrast media."""

__version__ = "0.1.0"

from .assembly import Assembler, P1Space, assemble, strong_form  # noqa: E402
from .fields import PlaneWave, evaluate_field, incident_traces, sphere_series_oracle  # noqa: E402
from .formulations import FormulationKind, build, build_multiple, recover_traces, solve  # noqa: E402
from .materials import MATERIALS, Material, MediumPair  # noqa: E402
from .mesh import SurfaceMesh, make_cube, make_icosphere  # noqa: E402
from .spectral import accumulation_points, cluster_metrics, spectral_report  # noqa: E402

__all__ = [
    "Assembler", "P1Space", "assemble", "strong_form",
    "PlaneWave", "evaluate_field", "incident_traces", "sphere_series_oracle",
    "FormulationKind", "build", "build_multiple", "recover_traces", "solve",
    "MATERIALS", "Material", "MediumPair",
    "SurfaceMesh", "make_cube", "make_icosphere",
    "accumulation_points", "cluster_metrics", "spectral_report",
]
