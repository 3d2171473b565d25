import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transbem.formulations import FormulationKind, build
from transbem.materials import MediumPair, builtin_material
from transbem.mesh import make_icosphere
from transbem.spectral import (
    CLUSTER_RADII,
    CONVENTION,
    OPERATOR_PRODUCT_VD,
    DimensionCapError,
    NoPredictionError,
    SpectralPrediction,
    accumulation_points,
    cluster_metrics,
    sorted_spectrum,
    spectral_report,
)

WATER, BONE = builtin_material("water"), builtin_material("bone")
densities = st.floats(1e-4, 1e4)


def test_water_bone_predictions():
    n = accumulation_points("HighContrastNeumann", WATER.rho, BONE.rho).points
    assert n[0] == pytest.approx(0.5 + 0.3661j, abs=1e-4) and n[1] == pytest.approx(0.5 - 0.3661j, abs=1e-4)
    d = accumulation_points("HighContrastDirichlet", WATER.rho, BONE.rho).points
    assert d[0] == pytest.approx(0.5 + 0.6828j, abs=1e-4)
    c = accumulation_points("CalderonPMCHWT", WATER.rho, BONE.rho).points
    assert c == (pytest.approx(1.1004, abs=1e-4),)


def test_air_iron_neumann():
    n = accumulation_points("hcn", 1.225, 7725.0).points
    assert n[0].imag == pytest.approx(0.0063, abs=1e-4)


def test_equal_densities():
    assert accumulation_points("calderon", 1.0, 1.0).points == (1.0,)
    assert accumulation_points("hcn", 5.0, 5.0).points == (0.5 + 0.5j, 0.5 - 0.5j)
    assert accumulation_points(OPERATOR_PRODUCT_VD, 1.0, 3.0).points == (0.25,)


@pytest.mark.parametrize("kind", ["PMCHWT", "Muller"])
def test_no_prediction(kind):
    with pytest.raises(NoPredictionError):
        accumulation_points(kind, 1.0, 2.0)


def test_invalid_densities():
    with pytest.raises(ValueError):
        accumulation_points("hcn", 0.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(rp=densities, rm=densities)
def test_prediction_properties(rp, rm):
    n = accumulation_points("hcn", rp, rm).points
    d = accumulation_points("hcd", rp, rm).points
    c = accumulation_points("calderon", rp, rm).points[0]
    assert n[0] == np.conj(n[1]) and all(p.real == 0.5 for p in n + d)
    # Neumann and Dirichlet swap under density exchange
    assert accumulation_points("hcn", rm, rp).points[0] == pytest.approx(d[0], rel=1e-12)
    assert accumulation_points("calderon", rm, rp).points[0] == pytest.approx(c, rel=1e-12)
    assert c.real >= 1.0 - 1e-12 and c.imag == 0
    assert min(abs(p) for p in n + d) >= 0.5


def test_metrics_exact_cluster():
    pred = SpectralPrediction("x", 1.0, (0.5 + 0.5j,))
    m = cluster_metrics(np.full(10, 0.5 + 0.5j), pred)
    assert m.median_distance == 0 and m.fractions == (1.0, 1.0, 1.0)
    assert m.min_modulus == pytest.approx(math.sqrt(0.5))


def test_metrics_nearest_point_and_edges():
    pred = SpectralPrediction("x", 1.0, (1.0, -1.0))
    eigs = np.array([1.04, -1.09, 1.2, 3.0])
    m = cluster_metrics(eigs, pred)
    assert m.fraction_within(0.05) == 0.25
    assert m.fraction_within(0.1) == 0.5
    assert m.fraction_within(0.15) == 0.5
    assert m.median_distance == pytest.approx(0.145)
    with pytest.raises(ValueError):
        cluster_metrics(np.array([]), pred)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=1, max_size=40))
def test_fractions_monotone(values):
    m = cluster_metrics(np.array(values), SpectralPrediction("x", 1.0, (0.25,)))
    assert list(m.fractions) == sorted(m.fractions)
    assert all(0 <= f <= 1 for f in m.fractions)


def test_sorted_spectrum_deterministic():
    e = np.array([1 + 2j, 1 - 1j, -3 + 0j, 1 + 0j])
    assert list(sorted_spectrum(e)) == [-3, 1 - 1j, 1, 1 + 2j]
    assert np.array_equal(sorted_spectrum(e[::-1]), sorted_spectrum(e))


@pytest.fixture(scope="module")
def hcn_report():
    system = build("hcn", MediumPair(WATER, BONE, 500.0), make_icosphere(1.0, 1))
    return system, spectral_report(system)


def test_report_contents(hcn_report):
    system, rep = hcn_report
    assert rep.dimension == system.dimension == len(rep.eigenvalues)
    assert rep.convention == CONVENTION
    assert rep.metrics.radii == CLUSTER_RADII
    assert rep.condition >= 1.0
    assert np.array_equal(rep.eigenvalues, sorted_spectrum(rep.eigenvalues))
    assert sum(rep.eigenvalues) == pytest.approx(np.trace(system.strong_dense()), rel=1e-9)


def test_report_json_round_trip(hcn_report, tmp_path):
    _, rep = hcn_report
    rep.write_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    eigs = np.array([complex(a, b) for a, b in data["eigenvalues"]])
    assert np.array_equal(eigs, rep.eigenvalues)
    assert data["metrics"]["fractions"] == list(rep.metrics.fractions)
    assert data["prediction"]["points"][0] == [0.5, pytest.approx(0.3661, abs=1e-4)]


def test_report_csv(hcn_report, tmp_path):
    _, rep = hcn_report
    rep.write_csv(tmp_path / "r.csv", header_lines=["convention=" + CONVENTION])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "# convention=" + CONVENTION and lines[1] == "index,re,im"
    assert len(lines) == 2 + rep.dimension


def test_report_without_prediction():
    system = build(FormulationKind.PMCHWT, MediumPair(WATER, BONE, 500.0), make_icosphere(1.0, 0))
    rep = spectral_report(system, with_condition=False)
    assert rep.prediction is None and rep.metrics is None and math.isnan(rep.condition)
    assert rep.to_json()["prediction"] is None


def test_dimension_cap():
    system = build("hcn", MediumPair(WATER, BONE, 500.0), make_icosphere(1.0, 0))
    with pytest.raises(DimensionCapError):
        spectral_report(system, cap=system.dimension - 1)
