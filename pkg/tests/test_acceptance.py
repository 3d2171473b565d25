"""Acceptance criteria A1-A10; each test prints one PASS/FAIL line."""

import math

import numpy as np
import pytest
import scipy.linalg

from transbem.assembly import Assembler, P1Space
from transbem.fields import PlaneWave, sphere_series_oracle
from transbem.formulations import ALL_KINDS, FormulationKind, apply, build, build_multiple, solve
from transbem.linalg import condition_number, eigenvalues, gmres
from transbem.materials import Material, MediumPair, builtin_material
from transbem.mesh import cube_divisions_for, make_cube, make_icosphere
from transbem.spectral import OPERATOR_PRODUCT_VD, accumulation_points, cluster_metrics

pytestmark = pytest.mark.acceptance

WATER, BONE = builtin_material("water"), builtin_material("bone")
HISTORIES = []


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n{label} {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return emit


def mass_rel_l2(a, b, mass):
    d = a - b
    return math.sqrt((d.conj() @ (mass @ d)).real / (b.conj() @ (mass @ b)).real)


def solve_logged(system, tol=1e-7):
    rep, traces = solve(system, tol=tol)
    HISTORIES.append((system.kind.value, rep.history))
    return rep, traces


def test_a1_operator_product_clustering(report):
    S = P1Space(make_icosphere(1.0, 3))
    asm = Assembler()
    V = asm.operator("V", 7.0, S, S).entries
    D = asm.operator("D", 6.93, S, S).entries
    eigs = eigenvalues(S.mass_solver.solve(V) @ S.mass_solver.solve(D))
    m = cluster_metrics(eigs, accumulation_points(OPERATOR_PRODUCT_VD, 1.0, 1.0))
    ok = m.median_distance <= 0.1 and m.fraction_within(0.15) >= 0.5
    report("A1", ok, f"median={m.median_distance:.4f} (<=0.1) frac0.15={m.fraction_within(0.15):.3f} (>=0.5)")
    assert ok


def test_a2_formulation_accumulation_points(report):
    pair = MediumPair(WATER, BONE, 500.0)
    mesh = make_icosphere(1.0, 2)
    asm = Assembler()
    expected = {
        FormulationKind.HIGH_CONTRAST_NEUMANN: (0.5 + 0.3661j,),
        FormulationKind.HIGH_CONTRAST_DIRICHLET: (0.5 + 0.6828j,),
        FormulationKind.CALDERON_PMCHWT: (1.1004,),
    }
    ok, parts = True, []
    for kind, first in expected.items():
        pred = accumulation_points(kind, pair.rho_plus, pair.rho_minus)
        assert pred.points[0] == pytest.approx(first[0], abs=1e-4)
        eigs = eigenvalues(build(kind, pair, mesh, assembler=asm).strong_dense())
        m = cluster_metrics(eigs, pred)
        good = m.fraction_within(0.15) >= 0.5 and m.min_modulus >= 0.1
        ok &= good
        parts.append(f"{kind.value}: frac={m.fraction_within(0.15):.3f} min|l|={m.min_modulus:.3f}")
    report("A2", ok, "; ".join(parts))
    assert ok


def test_a3_calderon_identity_residual(report):
    k = 2.09
    res = {}
    for level in (3, 4):
        S = P1Space(make_icosphere(1.0, level))
        asm = Assembler()
        sV, sK, sD = (S.mass_solver.solve(asm.operator(kind, k, S, S).entries) for kind in ("V", "K", "D"))
        R = sV @ sD - (0.25 * np.eye(S.n) - sK @ sK)
        del sV, sK, sD
        res[level] = scipy.linalg.norm(R, 2)
        del R
    ok = res[3] <= 0.05 and res[4] < res[3]
    report("A3", ok, f"L3={res[3]:.5f} (<=0.05) L4={res[4]:.5f} (< L3)")
    assert ok


def test_a4_zero_contrast(report):
    mat = Material(1025.0, 1500.0)
    pair = MediumPair(mat, mat, 500.0)
    mesh = make_icosphere(1.0, 2)
    asm = Assembler()
    mu = eigenvalues(build("Muller", pair, mesh, assembler=asm).strong_dense())
    dev = np.abs(mu - 1.0).max()
    hcn = eigenvalues(build("hcn", pair, mesh, assembler=asm).strong_dense())
    pred = accumulation_points("hcn", mat.rho, mat.rho)
    assert pred.points == (0.5 + 0.5j, 0.5 - 0.5j)
    m = cluster_metrics(hcn, pred)
    ok = dev <= 1e-8 and m.fraction_within(0.15) >= 0.5
    report("A4", ok, f"Muller max|l-1|={dev:.2e} (<=1e-8) HCN frac0.15={m.fraction_within(0.15):.3f} "
                     f"median={m.median_distance:.4f}")
    assert ok


def test_a5_conditioning_trend(report):
    mesh = make_icosphere(1.0, 3)
    f = 1250.0
    asm = Assembler()
    ratios = np.logspace(-4, 4, 17)

    def kappa(kind, r):
        interior = WATER.with_density(WATER.rho * r)
        return condition_number(build(kind, MediumPair(WATER, interior, f), mesh, assembler=asm).strong_dense())

    assert WATER.wavenumber(f) == pytest.approx(5.24, abs=5e-3)
    p1, p4 = kappa("PMCHWT", 1.0), kappa("PMCHWT", 1e4)
    cald = [kappa("CalderonPMCHWT", r) for r in ratios]
    h1, h4 = kappa("hcn", 1.0), kappa("hcn", 1e4)
    c1 = p4 >= 100 * p1
    c2 = max(cald) / min(cald) < 10
    c3 = h4 <= 3 * h1
    ok = c1 and c2 and c3
    report("A5", ok, f"PMCHWT {p1:.4g}->{p4:.4g} x{p4 / p1:.2f} (>=100) [{'ok' if c1 else 'red'}]; "
                     f"Calderon max/min={max(cald) / min(cald):.2f} (<10) [{'ok' if c2 else 'red'}]; "
                     f"HCN {h1:.4g}->{h4:.4g} (<= x3) [{'ok' if c3 else 'red'}]")
    assert ok


def test_a6_oracle_accuracy(report):
    pair = MediumPair(WATER, BONE, 500.0)
    mesh = make_icosphere(1.0, 3)
    asm = Assembler()
    wave = PlaneWave(pair.k_plus)
    oracle = sphere_series_oracle(pair, 1.0, wave, mesh.vertices)
    mass = P1Space(mesh).mass
    traces, errs = {}, {}
    for kind in ALL_KINDS:
        _, sol = solve_logged(build(kind, pair, mesh, wave, asm), tol=1e-9)
        traces[kind] = sol.objects[0].dirichlet
        errs[kind] = mass_rel_l2(traces[kind], oracle, mass)
    pairwise = max(mass_rel_l2(traces[a], traces[b], mass) for a in ALL_KINDS for b in ALL_KINDS if a != b)
    ok = max(errs.values()) <= 0.05 and pairwise <= 0.01
    detail = " ".join(f"{k.value}={e:.4f}" for k, e in errs.items())
    report("A6", ok, f"oracle err {detail} (<=0.05); pairwise={pairwise:.4f} (<=0.01)")
    assert ok


def cube_iterations(exterior, interior, kinds):
    f = 5.0 * exterior.c / (2 * math.pi)
    k_max = max(exterior.wavenumber(f), interior.wavenumber(f))
    n = cube_divisions_for(k_max, 1.0, 6.0)
    mesh = make_cube(1.0, 1.0 / n)
    pair = MediumPair(exterior, interior, f)
    asm = Assembler()
    out = {}
    for kind in kinds:
        rep, _ = solve_logged(build(kind, pair, mesh, assembler=asm))
        assert rep.converged
        out[kind] = rep.iterations
    return out, mesh.n_vertices


def test_a7_iteration_ordering(report):
    air, iron, fat = (builtin_material(n) for n in ("air", "iron", "fat"))
    ai, n_ai = cube_iterations(air, iron, ["HighContrastNeumann", "PMCHWT", "Muller"])
    wf, n_wf = cube_iterations(WATER, fat, ["PMCHWT", "HighContrastDirichlet"])
    ok = (ai["HighContrastNeumann"] < ai["PMCHWT"] and ai["HighContrastNeumann"] < ai["Muller"]
          and wf["PMCHWT"] < wf["HighContrastDirichlet"])
    report("A7", ok, f"air/iron N={n_ai} {ai}; water/fat N={n_wf} {wf}")
    assert ok


def test_a8_accounting(report):
    ok, bad = True, []
    for ell in (1, 2, 3):
        meshes = [make_icosphere(1.0, 0, center=(3.0 * j, 0, 0)) for j in range(ell)]
        for kind in ALL_KINDS:
            system = build_multiple(kind, WATER, [BONE] * ell, meshes, 500.0)
            system.counter.reset()
            apply(system, np.ones(system.dimension))
            if kind.is_high_contrast:
                mv, ops = ell + 3 * ell ** 2, 2 * ell + 2 * ell ** 2
                assembled = ops
            else:
                mv, ops = 4 * ell + 4 * ell ** 2, 4 * ell + 4 * ell ** 2
                assembled = 3 * ell + 3 * ell ** 2
                if kind is FormulationKind.CALDERON_PMCHWT:
                    mv = 8 * ell + 8 * ell ** 2
            got = (system.counter.dense, system.operator_count(), system.dense_assembly_count())
            if got != (mv, ops, assembled):
                ok = False
                bad.append(f"{kind.value} l={ell} got {got} want {(mv, ops, assembled)}")
    report("A8", ok, "all counts match for l=1,2,3" if ok else "; ".join(bad))
    assert ok


def test_a9_multiple_scattering_crossover(report):
    f = 3.0 * WATER.c / (2 * math.pi)
    meshes = [make_icosphere(1.0, 2, center=(3.0 * j, 0, 0)) for j in range(3)]
    iters = {}
    for letters, name in (("fff", "fat"), ("iii", "iron")):
        mat = builtin_material(name)
        asm = Assembler()
        for kind in ("HighContrastNeumann", "PMCHWT"):
            rep, _ = solve_logged(build_multiple(kind, WATER, [mat] * 3, meshes, f, assembler=asm))
            assert rep.converged
            iters[(kind, letters)] = rep.iterations
    hcn_ok = iters[("HighContrastNeumann", "iii")] <= 1.5 * iters[("HighContrastNeumann", "fff")]
    pm_ok = iters[("PMCHWT", "iii")] >= 2 * iters[("PMCHWT", "fff")]
    ok = hcn_ok and pm_ok
    report("A9", ok, " ".join(f"{k}/{s}={v}" for (k, s), v in iters.items()))
    assert ok


def test_a10_gmres_contract(report):
    rng = np.random.default_rng(10)
    b = rng.normal(size=40) + 1j * rng.normal(size=40)
    ident = gmres(lambda x: x, b)
    d = np.where(np.arange(40) % 2, 3.0, 0.5 - 1j)
    two = gmres(lambda x: d * x, b)
    A = 4 * np.eye(50) + rng.normal(size=(50, 50)) / 7 + 1j * rng.normal(size=(50, 50)) / 7
    c = rng.normal(size=50) + 1j * rng.normal(size=50)
    rnd = gmres(lambda x: A @ x, c, tol=1e-10)
    ref = np.linalg.solve(A, c)
    rel = np.linalg.norm(rnd.x - ref) / np.linalg.norm(ref)
    if not HISTORIES:
        solve_logged(build("hcn", MediumPair(WATER, BONE, 500.0), make_icosphere(1.0, 2)))
    monotone = all(np.all(np.diff(h) <= 0) for _, h in HISTORIES)
    ok = ident.iterations == 1 and two.iterations <= 2 and rel <= 1e-6 and monotone
    report("A10", ok, f"identity={ident.iterations} two-eig={two.iterations} random rel={rel:.1e} "
                      f"monotone histories={monotone} over {len(HISTORIES)} runs")
    assert ok
