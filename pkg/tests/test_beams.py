import logging

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from bladelattice import beams
from bladelattice.beams import (
    INCONEL_718,
    BeamModel,
    HalfSpace,
    LoadCase,
    Material,
    Section,
    SingularModelError,
    assemble_stiffness,
    cantilever_frequency,
    centrifugal_load,
    effective_poisson,
    element_centrifugal_forces,
    element_stiffness,
    lowest_frequencies,
    scaled_frequency,
    solve_static,
)
from bladelattice.lattice import StepField, build_lattice, extract_beam_model
from bladelattice.splines import blade_macro, trilinear_box, unit_cube
from bladelattice.tiles import TileSpec
from oracles import timoshenko_cantilever_tip

STEEL = Material(E=200e9, nu=0.3, rho=7800.0)


def cantilever(n, L=1.0, r=0.01, material=STEEL, direction=(1.0, 0.0, 0.0)):
    x = np.linspace(0, L, n + 1)[:, None] * np.asarray(direction)
    return BeamModel(x, np.c_[np.arange(n), np.arange(1, n + 1)], np.full(n, r), material, [0])


def tip_load(model, force):
    f = np.zeros((len(model.nodes), 6))
    f[-1, :3] = force
    return f.ravel()


def cross_frame(epc=1):
    lat = build_lattice(unit_cube(), (2, 1, 1), TileSpec("cross_axis", arm_thickness=0.1), compose_solids=False)
    return extract_beam_model(lat, epc, STEEL)


# ---------------------------------------------------------------------------
# element stiffness


def _rigid_modes(xi, xj):
    modes = []
    for e in np.eye(3):
        modes.append(np.r_[e, 0, 0, 0, e, 0, 0, 0])
    for w in np.eye(3):
        modes.append(np.r_[np.cross(w, xi), w, np.cross(w, xj), w])
    return np.array(modes)


def test_rigid_body_motions_produce_no_force():
    xi, xj = np.array([0.1, -0.2, 0.3]), np.array([0.5, 0.4, -0.1])
    k = element_stiffness(xi, xj, 0.02, STEEL)
    scale = np.abs(k).max()
    for d in _rigid_modes(xi, xj):
        assert np.abs(k @ d).max() <= 1e-9 * scale * np.abs(d).max()


def test_element_has_exactly_six_zero_modes():
    k = element_stiffness([0, 0, 0], [0.3, 0.2, 0.9], 0.01, STEEL)
    assert np.array_equal(k, k.T)
    w = np.linalg.eigvalsh(k)
    tol = 1e-8 * w.max()
    assert np.sum(np.abs(w) <= tol) == 6
    assert w.min() >= -tol


def test_zero_length_element_rejected():
    with pytest.raises(ValueError, match="zero-length"):
        element_stiffness([1, 2, 3], [1, 2, 3], 0.01, STEEL)


def test_circular_section_properties():
    s = Section.circle(0.01, 0.3)
    assert s.A == pytest.approx(np.pi * 1e-4, rel=1e-15)
    assert s.Iy == s.Iz == pytest.approx(np.pi * 1e-8 / 4, rel=1e-15)
    assert s.J == pytest.approx(np.pi * 1e-8 / 2, rel=1e-15)
    assert s.kappa == pytest.approx(7.8 / 8.8, rel=1e-15)


@pytest.mark.parametrize("kw", [{"E": 0.0}, {"rho": -1.0}, {"nu": 0.5}, {"nu": -1.0}])
def test_material_validation(kw):
    args = {"E": 1e9, "nu": 0.3, "rho": 1000.0, **kw}
    with pytest.raises(ValueError):
        Material(**args)


def test_model_validation():
    with pytest.raises(ValueError):
        BeamModel([[0, 0, 0], [1, 0, 0]], [[0, 1]], [0.0], STEEL)
    with pytest.raises(ValueError):
        BeamModel([[0, 0, 0], [1, 0, 0]], [[0, 2]], [0.1], STEEL)


# ---------------------------------------------------------------------------
# statics


def test_cantilever_tip_deflection():
    model = cantilever(20)
    res = solve_static(model, tip_load(model, [0, 0, -100.0]))
    bend, shear = timoshenko_cantilever_tip(100.0, 1.0, 200e9, 0.3, 0.01)
    assert bend == pytest.approx(2.1220e-2, rel=1e-4)
    assert shear == pytest.approx(4.67e-6, rel=1e-2)
    tip = -res.displacements[-1, 2]
    assert tip == pytest.approx(bend + shear, rel=1e-2)
    assert tip == pytest.approx(2.1225e-2, rel=1e-2)
    assert res.residual <= 1e-8
    # compliance is the work of the tip load
    assert res.compliance == pytest.approx(100.0 * tip, rel=1e-12)


def test_cantilever_is_frame_independent():
    d = np.array([1.0, 2.0, 2.0]) / 3.0
    model = cantilever(8, direction=d)
    load = np.cross(d, [0, 0, 1.0])
    load *= 100.0 / np.linalg.norm(load)
    res = solve_static(model, tip_load(model, load))
    bend, shear = timoshenko_cantilever_tip(100.0, 1.0, 200e9, 0.3, 0.01)
    assert np.linalg.norm(res.displacements[-1, :3]) == pytest.approx(bend + shear, rel=1e-9)


def test_shear_rigid_limit_is_euler_bernoulli():
    model = cantilever(5, r=0.05)
    K = assemble_stiffness(model, shear_rigid=True)
    res = solve_static(model, tip_load(model, [0, 100.0, 0]), K=K)
    bend, shear = timoshenko_cantilever_tip(100.0, 1.0, 200e9, 0.3, 0.05)
    assert res.displacements[-1, 1] == pytest.approx(bend, rel=1e-9)
    full = solve_static(model, tip_load(model, [0, 100.0, 0]))
    assert full.displacements[-1, 1] == pytest.approx(bend + shear, rel=1e-9)


def test_mesh_convergence_under_distributed_load():
    """Lumped uniform load: tip error at least halves per refinement until 0.1 %."""
    q, L, r = 50.0, 1.0, 0.01
    bend = q * L**4 / (8 * STEEL.E * np.pi * r**4 / 4)
    kappa = 6 * 1.3 / 8.8
    exact = bend + q * L**2 / (2 * kappa * STEEL.G * np.pi * r**2)
    errors = []
    for n in (1, 2, 4, 8, 16, 32):
        model = cantilever(n)
        f = np.zeros((n + 1, 6))
        h = L / n
        f[:-1, 2] += 0.5 * q * h
        f[1:, 2] += 0.5 * q * h
        f[0] = 0.0
        errors.append(abs(solve_static(model, f.ravel()).displacements[-1, 2] - exact) / exact)
    for prev, cur in zip(errors, errors[1:]):
        assert cur <= 0.5 * prev or prev < 1e-3
    assert errors[-1] < 1e-3


def test_zero_load_gives_zero_response():
    model = cross_frame()
    res = solve_static(model, np.zeros(model.n_dofs))
    assert np.all(res.displacements == 0) and res.compliance == 0.0


def test_doubling_loads_doubles_displacements():
    model = cross_frame(2)
    f = np.random.default_rng(0).normal(size=model.n_dofs)
    f.reshape(-1, 6)[model.clamped] = 0.0
    a = solve_static(model, f)
    b = solve_static(model, 2 * f)
    assert np.allclose(b.displacements, 2 * a.displacements, rtol=1e-10, atol=0)
    assert b.compliance == pytest.approx(4 * a.compliance, rel=1e-10)
    assert a.compliance > 0


def test_reactions_balance_applied_loads():
    model = cross_frame(2)
    f = np.random.default_rng(1).normal(size=(len(model.nodes), 6))
    f[model.clamped] = 0.0
    res = solve_static(model, f.ravel())
    applied = f[:, :3].sum(axis=0)
    reaction = res.reactions[:, :3].sum(axis=0)
    assert np.linalg.norm(reaction + applied) <= 1e-8 * np.abs(f[:, :3]).sum()
    assert np.all(res.reactions[np.setdiff1d(np.arange(len(model.nodes)), model.clamped)] == 0)


def test_global_stiffness_symmetric_with_six_free_modes():
    model = cross_frame()
    K = assemble_stiffness(model).toarray()
    assert np.abs(K - K.T).max() <= 1e-12 * np.abs(K).max()
    w = scipy.linalg.eigvalsh(K)
    assert np.sum(np.abs(w) <= 1e-8 * K.diagonal().max()) == 6


def test_floating_component_is_named():
    nodes = [[0, 0, 0], [1, 0, 0], [5, 0, 0], [6, 0, 0]]
    model = BeamModel(nodes, [[0, 1], [2, 3]], [0.01, 0.01], STEEL, [0])
    with pytest.raises(SingularModelError, match="free connected component with 2 node"):
        solve_static(model, np.zeros(model.n_dofs))


def test_unclamped_model_rejected():
    model = BeamModel([[0, 0, 0], [1, 0, 0]], [[0, 1]], [0.01], STEEL)
    with pytest.raises(SingularModelError):
        solve_static(model, np.zeros(model.n_dofs))


def test_iterative_path_matches_direct(monkeypatch):
    model = cross_frame(3)
    f = np.zeros((len(model.nodes), 6))
    f[:, 2] = -1.0
    f[model.clamped] = 0.0
    direct = solve_static(model, f.ravel())
    monkeypatch.setattr(beams, "DIRECT_SOLVE_MAX_DOFS", 0)
    iterative = solve_static(model, f.ravel())
    assert iterative.compliance == pytest.approx(direct.compliance, rel=1e-7)


def test_axial_bar_stress():
    model = cantilever(3, r=0.01)
    res = solve_static(model, tip_load(model, [1000.0, 0, 0]))
    sigma = 1000.0 / (np.pi * 1e-4)
    assert res.axial_stress == pytest.approx(np.full(3, sigma), rel=1e-9)
    assert res.von_mises == pytest.approx(np.full(3, sigma), rel=1e-9)


def test_large_deflection_warns(caplog):
    model = cantilever(4, r=0.001)
    with caplog.at_level(logging.WARNING, logger="bladelattice.beams"):
        solve_static(model, tip_load(model, [0, 0, -1000.0]))
    assert "linear kinematics" in caplog.text


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), element=st.integers(0, 13))
def test_compliance_decreases_when_a_radius_grows(seed, element):
    model = cross_frame(1)
    rng = np.random.default_rng(seed)
    radii = rng.uniform(0.02, 0.06, len(model.elements))
    f = rng.normal(size=(len(model.nodes), 6))
    f[model.clamped] = 0.0
    base = solve_static(model.with_radii(radii), f.ravel()).compliance
    bigger = radii.copy()
    bigger[element % len(radii)] *= 1.05
    assert solve_static(model.with_radii(bigger), f.ravel()).compliance <= base * (1 + 1e-12)


# ---------------------------------------------------------------------------
# centrifugal load


def test_rpm_conversion():
    assert LoadCase.rpm_to_rad(10000) == pytest.approx(1047.1976, abs=1e-4)


def test_centrifugal_force_magnitude():
    omega = LoadCase.rpm_to_rad(10000)
    r = 1e-3
    length = 0.001 / (STEEL.rho * np.pi * r**2)
    nodes = [[0.35, 0, -length / 2], [0.35, 0, length / 2]]
    model = BeamModel(nodes, [[0, 1]], [r], STEEL)
    lc = LoadCase(omega)
    fe = element_centrifugal_forces(model, lc)[0]
    assert model.mass() == pytest.approx(0.001, rel=1e-12)
    assert np.linalg.norm(fe) == pytest.approx(383.8, abs=0.05)
    assert fe[0] > 0  # radially outward
    f = centrifugal_load(model, lc).reshape(-1, 6)
    assert f[:, :3].sum(axis=0) == pytest.approx(fe, rel=1e-12)
    assert f[0, :3] == pytest.approx(f[1, :3], rel=1e-12)


def test_centrifugal_load_vanishes_at_rest_and_on_axis():
    model = cross_frame()
    assert np.all(centrifugal_load(model, LoadCase(0.0)) == 0)
    on_axis = BeamModel([[0, 0, 0], [0, 0, 1]], [[0, 1]], [0.01], STEEL)
    assert np.all(centrifugal_load(on_axis, LoadCase(100.0)) == 0)


def test_centrifugal_load_zero_on_clamped_nodes():
    model = cross_frame()
    f = centrifugal_load(model, LoadCase(500.0, (-1, 0, 0))).reshape(-1, 6)
    assert np.all(f[model.clamped] == 0)
    assert np.abs(f).max() > 0


def test_load_case_validation_and_axis_normalisation():
    lc = LoadCase(1.0, axis_dir=(0, 0, 3))
    assert lc.axis_dir == (0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        LoadCase(-1.0)
    with pytest.raises(ValueError):
        LoadCase(1.0, axis_dir=(0, 0, 0))


def test_half_space_selector():
    sel = HalfSpace((1, 0, 0), 0.5)
    assert sel(np.array([[0.2, 5, 5], [0.5, 0, 0], [0.6, 0, 0]])).tolist() == [True, True, False]


def test_graded_blade_deflects_less_than_uniform():
    lat = build_lattice(blade_macro(), (6, 3, 2), TileSpec("auxetic_double_v", strut_radius=0.2e-3))
    lc = LoadCase(LoadCase.rpm_to_rad(10000), (-0.35, 0, 0))
    graded = StepField((1 / 3, 2 / 3), (0.25e-3, 0.2e-3, 0.15e-3))
    out = {}
    for name, grading in (("uniform", None), ("graded", graded)):
        model = extract_beam_model(lat, 2, INCONEL_718, grading)
        out[name] = solve_static(model, centrifugal_load(model, lc)).max_deflection
    assert out["graded"] < out["uniform"]


# ---------------------------------------------------------------------------
# frequencies


def test_closed_form_frequency():
    f = cantilever_frequency(0.090, 0.040, 0.00675, INCONEL_718)
    assert f == pytest.approx(677.0, abs=1.0)
    assert cantilever_frequency(0.180, 0.040, 0.00675, INCONEL_718) == pytest.approx(f / 4, rel=1e-12)
    assert scaled_frequency(f, 0.26) == pytest.approx(f * np.sqrt(1 / 0.74), rel=1e-12)
    assert np.sqrt(1 / 0.74) == pytest.approx(1.1625, abs=1e-4)


def _plate_cantilever(material, n=30):
    L, b, t = 0.090, 0.040, 0.00675
    model = cantilever(n, L=L, r=0.001, material=material)
    model.sections = [Section.rectangle(b, t, material.nu)] * n
    return model


def test_discrete_frequency_matches_closed_form():
    f_fem = lowest_frequencies(_plate_cantilever(INCONEL_718), 1)[0]
    f_cf = cantilever_frequency(0.090, 0.040, 0.00675, INCONEL_718)
    assert f_fem == pytest.approx(f_cf, rel=0.05)


def test_frequencies_scale_with_root_of_modulus():
    stiff = Material(4 * INCONEL_718.E, INCONEL_718.nu, INCONEL_718.rho)
    a = lowest_frequencies(_plate_cantilever(INCONEL_718, 10), 3)
    b = lowest_frequencies(_plate_cantilever(stiff, 10), 3)
    assert np.all(np.diff(a) >= 0)
    assert b == pytest.approx(2 * a, rel=1e-9)


def test_frequency_count_validation():
    model = cantilever(2)
    with pytest.raises(ValueError):
        lowest_frequencies(model, 13)
    with pytest.raises(ValueError):
        lowest_frequencies(model, 0)


# ---------------------------------------------------------------------------
# effective Poisson ratio

PATCH = trilinear_box(hi=(3e-3, 3e-3, 3e-3))


def _auxetic_patch(vertical=True):
    spec = TileSpec("auxetic_double_v", strut_radius=0.05e-3, include_vertical_strut=vertical)
    g = build_lattice(PATCH, (3, 3, 3), spec, growth_axis=2).beam_graph
    return BeamModel(g.nodes, g.edges, g.radii, INCONEL_718)


def test_double_v_patch_is_auxetic():
    nu = effective_poisson(_auxetic_patch(), 0.01, axis=2)
    assert nu < 0
    # regression value from this solver
    assert nu == pytest.approx(-1.0017307839677532, rel=1e-6)


def test_orthogonal_strut_patch_has_no_lateral_coupling():
    lat = build_lattice(PATCH, (3, 3, 3), TileSpec("cross_axis", arm_thickness=0.1), compose_solids=False)
    model = extract_beam_model(lat, 2)
    for axis in range(3):
        assert abs(effective_poisson(model, 0.01, axis=axis)) < 0.05


def test_poisson_ratio_independent_of_strain_sign():
    model = _auxetic_patch()
    assert effective_poisson(model, -0.01) == pytest.approx(effective_poisson(model, 0.01), rel=1e-9)


def test_zero_strain_rejected():
    with pytest.raises(ValueError):
        effective_poisson(_auxetic_patch(), 0.0)
