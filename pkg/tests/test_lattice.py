import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bladelattice.lattice import (
    LatticeError,
    ParameterField,
    StepField,
    beam_layout,
    boundary_surface,
    build_lattice,
    canonical_graph,
    cell_corners,
    embed_beam_cell,
    extract_beam_model,
    hex_mesh,
    interface_gaps,
    merge_graphs,
    subdivide_graph,
    tessellate_boundary,
)
from bladelattice.splines import DegeneracyError, blade_macro, eval_volume, trilinear_box, trilinear_from_corners, unit_cube
from bladelattice.tiles import FACES, BeamGraph, TileSpec, make_auxetic_cell, make_cross_tile
from oracles import trilinear

CUBE_CORNERS = np.array([[i, j, k] for k in (0, 1) for j in (0, 1) for i in (0, 1)], float)
AUX = TileSpec("auxetic_double_v", strut_radius=1e-4)


def cross_counts(grid, n):
    """Nodes/elements of a cross-tile beam lattice: hubs, shared face centres, interior nodes."""
    a, b, c = grid
    cells = a * b * c
    faces = (a + 1) * b * c + a * (b + 1) * c + a * b * (c + 1)
    return cells + faces + 6 * cells * (n - 1), 6 * cells * n


def auxetic_counts(grid, n, growth_axis=0):
    """Double-V cells with the vertical strut: 8 nodes, 11 edges per cell."""
    g = list(grid)
    along = g[growth_axis]
    lat = [g[(growth_axis + 1) % 3], g[(growth_axis + 2) % 3]]
    cells = along * lat[0] * lat[1]
    ends = (along + 1) * lat[0] * lat[1]
    sides = (lat[0] + 1) * along * lat[1] + lat[0] * along * (lat[1] + 1)
    edges = 11 * cells
    return ends + 2 * cells + sides + (n - 1) * edges, n * edges


# ---------------------------------------------------------------------------
# grading fields


def test_parameter_field_degrees_and_basis():
    field = ParameterField.from_coefficients(np.arange(12.0).reshape(3, 2, 2))
    assert field.spline.degrees == (2, 1, 1)
    p = np.random.default_rng(0).random((20, 3))
    assert field.basis(p) @ field.coefficients.ravel() == pytest.approx(field(p), abs=1e-12)


def test_constant_field_gives_constant_thickness():
    field = ParameterField.constant(0.27, (3, 3, 3))
    model = build_lattice(unit_cube(), (2, 2, 1), TileSpec("cross_axis"), field, compose_solids=False)
    for cell in model.cells:
        assert cell.spec.arm_thickness == pytest.approx(0.27, abs=1e-14)
        assert all(cell.spec.thickness_on(f) == pytest.approx(0.27, abs=1e-14) for f in FACES)


def test_step_field_bands():
    f = StepField((0.25, 0.5), (3.0, 2.0, 1.0), axis=1)
    assert f(np.array([[0.9, 0.1, 0.0], [0.0, 0.3, 0.5], [0.0, 0.75, 1.0]])).tolist() == [3.0, 2.0, 1.0]
    with pytest.raises(ValueError):
        StepField((0.5,), (1.0,))


# ---------------------------------------------------------------------------
# lattice construction


def test_identity_lattice_is_the_tile():
    spec = TileSpec("cross_axis", arm_thickness=0.25)
    model = build_lattice(unit_cube(), (1, 1, 1), spec)
    tile = make_cross_tile(spec)
    p = np.random.default_rng(1).random((200, 3))
    for piece, ref in zip(model.pieces(), tile.spline_set):
        assert np.abs(piece.evaluate(p) - ref.evaluate(p)).max() < 1e-12


def test_identity_lattice_rounded_within_fit_tolerance():
    # rounded arms are rational, so the polynomial fit only approximates them
    spec = TileSpec("cross_axis", arm_thickness=0.25, roundness=0.4)
    model = build_lattice(unit_cube(), (1, 1, 1), spec)
    tile = make_cross_tile(spec)
    p = np.random.default_rng(1).random((200, 3))
    tol = 1e-3 * unit_cube().bbox_diagonal()
    for piece, ref in zip(model.pieces(), tile.spline_set):
        assert np.linalg.norm(piece.evaluate(p) - ref.evaluate(p), axis=1).max() <= tol


def test_two_cells_share_arm_sections():
    model = build_lattice(blade_macro(), (2, 1, 1), TileSpec("cross_axis", arm_thickness=0.3))
    (gap,) = interface_gaps(model)
    assert gap.axis == 0
    assert gap.position_gap < 1e-6
    assert gap.angle_gap < 1e-4


def test_inverted_macro_rejected():
    flipped = trilinear_from_corners(CUBE_CORNERS * [-1, 1, 1])
    with pytest.raises(DegeneracyError):
        build_lattice(flipped, (1, 1, 1), TileSpec("cross_axis"))


def test_attach_faces_restricted_to_domain_boundary():
    spec = TileSpec("cross_axis", skin_thickness=0.05, attach_faces={"x0", "x1"})
    model = build_lattice(unit_cube(), (3, 1, 1), spec, compose_solids=False)
    assert [sorted(c.spec.attach_faces) for c in model.cells] == [["x0"], [], ["x1"]]


# ---------------------------------------------------------------------------
# hex meshes


def test_identity_hex_mesh():
    mesh = hex_mesh(unit_cube(), (2, 2, 2))
    assert len(mesh.vertices) == 27 and len(mesh.cells) == 8
    for c in range(8):
        corners = cell_corners(mesh, c)
        assert np.ptp(corners, axis=0) == pytest.approx([0.5, 0.5, 0.5])
    assert mesh.cell_jacobian_dets() == pytest.approx(np.full(8, 0.125))


def test_affine_hex_cells_congruent():
    A = np.array([[1.0, 0.3, 0.0], [0.1, 2.0, 0.2], [0.0, -0.4, 1.5]])
    macro = trilinear_from_corners(CUBE_CORNERS @ A.T + [1, 2, 3])
    mesh = hex_mesh(macro, (3, 2, 4))
    edges = np.array([cell_corners(mesh, c)[[1, 2, 4]] - cell_corners(mesh, c)[0] for c in range(len(mesh.cells))])
    assert np.abs(edges - edges[0]).max() < 1e-12


def test_twisted_macro_has_positive_jacobians():
    macro = blade_macro()
    mesh = hex_mesh(macro, (12, 5, 3))
    assert np.all(mesh.cell_jacobian_dets() > 0)
    g = (np.arange(12) + 0.5) / 12
    centres = np.stack(np.meshgrid(g, (np.arange(5) + 0.5) / 5, (np.arange(3) + 0.5) / 3, indexing="ij"), -1)
    assert np.all(np.linalg.det(macro.jacobian(centres.reshape(-1, 3))) > 0)


def test_hex_vertices_equal_macro_evaluation():
    macro = blade_macro()
    res = (4, 3, 2)
    mesh = hex_mesh(macro, res)
    axes = [np.linspace(0, 1, r + 1) for r in res]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
    ref = macro.evaluate(grid)
    # same set of points, exactly
    assert sorted(map(tuple, mesh.vertices)) == sorted(map(tuple, ref))
    for i in (0, 7, len(grid) - 1):
        assert np.array_equal(mesh.vertices[i], eval_volume(macro, *grid[i]))


# ---------------------------------------------------------------------------
# beam cells


def test_embed_identity_and_scaling():
    g = make_auxetic_cell(AUX).cell_graph
    same = embed_beam_cell(CUBE_CORNERS, g)
    assert np.abs(same.nodes - g.nodes).max() < 1e-15
    big = embed_beam_cell(2 * CUBE_CORNERS, g)
    assert np.abs(big.nodes - 2 * g.nodes).max() < 1e-15
    assert big.lengths() == pytest.approx(2 * g.lengths())
    assert np.array_equal(big.radii, g.radii)


def test_embed_sheared_cell_matches_trilinear_oracle():
    rng = np.random.default_rng(3)
    corners = CUBE_CORNERS + 0.15 * rng.normal(size=(8, 3))
    g = make_auxetic_cell(AUX).cell_graph
    out = embed_beam_cell(corners, g)
    ref = np.array([trilinear(corners, p) for p in g.nodes])
    assert np.abs(out.nodes - ref).max() < 1e-12


def test_embed_rejects_collapsed_cell():
    with pytest.raises(DegeneracyError):
        embed_beam_cell(CUBE_CORNERS * [1, 1, 0], make_auxetic_cell(AUX).cell_graph)


# ---------------------------------------------------------------------------
# welding


def test_shared_face_nodes_merge():
    g = make_auxetic_cell(AUX).cell_graph
    right = g.mapped(lambda p: p + [1.0, 0.0, 0.0])
    shared = len(set(map(tuple, np.round(g.nodes, 12))) & set(map(tuple, np.round(right.nodes, 12))))
    merged = merge_graphs([g, right], 1e-9)
    assert shared == 1  # the x1 side node
    assert len(merged.graph.nodes) == 2 * len(g.nodes) - shared


def test_disjoint_union_and_idempotence():
    g = make_auxetic_cell(AUX).cell_graph
    far = g.mapped(lambda p: p + [5.0, 0.0, 0.0])
    union = merge_graphs([g, far], 0.0).graph
    assert len(union.nodes) == 2 * len(g.nodes) and len(union.edges) == 2 * len(g.edges)
    twice = merge_graphs([g, g], 0.0).graph
    for a, b in zip(canonical_graph(twice), canonical_graph(g)):
        assert np.array_equal(a, b)


@settings(max_examples=20, deadline=None)
@given(perm=st.permutations(range(4)), seed=st.integers(0, 1000))
def test_merge_order_independent(perm, seed):
    rng = np.random.default_rng(seed)
    g = make_auxetic_cell(AUX).cell_graph
    offsets = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    graphs = [g.mapped(lambda p, o=o: p + o) for o in offsets]
    # shuffle node labels inside each graph as well
    relabeled = []
    for h in graphs:
        order = rng.permutation(len(h.nodes))
        inv = np.argsort(order)
        relabeled.append(BeamGraph(h.nodes[order], inv[h.edges], h.radii))
    a = merge_graphs(graphs, 1e-9).graph
    b = merge_graphs([relabeled[i] for i in perm], 1e-9).graph
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.edges, b.edges)
    assert np.array_equal(a.radii, b.radii)


# ---------------------------------------------------------------------------
# beam extraction


def test_single_strut_subdivision():
    g = BeamGraph([[0, 0, 0], [1, 0, 0]], [[0, 1]], [0.01])
    nodes, elems, radii = subdivide_graph(g, 4)
    assert len(nodes) == 5 and len(elems) == 4
    assert np.allclose(radii, 0.01)


def test_equal_area_radius_on_unit_cube():
    t = 0.2
    model = build_lattice(unit_cube(), (1, 1, 1), TileSpec("cross_axis", arm_thickness=t), compose_solids=False)
    beams = extract_beam_model(model, 2)
    assert np.allclose(np.pi * beams.radii**2, t**2, rtol=1e-12)


@pytest.mark.parametrize("grid", [(1, 1, 1), (3, 2, 2), (9, 4, 2)])
def test_cross_beam_counts(grid):
    model = build_lattice(blade_macro(), grid, TileSpec("cross_axis", arm_thickness=0.3), compose_solids=False)
    beams = extract_beam_model(model, 2)
    assert (len(beams.nodes), len(beams.elements)) == cross_counts(grid, 2)


@pytest.mark.parametrize("grid,axis", [((12, 5, 2), 0), ((2, 3, 4), 2)])
def test_auxetic_beam_counts(grid, axis):
    model = build_lattice(blade_macro(), grid, AUX, growth_axis=axis)
    beams = extract_beam_model(model, 2)
    assert (len(beams.nodes), len(beams.elements)) == auxetic_counts(grid, 2, axis)


def test_blade_beam_model_snapshot():
    runs = []
    for _ in range(2):
        model = build_lattice(blade_macro(), (12, 5, 2), AUX)
        b = extract_beam_model(model, 2)
        runs.append((b.nodes.copy(), b.elements.copy()))
    assert (len(runs[0][0]), len(runs[0][1])) == (2014, 2640)
    assert np.array_equal(runs[0][0], runs[1][0]) and np.array_equal(runs[0][1], runs[1][1])


def test_root_nodes_on_clamped_face():
    macro = blade_macro()
    model = build_lattice(macro, (3, 2, 2), TileSpec("cross_axis"), compose_solids=False)
    layout = beam_layout(model, 2)
    assert len(layout.root) == 2 * 2  # one face-centre node per root cell
    assert np.allclose(layout.node_params[layout.root, 0], 0.0)
    assert np.abs(layout.nodes[layout.root, 0]).max() < 1e-12  # root plane x = 0


def test_zero_elements_per_strut_rejected():
    model = build_lattice(unit_cube(), (1, 1, 1), TileSpec("cross_axis"), compose_solids=False)
    with pytest.raises(LatticeError):
        beam_layout(model, 0)


# ---------------------------------------------------------------------------
# volumes and surfaces


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), bump=st.floats(1e-6, 1e-4))
def test_volume_monotone_in_grading(seed, bump):
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.5e-4, 2e-4, size=(3, 2, 2))
    extra = bump * rng.random(size=(3, 2, 2))
    macro = trilinear_box(hi=(3e-3, 2e-3, 2e-3))
    v = []
    for c in (base, base + extra):
        field = ParameterField.from_coefficients(c, units="m")
        v.append(build_lattice(macro, (3, 2, 2), AUX, field, growth_axis=2).volume())
    assert v[1] >= v[0]


def test_solid_volume_monotone_in_grading():
    macro = blade_macro()
    vols = [
        build_lattice(macro, (2, 1, 1), TileSpec("cross_axis"), ParameterField.constant(t, (2, 2, 2))).volume()
        for t in (0.2, 0.25)
    ]
    assert vols[1] > vols[0]


def test_boundary_tessellation_is_closed_and_outward():
    macro = blade_macro()
    v, f = tessellate_boundary(macro, 6)
    tri = v[f]
    signed = np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6
    from bladelattice.tiles import spline_volume

    assert signed == pytest.approx(spline_volume(macro), rel=1e-2)
    assert boundary_surface(macro, "z1").evaluate(np.array([0.5, 0.5])) == pytest.approx(
        macro.evaluate(np.array([0.5, 0.5, 1.0]))
    )
