import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bladelattice.lattice import merge_graphs
from bladelattice.tiles import (
    DIAGONAL_STUB,
    FACES,
    THICK,
    THIN,
    BeamGraph,
    TileKind,
    TileParameterError,
    TileSpec,
    check_interface_compatibility,
    check_printability,
    diagonal_axis_points,
    diagonal_blend_length,
    edge_angles,
    face_center,
    face_normal,
    make_auxetic_cell,
    make_cross_tile,
    make_diagonal_tile,
    make_tile,
    mirrored,
)
from oracles import point_segment_distance

solid_specs = st.builds(
    TileSpec,
    kind=st.sampled_from([TileKind.CROSS_AXIS, TileKind.CROSS_DIAGONAL]),
    arm_thickness=st.floats(0.05, 0.45),
    roundness=st.floats(0.0, 1.0),
    skin_thickness=st.sampled_from([0.0, 0.05, 0.1]),
    attach_faces=st.sets(st.sampled_from(FACES), max_size=2),
)


def _face_section_area(tile, face, n=4000):
    """Shoelace area of the arm's end section on ``face`` from its sampled outline."""
    axis = "xyz".index(face[0])
    arm = tile.spline_set[tile.labels.index(f"arm:{face}")]
    s = np.linspace(0, 1, n // 4, endpoint=False)
    one, zero = np.ones_like(s), np.zeros_like(s)
    loop = np.concatenate(
        [np.c_[s, zero], np.c_[one, s], np.c_[1 - s, one], np.c_[zero, 1 - s]]
    )
    params = np.c_[np.ones(len(loop)), loop]
    pts = arm.evaluate(params)
    plane = [b for b in range(3) if b != axis]
    x, y = pts[:, plane[0]], pts[:, plane[1]]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))), pts


# ---------------------------------------------------------------------------
# cross tile


def test_square_arm_section_on_faces():
    tile = make_cross_tile(TileSpec("cross_axis", arm_thickness=0.2, roundness=0.0))
    for face in FACES:
        area, pts = _face_section_area(tile, face)
        axis = "xyz".index(face[0])
        others = [b for b in range(3) if b != axis]
        assert np.allclose(pts[:, axis], float(face[1]), atol=1e-15)
        assert np.abs(pts[:, others] - 0.5).max() == pytest.approx(0.1, abs=1e-12)
        assert area == pytest.approx(0.04, rel=1e-9)


def test_fully_rounded_section_is_inscribed_disk():
    tile = make_cross_tile(TileSpec("cross_axis", arm_thickness=0.2, roundness=1.0))
    area, pts = _face_section_area(tile, "x1")
    r = np.linalg.norm(pts[:, 1:] - 0.5, axis=1)
    assert np.abs(r - 0.1).max() < 1e-12
    assert area == pytest.approx(np.pi * 0.1**2, rel=1e-5)


def test_arm_thickness_out_of_range():
    with pytest.raises(TileParameterError):
        TileSpec("cross_axis", arm_thickness=0.6)


def test_spec_dict_round_trip():
    spec = TileSpec("cross_diagonal", arm_thickness=0.2, roundness=0.5, skin_thickness=0.05, attach_faces={"bottom"})
    assert TileSpec.from_dict(spec.to_dict()) == spec
    assert spec.attach_faces == frozenset({"z0"})


@pytest.mark.parametrize("bad", [{"roundness": 1.5}, {"skin_thickness": 0.3}, {"reentrant_angle": 90.0}])
def test_spec_validation(bad):
    with pytest.raises(TileParameterError):
        TileSpec("cross_axis", **bad)


def test_steep_reentrant_angle_rejected():
    with pytest.raises(TileParameterError):
        TileSpec("auxetic_double_v", reentrant_angle=70.0)


# ---------------------------------------------------------------------------
# diagonal tile


def test_rounded_diagonal_keeps_axes_away_from_kinks():
    sharp = make_diagonal_tile(TileSpec("cross_diagonal", arm_thickness=THIN, roundness=0.0))
    rounded = make_diagonal_tile(TileSpec("cross_diagonal", arm_thickness=THIN, roundness=0.5))
    kinks = np.array([face_center(f) + DIAGONAL_STUB * face_normal(f) for f in FACES])
    segments = [(s.start, s.end) for s in sharp.struts]
    reach = 2 * 0.5 * THIN
    # every rounded axis point off the sharp axes lies near a kink
    pts = diagonal_axis_points(rounded, 120)
    off = [p for p in pts if min(point_segment_distance(p, a, b) for a, b in segments) > 1e-9]
    assert off, "rounding should move some axis points"
    kink_dist = np.array([np.linalg.norm(kinks - p, axis=1).min() for p in off])
    assert kink_dist.max() <= reach
    # sharp-axis points away from kinks are also on the rounded axis
    dense = diagonal_axis_points(rounded, 2000)
    for p in diagonal_axis_points(sharp, 60):
        if np.linalg.norm(kinks - p, axis=1).min() > reach:
            assert np.linalg.norm(dense - p, axis=1).min() < 1e-3
    assert diagonal_blend_length(rounded.spec) == pytest.approx(0.5 * THIN)


@pytest.mark.parametrize("roundness", [0.0, 0.5])
def test_thick_diagonal_has_more_material(roundness):
    thin = make_diagonal_tile(TileSpec("cross_diagonal", arm_thickness=THIN, roundness=roundness))
    thick = make_diagonal_tile(TileSpec("cross_diagonal", arm_thickness=THICK, roundness=roundness))
    assert thick.volume() > thin.volume()


def test_skin_only_on_attached_face():
    tile = make_diagonal_tile(TileSpec("cross_diagonal", skin_thickness=0.05, attach_faces={"bottom"}))
    skins = [lab for lab in tile.labels if lab.startswith("skin")]
    assert skins == ["skin:z0"]
    rep = check_interface_compatibility(tile).by_face()
    assert rep["z0"].contact == "full"


def test_diagonal_tile_interfaces_pass():
    for r in (0.0, 0.5):
        rep = check_interface_compatibility(make_diagonal_tile(TileSpec("cross_diagonal", roundness=r)))
        assert rep.passed
        assert all(f.contact == "arm" for f in rep.faces)


# ---------------------------------------------------------------------------
# interface checks


def test_cross_tile_passes_all_faces():
    rep = check_interface_compatibility(make_cross_tile(TileSpec("cross_axis", arm_thickness=0.3, roundness=0.5)))
    assert rep.passed and len(rep.faces) == 6


def test_translated_tile_fails_with_centroid_error():
    tile = make_cross_tile(TileSpec("cross_axis")).mapped(lambda p: p + [0.05, 0.0, 0.0])
    rep = check_interface_compatibility(tile)
    assert not rep.passed
    assert rep.max_centroid_error == pytest.approx(0.05, abs=1e-12)


# ---------------------------------------------------------------------------
# auxetic cell and printability


def _aux(**kw):
    return make_auxetic_cell(TileSpec("auxetic_double_v", **kw)).cell_graph


def _node_set(nodes):
    return sorted(map(tuple, np.round(nodes, 12)))


def test_auxetic_printability_needs_vertical_strut():
    with_strut = check_printability(_aux(include_vertical_strut=True), (0, 0, 1), 60.0)
    without = check_printability(_aux(include_vertical_strut=False), (0, 0, 1), 60.0)
    assert with_strut.passed
    assert not without.passed
    assert without.hanging_nodes == [1]


@pytest.mark.parametrize("axis", [0, 1])
def test_auxetic_mirror_symmetry(axis):
    g = _aux()
    assert _node_set(mirrored(g, axis).nodes) == _node_set(g.nodes)


def test_stacked_cells_share_interface_nodes_exactly():
    g = _aux()
    upper = g.mapped(lambda p: p + [0.0, 0.0, 1.0])
    shared = set(map(tuple, g.nodes)) & set(map(tuple, upper.nodes))
    assert shared == {(0.5, 0.5, 1.0)}
    merged = merge_graphs([g, upper], 0.0)
    assert len(merged.graph.nodes) == 2 * len(g.nodes) - 1


def test_printability_angles():
    nodes = np.array([[0, 0, 0], [0, 0, 1], [np.sin(np.radians(61)), 0, np.cos(np.radians(61))], [1, 0, 0]], float)
    g = BeamGraph(nodes, [[0, 1], [0, 2], [0, 3]], [1e-4] * 3)
    ang = edge_angles(g, (0, 0, 1))
    assert ang[0] == pytest.approx(0.0, abs=1e-12)
    rep = check_printability(BeamGraph(nodes[:3], [[0, 1], [0, 2]], [1e-4] * 2), (0, 0, 1), 60.0)
    assert [e for e, _ in rep.violations] == [1]
    assert rep.violations[0][1] == pytest.approx(61.0, abs=0.01)
    flat = BeamGraph(nodes[[0, 3]], [[0, 1]], [1e-4])
    assert check_printability(flat, (0, 0, 1), 90.0).violations == []


# ---------------------------------------------------------------------------
# properties


def _samples(tile, n=64, seed=0):
    p = np.random.default_rng(seed).random((n, 3))
    return np.concatenate([piece.evaluate(p) for piece in tile.spline_set])


@settings(max_examples=25, deadline=None)
@given(spec=solid_specs)
def test_solid_tiles_stay_in_unit_cube(spec):
    tile = make_tile(spec)
    pts = _samples(tile)
    assert pts.min() >= -1e-9 and pts.max() <= 1 + 1e-9
    for piece in tile.spline_set:
        lo, hi = piece.bbox()
        assert lo.min() >= -1e-9 and hi.max() <= 1 + 1e-9


@settings(max_examples=20, deadline=None)
@given(spec=solid_specs)
def test_solid_tiles_pass_interface_check(spec):
    assert check_interface_compatibility(make_tile(spec)).passed


@settings(max_examples=15, deadline=None)
@given(
    kind=st.sampled_from([TileKind.CROSS_AXIS, TileKind.CROSS_DIAGONAL]),
    t=st.floats(0.05, 0.4),
    dt=st.floats(0.01, 0.04),
    roundness=st.floats(0.0, 1.0),
)
def test_volume_monotone_in_thickness(kind, t, dt, roundness):
    a = make_tile(TileSpec(kind, arm_thickness=t, roundness=roundness)).volume()
    b = make_tile(TileSpec(kind, arm_thickness=t + dt, roundness=roundness)).volume()
    assert b > a


@settings(max_examples=15, deadline=None)
@given(r=st.floats(1e-5, 1e-3), dr=st.floats(1e-6, 1e-4), angle=st.floats(20.0, 60.0))
def test_auxetic_volume_monotone_in_radius(r, dr, angle):
    a = _aux(strut_radius=r, reentrant_angle=angle).volume()
    b = _aux(strut_radius=r + dr, reentrant_angle=angle).volume()
    assert b > a


def _piece_signature(piece):
    pts = np.round(piece.control.reshape(-1, 3), 9)
    w = np.ones(len(pts)) if piece.weights is None else np.round(piece.weights.ravel(), 9)
    return tuple(sorted(map(tuple, np.c_[pts, w])))


@settings(max_examples=15, deadline=None)
@given(spec=solid_specs.filter(lambda s: not s.attach_faces), axis=st.sampled_from([0, 1, 2]))
def test_solid_tiles_reflection_symmetric(spec, axis):
    tile = make_tile(spec)

    def flip(p):
        q = p.copy()
        q[:, axis] = 1.0 - q[:, axis]
        return q

    original = sorted(_piece_signature(p) for p in tile.spline_set)
    reflected = sorted(_piece_signature(p) for p in tile.mapped(flip).spline_set)
    assert original == reflected
