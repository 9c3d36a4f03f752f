import math

import numpy as np
import pytest

from feedtrap.errors import MeshError
from feedtrap.geometry import (
    Rotation,
    angular_distance,
    convex_hull,
    load_mesh,
    mass_properties,
    render_silhouette,
)
from meshes import CUBE_OBJ, box_mesh, cube_mesh, l_prism_mesh, tetra_mesh


def cube_stl_bytes() -> bytes:
    mesh = cube_mesh()
    n = len(mesh.triangles)
    out = bytearray(b"\x00" * 80)
    out += np.uint32(n).tobytes()
    for tri in mesh.triangles:
        v = mesh.vertices[tri]
        normal = np.cross(v[1] - v[0], v[2] - v[0])
        normal = normal / np.linalg.norm(normal)
        out += normal.astype("<f4").tobytes()
        out += v.astype("<f4").tobytes()
        out += b"\x00\x00"
    return bytes(out)


# ---------------------------------------------------------------------------
# load_mesh
# ---------------------------------------------------------------------------

def test_load_obj_cube():
    mesh = load_mesh(CUBE_OBJ.encode(), "obj-ascii")
    assert len(mesh.vertices) == 8
    assert len(mesh.triangles) == 12
    # vertex order preserved from file
    assert np.allclose(mesh.vertices[0], [0, 0, 0])
    assert np.allclose(mesh.vertices[6], [1, 1, 1])


def test_load_stl_cube_matches_obj():
    obj = load_mesh(CUBE_OBJ.encode(), "obj-ascii")
    stl = load_mesh(cube_stl_bytes(), "stl-binary")
    assert len(stl.triangles) == 12
    assert len(stl.vertices) == 36  # duplicated per triangle
    assert mass_properties(stl).volume == pytest.approx(mass_properties(obj).volume)
    assert np.allclose(mass_properties(stl).com, mass_properties(obj).com)


def test_obj_zero_index_rejected():
    bad = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n"
    with pytest.raises(MeshError, match="out of range"):
        load_mesh(bad.encode(), "obj-ascii")


def test_obj_quad_faces_triangulated():
    quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4\nf 1 2 5\nf 2 3 5\nf 3 4 5\nf 4 1 5\n"
    mesh = load_mesh(quad.encode(), "obj-ascii")
    assert len(mesh.triangles) == 6  # quad fans into 2


def test_obj_malformed_vertex():
    with pytest.raises(MeshError, match="line 1"):
        load_mesh(b"v 0 0\nf 1 1 1\n", "obj-ascii")


def test_obj_empty_mesh():
    with pytest.raises(MeshError, match="empty mesh"):
        load_mesh(b"# nothing here\n", "obj-ascii")


def test_stl_truncated():
    with pytest.raises(MeshError):
        load_mesh(cube_stl_bytes()[:100], "stl-binary")


def test_unknown_format():
    with pytest.raises(ValueError):
        load_mesh(b"", "ply")


# ---------------------------------------------------------------------------
# convex_hull
# ---------------------------------------------------------------------------

def test_hull_cube_merged_faces():
    hull = convex_hull(cube_mesh())
    assert len(hull.vertices) == 8
    assert len(hull.faces) == 6
    for face in hull.faces:
        assert len(face.vertex_loop) == 4
        assert np.linalg.norm(face.normal) == pytest.approx(1.0, abs=1e-12)


def test_hull_interior_point_ignored():
    mesh = cube_mesh()
    verts = np.vstack([mesh.vertices, [[0.5, 0.5, 0.5]]])
    tris = mesh.triangles  # interior vertex unreferenced is fine for hulling
    augmented = type(mesh)(verts, tris)
    hull = convex_hull(augmented)
    assert len(hull.vertices) == 8
    assert len(hull.faces) == 6


def test_hull_tetrahedron():
    hull = convex_hull(tetra_mesh())
    assert len(hull.faces) == 4
    assert len(hull.vertices) == 4


def test_hull_degenerate_input():
    flat = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 4 3\n"
    mesh = load_mesh(flat.encode(), "obj-ascii")
    with pytest.raises(MeshError, match="degenerate"):
        convex_hull(mesh)


def test_hull_loops_ccw_and_planar():
    hull = convex_hull(l_prism_mesh())
    diam = hull.diameter
    for face in hull.faces:
        pts = hull.vertices[face.vertex_loop]
        # planarity
        assert np.abs(pts @ face.normal - face.offset).max() < 1e-7 * diam
        # CCW about the outward normal: signed area positive
        centroid = pts.mean(axis=0)
        area_vec = np.zeros(3)
        for i in range(len(pts)):
            a = pts[i] - centroid
            b = pts[(i + 1) % len(pts)] - centroid
            area_vec += np.cross(a, b)
        assert np.dot(area_vec, face.normal) > 0


def test_hull_containment_random_clouds():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        pts = rng.normal(size=(rng.integers(8, 40), 3))
        mesh_like = type(cube_mesh())(pts, np.array([[0, 1, 2]]))
        hull = convex_hull(mesh_like)
        tol = 1e-7 * hull.diameter
        for face in hull.faces:
            assert (pts @ face.normal - face.offset).max() <= tol


# ---------------------------------------------------------------------------
# mass_properties
# ---------------------------------------------------------------------------

def test_mass_cube():
    mp = mass_properties(cube_mesh())
    assert mp.volume == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(mp.com, [0.5, 0.5, 0.5], atol=1e-12)


def test_mass_scaled_cube():
    mesh = box_mesh(2.0, 2.0, 2.0)
    assert mass_properties(mesh).volume == pytest.approx(8.0, abs=1e-12)


def test_mass_two_cube_union():
    # two unit cubes sharing the x=1 face; hand integration gives volume 2
    # and the com at the average of the two cube centers
    mesh = box_mesh(2.0, 1.0, 1.0)
    mp = mass_properties(mesh)
    assert mp.volume == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(mp.com, [1.0, 0.5, 0.5], atol=1e-12)


def test_mass_l_prism():
    # cross-section area 3, extruded 1: volume 3; com by two-box decomposition:
    # box A [0,2]x[0,1]x[0,1] and box B [0,1]x[0,1]x[1,2]
    mp = mass_properties(l_prism_mesh())
    assert mp.volume == pytest.approx(3.0, abs=1e-12)
    com_a, com_b = np.array([1.0, 0.5, 0.5]), np.array([0.5, 0.5, 1.5])
    expect = (2.0 * com_a + 1.0 * com_b) / 3.0
    assert np.allclose(mp.com, expect, atol=1e-12)


def test_mass_open_mesh_rejected():
    mesh = cube_mesh()
    open_mesh = type(mesh)(mesh.vertices, mesh.triangles[:-1])
    with pytest.raises(MeshError, match="open mesh"):
        mass_properties(open_mesh)


def test_mass_inverted_winding_rejected():
    mesh = cube_mesh()
    flipped = type(mesh)(mesh.vertices, mesh.triangles[:, [0, 2, 1]])
    with pytest.raises(MeshError, match="negative volume|inverted"):
        mass_properties(flipped)


def test_mass_translation_equivariance():
    rng = np.random.default_rng(3)
    mesh = l_prism_mesh()
    base = mass_properties(mesh)
    for _ in range(20):
        t = rng.normal(size=3) * 10
        mp = mass_properties(mesh.translated(t))
        assert mp.volume == pytest.approx(base.volume, rel=1e-9)
        assert np.allclose(mp.com, base.com + t, atol=1e-9 * (1 + np.abs(t).max()))


# ---------------------------------------------------------------------------
# angular_distance
# ---------------------------------------------------------------------------

def test_angular_distance_identity():
    q = Rotation.from_axis_angle([0.3, 1.0, -0.2], 1.1)
    assert angular_distance(q, q) == 0.0


def test_angular_distance_quarter_turn():
    a = Rotation.identity()
    b = Rotation.from_axis_angle([0, 0, 1], math.pi / 2)
    assert angular_distance(a, b) == pytest.approx(math.pi / 2, abs=1e-12)


def test_angular_distance_double_cover():
    q = Rotation.from_axis_angle([1, 2, 3], 0.7)
    neg = Rotation(-q.w, -q.x, -q.y, -q.z)
    assert angular_distance(q, neg) == 0.0


def test_angular_distance_metric_properties():
    rng = np.random.default_rng(11)
    quats = rng.normal(size=(3000, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    rots = [Rotation.from_array(q, normalize=False) for q in quats]
    for i in range(1000):
        a, b, c = rots[3 * i], rots[3 * i + 1], rots[3 * i + 2]
        dab, dba = angular_distance(a, b), angular_distance(b, a)
        assert dab == pytest.approx(dba, abs=1e-12)
        assert 0.0 <= dab <= math.pi + 1e-12
        assert angular_distance(a, c) <= dab + angular_distance(b, c) + 1e-9
    assert angular_distance(rots[0], rots[0]) <= 1e-9


# ---------------------------------------------------------------------------
# render_silhouette
# ---------------------------------------------------------------------------

def test_silhouette_cube_footprint():
    mask = render_silhouette(cube_mesh(), Rotation.identity(), (0, 0, 0), 64, 32.0)
    rows = np.where(mask.bits.any(axis=1))[0]
    cols = np.where(mask.bits.any(axis=0))[0]
    assert abs(len(rows) - 32) <= 1 and abs(len(cols) - 32) <= 1
    # footprint is a filled rectangle
    assert mask.count() == len(rows) * len(cols)


def test_silhouette_rotated_cube_area():
    # rotation about z moves the cube center to (0, sqrt(2)/2); recenter it
    pose = Rotation.from_axis_angle([0, 0, 1], math.pi / 4)
    mask = render_silhouette(cube_mesh(), pose, (0.0, -math.sqrt(2) / 2, 0), 64, 32.0)
    assert abs(mask.count() - 32 * 32) <= 0.02 * 32 * 32


def test_silhouette_out_of_frame():
    with pytest.raises(MeshError, match="out of frame"):
        render_silhouette(cube_mesh(), Rotation.identity(), (5.0, 0, 0), 64, 32.0)


def test_silhouette_translation_invariance():
    # whole-pixel offsets with a power-of-two scale shift the mask bitwise
    ppm = 32.0
    base = render_silhouette(cube_mesh(), Rotation.identity(), (-0.5, -0.5, 0), 64, ppm)
    for dx_px, dy_px in [(3, 0), (0, 4), (-5, 2)]:
        off = (-0.5 + dx_px / ppm, -0.5 + dy_px / ppm, 0.0)
        shifted = render_silhouette(cube_mesh(), Rotation.identity(), off, 64, ppm)
        rolled = np.roll(np.roll(base.bits, -dy_px, axis=0), dx_px, axis=1)
        assert np.array_equal(shifted.bits, rolled)


def test_silhouette_resolution_floor():
    with pytest.raises(ValueError):
        render_silhouette(cube_mesh(), Rotation.identity(), (0, 0, 0), 8, 4.0)


def test_pgm_export():
    mask = render_silhouette(cube_mesh(), Rotation.identity(), (0, 0, 0), 64, 32.0)
    pgm = mask.to_pgm()
    assert pgm.startswith(b"P5\n64 64\n255\n")
    assert len(pgm) == len(b"P5\n64 64\n255\n") + 64 * 64


def test_rotation_norm_validated():
    with pytest.raises(ValueError):
        Rotation(1.0, 1.0, 0.0, 0.0)
