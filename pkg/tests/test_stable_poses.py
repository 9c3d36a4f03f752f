import logging
import math

import numpy as np
import pytest

from feedtrap.geometry import (
    Rotation,
    angular_distance,
    convex_hull,
    mass_properties,
    random_rotations,
)
from feedtrap.stable_poses import (
    PoseSet,
    Settler,
    TrackConfig,
    cluster_rotations,
    enumerate_resting_faces,
    estimate_priors_solid_angle,
    identify_stable_poses,
    settle,
)
from meshes import box_mesh, cone_mesh, cube_mesh, icosphere_mesh, spire_mesh, tetra_mesh


@pytest.fixture(scope="module")
def cube_setup():
    mesh = cube_mesh()
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    return mesh, hull, com


@pytest.fixture(scope="module")
def cube_settler(cube_setup):
    _, hull, com = cube_setup
    return Settler(hull, com, TrackConfig())


# ---------------------------------------------------------------------------
# enumerate_resting_faces
# ---------------------------------------------------------------------------

def test_cube_all_faces_resting(cube_setup):
    _, hull, com = cube_setup
    assert enumerate_resting_faces(hull, com, 1e-3) == list(range(6))


def test_tall_box_all_faces_resting():
    mesh = box_mesh(1.0, 1.0, 10.0)
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    assert len(enumerate_resting_faces(hull, com, 1e-3)) == 6


def test_cone_lies_on_its_side():
    # a uniform solid cone's COM projects inside every slant facet (pencil
    # on its side), so all faces are resting faces
    mesh = cone_mesh(n_facets=16, radius=0.5, height=3.0)
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    assert len(enumerate_resting_faces(hull, com, 1e-3)) == len(hull.faces)


def test_spire_nose_facets_excluded():
    # prism body with a tall cone nose: the COM projects outside the narrow
    # nose facets, so they are excluded from the resting set
    mesh = spire_mesh(n_facets=16)
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    resting = enumerate_resting_faces(hull, com, 1e-3)

    # independent per-facet oracle: project the COM onto each face plane and
    # test polygon membership directly from the hull data
    expected = []
    for fi, face in enumerate(hull.faces):
        n = face.normal
        proj = com - (np.dot(n, com) - face.offset) * n
        loop = hull.vertices[face.vertex_loop]
        margins = []
        for k in range(len(loop)):
            a, b = loop[k], loop[(k + 1) % len(loop)]
            edge = b - a
            margins.append(np.dot(np.cross(edge, proj - a), n) / np.linalg.norm(edge))
        if min(margins) >= 1e-3:
            expected.append(fi)
    assert resting == expected

    nose = [fi for fi, f in enumerate(hull.faces)
            if f.normal[2] > 0.1 and len(f.vertex_loop) == 3]
    assert nose, "spire hull should have triangular nose facets"
    assert not set(nose) & set(resting)
    base = [fi for fi in resting if hull.faces[fi].normal[2] < -0.9]
    assert len(base) == 1


def test_margin_excludes_marginal_faces():
    # resting footprints involving the 0.2 side leave the COM only 0.1 from
    # an edge; a margin above that excludes those four faces
    mesh = box_mesh(0.2, 0.6, 1.0)
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    assert len(enumerate_resting_faces(hull, com, 0.15)) == 2
    assert len(enumerate_resting_faces(hull, com, 1e-3)) == 6


# ---------------------------------------------------------------------------
# settle
# ---------------------------------------------------------------------------

def test_settle_cube_small_perturbation(cube_settler):
    start = Rotation.from_axis_angle([1, 0, 0], math.radians(5))
    settled = cube_settler.settle(start)
    assert angular_distance(settled, Rotation.identity()) < 1e-9


def test_settle_is_projection(cube_settler):
    rng = np.random.default_rng(5)
    for q in random_rotations(50, rng):
        start = Rotation.from_array(q, normalize=False)
        once = cube_settler.settle(start)
        key_once = cube_settler.settle_key(start)
        assert cube_settler.settle(once) == once
        assert cube_settler.settle_key(once) == key_once


def test_settle_edge_balance_tips_both_ways(cube_settler):
    # cube balanced on an edge at 45 degrees; a 1e-6 nudge decides the face
    plus = Rotation.from_axis_angle([1, 0, 0], math.pi / 4 + 1e-6)
    minus = Rotation.from_axis_angle([1, 0, 0], math.pi / 4 - 1e-6)
    face_plus = cube_settler.settle_key(plus)[0]
    face_minus = cube_settler.settle_key(minus)[0]
    assert face_plus != face_minus
    d = angular_distance(cube_settler.settle(plus), cube_settler.settle(minus))
    assert d == pytest.approx(math.pi / 2, abs=1e-9)


def test_settle_already_settled_unchanged(cube_settler):
    pose = cube_settler.canonical_pose(2, 1)
    assert cube_settler.settle(pose) == pose


def test_settle_function_wrapper(cube_setup):
    mesh, hull, com = cube_setup
    start = Rotation.from_axis_angle([0, 1, 0], 0.1)
    direct = settle(mesh, hull, com, TrackConfig(), start)
    via_class = Settler(hull, com, TrackConfig()).settle(start)
    assert direct == via_class


def test_settle_tips_unstable_drop_face():
    # drops that pierce a spire nose facet must tip off it; every settled
    # support face is a genuine resting face
    mesh = spire_mesh(n_facets=16)
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    s = Settler(hull, com, TrackConfig())
    resting = set(enumerate_resting_faces(hull, com, 0.0))
    rng = np.random.default_rng(11)
    keys = s.settle_keys(random_rotations(200, rng))
    assert {face for face, _ in keys} <= resting
    nose = {fi for fi, f in enumerate(hull.faces)
            if f.normal[2] > 0.1 and len(f.vertex_loop) == 3}
    assert not {face for face, _ in keys} & nose


def test_wall_side_mirrors_pose_count(cube_setup):
    mesh, _, _ = cube_setup
    left = identify_stable_poses(mesh, TrackConfig(wall_side="left"), 2000, seed=3)
    right = identify_stable_poses(mesh, TrackConfig(wall_side="right"), 2000, seed=3)
    assert len(left) == len(right) == 24


# ---------------------------------------------------------------------------
# cluster_rotations
# ---------------------------------------------------------------------------

def test_cluster_two_far_groups():
    a = [Rotation.from_axis_angle([0, 0, 1], 0.01 * k) for k in range(3)]
    b = [Rotation.from_axis_angle([0, 0, 1], math.pi / 2 + 0.01 * k) for k in range(3)]
    graph = cluster_rotations(a + b, threshold=math.radians(10))
    assert len(graph.components) == 2
    assert graph.components[0] == (0, 1, 2)
    assert graph.components[1] == (3, 4, 5)


def test_cluster_singleton():
    graph = cluster_rotations([Rotation.identity()], threshold=0.1)
    assert graph.components == ((0,),)
    assert len(graph.edges) == 0


def test_cluster_chain_transitivity():
    # 9 rotations spaced 5 degrees apart span 40 degrees; threshold 10
    # degrees chains them into one component
    rots = [Rotation.from_axis_angle([0, 0, 1], math.radians(5 * k)) for k in range(9)]
    graph = cluster_rotations(rots, threshold=math.radians(10))
    assert len(graph.components) == 1


def test_cluster_matches_bruteforce_union_find():
    rng = np.random.default_rng(17)
    quats = random_rotations(300, rng)
    rots = [Rotation.from_array(q, normalize=False) for q in quats]
    threshold = 0.5
    graph = cluster_rotations(rots, threshold)

    # independent O(n^2) union-find oracle
    parent = list(range(len(rots)))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i in range(len(rots)):
        for j in range(i + 1, len(rots)):
            if angular_distance(rots[i], rots[j]) < threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    oracle: dict[int, list[int]] = {}
    for i in range(len(rots)):
        oracle.setdefault(find(i), []).append(i)
    expected = tuple(tuple(oracle[r]) for r in sorted(oracle))
    assert graph.components == expected


def test_cluster_validates_inputs():
    with pytest.raises(ValueError):
        cluster_rotations([], 0.1)
    with pytest.raises(ValueError):
        cluster_rotations([Rotation.identity()], 0.0)


# ---------------------------------------------------------------------------
# identify_stable_poses
# ---------------------------------------------------------------------------

def test_cube_24_stable_poses(cube_setup):
    mesh, _, _ = cube_setup
    poses = identify_stable_poses(mesh, TrackConfig(), n_samples=10_000, seed=0)
    assert len(poses) == 24


def test_cube_priors_uniform(cube_setup):
    mesh, _, _ = cube_setup
    poses = identify_stable_poses(mesh, TrackConfig(), n_samples=10_000, seed=0)
    assert np.abs(poses.priors * 24 - 1.0).max() < 0.2
    assert poses.priors.sum() == pytest.approx(1.0, abs=1e-9)


def test_representatives_are_settle_fixed_points(cube_setup):
    mesh, hull, com = cube_setup
    track = TrackConfig()
    poses = identify_stable_poses(mesh, track, n_samples=1000, seed=2)
    settler = Settler(hull, com, track)
    for p in poses.poses:
        assert settler.settle(p.representative) == p.representative
        assert settler.settle_key(p.representative) == (p.support_face, p.wall_edge)


def test_icosphere_single_rolling_cluster():
    mesh = icosphere_mesh(subdivisions=3)
    poses = identify_stable_poses(mesh, TrackConfig(), n_samples=30_000,
                                  threshold=0.2, seed=0)
    assert len(poses) == 1
    assert poses.poses[0].prior == pytest.approx(1.0)


def test_identify_requires_min_samples(cube_setup):
    mesh, _, _ = cube_setup
    with pytest.raises(ValueError):
        identify_stable_poses(mesh, TrackConfig(), n_samples=50)


def test_pose_set_json_roundtrip(cube_setup):
    mesh, _, _ = cube_setup
    poses = identify_stable_poses(mesh, TrackConfig(), n_samples=1000, seed=4,
                                  part_id="cube")
    text = poses.to_json()
    back = PoseSet.from_json(text)
    assert back.part_id == "cube"
    assert len(back) == len(poses)
    assert back.to_json() == text
    for a, b in zip(poses.poses, back.poses):
        assert a.id == b.id and a.prior == b.prior
        assert angular_distance(a.representative, b.representative) < 1e-9


def test_pose_set_validates_priors():
    pose = Settler(convex_hull(cube_mesh()), [0.5, 0.5, 0.5], TrackConfig()).canonical_pose(0, 0)
    from feedtrap.stable_poses import StablePose
    with pytest.raises(ValueError):
        PoseSet(
            poses=(StablePose(id=1, representative=pose, support_face=0, wall_edge=0, prior=0.4),),
            part_id="x",
        )


# ---------------------------------------------------------------------------
# estimate_priors_solid_angle
# ---------------------------------------------------------------------------

def test_solid_angle_cube_uniform(cube_setup):
    _, hull, com = cube_setup
    priors = estimate_priors_solid_angle(hull, com)
    assert len(priors) == 6
    assert np.allclose(priors, 1.0 / 6.0, atol=1e-12)


def test_solid_angle_tetrahedron_uniform():
    mesh = tetra_mesh()
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    priors = estimate_priors_solid_angle(hull, com)
    assert np.allclose(priors, 0.25, atol=1e-12)


def test_solid_angle_tall_box_ordering():
    mesh = box_mesh(1.0, 1.0, 4.0)
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    resting = enumerate_resting_faces(hull, com, 1e-3)
    priors = estimate_priors_solid_angle(hull, com)
    by_face = dict(zip(resting, priors))
    large = [f for f in resting if abs(hull.faces[f].normal[2]) < 0.5]  # side faces 1x4
    small = [f for f in resting if abs(hull.faces[f].normal[2]) > 0.5]  # end faces 1x1
    assert min(by_face[f] for f in large) > max(by_face[f] for f in small)

    # closed-form oracle: solid angle of a w x h rectangle seen from distance
    # d over its center is 4*arctan(w*h / (2d*sqrt(4d^2 + w^2 + h^2)))
    def rect_solid_angle(w, h, d):
        return 4 * math.atan((w * h) / (2 * d * math.sqrt(4 * d * d + w * w + h * h)))

    omega_small = rect_solid_angle(1.0, 1.0, 2.0)  # 1x1 end at distance 2
    omega_large = rect_solid_angle(1.0, 4.0, 0.5)  # 1x4 side at distance 0.5
    total = 2 * omega_small + 4 * omega_large
    assert by_face[small[0]] == pytest.approx(omega_small / total, rel=1e-9)
    assert by_face[large[0]] == pytest.approx(omega_large / total, rel=1e-9)


def test_solid_angles_of_all_faces_sum_to_4pi(cube_setup):
    from feedtrap.stable_poses import _face_solid_angle
    _, hull, com = cube_setup
    total = sum(_face_solid_angle(hull, fi, com) for fi in range(len(hull.faces)))
    assert total == pytest.approx(4 * math.pi, rel=1e-12)


# ---------------------------------------------------------------------------
# determinism and cross-checks
# ---------------------------------------------------------------------------

def test_identify_deterministic(cube_setup):
    mesh, _, _ = cube_setup
    a = identify_stable_poses(mesh, TrackConfig(), n_samples=2000, seed=9)
    b = identify_stable_poses(mesh, TrackConfig(), n_samples=2000, seed=9)
    assert a.to_json() == b.to_json()


def test_track_config_validation():
    with pytest.raises(ValueError):
        TrackConfig(wall_side="up")
    with pytest.raises(ValueError):
        TrackConfig(surface_tilt=1.0)
    with pytest.raises(ValueError):
        TrackConfig(gravity=(0, 0, 9.82))


def test_com_height_decreases_along_tip_chains():
    # the spire nose facets exercise real tip chains; verify monotone heights
    mesh = spire_mesh(n_facets=12)
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    s = Settler(hull, com, TrackConfig())
    chains = 0
    for fi in range(len(hull.faces)):
        f = fi
        while not s._faces[f].stable:
            nxt = s._faces[f].tip_face
            assert s._faces[nxt].height <= s._faces[f].height + 1e-9
            f = nxt
            chains += 1
    assert chains > 0
