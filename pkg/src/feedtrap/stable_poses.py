"""Stable resting poses of a part on a flat track pressed against a wall.

The settling model is quasi-static and single-part. Stage 1 drops the part
onto the hull face pierced by the downward ray from the center of mass, then
tips it over support-polygon edges until the COM projects inside the support
face. Stage 2 presses the part's top-down silhouette hull against the wall
line and pivots it about contact vertices until a silhouette edge lies flush
with the COM backed up behind it. Every basin of attraction therefore maps to
a discrete (support face, wall edge) pair with one canonical representative
rotation, which makes settling outputs exactly reproducible.

Conventions: the track surface is the plane z = 0, parts convey along +x, +y
is the operator's left. `wall_side = "left"` puts the wall on the +y side
(parts pressed toward +y); `"right"` presses toward -y. The surface tilt only
selects which side the parts are pressed to; its magnitude is ignored under
the small-angle assumption.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError
from .geometry import (
    ConvexHull,
    Rotation,
    TriMesh,
    _quat_canonical_sign,
    _quat_conj,
    _quat_from_axis_angle,
    _quat_mul,
    _quat_rotate,
    _quat_rotate_many,
    convex_hull,
    mass_properties,
    random_rotations,
    rotation_between,
)

logger = logging.getLogger(__name__)

_DOWN = np.array([0.0, 0.0, -1.0])
_FLUSH_EPS = 1e-9
_MAX_TIPS = 1000

DEFAULT_CLUSTER_THRESHOLD = 0.1  # radians
DEFAULT_STABILITY_MARGIN = 1e-3  # meters


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrackConfig:
    """Feeding track: flat surface, slight tilt pressing parts to one wall."""

    wall_side: str = "right"
    surface_tilt: float = 0.05
    gravity: tuple[float, float, float] = (0.0, 0.0, -9.82)

    def __post_init__(self):
        if self.wall_side not in ("left", "right"):
            raise ValueError(f"wall_side must be 'left' or 'right', got {self.wall_side!r}")
        if not 0.0 <= self.surface_tilt < math.pi / 8:
            raise ValueError("surface_tilt must be in [0, pi/8)")
        g = np.asarray(self.gravity, dtype=float)
        if not np.all(np.isfinite(g)) or g[2] >= 0:
            raise ValueError("gravity must be finite with a negative z component")

    @property
    def press_direction(self) -> np.ndarray:
        """Unit in-plane direction the tilt pushes parts (toward the wall)."""
        return np.array([0.0, 1.0]) if self.wall_side == "left" else np.array([0.0, -1.0])


@dataclass(frozen=True)
class StablePose:
    id: int
    representative: Rotation
    support_face: int
    wall_edge: int
    prior: float

    def __post_init__(self):
        if not 0.0 <= self.prior <= 1.0:
            raise ValueError("prior must be a probability")


@dataclass(frozen=True)
class PoseSet:
    poses: tuple[StablePose, ...]
    part_id: str

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        ids = [p.id for p in self.poses]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("pose ids must be dense 1..N")
        total = sum(p.prior for p in self.poses)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"priors sum to {total}, expected 1")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def priors(self) -> np.ndarray:
        return np.array([p.prior for p in self.poses])

    def to_json(self) -> str:
        payload = {
            "part_id": self.part_id,
            "poses": [
                {
                    "id": p.id,
                    "quaternion": [p.representative.w, p.representative.x,
                                   p.representative.y, p.representative.z],
                    "support_face": p.support_face,
                    "wall_edge": p.wall_edge,
                    "prior": p.prior,
                }
                for p in self.poses
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PoseSet":
        data = json.loads(text)
        poses = tuple(
            StablePose(
                id=int(p["id"]),
                representative=Rotation.from_array(np.array(p["quaternion"], dtype=float)),
                support_face=int(p["support_face"]),
                wall_edge=int(p["wall_edge"]),
                prior=float(p["prior"]),
            )
            for p in data["poses"]
        )
        return cls(poses=poses, part_id=str(data["part_id"]))


@dataclass(frozen=True)
class PoseGraph:
    """Rotation samples with the sub-threshold angular adjacency relation."""

    nodes: tuple[Rotation, ...]
    edges: np.ndarray  # (m, 2) int, i < j
    components: tuple[tuple[int, ...], ...]


# ---------------------------------------------------------------------------
# 2D helpers
# ---------------------------------------------------------------------------

def _convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; CCW, starting at the lexicographic minimum.

    Near-collinear vertices are dropped (relative sliver tolerance) so that a
    straight silhouette side is always a single edge; the wall-pivot logic
    depends on contact edges not being split.
    """
    scale = float(np.abs(points).max()) or 1.0
    quantum = scale * 1e-9
    snapped = np.round(points / quantum) * quantum
    uniq = np.unique(snapped, axis=0)  # lexicographic sort
    if len(uniq) < 3:
        raise MeshError("degenerate top-down silhouette: fewer than 3 distinct points")
    pts = [tuple(p) for p in uniq]
    tol = scale * scale * 1e-7

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= tol:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= tol:
            upper.pop()
        upper.append(p)
    loop = lower[:-1] + upper[:-1]
    if len(loop) < 3:
        raise MeshError("degenerate top-down silhouette: collinear projection")
    return np.array(loop)


def _point_segment_distance(p, a, b) -> float:
    d = b - a
    t = float(np.dot(p - a, d) / np.dot(d, d))
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * d)))


def _rot2(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def _wrap_positive(angle: float) -> float:
    return angle % (2.0 * math.pi)


# ---------------------------------------------------------------------------
# Analytic resting faces and solid-angle priors
# ---------------------------------------------------------------------------

def enumerate_resting_faces(hull: ConvexHull, com, margin: float = DEFAULT_STABILITY_MARGIN) -> list[int]:
    """Hull faces on which the part can rest: the COM projects inside the face
    polygon with clearance >= margin."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    com = np.asarray(com, dtype=float)
    out = []
    for fi, face in enumerate(hull.faces):
        n = face.normal
        proj = com - (float(np.dot(n, com)) - face.offset) * n
        loop = hull.vertices[face.vertex_loop]
        ok = True
        for i in range(len(loop)):
            a = loop[i]
            b = loop[(i + 1) % len(loop)]
            edge = b - a
            length = np.linalg.norm(edge)
            if length < 1e-15:
                continue
            # inward signed distance for a loop wound CCW about the outward normal
            dist = float(np.dot(np.cross(edge, proj - a), n)) / length
            if dist < margin:
                ok = False
                break
        if ok:
            out.append(fi)
    return out


def _face_solid_angle(hull: ConvexHull, face_index: int, com: np.ndarray) -> float:
    """Solid angle subtended by a hull face at the COM (Van Oosterom-Strackee)."""
    loop = hull.vertices[hull.faces[face_index].vertex_loop] - com
    total = 0.0
    for i in range(1, len(loop) - 1):
        a, b, c = loop[0], loop[i], loop[i + 1]
        na, nb, nc = (np.linalg.norm(v) for v in (a, b, c))
        det = float(np.dot(a, np.cross(b, c)))
        denom = na * nb * nc + np.dot(a, b) * nc + np.dot(a, c) * nb + np.dot(b, c) * na
        total += 2.0 * math.atan2(det, denom)
    return abs(total)


def estimate_priors_solid_angle(hull: ConvexHull, com, margin: float = DEFAULT_STABILITY_MARGIN) -> list[float]:
    """Fast drop-prior estimate per resting face, before the wall split.

    The probability of landing on a face is proportional to the solid angle it
    subtends at the COM; normalized over resting faces only.
    """
    com = np.asarray(com, dtype=float)
    resting = enumerate_resting_faces(hull, com, margin)
    angles = [_face_solid_angle(hull, fi, com) for fi in resting]
    total = sum(angles)
    return [a / total for a in angles]


# ---------------------------------------------------------------------------
# Settling
# ---------------------------------------------------------------------------

@dataclass
class _FaceTable:
    """Per-face constants for the settling dynamics, all in the face-down
    zero-yaw frame (face normal rotated onto -z)."""

    flush_quat: np.ndarray  # R1: minimal rotation taking the face normal to -z
    height: float  # COM height above the face plane
    stable: bool  # COM projects inside the support polygon
    tip_face: int  # adjacent face reached by tipping (if unstable)
    tip_yaw: float  # yaw increment accumulated by that tip
    hull2d: np.ndarray  # (m, 2) CCW silhouette hull in the zero-yaw frame
    edge_normal_angles: np.ndarray  # (m,) outward normal angle per hull2d edge
    com2d: np.ndarray  # (2,) COM in the zero-yaw frame


class Settler:
    """Precomputed quasi-static settling for one (hull, com, track) triple."""

    def __init__(self, hull: ConvexHull, com, track: TrackConfig):
        self.hull = hull
        self.com = np.asarray(com, dtype=float)
        self.track = track
        self._press = track.press_direction
        self._press_angle = math.atan2(self._press[1], self._press[0])
        self._faces = [self._build_face(fi) for fi in range(len(hull.faces))]
        self._check_tip_chains()

    # -- precomputation ---------------------------------------------------

    def _build_face(self, fi: int) -> _FaceTable:
        hull, com = self.hull, self.com
        face = hull.faces[fi]
        flush = rotation_between(face.normal, _DOWN)
        height = face.offset - float(np.dot(face.normal, com))
        rotated = _quat_rotate(flush, hull.vertices)
        com_r = _quat_rotate(flush, com)
        loop2d = rotated[face.vertex_loop][:, :2]
        # loop is CCW about the outward (now downward) normal; reverse it so
        # it is CCW in the standard xy orientation for the inside test
        poly = loop2d[::-1]
        inside, nearest_edge_rev = self._inside_and_nearest(poly, com_r[:2])
        if inside:
            tip_face, tip_yaw = -1, 0.0
        else:
            # map the reversed-polygon edge index back to the loop edge
            m = len(poly)
            loop_edge = (m - 2 - nearest_edge_rev) % m
            a = int(face.vertex_loop[loop_edge])
            b = int(face.vertex_loop[(loop_edge + 1) % m])
            key = (a, b) if a < b else (b, a)
            fa, fb = hull.edge_faces[key]
            tip_face = fb if fa == fi else fa
            tip_yaw = self._tip_yaw_delta(fi, tip_face, hull.vertices[b] - hull.vertices[a])
        hull2d = _convex_hull_2d(rotated[:, :2])
        dirs = np.roll(hull2d, -1, axis=0) - hull2d
        # outward normal of CCW edge (dx, dy) is (dy, -dx): angle = atan2(-dx, dy)
        normal_angles = np.arctan2(-dirs[:, 0], dirs[:, 1])
        return _FaceTable(
            flush_quat=flush,
            height=height,
            stable=inside,
            tip_face=tip_face,
            tip_yaw=tip_yaw,
            hull2d=hull2d,
            edge_normal_angles=normal_angles,
            com2d=com_r[:2],
        )

    @staticmethod
    def _inside_and_nearest(poly: np.ndarray, p: np.ndarray) -> tuple[bool, int]:
        """Inside test for a CCW polygon plus the nearest boundary edge."""
        m = len(poly)
        min_signed = math.inf
        best_edge, best_dist = 0, math.inf
        for i in range(m):
            a, b = poly[i], poly[(i + 1) % m]
            edge = b - a
            length = float(np.linalg.norm(edge))
            if length < 1e-15:
                continue
            signed = (edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])) / length
            min_signed = min(min_signed, signed)
            dist = _point_segment_distance(p, a, b)
            if dist < best_dist - 1e-15:
                best_dist, best_edge = dist, i
        return min_signed >= -1e-12, best_edge

    def _tip_yaw_delta(self, face_from: int, face_to: int, edge_vec: np.ndarray) -> float:
        """Yaw offset between the zero-yaw frames of two faces linked by a tip."""
        hull = self.hull
        r1_from = rotation_between(hull.faces[face_from].normal, _DOWN)
        r1_to = rotation_between(hull.faces[face_to].normal, _DOWN)
        a = _quat_rotate(r1_from, hull.faces[face_to].normal)
        axis = _quat_rotate(r1_from, edge_vec)
        axis = axis / np.linalg.norm(axis)
        chi = math.atan2(float(np.dot(np.cross(a, _DOWN), axis)), float(np.dot(a, _DOWN)))
        tip = _quat_mul(_quat_from_axis_angle(axis, chi), r1_from)
        rel = _quat_mul(tip, _quat_conj(r1_to))
        if abs(rel[1]) > 1e-6 or abs(rel[2]) > 1e-6:
            raise MeshError("tip construction did not preserve the support plane")
        return 2.0 * math.atan2(rel[3], rel[0])

    def _check_tip_chains(self) -> None:
        for fi, tab in enumerate(self._faces):
            steps, f = 0, fi
            last_height = math.inf
            while not self._faces[f].stable:
                h = self._faces[f].height
                if h > last_height + 1e-9:
                    raise MeshError("tipping did not converge: COM height increased")
                last_height = h
                f = self._faces[f].tip_face
                steps += 1
                if steps > _MAX_TIPS:
                    raise MeshError("tipping did not converge")

    # -- canonical poses ---------------------------------------------------

    def canonical_pose(self, face: int, edge: int) -> Rotation:
        """The unique settled rotation for a (support face, wall edge) pair."""
        tab = self._faces[face]
        phi = self._press_angle - float(tab.edge_normal_angles[edge])
        q = _quat_mul(_quat_from_axis_angle([0.0, 0.0, 1.0], phi), tab.flush_quat)
        return Rotation.from_array(_quat_canonical_sign(q))

    def wall_edges(self, face: int) -> int:
        return len(self._faces[face].hull2d)

    # -- dynamics ----------------------------------------------------------

    def _initial_states(self, quats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Drop faces and yaw angles for a batch of start rotations (n, 4)."""
        ghat = np.asarray(self.track.gravity, dtype=float)
        ghat = ghat / np.linalg.norm(ghat)
        conj = quats.copy()
        conj[:, 1:] *= -1.0
        g_body = _quat_rotate_many(conj, ghat)  # (n, 3)

        normals = np.array([f.normal for f in self.hull.faces])  # (F, 3)
        offsets = np.array([f.offset for f in self.hull.faces])
        denom = g_body @ normals.T  # (n, F)
        dist = offsets[None, :] - (normals @ self.com)[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(denom > 1e-12, dist / denom, np.inf)
        faces = np.argmin(t, axis=1)
        if not np.all(np.isfinite(t[np.arange(len(faces)), faces])):
            raise MeshError("gravity ray does not exit the hull")

        # snap each sample so its drop face lies flush, then extract the yaw
        # relative to that face's canonical zero-yaw frame
        n_world = np.empty((len(quats), 3))
        for f in np.unique(faces):
            sel = faces == f
            n_world[sel] = _quat_rotate_many(quats[sel], self.hull.faces[int(f)].normal)
        align = self._rotations_to_down(n_world)
        snap = _quat_mul(align, quats)
        flush = np.array([self._faces[int(f)].flush_quat for f in faces])
        flush_conj = flush.copy()
        flush_conj[:, 1:] *= -1.0
        rel = _quat_mul(snap, flush_conj)
        phis = 2.0 * np.arctan2(rel[:, 3], rel[:, 0])
        return faces, phis

    @staticmethod
    def _rotations_to_down(vectors: np.ndarray) -> np.ndarray:
        """Minimal rotations taking each unit vector to -z, shape (n, 4).

        The drop-face normal always has a downward component, so the
        antipodal degeneracy cannot occur here.
        """
        axis = np.cross(vectors, _DOWN[None, :])
        s = np.linalg.norm(axis, axis=1)
        d = vectors @ _DOWN
        angle = np.arctan2(s, d)
        out = np.zeros((len(vectors), 4))
        out[:, 0] = np.cos(angle / 2.0)
        ok = s > 1e-12
        out[ok, 1:] = axis[ok] / s[ok, None] * np.sin(angle[ok, None] / 2.0)
        out[~ok, 0] = 1.0
        out[~ok, 1:] = 0.0
        return out

    def _tip_to_stable(self, faces: np.ndarray, phis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        faces = faces.copy()
        phis = phis.copy()
        stable = np.array([t.stable for t in self._faces])
        next_face = np.array([t.tip_face for t in self._faces])
        tip_yaw = np.array([t.tip_yaw for t in self._faces])
        for _ in range(_MAX_TIPS):
            moving = ~stable[faces]
            if not moving.any():
                return faces, phis
            phis[moving] += tip_yaw[faces[moving]]
            faces[moving] = next_face[faces[moving]]
        raise MeshError("tipping did not converge")

    def _wall_settle(self, face: int, phi: float) -> int:
        """Yaw-pivot the silhouette hull until an edge is flush and stable.

        Returns the canonical wall-edge index; the final yaw is implied by
        canonical_pose(face, edge).
        """
        tab = self._faces[face]
        d = self._press
        wall_tangent = np.array([-d[1], d[0]])
        m = len(tab.hull2d)
        press_angle = self._press_angle
        last_gap = math.inf
        for _ in range(_MAX_TIPS):
            rot = _rot2(phi)
            poly = tab.hull2d @ rot.T
            com = rot @ tab.com2d
            # distance of the COM behind the wall contact; pivoting in the
            # torque direction can only move the COM toward the wall
            gap = float((poly @ d).max() - np.dot(com, d))
            if gap > last_gap + 1e-9:
                raise MeshError("wall settle did not converge: COM receded from wall")
            last_gap = gap
            angles = tab.edge_normal_angles + phi
            diffs = (angles - press_angle + math.pi) % (2.0 * math.pi) - math.pi
            flush = np.where(np.abs(diffs) < _FLUSH_EPS)[0]
            if len(flush) > 0:
                k = int(flush[0])
                a, b = poly[k], poly[(k + 1) % m]
                ta, tb = float(np.dot(a, wall_tangent)), float(np.dot(b, wall_tangent))
                tc = float(np.dot(com, wall_tangent))
                lo, hi = min(ta, tb), max(ta, tb)
                if lo - _FLUSH_EPS <= tc <= hi + _FLUSH_EPS:
                    return k
                pivot = poly[k] if (ta < tb) == (tc < lo) else poly[(k + 1) % m]
            else:
                pivot = poly[int(np.argmax(poly @ d))]
            torque = (com[0] - pivot[0]) * d[1] - (com[1] - pivot[1]) * d[0]
            sense = 1.0 if torque >= 0 else -1.0
            deltas = (sense * (press_angle - angles)) % (2.0 * math.pi)
            deltas[deltas <= _FLUSH_EPS] = 2.0 * math.pi
            phi += sense * float(deltas.min())
        raise MeshError("wall settle did not converge")

    def settle_keys(self, quats: np.ndarray) -> list[tuple[int, int]]:
        """(support face, wall edge) basins for a batch of start quaternions."""
        faces, phis = self._initial_states(np.asarray(quats, dtype=float))
        faces, phis = self._tip_to_stable(faces, phis)
        return [
            (int(f), self._wall_settle(int(f), float(phi)))
            for f, phi in zip(faces, phis)
        ]

    def settle_key(self, start: Rotation) -> tuple[int, int]:
        """(support face, wall edge) of the basin containing `start`."""
        return self.settle_keys(start.as_array()[None, :])[0]

    def settle(self, start: Rotation) -> Rotation:
        return self.canonical_pose(*self.settle_key(start))


def settle(mesh: TriMesh, hull: ConvexHull, com, track: TrackConfig, start: Rotation) -> Rotation:
    """Settle one start rotation. The mesh itself does not influence settling
    (a rigid body on a plane rests on its convex hull); it is accepted so the
    signature mirrors the rest of the pipeline. For many samples construct a
    `Settler` once instead."""
    del mesh
    return Settler(hull, com, track).settle(start)


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------

def cluster_rotations(samples, threshold: float) -> PoseGraph:
    """Connected components of the `angular_distance < threshold` relation."""
    samples = list(samples)
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    n = len(samples)
    quats = np.array([s.as_array() for s in samples])
    cos_half = math.cos(threshold / 2.0)

    parent = np.arange(n)

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    edges: list[np.ndarray] = []
    chunk = max(1, int(4e6 // max(n, 1)))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        dots = np.abs(quats[start:stop] @ quats.T)
        rows, cols = np.where(dots > cos_half)
        rows = rows + start
        keep = rows < cols
        rows, cols = rows[keep], cols[keep]
        if len(rows):
            edges.append(np.stack([rows, cols], axis=1))
            for i, j in zip(rows, cols):
                ri, rj = find(int(i)), find(int(j))
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    edge_array = np.concatenate(edges, axis=0) if edges else np.empty((0, 2), dtype=int)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    components = tuple(tuple(groups[root]) for root in sorted(groups))
    return PoseGraph(nodes=tuple(samples), edges=edge_array, components=components)


# ---------------------------------------------------------------------------
# Monte Carlo pose identification
# ---------------------------------------------------------------------------

def identify_stable_poses(
    mesh: TriMesh,
    track: TrackConfig,
    n_samples: int = 10_000,
    threshold: float = DEFAULT_CLUSTER_THRESHOLD,
    seed: int = 0,
    part_id: str = "part",
) -> PoseSet:
    """Settle uniform random orientations, cluster the outcomes, and estimate
    pose priors from the cluster occupancy."""
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    hull = convex_hull(mesh)
    com = mass_properties(mesh).com
    settler = Settler(hull, com, track)

    rng = np.random.default_rng(seed)
    quats = random_rotations(n_samples, rng)

    counts: dict[tuple[int, int], int] = {}
    first_seen: dict[tuple[int, int], int] = {}
    for i, key in enumerate(settler.settle_keys(quats)):
        counts[key] = counts.get(key, 0) + 1
        if key not in first_seen:
            first_seen[key] = i

    distinct = sorted(counts, key=lambda k: first_seen[k])
    reps = [settler.canonical_pose(*key) for key in distinct]
    graph = cluster_rotations(reps, threshold)

    poses = []
    for pid, comp in enumerate(graph.components, start=1):
        members = list(comp)
        total = sum(counts[distinct[i]] for i in members)
        best = max(members, key=lambda i: (counts[distinct[i]], -first_seen[distinct[i]]))
        face, edge = distinct[best]
        poses.append(
            StablePose(
                id=pid,
                representative=reps[best],
                support_face=face,
                wall_edge=edge,
                prior=total / n_samples,
            )
        )

    _cross_check_resting_faces(settler, hull, com, poses, n_samples)
    return PoseSet(poses=tuple(poses), part_id=part_id)


def _cross_check_resting_faces(settler, hull, com, poses, n_samples) -> None:
    """Warn when Monte Carlo support faces disagree with the analytic list."""
    analytic_strict = set(enumerate_resting_faces(hull, com, margin=0.0))
    analytic_margin = set(enumerate_resting_faces(hull, com))
    reached = {f for f, tab in enumerate(settler._faces) if tab.stable}
    landed = {p.support_face for p in poses}
    if not landed <= analytic_strict:
        logger.warning(
            "settling landed on faces not analytically stable: %s",
            sorted(landed - analytic_strict),
        )
    if n_samples >= 50 * max(1, len(analytic_margin)) and not analytic_margin <= reached:
        logger.warning(
            "analytically stable faces unreachable by settling: %s",
            sorted(analytic_margin - reached),
        )
