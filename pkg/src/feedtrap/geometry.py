"""Mesh ingestion, convex hulls, mass properties, rotations and silhouettes.

Everything here is a pure function of its inputs; the returned objects are
immutable after construction and safe to share across threads.

Conventions: world frame is right-handed with +z up; silhouettes are
orthographic top-down projections (viewing along -z). Pixel (row, col)
covers the half-open square [col, col+1) x [row, row+1) in pixel
coordinates, with row 0 at the top (+y side) of the frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull as _QHull
from scipy.spatial import QhullError

from .errors import MeshError

# Coplanar triangles are merged into one polygonal hull face when their
# dihedral angle is below this; resting-face analysis needs polygons, not
# triangle fans.
FACE_MERGE_ANGLE = 1e-4


# ---------------------------------------------------------------------------
# Rotations (unit quaternions, scalar-first)
# ---------------------------------------------------------------------------

def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b; composing rotations applies b first."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def _quat_conj(q: np.ndarray) -> np.ndarray:
    out = np.array(q, dtype=float, copy=True)
    out[..., 1:] *= -1.0
    return out


def _quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        raise ValueError("rotation axis must be non-zero")
    half = 0.5 * angle
    s = math.sin(half) / n
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def _quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors v (…,3) by unit quaternion q (4,)."""
    w = q[0]
    u = q[1:]
    v = np.asarray(v, dtype=float)
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def _quat_rotate_many(qs: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate one vector v (3,) by each quaternion in qs (n, 4) -> (n, 3)."""
    w = qs[:, :1]
    u = qs[:, 1:]
    t = 2.0 * np.cross(u, v[None, :])
    return v[None, :] + w * t + np.cross(u, t)


def _quat_canonical_sign(q: np.ndarray) -> np.ndarray:
    """Fix the q/-q ambiguity: first non-negligible component positive."""
    for c in q:
        if abs(c) > 1e-12:
            return q if c > 0 else -q
    return q


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion (w, x, y, z). q and -q denote the same rotation."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if not math.isfinite(n) or abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {n!r} is not 1 within 1e-9")

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, q: np.ndarray, normalize: bool = True) -> "Rotation":
        q = np.asarray(q, dtype=float)
        if normalize:
            n = np.linalg.norm(q)
            if n == 0.0 or not np.isfinite(n):
                raise ValueError("cannot normalize zero/non-finite quaternion")
            q = q / n
        return cls(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        return cls.from_array(_quat_from_axis_angle(np.asarray(axis, float), angle))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def apply(self, points) -> np.ndarray:
        """Rotate one point (3,) or many points (n, 3)."""
        return _quat_rotate(self.as_array(), points)

    def compose(self, other: "Rotation") -> "Rotation":
        """self ∘ other: apply `other` first, then `self`."""
        return Rotation.from_array(_quat_mul(self.as_array(), other.as_array()))

    def __mul__(self, other: "Rotation") -> "Rotation":
        return self.compose(other)

    def inverse(self) -> "Rotation":
        return Rotation(self.w, -self.x, -self.y, -self.z)

    def canonical(self) -> "Rotation":
        """Sign-normalized copy, suitable for exact-equality bookkeeping."""
        return Rotation.from_array(_quat_canonical_sign(self.as_array()), normalize=False)


def angular_distance(a: Rotation, b: Rotation) -> float:
    """Geodesic angle between two rotations in [0, pi], treating q == -q.

    Uses the atan2 form, which stays accurate near 0 where acos does not.
    """
    qa = a.as_array()
    qb = b.as_array()
    if np.dot(qa, qb) < 0.0:
        qb = -qb
    return 4.0 * math.atan2(float(np.linalg.norm(qa - qb)), float(np.linalg.norm(qa + qb)))


def random_rotations(n: int, rng: np.random.Generator) -> np.ndarray:
    """n quaternions uniform on SO(3) (normalized 4-d Gaussians), shape (n, 4)."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return q


def rotation_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal-angle quaternion taking unit vector a to unit vector b.

    The antipodal case (a == -b) has no unique minimal rotation; we pick a
    deterministic horizontal-ish axis so results are reproducible.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.cross(a, b)
    d = float(np.dot(a, b))
    s = np.linalg.norm(c)
    if s < 1e-12:
        if d > 0.0:
            return np.array([1.0, 0.0, 0.0, 0.0])
        # pick any axis perpendicular to a
        helper = np.array([1.0, 0.0, 0.0])
        if abs(a[0]) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        axis = np.cross(a, helper)
        axis /= np.linalg.norm(axis)
        return _quat_from_axis_angle(axis, math.pi)
    angle = math.atan2(s, d)
    return _quat_from_axis_angle(c / s, angle)


# ---------------------------------------------------------------------------
# Meshes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh. Vertex order is preserved from the source file."""

    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.intp)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) == 0:
            raise MeshError("mesh has no vertices")
        if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
            raise MeshError("mesh has no triangles")
        if not np.all(np.isfinite(v)):
            raise MeshError("non-finite vertex coordinate")
        if t.min() < 0 or t.max() >= len(v):
            raise MeshError("triangle vertex index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def diameter(self) -> float:
        ext = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(ext))

    def translated(self, offset) -> "TriMesh":
        return TriMesh(self.vertices + np.asarray(offset, dtype=float), self.triangles)


def load_mesh(data: bytes, fmt: str) -> TriMesh:
    """Parse mesh bytes in 'obj-ascii' (v/f subset) or 'stl-binary' format."""
    if fmt == "obj-ascii":
        return _load_obj(data)
    if fmt == "stl-binary":
        return _load_stl(data)
    raise ValueError(f"unknown mesh format {fmt!r}")


def _load_obj(data: bytes) -> TriMesh:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MeshError(f"OBJ is not valid UTF-8: {exc}") from exc
    vertices: list[list[float]] = []
    faces: list[tuple[int, list[int]]] = []  # (line number, 1-based indices)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshError(f"OBJ line {lineno}: malformed vertex record")
            try:
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise MeshError(f"OBJ line {lineno}: malformed vertex record") from exc
        elif tag == "f":
            if len(parts) < 4:
                raise MeshError(f"OBJ line {lineno}: face needs at least 3 vertices")
            idx = []
            for token in parts[1:]:
                head = token.split("/")[0]
                try:
                    idx.append(int(head))
                except ValueError as exc:
                    raise MeshError(f"OBJ line {lineno}: malformed face record") from exc
            faces.append((lineno, idx))
        # other record types (vn, vt, o, g, s, usemtl, ...) are ignored
    if not vertices or not faces:
        raise MeshError("empty mesh: OBJ contains no v/f records")
    nv = len(vertices)
    triangles: list[list[int]] = []
    for lineno, idx in faces:
        for i in idx:
            if i < 1 or i > nv:
                raise MeshError(f"OBJ line {lineno}: face index {i} out of range (1..{nv})")
        zero_based = [i - 1 for i in idx]
        for a, b in zip(zero_based[1:], zero_based[2:]):  # fan triangulation
            triangles.append([zero_based[0], a, b])
    return TriMesh(np.array(vertices, dtype=float), np.array(triangles, dtype=np.intp))


def _load_stl(data: bytes) -> TriMesh:
    if len(data) < 84:
        raise MeshError("STL too short for binary header")
    n = int(np.frombuffer(data, dtype="<u4", count=1, offset=80)[0])
    expected = 84 + 50 * n
    if len(data) < expected:
        if data[:5] == b"solid":
            raise MeshError("STL appears to be ASCII; only binary STL is supported")
        raise MeshError(f"STL truncated: {len(data)} bytes, need {expected} for {n} triangles")
    if n == 0:
        raise MeshError("empty mesh: STL has zero triangles")
    rec = np.dtype(
        [("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")]
    )
    body = np.frombuffer(data, dtype=rec, count=n, offset=84)
    verts = body["v"].reshape(-1, 3).astype(float)
    tris = np.arange(3 * n, dtype=np.intp).reshape(-1, 3)
    return TriMesh(verts, tris)


# ---------------------------------------------------------------------------
# Mass properties
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MassProperties:
    volume: float  # m^3, uniform density assumed
    com: np.ndarray  # (3,) center of mass


def _position_edges(mesh: TriMesh):
    """Directed triangle edges keyed by vertex *position* (not index).

    STL meshes duplicate vertices per triangle; closedness has to be judged
    on coordinates.
    """
    keys: dict[tuple, int] = {}
    pos_id = np.empty(len(mesh.vertices), dtype=np.intp)
    for i, p in enumerate(mesh.vertices):
        k = (p[0], p[1], p[2])
        pos_id[i] = keys.setdefault(k, len(keys))
    edges: dict[tuple[int, int], int] = {}
    for tri in mesh.triangles:
        a, b, c = (int(pos_id[j]) for j in tri)
        if a == b or b == c or c == a:
            raise MeshError("degenerate triangle (repeated vertex position)")
        for e in ((a, b), (b, c), (c, a)):
            edges[e] = edges.get(e, 0) + 1
    return edges


def _validate_closed(mesh: TriMesh) -> None:
    edges = _position_edges(mesh)
    for (a, b), count in edges.items():
        if count > 1:
            raise MeshError(f"non-manifold mesh: directed edge {a}->{b} repeated")
        if (b, a) not in edges:
            raise MeshError(f"open mesh: edge {a}->{b} has no oppositely wound partner")


def mass_properties(mesh: TriMesh) -> MassProperties:
    """Volume and center of mass by divergence theorem over signed tetrahedra."""
    _validate_closed(mesh)
    v = mesh.vertices
    t = mesh.triangles
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    dets = np.einsum("ij,ij->i", a, np.cross(b, c))
    volume = float(dets.sum() / 6.0)
    if volume < 0:
        raise MeshError("negative volume: mesh winding is inverted")
    if volume < 1e-15:
        raise MeshError("mesh volume is zero")
    moment = (dets[:, None] * (a + b + c)).sum(axis=0) / 24.0
    return MassProperties(volume=volume, com=moment / volume)


# ---------------------------------------------------------------------------
# Convex hull with merged polygonal faces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HullFace:
    """Planar polygonal hull face; loop is CCW seen from outside."""

    normal: np.ndarray  # outward unit normal (3,)
    vertex_loop: np.ndarray  # indices into ConvexHull.vertices
    offset: float  # normal . x == offset on the face plane


@dataclass(frozen=True)
class ConvexHull:
    vertices: np.ndarray  # (k, 3)
    faces: tuple[HullFace, ...]

    @cached_property
    def edge_faces(self) -> dict[tuple[int, int], tuple[int, int]]:
        """Undirected edge (a<b) -> the two face indices sharing it."""
        out: dict[tuple[int, int], list[int]] = {}
        for fi, face in enumerate(self.faces):
            loop = face.vertex_loop
            for i in range(len(loop)):
                a, b = int(loop[i]), int(loop[(i + 1) % len(loop)])
                key = (a, b) if a < b else (b, a)
                out.setdefault(key, []).append(fi)
        result = {}
        for key, fis in out.items():
            if len(fis) != 2:
                raise MeshError(f"hull edge {key} not shared by exactly two faces")
            result[key] = (fis[0], fis[1])
        return result

    @property
    def diameter(self) -> float:
        ext = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(ext))


def convex_hull(mesh: TriMesh) -> ConvexHull:
    """Convex hull with coplanar triangles merged into polygonal faces."""
    points = mesh.vertices
    try:
        qh = _QHull(points)
    except QhullError as exc:
        raise MeshError(f"degenerate input: convex hull failed ({exc})") from exc

    old_to_new = {int(o): i for i, o in enumerate(qh.vertices)}
    hull_points = points[qh.vertices]

    normals = qh.equations[:, :3]
    simplices = []
    for s, n in zip(qh.simplices, normals):
        tri = [int(x) for x in s]
        v = points[tri]
        if np.dot(np.cross(v[1] - v[0], v[2] - v[0]), n) < 0:
            tri[1], tri[2] = tri[2], tri[1]
        simplices.append(tri)

    # group coplanar adjacent triangles (union-find over qhull neighbors)
    parent = list(range(len(simplices)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, nbrs in enumerate(qh.neighbors):
        for j in nbrs:
            j = int(j)
            ni, nj = normals[i], normals[j]
            angle = math.atan2(np.linalg.norm(np.cross(ni, nj)), float(np.dot(ni, nj)))
            if angle < FACE_MERGE_ANGLE:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[int]] = {}
    for i in range(len(simplices)):
        groups.setdefault(find(i), []).append(i)

    faces = []
    for root in sorted(groups):
        members = groups[root]
        directed = set()
        for m in members:
            a, b, c = simplices[m]
            directed.update([(a, b), (b, c), (c, a)])
        boundary = {e for e in directed if (e[1], e[0]) not in directed}
        succ = {}
        for a, b in boundary:
            if a in succ:
                raise MeshError("hull face boundary is not a simple loop")
            succ[a] = b
        start = min(succ)
        loop = [start]
        nxt = succ[start]
        while nxt != start:
            loop.append(nxt)
            nxt = succ[nxt]
            if len(loop) > len(succ):
                raise MeshError("hull face boundary walk did not close")
        loop_new = np.array([old_to_new[v] for v in loop], dtype=np.intp)
        pts = hull_points[loop_new]
        if len(pts) > 3:
            # least-squares plane fit; more stable than averaging facet
            # equations when merging nearly coplanar facets
            centered = pts - pts.mean(axis=0)
            _, _, vt = np.linalg.svd(centered, full_matrices=False)
            n = vt[-1]
        else:
            n = normals[members].mean(axis=0)
        if np.dot(n, normals[members].mean(axis=0)) < 0:
            n = -n
        n = n / np.linalg.norm(n)
        # supporting-plane offset: no hull vertex lies outside the face plane
        offset = float(np.dot(hull_points, n).max())
        faces.append(HullFace(normal=n, vertex_loop=loop_new, offset=offset))

    return ConvexHull(vertices=hull_points, faces=tuple(faces))


# ---------------------------------------------------------------------------
# Silhouette rasterization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinaryMask:
    """Row-major boolean occupancy image."""

    width: int
    height: int
    bits: np.ndarray  # (height, width) bool

    def count(self) -> int:
        return int(self.bits.sum())

    def to_pgm(self) -> bytes:
        """Binary PGM (P5) bytes, set pixels white, for debugging."""
        header = f"P5\n{self.width} {self.height}\n255\n".encode()
        return header + (self.bits.astype(np.uint8) * 255).tobytes()


def render_silhouette(
    mesh: TriMesh,
    pose: Rotation,
    offset,
    resolution: int,
    pixels_per_meter: float,
) -> BinaryMask:
    """Orthographic top-down silhouette of the posed mesh.

    A pixel is set iff its center is covered by at least one projected
    triangle; boundary coverage is edge-inclusive and there is no
    anti-aliasing, so masks are deterministic and bit-exact. Triangles whose
    projection has zero area cover nothing.
    """
    if resolution < 16:
        raise ValueError("resolution must be >= 16")
    if pixels_per_meter <= 0:
        raise ValueError("pixels_per_meter must be positive")
    res = int(resolution)
    world = pose.apply(mesh.vertices) + np.asarray(offset, dtype=float)
    px = world[:, 0] * pixels_per_meter + res / 2.0
    py = res / 2.0 - world[:, 1] * pixels_per_meter
    if px.min() < 0 or px.max() > res or py.min() < 0 or py.max() > res:
        raise MeshError("part out of frame after projection")

    bits = np.zeros((res, res), dtype=bool)
    tri_px = px[mesh.triangles]  # (m, 3)
    tri_py = py[mesh.triangles]
    for (xa, xb, xc), (ya, yb, yc) in zip(tri_px, tri_py):
        area2 = (xb - xa) * (yc - ya) - (yb - ya) * (xc - xa)
        if area2 == 0.0:
            continue
        sgn = 1.0 if area2 > 0 else -1.0
        c0 = max(0, math.ceil(min(xa, xb, xc) - 0.5))
        c1 = min(res - 1, math.floor(max(xa, xb, xc) - 0.5))
        r0 = max(0, math.ceil(min(ya, yb, yc) - 0.5))
        r1 = min(res - 1, math.floor(max(ya, yb, yc) - 0.5))
        if c1 < c0 or r1 < r0:
            continue
        cx = np.arange(c0, c1 + 1) + 0.5
        cy = (np.arange(r0, r1 + 1) + 0.5)[:, None]
        e0 = (xb - xa) * (cy - ya) - (yb - ya) * (cx - xa)
        e1 = (xc - xb) * (cy - yb) - (yc - yb) * (cx - xb)
        e2 = (xa - xc) * (cy - yc) - (ya - yc) * (cx - xc)
        cover = (sgn * e0 >= 0) & (sgn * e1 >= 0) & (sgn * e2 >= 0)
        bits[r0 : r1 + 1, c0 : c1 + 1] |= cover

    if not bits.any():
        raise MeshError("silhouette is empty: part projects smaller than one pixel")
    return BinaryMask(width=res, height=res, bits=bits)
