"""Triangle meshes: I/O, sampling, BVH distance queries, inside/outside tests.

Distance magnitudes are exact point-to-triangle-set distances (BVH-pruned,
identical to the brute-force all-triangles result up to float associativity).
Signs come from +x ray-crossing parity and require a watertight mesh.
"""

from __future__ import annotations

import numpy as np

from .fields import SdfField

_LEAF_SIZE = 8
# Fixed tie-break jitter for ray parity: keeps rays off edges/vertices.
_RAY_EPS = np.array([0.0, 9.5367431640625e-07, 6.618591837692261e-07])


class TriangleMesh:
    """Vertices (V, 3) float64 and triangle index triples (T, 3).

    Degenerate (zero-area) triangles are dropped at construction.
    """

    def __init__(self, vertices, triangles):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if tris.size and (tris.min() < 0 or tris.max() >= len(self.vertices)):
            raise ValueError("triangle index out of range")
        if tris.size:
            a, b, c = (self.vertices[tris[:, i]] for i in range(3))
            areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
            tris = tris[areas > 1e-14]
        self.triangles = tris
        self._bvh = None
        self._watertight = None

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def is_empty(self) -> bool:
        return self.triangles.shape[0] == 0

    def corners(self):
        t = self.triangles
        return self.vertices[t[:, 0]], self.vertices[t[:, 1]], self.vertices[t[:, 2]]

    def face_areas(self) -> np.ndarray:
        if self.is_empty():
            return np.zeros(0)
        a, b, c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def face_normals(self) -> np.ndarray:
        a, b, c = self.corners()
        n = np.cross(b - a, c - a)
        return n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def is_watertight(self) -> bool:
        """Every undirected edge shared by exactly two triangles."""
        if self._watertight is None:
            if self.is_empty():
                self._watertight = False
            else:
                t = self.triangles
                edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
                edges = np.sort(edges, axis=1)
                _, counts = np.unique(edges, axis=0, return_counts=True)
                self._watertight = bool(np.all(counts == 2))
        return self._watertight

    def translated(self, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=np.float64), self.triangles)

    def bvh(self) -> "TriangleBvh":
        if self._bvh is None:
            self._bvh = TriangleBvh(self)
        return self._bvh


def merge_meshes(meshes) -> TriangleMesh:
    """Concatenate meshes into one (vertex indices offset)."""
    meshes = [m for m in meshes if not m.is_empty()]
    if not meshes:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, tris, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + off)
        off += m.num_vertices
    return TriangleMesh(np.concatenate(verts), np.concatenate(tris))


# ---------------------------------------------------------------------------
# OBJ / PLY I/O
# ---------------------------------------------------------------------------

def save_obj(mesh: TriangleMesh, path):
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_obj(path) -> TriangleMesh:
    verts, tris = [], []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: malformed vertex line")
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: malformed face line")
                idx = [int(tok.split("/")[0]) - 1 for tok in parts[1:]]
                for i in range(1, len(idx) - 1):  # fan-triangulate polygons
                    tris.append([idx[0], idx[i], idx[i + 1]])
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                        np.array(tris, dtype=np.int64).reshape(-1, 3))


def load_ply(path) -> TriangleMesh:
    """Minimal binary little-endian PLY reader (x/y/z floats + face lists)."""
    with open(path, "rb") as fh:
        header = []
        while True:
            line = fh.readline().decode("ascii").strip()
            header.append(line)
            if line == "end_header":
                break
        nv = nf = 0
        fmt = None
        for line in header:
            toks = line.split()
            if toks[:1] == ["format"]:
                fmt = toks[1]
            elif toks[:2] == ["element", "vertex"]:
                nv = int(toks[2])
            elif toks[:2] == ["element", "face"]:
                nf = int(toks[2])
        if fmt != "binary_little_endian":
            raise ValueError(f"{path}: only binary_little_endian PLY supported, got {fmt}")
        verts = np.frombuffer(fh.read(nv * 12), dtype="<f4").reshape(nv, 3).astype(np.float64)
        tris = np.empty((nf, 3), dtype=np.int64)
        for i in range(nf):
            count = np.frombuffer(fh.read(1), dtype=np.uint8)[0]
            idx = np.frombuffer(fh.read(4 * count), dtype="<i4")
            tris[i] = idx[:3]
    return TriangleMesh(verts, tris)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_mesh_surface(mesh: TriangleMesh, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Area-weighted uniform samples and their face normals."""
    if mesh.is_empty():
        raise ValueError("cannot sample an empty surface")
    areas = mesh.face_areas()
    probs = areas / areas.sum()
    faces = rng.choice(len(areas), size=count, p=probs)
    u = rng.uniform(size=(count, 1))
    v = rng.uniform(size=(count, 1))
    flip = (u + v) > 1.0
    u = np.where(flip, 1.0 - u, u)
    v = np.where(flip, 1.0 - v, v)
    a, b, c = mesh.corners()
    pts = a[faces] + u * (b[faces] - a[faces]) + v * (c[faces] - a[faces])
    return pts, mesh.face_normals()[faces]


# ---------------------------------------------------------------------------
# Closest point on triangles (vectorized Ericson)
# ---------------------------------------------------------------------------

def _closest_dist_sq(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Squared distance from points p (N,3) to triangles (a,b,c) (N,3) pairwise."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    closest = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def settle(mask, value):
        m = mask & ~done
        closest[m] = value[m] if value.ndim == 2 else value
        done[m] = True

    settle((d1 <= 0) & (d2 <= 0), a)                                   # vertex A
    settle((d3 >= 0) & (d4 <= d3), b)                                  # vertex B
    settle((d6 >= 0) & (d5 <= d6), c)                                  # vertex C
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
    settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v_ab[:, None] * ab)  # edge AB
    vb = d5 * d2 - d1 * d6
    with np.errstate(divide="ignore", invalid="ignore"):
        w_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
    settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w_ac[:, None] * ac)  # edge AC
    va = d3 * d6 - d5 * d4
    denom_bc = (d4 - d3) + (d5 - d6)
    with np.errstate(divide="ignore", invalid="ignore"):
        w_bc = np.where(denom_bc != 0, (d4 - d3) / denom_bc, 0.0)
    settle((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + w_bc[:, None] * (c - b))  # edge BC
    denom = va + vb + vc
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
    settle(np.ones(len(p), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)  # interior
    d = p - closest
    return np.einsum("ij,ij->i", d, d)


def brute_force_distance(mesh: TriangleMesh, pts: np.ndarray) -> np.ndarray:
    """All-pairs point-to-mesh distance; the oracle for BVH queries."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    a, b, c = mesh.corners()
    nt = mesh.num_triangles
    best = np.full(len(pts), np.inf)
    for i, p in enumerate(pts):
        pp = np.broadcast_to(p, (nt, 3))
        best[i] = np.sqrt(_closest_dist_sq(pp, a, b, c).min())
    return best


# ---------------------------------------------------------------------------
# BVH
# ---------------------------------------------------------------------------

class TriangleBvh:
    """Median-split BVH over triangles, leaf size <= 8; built single-threaded."""

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        a, b, c = mesh.corners()
        self._a, self._b, self._c = a, b, c
        nt = mesh.num_triangles
        centroids = (a + b + c) / 3.0
        tri_min = np.minimum(np.minimum(a, b), c)
        tri_max = np.maximum(np.maximum(a, b), c)

        self.order = np.arange(nt)
        boxes_min, boxes_max, lefts, rights, starts, ends = [], [], [], [], [], []

        def build(lo: int, hi: int) -> int:
            idx = len(boxes_min)
            sel = self.order[lo:hi]
            boxes_min.append(tri_min[sel].min(axis=0))
            boxes_max.append(tri_max[sel].max(axis=0))
            lefts.append(-1)
            rights.append(-1)
            starts.append(lo)
            ends.append(hi)
            if hi - lo > _LEAF_SIZE:
                cen = centroids[sel]
                axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
                mid = (lo + hi) // 2
                part = np.argsort(cen[:, axis], kind="stable")
                self.order[lo:hi] = sel[part]
                lefts[idx] = build(lo, mid)
                rights[idx] = build(mid, hi)
            return idx

        if nt:
            import sys
            old = sys.getrecursionlimit()
            sys.setrecursionlimit(max(old, 10000))
            build(0, nt)
            sys.setrecursionlimit(old)
        self.box_min = np.array(boxes_min).reshape(-1, 3)
        self.box_max = np.array(boxes_max).reshape(-1, 3)
        self.left = np.array(lefts, dtype=np.int64)
        self.right = np.array(rights, dtype=np.int64)
        self.start = np.array(starts, dtype=np.int64)
        self.end = np.array(ends, dtype=np.int64)

    def _box_dist_sq(self, node: int, pts: np.ndarray) -> np.ndarray:
        d = np.maximum(self.box_min[node] - pts, 0.0) + np.maximum(pts - self.box_max[node], 0.0)
        return np.einsum("ij,ij->i", d, d)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        """Exact unsigned distances for (N, 3) query points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        n = len(pts)
        best = np.full(n, np.inf)
        if self.mesh.is_empty():
            return best

        def visit(node: int, active: np.ndarray):
            if active.size == 0:
                return
            if self.left[node] < 0:
                sel = self.order[self.start[node]:self.end[node]]
                p = pts[active]
                for t in sel:
                    d2 = _closest_dist_sq(p,
                                          np.broadcast_to(self._a[t], p.shape),
                                          np.broadcast_to(self._b[t], p.shape),
                                          np.broadcast_to(self._c[t], p.shape))
                    np.minimum.at(best, active, d2)
                return
            lchild, rchild = self.left[node], self.right[node]
            dl = self._box_dist_sq(lchild, pts[active])
            dr = self._box_dist_sq(rchild, pts[active])
            # Visit the nearer child first for better pruning.
            near_left = dl <= dr
            for first in (True, False):
                for child, dist, take in ((lchild, dl, near_left), (rchild, dr, ~near_left)):
                    mask = (take if first else ~take) & (dist < best[active])
                    visit(child, active[mask])

        visit(0, np.arange(n))
        return np.sqrt(best)

    def ray_crossings_x(self, pts: np.ndarray) -> np.ndarray:
        """Number of triangle crossings of the +x ray from each point.

        The ray origin is nudged by a fixed sub-voxel jitter in y/z so that
        edge- and vertex-degenerate hits have measure zero in practice.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64)) + _RAY_EPS
        n = len(pts)
        counts = np.zeros(n, dtype=np.int64)
        if self.mesh.is_empty():
            return counts

        def visit(node: int, active: np.ndarray):
            if active.size == 0:
                return
            p = pts[active]
            # Prune: the ray is +x, so the box must overlap in y/z and not be
            # entirely behind the origin in x.
            hit = (
                (p[:, 1] >= self.box_min[node][1]) & (p[:, 1] <= self.box_max[node][1])
                & (p[:, 2] >= self.box_min[node][2]) & (p[:, 2] <= self.box_max[node][2])
                & (p[:, 0] <= self.box_max[node][0])
            )
            active = active[hit]
            if active.size == 0:
                return
            if self.left[node] < 0:
                p = pts[active]
                for t in self.order[self.start[node]:self.end[node]]:
                    a, b, c = self._a[t], self._b[t], self._c[t]
                    counts[active] += _cross_x(p, a, b, c)
                return
            visit(self.left[node], active)
            visit(self.right[node], active)

        visit(0, np.arange(n))
        return counts


def _cross_x(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """1 where the +x ray from p crosses triangle abc, else 0 (vectorized in p)."""
    # 2D point-in-triangle in the yz plane via edge functions.
    ay, az = a[1] - p[:, 1], a[2] - p[:, 2]
    by, bz = b[1] - p[:, 1], b[2] - p[:, 2]
    cy, cz = c[1] - p[:, 1], c[2] - p[:, 2]
    e0 = ay * bz - az * by
    e1 = by * cz - bz * cy
    e2 = cy * az - cz * ay
    inside = ((e0 > 0) & (e1 > 0) & (e2 > 0)) | ((e0 < 0) & (e1 < 0) & (e2 < 0))
    if not inside.any():
        return np.zeros(len(p), dtype=np.int64)
    # Barycentric interpolation of the crossing x coordinate.
    denom = e0 + e1 + e2
    with np.errstate(divide="ignore", invalid="ignore"):
        x_hit = (e1 * a[0] + e2 * b[0] + e0 * c[0]) / denom
    return (inside & (x_hit > p[:, 0])).astype(np.int64)


def winding_numbers(mesh: TriangleMesh, pts: np.ndarray) -> np.ndarray:
    """Generalized winding numbers by brute-force solid-angle sum (small meshes)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    a, b, c = mesh.corners()
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        av, bv, cv = a - p, b - p, c - p
        la = np.linalg.norm(av, axis=1)
        lb = np.linalg.norm(bv, axis=1)
        lc = np.linalg.norm(cv, axis=1)
        num = np.einsum("ij,ij->i", av, np.cross(bv, cv))
        den = (la * lb * lc + np.einsum("ij,ij->i", av, bv) * lc
               + np.einsum("ij,ij->i", bv, cv) * la + np.einsum("ij,ij->i", av, cv) * lb)
        out[i] = np.arctan2(num, den).sum() / (2.0 * np.pi)
    return out


class MeshField(SdfField):
    """Signed distance to a mesh: BVH magnitude, ray-parity sign."""

    provenance = "mesh"

    def __init__(self, mesh: TriangleMesh, signed: bool = True):
        if signed and not mesh.is_watertight():
            raise ValueError("mesh is not watertight: sign is undefined "
                             "(use signed=False for unsigned distance)")
        self.mesh = mesh
        self.signed = signed

    def evaluate(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        d = self.mesh.bvh().distance(pts)
        if not self.signed:
            return d
        inside = self.mesh.bvh().ray_crossings_x(pts) % 2 == 1
        return np.where(inside, -d, d)
