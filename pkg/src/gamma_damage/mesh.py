"""Triangulations, admissibility checks and structured mesh generators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import GeometryError, ParameterError

Rect = Tuple[float, float, float, float]
UNIT_SQUARE: Rect = (0.0, 0.0, 1.0, 1.0)

_REL = 1e-9


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Conforming triangle mesh with counterclockwise triangles.

    Build instances with :meth:`build`, which orients triangles and derives
    the boundary vertex set.  Arrays are read-only.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertices: np.ndarray
    region_tag: Optional[np.ndarray] = None

    @classmethod
    def build(cls, vertices, triangles, region_tag=None, boundary_vertices=None) -> "Triangulation":
        V = np.array(vertices, dtype=float).reshape(-1, 2)
        T = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(V)):
            raise GeometryError("non-finite vertex coordinates")
        if T.size and (T.min() < 0 or T.max() >= len(V)):
            raise GeometryError("triangle index out of range")
        if len(T):
            sa = _signed_areas(V, T)
            flip = sa < 0
            T[flip] = T[flip][:, [0, 2, 1]]
        tags = None
        if region_tag is not None:
            tags = np.asarray(region_tag, dtype=np.int8).reshape(-1)
            if len(tags) != len(T):
                raise GeometryError("region_tag length differs from triangle count")
            tags.setflags(write=False)
        if boundary_vertices is None:
            boundary_vertices = _boundary_from_edges(T)
        B = np.unique(np.asarray(boundary_vertices, dtype=np.int64))
        for a in (V, T, B):
            a.setflags(write=False)
        return cls(V, T, B, tags)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """Per-triangle edge lengths, edge i opposite vertex i."""
        P = self.vertices[self.triangles]
        return np.stack([
            np.linalg.norm(P[:, 2] - P[:, 1], axis=1),
            np.linalg.norm(P[:, 0] - P[:, 2], axis=1),
            np.linalg.norm(P[:, 1] - P[:, 0], axis=1),
        ], axis=1)

    @cached_property
    def angles(self) -> np.ndarray:
        """Per-triangle interior angles, angle i at vertex i."""
        P = self.vertices[self.triangles]
        out = np.empty((self.n_triangles, 3))
        for i in range(3):
            u = P[:, (i + 1) % 3] - P[:, i]
            w = P[:, (i + 2) % 3] - P[:, i]
            cross = np.abs(u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0])
            out[:, i] = np.arctan2(cross, np.einsum("ij,ij->i", u, w))
        return out

    @property
    def tags(self) -> np.ndarray:
        if self.region_tag is None:
            return np.zeros(self.n_triangles, dtype=np.int8)
        return self.region_tag

    def with_tags(self, tags) -> "Triangulation":
        return Triangulation.build(self.vertices, self.triangles, tags, self.boundary_vertices)

    # -- serialization ---------------------------------------------------

    def to_json(self) -> str:
        verts = ",".join(f"[{x:.17g},{y:.17g}]" for x, y in self.vertices)
        doc = (
            '{"vertices":[' + verts + '],'
            + '"triangles":' + json.dumps(self.triangles.tolist(), separators=(",", ":")) + ","
            + '"boundary":' + json.dumps(self.boundary_vertices.tolist(), separators=(",", ":")) + ","
            + '"tags":' + json.dumps(self.tags.astype(int).tolist(), separators=(",", ":"))
            + "}"
        )
        return doc

    @classmethod
    def from_json(cls, text: str) -> "Triangulation":
        d = json.loads(text)
        try:
            return cls.build(d["vertices"], d["triangles"], d.get("tags"), d.get("boundary"))
        except KeyError as exc:
            raise ParameterError(f"mesh JSON lacks key {exc}") from None

    def write(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def read(cls, path) -> "Triangulation":
        with open(path) as f:
            return cls.from_json(f.read())


def _signed_areas(V: np.ndarray, T: np.ndarray) -> np.ndarray:
    P = V[T]
    u = P[:, 1] - P[:, 0]
    w = P[:, 2] - P[:, 0]
    return 0.5 * (u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0])


def edge_table(T: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unique undirected edges.

    Returns ``(edges, inverse, counts)`` where ``edges`` are sorted vertex
    pairs, ``inverse`` maps each of the ``3m`` directed triangle edges
    (ordered triangle by triangle, edge i from vertex i to i+1) to its row in
    ``edges``, and ``counts`` is the number of triangles using each edge.
    """
    directed = np.stack([T, np.roll(T, -1, axis=1)], axis=2).reshape(-1, 2)
    und = np.sort(directed, axis=1)
    edges, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
    return edges, inverse.reshape(-1), counts


def _boundary_from_edges(T: np.ndarray) -> np.ndarray:
    if not len(T):
        return np.zeros(0, dtype=np.int64)
    edges, _, counts = edge_table(T)
    return np.unique(edges[counts == 1])


# ---------------------------------------------------------------------------
# Clipping
# ---------------------------------------------------------------------------


def _clip_polygon(poly: List[Tuple[float, float]], rect: Rect) -> List[Tuple[float, float]]:
    x0, y0, x1, y1 = rect
    planes = ((0, x0, 1.0), (0, x1, -1.0), (1, y0, 1.0), (1, y1, -1.0))
    out = poly
    for axis, c, sgn in planes:
        if not out:
            break
        src, out = out, []
        for i in range(len(src)):
            p, q = src[i - 1], src[i]
            dp, dq = sgn * (p[axis] - c), sgn * (q[axis] - c)
            if dq >= 0:
                if dp < 0:
                    t = dp / (dp - dq)
                    out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
                out.append(q)
            elif dp >= 0:
                t = dp / (dp - dq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _poly_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    s = 0.0
    for i in range(len(poly)):
        (xa, ya), (xb, yb) = poly[i - 1], poly[i]
        s += xa * yb - xb * ya
    return 0.5 * s


def clipped_areas(mesh: Triangulation, rect: Rect = UNIT_SQUARE) -> np.ndarray:
    """Area of each triangle inside the axis-aligned rectangle ``rect``."""
    x0, y0, x1, y1 = rect
    P = mesh.vertices[mesh.triangles]
    xs, ys = P[..., 0], P[..., 1]
    inside = (xs.min(1) >= x0) & (xs.max(1) <= x1) & (ys.min(1) >= y0) & (ys.max(1) <= y1)
    outside = (xs.max(1) <= x0) | (xs.min(1) >= x1) | (ys.max(1) <= y0) | (ys.min(1) >= y1)
    out = np.where(inside, mesh.areas, 0.0)
    for i in np.nonzero(~inside & ~outside)[0]:
        poly = [tuple(p) for p in P[i]]
        out[i] = _poly_area(_clip_polygon(poly, rect))
    return out


def restrict(mesh: Triangulation, rect: Rect = UNIT_SQUARE) -> Triangulation:
    """Drop triangles that do not meet ``rect`` and renumber the vertices."""
    keep = clipped_areas(mesh, rect) > 0
    if keep.all():
        return mesh
    T = mesh.triangles[keep]
    used = np.unique(T)
    remap = -np.ones(mesh.n_vertices, dtype=np.int64)
    remap[used] = np.arange(len(used))
    tags = None if mesh.region_tag is None else mesh.region_tag[keep]
    return Triangulation.build(mesh.vertices[used], remap[T], tags)


# ---------------------------------------------------------------------------
# Admissibility
# ---------------------------------------------------------------------------


@dataclass
class AdmissibilityReport:
    valid: bool
    min_edge: float
    max_edge: float
    min_angle: float
    violations: List[Tuple[int, str]] = field(default_factory=list)

    def summary(self) -> Dict[str, object]:
        reasons: Dict[str, int] = {}
        for _, r in self.violations:
            reasons[r] = reasons.get(r, 0) + 1
        return {"valid": self.valid, "min_edge": self.min_edge, "max_edge": self.max_edge,
                "min_angle_deg": math.degrees(self.min_angle), "violation_counts": reasons}


def conformity_violations(mesh: Triangulation) -> List[Tuple[int, str]]:
    """Local conformity defects: overused edges, folds, hanging and duplicate vertices."""
    T, V = mesh.triangles, mesh.vertices
    out: List[Tuple[int, str]] = []
    if not len(T):
        return out
    edges, inv, counts = edge_table(T)
    tri_of = np.repeat(np.arange(len(T)), 3)
    for e in np.nonzero(counts > 2)[0]:
        for t in np.unique(tri_of[inv == e]):
            out.append((int(t), "edge shared by more than two triangles"))
    # shared edges must be traversed in opposite directions by CCW triangles
    directed = np.stack([T, np.roll(T, -1, axis=1)], axis=2).reshape(-1, 2)
    forward = directed[:, 0] < directed[:, 1]
    fw_count = np.bincount(inv, weights=forward.astype(float), minlength=len(edges))
    folded = (counts == 2) & (fw_count != 1)
    for e in np.nonzero(folded)[0]:
        for t in np.unique(tri_of[inv == e]):
            out.append((int(t), "overlapping neighbours across a shared edge"))
    # duplicate vertices
    tree = cKDTree(V)
    scale = float(np.ptp(V, axis=0).max()) if len(V) > 1 else 1.0
    pairs = tree.query_pairs(1e-12 * max(scale, 1.0))
    used = set(np.unique(T).tolist())
    for a, b in pairs:
        if a in used and b in used:
            for t in np.nonzero(np.any(T == a, axis=1))[0]:
                out.append((int(t), "duplicate vertex"))
    # hanging vertices lying inside a boundary edge
    bnd = edges[counts == 1]
    if len(bnd):
        bverts = np.unique(bnd)
        btree = cKDTree(V[bverts])
        A, B = V[bnd[:, 0]], V[bnd[:, 1]]
        mid, half = 0.5 * (A + B), 0.5 * np.linalg.norm(B - A, axis=1)
        for k, cand in enumerate(btree.query_ball_point(mid, half * (1 + 1e-9))):
            if len(cand) == 0:
                continue
            idx = bverts[np.asarray(cand)]
            idx = idx[(idx != bnd[k, 0]) & (idx != bnd[k, 1])]
            if not len(idx):
                continue
            d = B[k] - A[k]
            r = V[idx] - A[k]
            L2 = float(d @ d)
            cross = np.abs(d[0] * r[:, 1] - d[1] * r[:, 0])
            t = (r @ d) / L2
            hit = (cross <= 1e-9 * L2) & (t > 1e-9) & (t < 1 - 1e-9)
            if np.any(hit):
                e_id = np.nonzero((edges[:, 0] == bnd[k, 0]) & (edges[:, 1] == bnd[k, 1]))[0][0]
                for t_id in np.unique(tri_of[inv == e_id]):
                    out.append((int(t_id), "hanging vertex on an edge"))
    return out


def validate(mesh: Triangulation, h: float, omega_factor: float, theta0: float,
             domain: Optional[Rect] = None) -> AdmissibilityReport:
    """Check membership of ``mesh`` in the admissible class for ``(h, omega, theta0)``.

    Edges must lie in ``[h, omega_factor*h]`` and angles be at least
    ``theta0``, with a relative slack of 1e-9.  When ``domain`` is given the
    mesh must also cover it, and no vertex of a triangle may sit farther
    than ``omega_factor*h`` outside it.
    """
    if not (h > 0):
        raise ParameterError("h must be positive")
    if omega_factor < 6:
        raise ParameterError("omega_factor must be >= 6")
    violations: List[Tuple[int, str]] = []
    if mesh.n_triangles == 0:
        return AdmissibilityReport(False, math.nan, math.nan, math.nan, [(-1, "empty mesh")])
    L = mesh.edge_lengths
    ang = mesh.angles
    area = mesh.areas
    for t in np.nonzero(area <= 0)[0]:
        violations.append((int(t), "non-positive area"))
    for t in np.nonzero(L.min(1) < h * (1 - _REL))[0]:
        violations.append((int(t), "edge shorter than h"))
    for t in np.nonzero(L.max(1) > omega_factor * h * (1 + _REL))[0]:
        violations.append((int(t), "edge longer than omega(h)"))
    for t in np.nonzero(ang.min(1) < theta0 * (1 - _REL))[0]:
        violations.append((int(t), "angle below theta0"))
    violations.extend(conformity_violations(mesh))
    if domain is not None:
        x0, y0, x1, y1 = domain
        P = mesh.vertices[mesh.triangles]
        dx = np.maximum(np.maximum(x0 - P[..., 0], P[..., 0] - x1), 0.0)
        dy = np.maximum(np.maximum(y0 - P[..., 1], P[..., 1] - y1), 0.0)
        far = np.hypot(dx, dy).max(1) > omega_factor * h * (1 + _REL)
        for t in np.nonzero(far)[0]:
            violations.append((int(t), "overhang beyond omega(h)"))
        clipped = clipped_areas(mesh, domain)
        for t in np.nonzero(clipped <= 0)[0]:
            violations.append((int(t), "triangle does not meet the domain"))
        covered = float(clipped.sum())
        target = (x1 - x0) * (y1 - y0)
        if abs(covered - target) > 1e-9 * target:
            violations.append((-1, f"domain not covered (covered area {covered:.12g})"))
    violations.sort()
    return AdmissibilityReport(not violations, float(L.min()), float(L.max()),
                               float(ang.min()), violations)


# ---------------------------------------------------------------------------
# Structured generators
# ---------------------------------------------------------------------------


def _rect_grid(xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor grid split along the (i,j)-(i+1,j+1) diagonals.

    Each triangle lists its right-angle vertex first.  Triangles are
    ordered cell by cell, x fastest.
    """
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys)
    V = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1))
    i, j = i.ravel(), j.ravel()
    p00 = j * nx + i
    p10, p01, p11 = p00 + 1, p00 + nx, p00 + nx + 1
    T = np.empty((2 * len(p00), 3), dtype=np.int64)
    T[0::2] = np.column_stack([p10, p11, p00])
    T[1::2] = np.column_stack([p01, p00, p11])
    return V, T


def _bisect(V: np.ndarray, T: np.ndarray, tags: Optional[np.ndarray]):
    """Split every triangle through the midpoint of the edge opposite its first vertex.

    Returns the new vertices, triangles and tags, and for each appended
    midpoint the pair of vertices it bisects.
    """
    hyp = np.sort(T[:, 1:], axis=1)
    uniq, inv = np.unique(hyp, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mids = 0.5 * (V[uniq[:, 0]] + V[uniq[:, 1]])
    m = len(V) + inv
    V2 = np.vstack([V, mids])
    T2 = np.empty((2 * len(T), 3), dtype=np.int64)
    T2[0::2] = np.column_stack([m, T[:, 0], T[:, 1]])
    T2[1::2] = np.column_stack([m, T[:, 2], T[:, 0]])
    tags2 = None if tags is None else np.repeat(tags, 2)
    return V2, T2, tags2, uniq


def uniform_mesh(n: int, refine_steps: int = 0, side: float = 1.0,
                 origin: Tuple[float, float] = (0.0, 0.0)) -> Triangulation:
    """``n x n`` squares split into right isosceles triangles, then bisected ``refine_steps`` times."""
    if n < 1 or refine_steps < 0:
        raise ParameterError("need n >= 1 and refine_steps >= 0")
    xs = origin[0] + side * np.arange(n + 1) / n
    ys = origin[1] + side * np.arange(n + 1) / n
    V, T = _rect_grid(xs, ys)
    for _ in range(refine_steps):
        V, T, _t, _p = _bisect(V, T, None)
    return Triangulation.build(V, T)


def _column_breaks(damaged: float, sound: float, cross_width: float, n_periods: int) -> Tuple[np.ndarray, np.ndarray]:
    """Column breakpoints along one lamination direction and per-column damage flags."""
    if sound > 0:
        n_sub = max(1, int(math.floor(sound / cross_width * (1 + 1e-12))))
        sub = np.full(n_sub, sound / n_sub)
    else:
        sub = np.zeros(0)
    widths = ([damaged] if damaged > 0 else []) + sub.tolist()
    flags = ([1] if damaged > 0 else []) + [0] * len(sub)
    period = damaged + sound
    breaks = [0.0]
    col_flags: List[int] = []
    for k in range(n_periods):
        x = k * period
        for w, f in zip(widths, flags):
            x += w
            breaks.append(x)
            col_flags.append(f)
        breaks[-1] = (k + 1) * period
    return np.array(breaks), np.array(col_flags, dtype=np.int8)


def _periods_in(side: float, period: float) -> int:
    k = side / period
    n = int(round(k))
    if n < 1 or abs(k - n) > 1e-9 * max(1.0, k):
        raise ParameterError(f"period {period:.6g} does not divide side {side:.6g}")
    return n


def covering_frame(b) -> Tuple[np.ndarray, float]:
    """Origin and side of the square spanned by ``(b, b_perp)`` that contains the unit square."""
    b = np.asarray(b, dtype=float)
    b = b / np.linalg.norm(b)
    bp = np.array([-b[1], b[0]])
    corners = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    s, t = corners @ b, corners @ bp
    side = abs(b[0]) + abs(b[1])
    return s.min() * b + t.min() * bp, side


def _frame_mesh(b, s_breaks, t_breaks, tags, origin) -> Triangulation:
    b = np.asarray(b, dtype=float)
    b = b / np.linalg.norm(b)
    bp = np.array([-b[1], b[0]])
    V, T = _rect_grid(s_breaks, t_breaks)
    W = np.asarray(origin, dtype=float) + V[:, :1] * b + V[:, 1:] * bp
    return Triangulation.build(W, T, tags)


def stripe_mesh(b, period_widths: Tuple[float, float], cross_width: float,
                bounding_square_side: Optional[float] = None, *,
                origin=None, n_periods: Optional[int] = None,
                n_rows: Optional[int] = None) -> Triangulation:
    """Laminated mesh of columns along ``b``: a damaged column, then sound sub-columns.

    Parameters
    ----------
    b : array-like
        Lamination normal; columns are stacked along it.
    period_widths : (float, float)
        Damaged and sound widths of one period.
    cross_width : float
        Target width of sound sub-columns and of rows along ``b_perp``.
    bounding_square_side : float, optional
        Side of the meshed square in the ``(b, b_perp)`` frame.  Defaults to
        ``|b1| + |b2|``, the smallest such square containing the unit square;
        in that case triangles missing the unit square are dropped.
    origin : array-like, optional
        Corner of the square; defaults to the corner that makes the square
        contain the unit square.
    n_periods, n_rows : int, optional
        Mesh only a window of this many periods and rows.  Row widths are
        those of the full square, ``side / floor(side / cross_width)``.
    """
    damaged, sound = map(float, period_widths)
    if damaged <= 0 or sound < 0 or cross_width <= 0:
        raise ParameterError("widths must be positive")
    o, side0 = covering_frame(b)
    side = side0 if bounding_square_side is None else float(bounding_square_side)
    covers_unit = origin is None and bounding_square_side is None and n_periods is None and n_rows is None
    origin = o if origin is None else origin
    n_full = _periods_in(side, damaged + sound)
    n_periods = n_full if n_periods is None else int(n_periods)
    s_breaks, flags = _column_breaks(damaged, sound, cross_width, n_periods)
    n_full_rows = max(1, int(math.floor(side / cross_width * (1 + 1e-12))))
    n_rows = n_full_rows if n_rows is None else int(n_rows)
    t_breaks = (side / n_full_rows) * np.arange(n_rows + 1)
    tags = np.tile(np.repeat(flags, 2), n_rows)
    mesh = _frame_mesh(b, s_breaks, t_breaks, tags, origin)
    return restrict(mesh) if covers_unit else mesh


def double_stripe_mesh(b1, widths1: Tuple[float, float], widths2: Tuple[float, float],
                       bounding_square_side: Optional[float] = None, *,
                       cross_width: Optional[float] = None, origin=None,
                       n_periods: Optional[Tuple[int, int]] = None) -> Triangulation:
    """Tensor-product lamination along ``b1`` and ``b2 = b1_perp``.

    A triangle is damaged when it lies in a damaged column of either
    direction.  ``cross_width`` sets the sound sub-column width (default:
    the smaller damaged width, or the sound width when no damage).
    ``n_periods`` restricts the mesh to a window of whole periods.
    """
    d1, s1 = map(float, widths1)
    d2, s2 = map(float, widths2)
    if min(d1, s1, s2) < 0 or d2 < 0 or d1 + s1 <= 0 or d2 + s2 <= 0:
        raise ParameterError("widths must be non-negative with positive periods")
    o, side0 = covering_frame(b1)
    side = side0 if bounding_square_side is None else float(bounding_square_side)
    covers_unit = origin is None and bounding_square_side is None and n_periods is None
    origin = o if origin is None else origin
    if cross_width is None:
        pos = [w for w in (d1, d2) if w > 0]
        cross_width = min(pos) if pos else min(s1, s2)
    if n_periods is None:
        n1, n2 = _periods_in(side, d1 + s1), _periods_in(side, d2 + s2)
    else:
        n1, n2 = n_periods
    sb, f1 = _column_breaks(d1, s1, cross_width, n1)
    tb, f2 = _column_breaks(d2, s2, cross_width, n2)
    cell = np.maximum(f1[None, :], f2[:, None])  # rows (t) x columns (s)
    tags = np.repeat(cell.ravel(), 2)
    mesh = _frame_mesh(b1, sb, tb, tags, origin)
    return restrict(mesh) if covers_unit else mesh


def _outer_row_height(pitch: float, h: Optional[float], theta0: Optional[float],
                      omega_factor: float) -> Tuple[float, float]:
    if h is None or theta0 is None:
        return pitch, pitch
    lo = max(h, pitch * math.tan(theta0))
    hi = min(pitch / math.tan(theta0), math.sqrt(max((omega_factor * h) ** 2 - pitch ** 2, 0.0)))
    if lo > hi:
        raise ParameterError("no admissible row height for the outer region")
    return lo, hi


def _rows(height: float, lo: float, hi: float) -> int:
    n = max(1, int(math.ceil(height / hi * (1 - 1e-12))))
    if height / n < lo * (1 - 1e-9):
        raise ParameterError("cannot fill the outer region with admissible rows")
    return n


def jump_strip_mesh(band_halfwidth: float, layer_height: float, n_columns: Optional[int] = None,
                    *, h: Optional[float] = None, theta0: Optional[float] = None,
                    omega_factor: float = 6.0) -> Triangulation:
    """Unit-square mesh resolving a horizontal jump at ``y = 1/2`` by a zig-zag band.

    The band ``|y - 1/2| < band_halfwidth`` is tiled by isosceles triangles
    with base ``layer_height`` whose apexes alternate between the two band
    lines; these triangles are tagged damaged.  Structured rows of right
    triangles fill the rest.  When ``h`` and ``theta0`` are given the row
    height is chosen admissible for them, otherwise rows are square.
    """
    bw, p = float(band_halfwidth), float(layer_height)
    if bw <= 0 or p <= 0:
        raise ParameterError("band_halfwidth and layer_height must be positive")
    if 2 * bw > 0.25:
        raise ParameterError("band wider than 1/4")
    s = 0.5 * p
    # lower line: x = -s + j p ; upper line: x = j p, starting at 0
    if n_columns is None:
        n_columns = int(math.ceil(1.0 / p - 1e-12)) + 1
    J = int(n_columns)
    if (J - 1) * p < 1.0 - 1e-12:
        raise ParameterError("n_columns too small to span the unit square")
    xl = -s + p * np.arange(J + 1)
    xu = p * np.arange(J)
    yl, yu = 0.5 - bw, 0.5 + bw

    lo, hi = _outer_row_height(p, h, theta0, omega_factor)
    nb = _rows(yl, lo, hi)
    na = _rows(1.0 - yu, lo, hi)
    Vb, Tb = _rect_grid(xl, np.linspace(0.0, yl, nb + 1))
    Va, Ta = _rect_grid(xu, np.linspace(yu, 1.0, na + 1))
    Vb[:, 1][np.isclose(Vb[:, 1], yl)] = yl
    Va[:, 1][np.isclose(Va[:, 1], yu)] = yu
    # lower line is the top row of Vb; upper line is the bottom row of Va
    nxl, nxu = J + 1, J
    G = nb * nxl + np.arange(nxl)
    off = len(Vb)
    D = off + np.arange(nxu)
    V = np.vstack([Vb, Va])
    band = []
    for j in range(J):
        band.append((G[j], G[j + 1], D[j]))
    for j in range(J - 1):
        band.append((D[j], G[j + 1], D[j + 1]))
    T = np.vstack([Tb, Ta + off, np.array(band, dtype=np.int64)])
    tags = np.concatenate([np.zeros(len(Tb) + len(Ta), dtype=np.int8), np.ones(len(band), dtype=np.int8)])
    return restrict(Triangulation.build(V, T, tags))


# ---------------------------------------------------------------------------
# Cohesive zig-zag fan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CohesiveFragment:
    mesh: Triangulation
    points: np.ndarray
    count: int
    diagnostics: Dict[str, float]


def cohesive_mesh(segment, amplitude: Callable[[np.ndarray], float], h: float, theta: float,
                  *, theta0: Optional[float] = None, lipschitz: Optional[float] = None) -> CohesiveFragment:
    """Zig-zag fan of triangles along ``segment`` with local height ``h * amplitude``.

    Incremental points advance by ``h l / tan(theta)`` along the segment;
    vertices sit at ``-+ h l / 2`` across it.  Triangle ``j`` joins
    ``G[j+1], D[j], G[j-1]`` for odd ``j`` and ``D[j+1], G[j], D[j-1]`` for
    even ``j``.
    """
    p0, p1 = (np.asarray(p, dtype=float) for p in segment)
    if h <= 0:
        raise ParameterError("h must be positive")
    if not (0 < theta <= math.pi / 3 + 1e-15):
        raise ParameterError("theta must lie in (0, pi/3]")
    if theta0 is not None and not theta0 < theta:
        raise ParameterError("theta must exceed theta0")
    length = float(np.linalg.norm(p1 - p0))
    if length == 0:
        raise ParameterError("degenerate segment")
    tang = (p1 - p0) / length
    nu = np.array([tang[1], -tang[0]])
    tan_t, sin_t = math.tan(theta), math.sin(theta)

    def amp(x):
        l_ = float(amplitude(x))
        if l_ < sin_t * (1 - 1e-12):
            raise ParameterError(f"amplitude {l_:.6g} below sin(theta) = {sin_t:.6g}")
        return l_

    pts, amps = [p0.copy()], [amp(p0)]
    while True:
        nxt = pts[-1] + h * amps[-1] / tan_t * tang
        if (nxt - p0) @ tang > length * (1 + 1e-12):
            break
        pts.append(nxt)
        amps.append(amp(nxt))
    M = len(pts)
    a_first = pts[0] - h * amps[0] / tan_t * tang
    a_last = pts[-1] + h * amps[-1] / tan_t * tang
    A = np.array([a_first] + pts + [a_last])
    Lv = np.array([amps[0]] + amps + [amps[-1]])
    G = A - (h * Lv / 2)[:, None] * nu
    Dv = A + (h * Lv / 2)[:, None] * nu
    n = len(A)
    V = np.vstack([G, Dv])  # G index j, D index n + j
    tris = []
    for j in range(1, M + 1):
        if j % 2 == 1:
            tris.append((j + 1, n + j, j - 1))
        else:
            tris.append((n + j + 1, j, n + j - 1))
    used = np.unique(np.array(tris))
    remap = -np.ones(len(V), dtype=np.int64)
    remap[used] = np.arange(len(used))
    mesh = Triangulation.build(V[used], remap[np.array(tris)], np.ones(len(tris), dtype=np.int8))
    ang = np.sort(mesh.angles, axis=1)
    target = np.sort(np.array([theta, theta, math.pi - 2 * theta]))
    diag = {
        "min_edge_over_h": float(mesh.edge_lengths.min() / h),
        "max_edge_over_h": float(mesh.edge_lengths.max() / h),
        "angle_spread": float(np.abs(ang - target).max()),
        "count_bound": length / (h * math.cos(theta)) + 1,
    }
    if lipschitz is not None:
        diag["lipschitz"] = float(lipschitz)
    return CohesiveFragment(mesh, np.array(pts), M, diag)
