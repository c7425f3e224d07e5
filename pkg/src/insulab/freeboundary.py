"""Free-boundary extraction and contour geometry.

Boundaries are tau-isolines extracted marching-squares style with linear
edge interpolation; all distances (Hausdorff, growth scans) are measured
vertex-to-segment against the extracted polylines for sub-cell accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainSpec
from .grids import ScalarField


class NoBoundary(ValueError):
    """An operation that needs a nonempty contour got an empty one."""


class ScanUnderpowered(RuntimeError):
    """Too few valid sample points for a trustworthy growth scan."""


@dataclass
class ContourSet:
    polylines: list[np.ndarray]
    closed: list[bool]

    def __post_init__(self):
        if len(self.polylines) != len(self.closed):
            raise ValueError("one closed flag per polyline required")

    def __len__(self) -> int:
        return len(self.polylines)

    def is_empty(self) -> bool:
        return len(self.polylines) == 0

    def vertices(self) -> np.ndarray:
        if self.is_empty():
            return np.zeros((0, 2))
        return np.concatenate(self.polylines, axis=0)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """All polyline segments as (start, end) arrays, closing loops."""
        starts, ends = [], []
        for poly, closed in zip(self.polylines, self.closed):
            a, b = poly[:-1], poly[1:]
            if closed:
                a = np.vstack([a, poly[-1]])
                b = np.vstack([b, poly[0]])
            starts.append(a)
            ends.append(b)
        if not starts:
            return np.zeros((0, 2)), np.zeros((0, 2))
        return np.concatenate(starts), np.concatenate(ends)

    def total_length(self) -> float:
        a, b = self.segments()
        return float(np.linalg.norm(b - a, axis=1).sum())


@dataclass
class GrowthScan:
    """Measured linear-growth and non-degeneracy constants."""

    theta_linear: float
    theta_sup: float
    samples: int


# marching-squares segment table: per corner case (bits: bl, br, tr, tl),
# the edge pairs the isoline connects; edges are 0=bottom 1=right 2=top
# 3=left.  Ambiguous saddles (cases 5, 10) are resolved by cell average.
_CASE_SEGMENTS: dict[int, list[tuple[int, int]]] = {
    0: [], 15: [],
    1: [(3, 0)], 14: [(3, 0)],
    2: [(0, 1)], 13: [(0, 1)],
    4: [(1, 2)], 11: [(1, 2)],
    8: [(2, 3)], 7: [(2, 3)],
    3: [(3, 1)], 12: [(3, 1)],
    6: [(0, 2)], 9: [(0, 2)],
}


def extract_contour(u: ScalarField, tau: float,
                    cell_mask: np.ndarray | None = None) -> ContourSet:
    """Isoline of u = tau as chained polylines.

    cell_mask, if given, restricts extraction to cells where it is True
    (shape (ny-1, nx-1)).  An empty result is a valid outcome, not an error.
    """
    u.check_finite("contour field")
    s = u.values - tau
    grid = u.grid
    h = grid.h
    ox, oy = grid.origin
    inside = s > 0.0

    # crossing points per edge, addressed by edge id
    points: dict[tuple, tuple[float, float]] = {}

    def horiz_edge(j: int, i: int):
        key = ("h", j, i)
        if key not in points:
            s0, s1 = s[j, i], s[j, i + 1]
            t = s0 / (s0 - s1)
            points[key] = (ox + (i + t) * h, oy + j * h)
        return key

    def vert_edge(j: int, i: int):
        key = ("v", j, i)
        if key not in points:
            s0, s1 = s[j, i], s[j + 1, i]
            t = s0 / (s0 - s1)
            points[key] = (ox + i * h, oy + (j + t) * h)
        return key

    ny, nx = grid.shape
    segments: list[tuple[tuple, tuple]] = []
    case = (inside[:-1, :-1].astype(int)
            + 2 * inside[:-1, 1:].astype(int)
            + 4 * inside[1:, 1:].astype(int)
            + 8 * inside[1:, :-1].astype(int))
    cells_j, cells_i = np.nonzero((case != 0) & (case != 15))
    for j, i in zip(cells_j, cells_i):
        if cell_mask is not None and not cell_mask[j, i]:
            continue
        c = case[j, i]
        if c in (5, 10):
            avg_inside = (s[j, i] + s[j, i + 1] + s[j + 1, i + 1] + s[j + 1, i]) > 0.0
            # saddle: pick the pairing that keeps the average-side corners
            # connected
            if (c == 5) == avg_inside:
                pairs = [(3, 0), (1, 2)]
            else:
                pairs = [(0, 1), (2, 3)]
        else:
            pairs = _CASE_SEGMENTS[c]
        edge_keys = {
            0: lambda: horiz_edge(j, i),
            1: lambda: vert_edge(j, i + 1),
            2: lambda: horiz_edge(j + 1, i),
            3: lambda: vert_edge(j, i),
        }
        for e0, e1 in pairs:
            k0, k1 = edge_keys[e0](), edge_keys[e1]()
            if points[k0] != points[k1]:
                segments.append((k0, k1))

    return _chain_segments(segments, points)


def _chain_segments(segments, points) -> ContourSet:
    adjacency: dict[tuple, list[tuple]] = {}
    for k0, k1 in segments:
        adjacency.setdefault(k0, []).append(k1)
        adjacency.setdefault(k1, []).append(k0)

    visited: set[frozenset] = set()
    polylines: list[np.ndarray] = []
    closed_flags: list[bool] = []

    def walk(start: tuple) -> list[tuple]:
        chain = [start]
        current = start
        while True:
            nxt = None
            for cand in adjacency[current]:
                if frozenset((current, cand)) not in visited:
                    nxt = cand
                    break
            if nxt is None:
                return chain
            visited.add(frozenset((current, nxt)))
            chain.append(nxt)
            current = nxt

    def emit(chain: list[tuple]):
        closed = len(chain) > 3 and chain[0] == chain[-1]
        if closed:
            chain = chain[:-1]
        pts = np.array([points[k] for k in chain])
        # drop zero-length steps from crossings that share a grid node
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[keep]
        if len(pts) >= 2:
            polylines.append(pts)
            closed_flags.append(closed)

    # open chains first (endpoints of degree 1), then leftover loops; a
    # loop walk returns to its start, which emit() detects and trims
    for start in [k for k, nbrs in adjacency.items() if len(nbrs) == 1]:
        if all(frozenset((start, n)) in visited for n in adjacency[start]):
            continue
        emit(walk(start))
    for start in adjacency:
        if all(frozenset((start, n)) in visited for n in adjacency[start]):
            continue
        emit(walk(start))

    return ContourSet(polylines=polylines, closed=closed_flags)


def interior_contact_boundary(u: ScalarField, domain: DomainSpec,
                              tol: float) -> ContourSet:
    """Isoline of (u - phi) = tol over cells fully inside the room."""
    if not (tol > 0):
        raise ValueError(f"contact tolerance must be positive, got {tol}")
    inside = domain.inside()
    cell_mask = (inside[:-1, :-1] & inside[:-1, 1:]
                 & inside[1:, 1:] & inside[1:, :-1])
    gap = ScalarField(u.grid, u.values - domain.phi.values)
    return extract_contour(gap, tol, cell_mask=cell_mask)


def _min_dist_to_segments(pts: np.ndarray, seg_a: np.ndarray,
                          seg_b: np.ndarray) -> np.ndarray:
    """Min distance from each point to any segment, vectorized."""
    d = seg_b - seg_a                          # (k, 2)
    len2 = np.maximum((d**2).sum(axis=1), 1e-300)
    best = np.full(len(pts), np.inf)
    # chunk over points to bound the (m, k) temporaries
    for lo in range(0, len(pts), 1024):
        p = pts[lo:lo + 1024]
        ap = p[:, None, :] - seg_a[None, :, :]  # (m, k, 2)
        t = np.clip((ap * d[None, :, :]).sum(axis=2) / len2[None, :], 0.0, 1.0)
        proj = seg_a[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.linalg.norm(p[:, None, :] - proj, axis=2).min(axis=1)
        best[lo:lo + 1024] = dist
    return best


def distance_to_contour(pts: np.ndarray, contour: ContourSet) -> np.ndarray:
    if contour.is_empty():
        raise NoBoundary("no boundary to measure distances against")
    seg_a, seg_b = contour.segments()
    return _min_dist_to_segments(np.atleast_2d(pts), seg_a, seg_b)


def hausdorff_distance(a: ContourSet, b: ContourSet) -> float:
    """Symmetric Hausdorff distance between two contour sets, measured
    vertex-to-segment both ways."""
    if a.is_empty() or b.is_empty():
        raise NoBoundary("no boundary: hausdorff distance needs two nonempty sets")
    d_ab = distance_to_contour(a.vertices(), b).max()
    d_ba = distance_to_contour(b.vertices(), a).max()
    return float(max(d_ab, d_ba))


def _length_in_ball(seg_a: np.ndarray, seg_b: np.ndarray,
                    center: np.ndarray, r: float) -> float:
    """Total length of the segment portions inside the closed ball."""
    d = seg_b - seg_a
    f = seg_a - center
    a = (d**2).sum(axis=1)
    b = 2.0 * (f * d).sum(axis=1)
    c = (f**2).sum(axis=1) - r * r
    disc = b * b - 4.0 * a * c
    hit = (disc > 0.0) & (a > 0.0)
    if not hit.any():
        return 0.0
    sq = np.sqrt(disc[hit])
    t0 = np.clip((-b[hit] - sq) / (2.0 * a[hit]), 0.0, 1.0)
    t1 = np.clip((-b[hit] + sq) / (2.0 * a[hit]), 0.0, 1.0)
    return float(np.sum((t1 - t0) * np.sqrt(a[hit])))


def density_ratios(contour: ContourSet, u: ScalarField, tau: float,
                   radii: list[float], max_centers: int = 64,
                   ) -> list[tuple[float, float, float]]:
    """Boundary length inside balls centered on the contour, per unit radius.

    For each radius returns (r, min ratio, max ratio) over the sampled
    centers; in 2-D a locally flat boundary gives ratio 2.
    """
    if contour.is_empty():
        raise NoBoundary("density ratios need a nonempty contour")
    h = u.grid.h
    for r in radii:
        if r < 3 * h - 1e-12:
            raise ValueError(f"radius {r} below the resolvable 3h scan floor")
    verts = contour.vertices()
    stride = max(1, len(verts) // max_centers)
    centers = verts[::stride]
    seg_a, seg_b = contour.segments()
    out = []
    for r in radii:
        ratios = [
            _length_in_ball(seg_a, seg_b, c, r) / r for c in centers
        ]
        out.append((float(r), float(min(ratios)), float(max(ratios))))
    return out


def growth_scan(u: ScalarField, tau: float, domain: DomainSpec,
                seed: int = 0, n_linear: int = 400, n_boundary: int = 48,
                radii: np.ndarray | None = None, contact_tol: float | None = None,
                min_samples: int = 100) -> GrowthScan:
    """Measure the linear-growth and strong non-degeneracy constants.

    theta_linear: min of u(x)/dist(x, boundary) over nodes in the positivity
    set away from the obstacle contact set.  theta_sup: min over boundary
    points and radii of sup of u on the ball over the radius, skipping balls
    that touch the contact set.
    """
    contour = extract_contour(u, tau)
    if contour.is_empty():
        raise NoBoundary("no boundary: positivity set has no tau-isoline")
    grid = u.grid
    h = grid.h
    max_phi = float(domain.phi.values.max())
    if contact_tol is None:
        contact_tol = 1e-3 * max_phi if max_phi > 0 else 0.0
    contact = domain.inside() & (u.values - domain.phi.values <= contact_tol) \
        & (domain.phi.values > 0)

    X, Y = grid.node_coords()
    candidates = (u.values > tau) & ~contact
    jj, ii = np.nonzero(candidates)
    if len(jj) < min_samples:
        raise ScanUnderpowered(
            f"growth scan underpowered: {len(jj)} candidate nodes, "
            f"need {min_samples}")
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(jj), size=min(n_linear, len(jj)), replace=False)
    pick.sort()
    pts = np.column_stack([X[jj[pick], ii[pick]], Y[jj[pick], ii[pick]]])
    vals = u.values[jj[pick], ii[pick]]
    dists = distance_to_contour(pts, contour)
    # within two cells of the contour the linear edge interpolation cannot
    # localize the boundary, so u/dist there measures grid noise, not growth
    ok = dists > 2 * h
    if not ok.any():
        raise ScanUnderpowered(
            "growth scan underpowered: every sample sits in the two-cell "
            "boundary band")
    theta_linear = float((vals[ok] / dists[ok]).min())

    if radii is None:
        # below ~4 cells a ball resolves only one or two node layers, so the
        # sup ratio measures the grid, not the growth constant (same floor
        # as the density scans)
        r_scan = 0.25 * min(grid.extent)
        radii = np.geomspace(4 * h, r_scan, 6)
    verts = contour.vertices()
    stride = max(1, len(verts) // n_boundary)
    centers = verts[::stride]
    contact_pts = np.column_stack([X[contact], Y[contact]])
    theta_sup = np.inf
    n_sup = 0
    ox, oy = grid.origin
    ex, ey = grid.extent
    for x0 in centers:
        if len(contact_pts):
            clearance = float(np.linalg.norm(contact_pts - x0, axis=1).min())
        else:
            clearance = np.inf
        for r in radii:
            if r >= clearance:
                continue
            if (x0[0] - r < ox or x0[0] + r > ox + ex
                    or x0[1] - r < oy or x0[1] + r > oy + ey):
                continue
            ball = (X - x0[0])**2 + (Y - x0[1])**2 <= r * r
            if not ball.any():
                continue
            theta_sup = min(theta_sup, float(u.values[ball].max()) / r)
            n_sup += 1
    if n_sup == 0:
        raise ScanUnderpowered("growth scan underpowered: no admissible "
                               "(center, radius) pair for the sup scan")
    return GrowthScan(theta_linear=theta_linear, theta_sup=float(theta_sup),
                      samples=int(len(pick) + n_sup))


# --- contour CSV ------------------------------------------------------------


def write_contours(f, contour: ContourSet):
    f.write("poly_id,x,y\n")
    for pid, (poly, closed) in enumerate(zip(contour.polylines, contour.closed)):
        rows = np.vstack([poly, poly[:1]]) if closed else poly
        for x, y in rows:
            f.write(f"{pid},{x:.17g},{y:.17g}\n")


def read_contours(f) -> ContourSet:
    header = f.readline().strip()
    if header != "poly_id,x,y":
        raise ValueError(f"bad contour header {header!r}")
    by_id: dict[int, list[tuple[float, float]]] = {}
    order: list[int] = []
    for line in f:
        line = line.strip()
        if not line:
            continue
        pid_s, x_s, y_s = line.split(",")
        pid = int(pid_s)
        if pid not in by_id:
            by_id[pid] = []
            order.append(pid)
        by_id[pid].append((float(x_s), float(y_s)))
    polylines, closed = [], []
    for pid in order:
        pts = np.array(by_id[pid])
        is_closed = len(pts) > 3 and np.array_equal(pts[0], pts[-1])
        polylines.append(pts[:-1] if is_closed else pts)
        closed.append(is_closed)
    return ContourSet(polylines=polylines, closed=closed)
