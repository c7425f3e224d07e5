"""Domain rasterization, obstacle synthesis and positivity-set measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .grids import Grid, ScalarField, same_grid


class EmptyPositivitySet(ValueError):
    """The thresholded field is identically nonpositive."""


@dataclass(frozen=True)
class RadialMeta:
    """Analytic descriptor of the radial benchmark configuration."""

    center: tuple[float, float]
    omega_radius: float
    r0: float
    plateau_height: float
    ramp_width: float


@dataclass
class DomainSpec:
    """The room mask, the obstacle and the outside volume budget."""

    omega_mask: ScalarField
    phi: ScalarField
    gamma: float
    meta: RadialMeta | None = None

    def __post_init__(self):
        same_grid(self.omega_mask, self.phi)
        mask = self.omega_mask.values
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ValueError("omega_mask must be a 0/1 field")
        if np.any(self.phi.values < 0):
            raise ValueError("obstacle must be nonnegative")
        if not (self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        # compact support: phi vanishes outside Omega and on the one-cell
        # band just inside the mask boundary
        support_band = _erode(mask.astype(bool))
        if np.any(self.phi.values[~support_band] != 0.0):
            raise ValueError("obstacle support must stay one cell inside the room mask")

    @property
    def grid(self) -> Grid:
        return self.omega_mask.grid

    def inside(self) -> np.ndarray:
        return self.omega_mask.values > 0.5

    def outside(self) -> np.ndarray:
        return self.omega_mask.values < 0.5


def _erode(mask: np.ndarray) -> np.ndarray:
    """True where the 3x3 neighborhood (grid-clipped) is fully inside."""
    out = mask.copy()
    padded = np.pad(mask, 1, constant_values=False)
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            out &= padded[1 + dj : padded.shape[0] - 1 + dj,
                          1 + di : padded.shape[1] - 1 + di]
    return out


def rasterize_disk(center: tuple[float, float], radius: float, grid: Grid) -> ScalarField:
    """0/1 node mask of the closed disk."""
    if not (radius > 0):
        raise ValueError(f"disk radius must be positive, got {radius}")
    r = grid.radius_from(center)
    return ScalarField(grid, (r <= radius).astype(np.float64))


def synth_plateau_bump(
    spec: tuple[float, float, float],
    center: tuple[float, float],
    grid: Grid,
    omega_radius: float | None = None,
) -> ScalarField:
    """Radially symmetric C1 plateau: height M inside r0, cubic decay over w.

    The decay profile is the reversed smoothstep q(s) = 1 - (3 s^2 - 2 s^3),
    which has zero slope at both ends, so the field is C1 across the plateau
    edge and the support boundary.
    """
    r0, M, w = spec
    if not (r0 > 0 and M > 0 and w > 0):
        raise ValueError(f"plateau spec must be positive, got {spec}")
    if omega_radius is not None and not (r0 + w < omega_radius - 2 * grid.h):
        raise ValueError(
            f"obstacle support r0+w={r0 + w} reaches the room boundary "
            f"(room radius {omega_radius}, h={grid.h})"
        )
    r = grid.radius_from(center)
    s = np.clip((r - r0) / w, 0.0, 1.0)
    q = 1.0 - (3.0 * s**2 - 2.0 * s**3)
    return ScalarField(grid, M * q)


def positive_volume_outside(u: ScalarField, domain: DomainSpec, tau: float) -> float:
    """Discrete measure of {u > tau} outside the room: h^2 * node count."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    same_grid(u, domain.omega_mask)
    h = u.grid.h
    count = int(np.count_nonzero((u.values > tau) & domain.outside()))
    return h * h * count


def positivity_points(u: ScalarField, tau: float) -> np.ndarray:
    """Physical coordinates of nodes with u > tau, shape (m, 2)."""
    jj, ii = np.nonzero(u.values > tau)
    ox, oy = u.grid.origin
    h = u.grid.h
    return np.column_stack([ox + h * ii, oy + h * jj])


def diameter_positivity(u: ScalarField, tau: float) -> float:
    """Max pairwise distance among nodes with u > tau (via convex hull)."""
    pts = positivity_points(u, tau)
    if len(pts) == 0:
        raise EmptyPositivitySet("no node exceeds the threshold")
    if len(pts) == 1:
        return 0.0
    try:
        hull_pts = pts[ConvexHull(pts).vertices]
    except QhullError:
        # degenerate (collinear) point set
        hull_pts = pts
    diff = hull_pts[:, None, :] - hull_pts[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).max())


def radial_domain(
    grid: Grid,
    omega_radius: float,
    r0: float,
    plateau_height: float,
    ramp_width: float,
    gamma: float,
    center: tuple[float, float] = (0.0, 0.0),
) -> DomainSpec:
    """Disk room with a centered plateau obstacle: the benchmark geometry."""
    mask = rasterize_disk(center, omega_radius, grid)
    phi = synth_plateau_bump((r0, plateau_height, ramp_width), center, grid,
                             omega_radius=omega_radius)
    meta = RadialMeta(center=center, omega_radius=omega_radius, r0=r0,
                      plateau_height=plateau_height, ramp_width=ramp_width)
    return DomainSpec(omega_mask=mask, phi=phi, gamma=gamma, meta=meta)


def competitor_seed(domain: DomainSpec, tau: float,
                    target_fill: float = 0.95) -> ScalarField:
    """Lipschitz cone extension of the obstacle, sized to spend just under
    the outside volume budget.

    The extension max(phi, (max phi - s*dist(x, peak set))+) is the
    classical competitor for the volume-penalized problem; as an initial
    iterate it places the free boundary near its final position, which
    matters because moving the positivity set by descent alone crawls one
    node ring at a time.  The cone hangs from the obstacle's peak set (not
    its support edge) so the seed has no artificial zero-gradient plateau
    outside the contact region — flat patches are stationary for the
    degenerate p-Laplacian and would never erode.  The slope s is bisected
    so the thresholded outside volume is the largest value not exceeding
    target_fill * gamma.
    """
    grid = domain.grid
    phi = domain.phi.values
    max_phi = float(phi.max())
    if max_phi == 0.0:
        return ScalarField.full(grid, 0.0)
    peak = phi >= (1.0 - 1e-9) * max_phi
    dist = ndimage.distance_transform_edt(~peak) * grid.h
    target = target_fill * domain.gamma

    def volume_at(s: float) -> float:
        u = np.maximum(phi, np.maximum(max_phi - s * dist, 0.0))
        return positive_volume_outside(ScalarField(grid, u), domain, tau)

    # volume is nonincreasing in the slope; bracket then bisect in log s
    s_lo = max_phi / (grid.extent[0] + grid.extent[1])
    s_hi = max_phi / grid.h
    if volume_at(s_lo) <= target:
        s_hi = s_lo
    else:
        for _ in range(80):
            s_mid = float(np.sqrt(s_lo * s_hi))
            if volume_at(s_mid) > target:
                s_lo = s_mid
            else:
                s_hi = s_mid
            if s_hi / s_lo < 1.0 + 1e-12:
                break
    u = np.maximum(phi, np.maximum(max_phi - s_hi * dist, 0.0))
    return ScalarField(grid, u)


def default_threshold(domain: DomainSpec) -> float:
    """Positivity threshold tau = theta_ref * h / 2.

    theta_ref estimates the non-degeneracy slope: for the radial benchmark
    one tenth of the analytic cone slope, otherwise a coarse scale built
    from the obstacle height and the room size.
    """
    return 0.5 * reference_theta(domain) * domain.grid.h


def reference_theta(domain: DomainSpec) -> float:
    if domain.meta is not None:
        m = domain.meta
        r_star = np.sqrt(m.omega_radius**2 + domain.gamma / np.pi)
        return 0.1 * m.plateau_height / (r_star - m.r0)
    max_phi = float(domain.phi.values.max())
    if max_phi == 0.0:
        return 0.05
    ext = min(domain.grid.extent)
    return 0.05 * max_phi / ext
