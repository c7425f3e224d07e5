"""Independent oracles and residual diagnostics.

Everything here is solver-free: analytic radial candidates, discrete
operator residuals built from the same stencils the energy uses, per-region
sign checks, and constraint reports.  These are the yardsticks the test
suite measures solver output against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .energy import cell_gradient_magnitude, dirichlet_gradient
from .freeboundary import ContourSet, _min_dist_to_segments
from .geometry import DomainSpec, diameter_positivity, positive_volume_outside
from .grids import Grid, ScalarField

# region label codes
CONTACT = 0
HEATED = 1
INSULATION = 2
DEAD = 3
BAND = 4

_REGION_NAMES = {CONTACT: "contact", HEATED: "heated",
                 INSULATION: "insulation", DEAD: "dead", BAND: "band"}


class OracleLeak(ValueError):
    """The analytic benchmark does not fit inside the grid."""


@dataclass(frozen=True)
class RadialOracle:
    """Analytic benchmark truth for the disk room with a plateau obstacle.

    The candidate limit solution is the radial cone: height M on the
    plateau, linear decay to zero at R_star, where R_star is fixed by
    spending the outside volume budget exactly on the annulus.
    """

    R_omega: float
    r0: float
    w: float
    M: float
    gamma: float

    def __post_init__(self):
        for name in ("R_omega", "r0", "w", "M", "gamma"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not (self.R_star > self.R_omega):
            raise ValueError("annulus collapsed: R_star must exceed R_omega")
        if not (self.lip > 0):
            raise ValueError("cone slope must be positive")
        area = np.pi * (self.R_star**2 - self.R_omega**2)
        if abs(area - self.gamma) > 1e-12 * self.gamma:
            raise ValueError("annulus area does not reproduce gamma")

    @property
    def R_star(self) -> float:
        return float(np.sqrt(self.R_omega**2 + self.gamma / np.pi))

    @property
    def lip(self) -> float:
        return self.M / (self.R_star - self.r0)


def radial_cone_field(oracle: RadialOracle, grid: Grid,
                      center: tuple[float, float] = (0.0, 0.0)) -> ScalarField:
    """Sample the oracle cone on the grid.

    Plateau M inside r0, linear decay with slope -lip out to R_star, zero
    beyond.  Fails if the support does not fit two cells inside the grid.
    """
    ox, oy = grid.origin
    ex, ey = grid.extent
    pad = oracle.R_star + 2 * grid.h
    if (center[0] - pad < ox or center[0] + pad > ox + ex
            or center[1] - pad < oy or center[1] + pad > oy + ey):
        raise OracleLeak(
            f"cone support radius {oracle.R_star} (+2h) leaks outside the grid")
    r = grid.radius_from(center)
    values = np.clip(oracle.M * (oracle.R_star - r) / (oracle.R_star - oracle.r0),
                     0.0, oracle.M)
    return ScalarField(grid, values)


def radial_p_harmonic(A: float, B: float, p: float, r):
    """Radial p-harmonic profile in the plane: A r^{(p-2)/(p-1)} + B.

    The p = 2 profile is logarithmic and deliberately excluded.
    """
    if p == 2:
        raise ValueError("p = 2 has a logarithmic radial profile; not supported")
    if not (p > 2):
        raise ValueError(f"exponent p must exceed 2, got {p}")
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    out = A * r ** ((p - 2.0) / (p - 1.0)) + B
    return float(out) if out.ndim == 0 else out


def plap_residual_field(u: ScalarField, p: float) -> ScalarField:
    """Nodal discrete p-Laplacian: div(|grad u|^{p-2} grad u).

    Assembled as minus the Dirichlet term's first variation over h^2, so it
    is stencil-identical to what the solver drives to zero.  The outermost
    node ring has no complete cell neighborhood and reports 0.
    """
    if not (p >= 2):
        raise ValueError(f"exponent p must be >= 2, got {p}")
    u.check_finite("residual field")
    h = u.grid.h
    res = -dirichlet_gradient(u, p) / (h * h)
    res[0, :] = res[-1, :] = 0.0
    res[:, 0] = res[:, -1] = 0.0
    return ScalarField(u.grid, res)


def residual_scale(u: ScalarField, p: float) -> float:
    """Natural magnitude of the p-Laplacian flux: max(1, |grad u|_max^(p-1))."""
    mag = cell_gradient_magnitude(u)
    gmax = float(mag.max()) if mag.size else 0.0
    if gmax == 0.0:
        return 1.0
    return max(1.0, float(np.exp((p - 1.0) * np.log(gmax))))


def inflap_residual_field(u: ScalarField) -> ScalarField:
    """Nodal infinity-Laplacian grad(u)^T D^2(u) grad(u), central differences.

    Nodes where the gradient is below 1e-8 of its max magnitude report 0,
    as does the outermost ring.
    """
    u.check_finite("residual field")
    v = u.values
    h = u.grid.h
    ux = np.zeros_like(v)
    uy = np.zeros_like(v)
    uxx = np.zeros_like(v)
    uyy = np.zeros_like(v)
    uxy = np.zeros_like(v)
    ux[1:-1, 1:-1] = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h)
    uy[1:-1, 1:-1] = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h)
    uxx[1:-1, 1:-1] = (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / (h * h)
    uyy[1:-1, 1:-1] = (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / (h * h)
    uxy[1:-1, 1:-1] = (v[2:, 2:] - v[2:, :-2] - v[:-2, 2:] + v[:-2, :-2]) / (4 * h * h)
    res = ux * ux * uxx + 2.0 * ux * uy * uxy + uy * uy * uyy
    gmag = np.hypot(ux, uy)
    gscale = float(gmag.max())
    if gscale > 0:
        res[gmag < 1e-8 * gscale] = 0.0
    return ScalarField(u.grid, res)


@dataclass
class RegionLabel:
    """Per-node partition into the PDE sign regions plus a contour band."""

    labels: np.ndarray

    def mask(self, code: int) -> np.ndarray:
        return self.labels == code

    def counts(self) -> dict[str, int]:
        return {name: int(np.count_nonzero(self.labels == code))
                for code, name in _REGION_NAMES.items()}


def classify_regions(u: ScalarField, domain: DomainSpec, tau: float,
                     contours: list[ContourSet], band_cells: int = 2,
                     contact_tol: float | None = None) -> RegionLabel:
    """Label every node: contact / heated / insulation / dead / band.

    The band is everything within band_cells*h of any supplied contour;
    the PDE sign checks exclude it because nodal residuals adjacent to a
    free boundary see its concentrated measure.
    """
    grid = u.grid
    max_phi = float(domain.phi.values.max())
    if contact_tol is None:
        contact_tol = 1e-3 * max_phi if max_phi > 0 else 0.0

    labels = np.full(grid.shape, DEAD, dtype=np.int8)
    inside = domain.inside()
    contact = inside & (u.values - domain.phi.values <= contact_tol)
    labels[inside] = HEATED
    labels[contact] = CONTACT
    outside_pos = ~inside & (u.values > tau)
    labels[outside_pos] = INSULATION

    seg_groups = [c.segments() for c in contours if not c.is_empty()]
    if seg_groups:
        seg_a = np.concatenate([s[0] for s in seg_groups])
        seg_b = np.concatenate([s[1] for s in seg_groups])
        X, Y = grid.node_coords()
        pts = np.column_stack([X.ravel(), Y.ravel()])
        dist = _min_dist_to_segments(pts, seg_a, seg_b).reshape(grid.shape)
        labels[dist <= band_cells * grid.h] = BAND

    # the room edge is a region boundary too: the operator changes there,
    # and the PDE sign pattern only holds in the open regions on each side
    room_edge = (ndimage.binary_dilation(inside, iterations=band_cells)
                 & ndimage.binary_dilation(~inside, iterations=band_cells))
    labels[room_edge] = BAND
    return RegionLabel(labels=labels)


@dataclass
class ReportItem:
    name: str
    value: float
    limit: float
    passed: bool


@dataclass
class CheckReport:
    items: list[ReportItem] = field(default_factory=list)

    def add(self, name: str, value: float, limit: float, passed: bool):
        self.items.append(ReportItem(name, float(value), float(limit), bool(passed)))

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def __getitem__(self, name: str) -> ReportItem:
        for item in self.items:
            if item.name == name:
                return item
        raise KeyError(name)

    def as_text(self) -> str:
        lines = []
        for it in self.items:
            lines.append(f"{it.name}.value={it.value:.17g}")
            lines.append(f"{it.name}.limit={it.limit:.17g}")
            lines.append(f"{it.name}.passed={int(it.passed)}")
        lines.append(f"all_passed={int(self.passed)}")
        return "\n".join(lines) + "\n"


def region_sign_check(u: ScalarField, domain: DomainSpec, p: float,
                      labels: RegionLabel, tol: float) -> CheckReport:
    """Sign/zero of the discrete p-Laplacian per region, band excluded.

    Heated and insulation regions must have near-zero residual; the
    contact region may be negative only, the dead region nonnegative only.
    Violations are compared against tol * residual_scale(u, p).
    """
    res = plap_residual_field(u, p).values
    limit = tol * residual_scale(u, p)
    report = CheckReport()

    def violation(mask: np.ndarray, kind: str) -> float:
        if not mask.any():
            return 0.0
        r = res[mask]
        if kind == "eq":
            return float(np.abs(r).max())
        if kind == "nonpos":
            return float(max(r.max(), 0.0))
        return float(max(-r.min(), 0.0))  # nonneg

    for code, kind in ((CONTACT, "nonpos"), (HEATED, "eq"),
                       (INSULATION, "eq"), (DEAD, "nonneg")):
        v = violation(labels.mask(code), kind)
        report.add(f"region.{_REGION_NAMES[code]}", v, limit, v <= limit)
    return report


def bounds_and_constraints_check(u: ScalarField, domain: DomainSpec, tau: float,
                                 eps: float | None = None,
                                 bound_tol: float = 1e-8,
                                 obstacle_tol: float = 1e-6,
                                 volume_tol: float | None = None) -> CheckReport:
    """Maximum-principle bounds, obstacle feasibility, volume budget and
    the support diameter bound, with tolerances scaled by max phi."""
    max_phi = float(domain.phi.values.max())
    scale = max_phi if max_phi > 0 else 1.0
    report = CheckReport()

    min_u = float(u.values.min())
    report.add("bounds.min_u", min_u, -bound_tol * scale,
               min_u >= -bound_tol * scale)
    over = float(u.values.max()) - max_phi
    report.add("bounds.max_u_minus_max_phi", over, bound_tol * scale,
               over <= bound_tol * scale)
    gap = float((u.values - domain.phi.values).min())
    report.add("obstacle.min_gap", gap, -obstacle_tol * scale,
               gap >= -obstacle_tol * scale)

    vol = positive_volume_outside(u, domain, tau)
    if volume_tol is None:
        volume_tol = 0.05 * domain.gamma
    report.add("volume.excess", vol - domain.gamma, volume_tol,
               vol - domain.gamma <= volume_tol)

    if eps is not None:
        try:
            diam = diameter_positivity(u, tau)
        except ValueError:
            diam = 0.0
        # support diameter bound: diam(room) + 1 + gamma*(C1 norm of the
        # obstacle + 1/eps)/eps, with unit front constant
        phi_c1 = max_phi + float(cell_gradient_magnitude(domain.phi).max())
        diam_omega = _mask_diameter(domain)
        limit = diam_omega + 1.0 + domain.gamma * (phi_c1 + 1.0 / eps) / eps
        report.add("diameter.positivity", diam, limit, diam <= limit)
    return report


def _mask_diameter(domain: DomainSpec) -> float:
    if domain.meta is not None:
        return 2.0 * domain.meta.omega_radius
    mask = ScalarField(domain.grid, domain.omega_mask.values)
    return diameter_positivity(mask, 0.5)


def cone_feasibility_report(oracle: RadialOracle, domain: DomainSpec) -> CheckReport:
    """Sanity check the cone against the actual discrete obstacle.

    A smooth obstacle ramp can poke slightly above the straight cone chord
    near the plateau edge, so the gap tolerance is a couple of percent of
    the height rather than zero.
    """
    grid = domain.grid
    center = domain.meta.center if domain.meta is not None else (0.0, 0.0)
    cone = radial_cone_field(oracle, grid, center=center)
    report = CheckReport()
    gap = float((cone.values - domain.phi.values).min())
    report.add("cone.min_gap", gap, -0.02 * oracle.M, gap >= -0.02 * oracle.M)
    gmax = float(cell_gradient_magnitude(cone).max())
    dev = abs(gmax - oracle.lip)
    limit = 2 * grid.h * oracle.lip
    report.add("cone.lip_deviation", dev, limit, dev <= limit)
    vol = positive_volume_outside(cone, domain, 0.0)
    dev_v = abs(vol - oracle.gamma)
    limit_v = 4 * grid.h * oracle.R_star
    report.add("cone.volume_deviation", dev_v, limit_v, dev_v <= limit_v)
    return report
