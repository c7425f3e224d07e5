"""Uniform Cartesian grids and nodal scalar fields.

All fields in this package live on a square-cell lattice.  A field value
array has shape (ny, nx) with ``values[j, i]`` sitting at the physical
point ``(ox + i*h, oy + j*h)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridConfigError(ValueError):
    """Raised for geometrically impossible grid requests."""


@dataclass(frozen=True)
class Grid:
    """Uniform 2-D lattice: node counts, spacing and lower-left corner."""

    nx: int
    ny: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise GridConfigError(f"grid must be at least 3x3, got {self.nx}x{self.ny}")
        if not (self.h > 0):
            raise GridConfigError(f"grid spacing must be positive, got {self.h}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def extent(self) -> tuple[float, float]:
        return ((self.nx - 1) * self.h, (self.ny - 1) * self.h)

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays (X, Y), each of shape (ny, nx)."""
        ox, oy = self.origin
        x = ox + self.h * np.arange(self.nx)
        y = oy + self.h * np.arange(self.ny)
        return np.meshgrid(x, y)

    def radius_from(self, center: tuple[float, float]) -> np.ndarray:
        X, Y = self.node_coords()
        return np.hypot(X - center[0], Y - center[1])


@dataclass
class ScalarField:
    """One real value per grid node; values stay finite by contract."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"value array shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def full(cls, grid: Grid, value: float = 0.0) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        X, Y = grid.node_coords()
        return cls(grid, np.asarray(fn(X, Y), dtype=np.float64))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def check_finite(self, context: str = "field"):
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise FloatingPointError(
                f"{context}: non-finite value at node (j={bad[0]}, i={bad[1]})"
            )


def same_grid(*fields: ScalarField):
    g0 = fields[0].grid
    for f in fields[1:]:
        if f.grid != g0:
            raise ValueError("fields live on different grids")
    return g0


def build_grid(bbox: tuple[float, float, float, float], h: float) -> Grid:
    """Grid covering the rectangle (xmin, xmax, ymin, ymax) with spacing h.

    Node (i, j) sits at origin + (i*h, j*h); the node count is chosen so the
    grid extent covers the box (snapping exact multiples of h).
    """
    xmin, xmax, ymin, ymax = map(float, bbox)
    if not (xmax > xmin and ymax > ymin):
        raise GridConfigError(f"empty bbox {bbox}")
    if not (h > 0):
        raise GridConfigError(f"spacing must be positive, got {h}")
    if xmax - xmin < 4 * h - 1e-12 or ymax - ymin < 4 * h - 1e-12:
        raise GridConfigError(f"bbox {bbox} smaller than 4 cells at h={h}")
    nx = int(np.ceil((xmax - xmin) / h - 1e-9)) + 1
    ny = int(np.ceil((ymax - ymin) / h - 1e-9)) + 1
    return Grid(nx=nx, ny=ny, h=h, origin=(xmin, ymin))


# --- serialization ----------------------------------------------------------
#
# Text format: one header line "nx ny h ox oy", then ny lines of nx floats
# (row j on line j).  %.17g round-trips doubles exactly.


def write_field(f, fld: ScalarField):
    g = fld.grid
    f.write(f"{g.nx} {g.ny} {g.h:.17g} {g.origin[0]:.17g} {g.origin[1]:.17g}\n")
    for row in fld.values:
        f.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_field(f) -> ScalarField:
    header = f.readline().split()
    if len(header) != 5:
        raise ValueError(f"bad field header: {header!r}")
    nx, ny = int(header[0]), int(header[1])
    h, ox, oy = (float(t) for t in header[2:])
    values = np.loadtxt(f, dtype=np.float64, max_rows=ny)
    values = np.atleast_2d(values)
    if values.shape != (ny, nx):
        raise ValueError(f"field body shape {values.shape}, header says {(ny, nx)}")
    return ScalarField(Grid(nx=nx, ny=ny, h=h, origin=(ox, oy)), values)


def save_field(path, fld: ScalarField):
    with open(path, "w") as f:
        write_field(f, fld)


def load_field(path) -> ScalarField:
    with open(path) as f:
        return read_field(f)
