"""Domain rasterization, obstacle synthesis and positivity measures."""

import numpy as np
import pytest

from conftest import BENCH, make_bench_domain
from insulab.energy import cell_gradient_magnitude
from insulab.geometry import (DomainSpec, EmptyPositivitySet, competitor_seed,
                              default_threshold, diameter_positivity,
                              positive_volume_outside, radial_domain,
                              rasterize_disk, reference_theta,
                              synth_plateau_bump)
from insulab.grids import Grid, ScalarField, build_grid


def test_disk_mask_area_first_order():
    h = 1.0 / 64.0
    grid = build_grid((-1, 1, -1, 1), h)
    R = 0.55
    mask = rasterize_disk((0.0, 0.0), R, grid)
    area = h * h * float(mask.values.sum())
    assert abs(area - np.pi * R * R) <= 4 * h * R  # staircase O(h) perimeter error


def test_disk_mask_is_binary_and_centered():
    grid = build_grid((-1, 1, -1, 1), 0.125)
    mask = rasterize_disk((0.0, 0.0), 0.5, grid)
    assert set(np.unique(mask.values)) <= {0.0, 1.0}
    j0 = grid.ny // 2
    assert mask.values[j0, grid.nx // 2] == 1.0
    assert mask.values[0, 0] == 0.0


def test_plateau_height_and_support():
    grid = build_grid((-1, 1, -1, 1), 1.0 / 32.0)
    phi = synth_plateau_bump((0.12, 0.55, 0.22), (0.0, 0.0), grid)
    r = grid.radius_from((0.0, 0.0))
    assert np.all(phi.values[r <= 0.12] == pytest.approx(0.55))
    assert np.all(phi.values[r >= 0.34] == 0.0)
    assert np.all(phi.values >= 0.0)


def test_plateau_gradient_bounded_by_smoothstep_slope():
    # C1 consistency: max discrete gradient below 1.6 M / w
    grid = build_grid((-1, 1, -1, 1), 1.0 / 64.0)
    M, w = 0.55, 0.22
    phi = synth_plateau_bump((0.12, M, w), (0.0, 0.0), grid)
    gmax = float(cell_gradient_magnitude(phi).max())
    assert gmax <= 1.6 * M / w


def test_plateau_rejects_support_reaching_room_wall():
    grid = build_grid((-1, 1, -1, 1), 1.0 / 16.0)
    with pytest.raises(ValueError):
        synth_plateau_bump((0.4, 0.5, 0.2), (0.0, 0.0), grid, omega_radius=0.55)


def test_domain_spec_validation():
    grid = build_grid((-1, 1, -1, 1), 1.0 / 16.0)
    mask = rasterize_disk((0.0, 0.0), 0.55, grid)
    phi = synth_plateau_bump((0.12, 0.55, 0.22), (0.0, 0.0), grid)
    with pytest.raises(ValueError):
        DomainSpec(omega_mask=phi, phi=phi, gamma=0.4)  # mask not 0/1
    bad_phi = ScalarField.full(grid, 0.1)  # support leaks outside the room
    with pytest.raises(ValueError):
        DomainSpec(omega_mask=mask, phi=bad_phi, gamma=0.4)
    with pytest.raises(ValueError):
        DomainSpec(omega_mask=mask, phi=phi, gamma=0.0)


def test_positive_volume_outside_counts_nodes():
    grid = Grid(nx=3, ny=3, h=1.0)
    mask = ScalarField.full(grid, 0.0)  # everything outside
    phi = ScalarField.full(grid, 0.0)
    domain = DomainSpec(omega_mask=mask, phi=phi, gamma=1.0)
    u = ScalarField.full(grid, 1.0)
    assert positive_volume_outside(u, domain, 0.0) == pytest.approx(9.0)
    assert positive_volume_outside(u, domain, 1.0) == 0.0
    with pytest.raises(ValueError):
        positive_volume_outside(u, domain, -0.1)


def test_diameter_positivity():
    grid = Grid(nx=5, ny=5, h=1.0)
    vals = np.zeros((5, 5))
    vals[0, 0] = vals[4, 4] = 1.0
    assert diameter_positivity(ScalarField(grid, vals), 0.5) == pytest.approx(
        4 * np.sqrt(2))
    with pytest.raises(EmptyPositivitySet):
        diameter_positivity(ScalarField.full(grid, 0.0), 0.5)
    vals2 = np.zeros((5, 5))
    vals2[2, 2] = 1.0
    assert diameter_positivity(ScalarField(grid, vals2), 0.5) == 0.0


def test_collinear_positivity_diameter():
    grid = Grid(nx=6, ny=5, h=1.0)
    vals = np.zeros((5, 6))
    vals[2, 1:5] = 1.0  # collinear points degenerate for a hull
    assert diameter_positivity(ScalarField(grid, vals), 0.5) == pytest.approx(3.0)


def test_competitor_seed_respects_budget(bench_domain_mid):
    domain = bench_domain_mid
    tau = default_threshold(domain)
    seed = competitor_seed(domain, tau)
    vol = positive_volume_outside(seed, domain, tau)
    assert vol <= 0.95 * domain.gamma + 1e-12
    assert vol >= 0.5 * domain.gamma  # the bisection really fills the budget
    # the seed dominates the obstacle and is bounded by its height
    assert np.all(seed.values >= domain.phi.values - 1e-12)
    assert seed.values.max() == pytest.approx(domain.phi.values.max())


def test_competitor_seed_zero_obstacle():
    grid = build_grid((-1, 1, -1, 1), 1.0 / 16.0)
    mask = rasterize_disk((0.0, 0.0), 0.5, grid)
    domain = DomainSpec(omega_mask=mask, phi=ScalarField.full(grid, 0.0),
                        gamma=0.3)
    seed = competitor_seed(domain, 0.01)
    assert np.all(seed.values == 0.0)


def test_default_threshold_radial_formula():
    domain = make_bench_domain(1.0 / 32.0)
    r_star = np.sqrt(BENCH["omega_radius"] ** 2 + BENCH["gamma"] / np.pi)
    theta = 0.1 * BENCH["height"] / (r_star - BENCH["r0"])
    assert reference_theta(domain) == pytest.approx(theta)
    assert default_threshold(domain) == pytest.approx(0.5 * theta / 32.0)


def test_reference_theta_without_radial_meta():
    grid = build_grid((-1, 1, -1, 1), 1.0 / 16.0)
    mask = rasterize_disk((0.0, 0.0), 0.5, grid)
    domain = DomainSpec(omega_mask=mask, phi=ScalarField.full(grid, 0.0),
                        gamma=0.3)
    assert reference_theta(domain) == pytest.approx(0.05)


def test_radial_domain_carries_meta():
    domain = make_bench_domain(1.0 / 16.0)
    assert domain.meta is not None
    assert domain.meta.omega_radius == BENCH["omega_radius"]
    assert domain.grid.h == pytest.approx(1.0 / 16.0)
