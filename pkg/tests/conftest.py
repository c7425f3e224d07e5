"""Shared fixtures: the radial benchmark geometry at unit-test scale."""

import numpy as np
import pytest

from insulab.geometry import radial_domain
from insulab.grids import build_grid

# disk room of radius 0.55 in (-1, 1)^2 with a centered plateau obstacle;
# analytic front radius R* = sqrt(0.55^2 + 0.45/pi) and cone slope
# M/(R* - r0) make this the one configuration with closed-form truth
BENCH = dict(omega_radius=0.55, r0=0.12, height=0.55, ramp_width=0.22,
             gamma=0.45)
BENCH_BBOX = (-1.0, 1.0, -1.0, 1.0)


def make_bench_domain(h: float):
    grid = build_grid(BENCH_BBOX, h)
    return radial_domain(grid, BENCH["omega_radius"], BENCH["r0"],
                         BENCH["height"], BENCH["ramp_width"], BENCH["gamma"])


@pytest.fixture
def bench_domain_coarse():
    return make_bench_domain(1.0 / 16.0)


@pytest.fixture
def bench_domain_mid():
    return make_bench_domain(1.0 / 32.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
