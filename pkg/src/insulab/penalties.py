"""The three penalty functions and their derivatives.

All three are branch-exact piecewise definitions; the only smoothing is the
C1 quadratic bridge of the obstacle penalty on [-sigma, 0).  Each function
returns (value, derivative) and accepts scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PenaltyParams:
    """(sigma, delta, eps, p) plus the volume budget gamma."""

    sigma: float
    delta: float
    eps: float
    p: float
    gamma: float
    # C1 blend width of the volume charge's budget kink (solver-internal;
    # zero keeps the charge branch-exact)
    corner: float = 0.0

    def __post_init__(self):
        for name in ("sigma", "delta", "eps", "gamma"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not (self.p >= 2):
            raise ValueError(f"exponent p must be >= 2, got {self.p}")
        if self.corner < 0:
            raise ValueError(f"corner must be nonnegative, got {self.corner}")


def g_sigma(t, sigma: float):
    """Obstacle penalty: zero for t >= 0, quadratic bridge, then linear.

    The bridge t^2 / (2 sigma^2) is the unique quadratic with g(0) = 0,
    g'(0) = 0 and g'(-sigma) = -1/sigma, and the linear branch
    -(t + sigma/2)/sigma continues it with matching value and slope, so the
    whole function is C1, nonnegative, nonincreasing and convex.
    """
    if not (sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    t = np.asarray(t, dtype=np.float64)
    value = np.where(
        t >= 0.0,
        0.0,
        np.where(t >= -sigma, t * t / (2.0 * sigma**2), -(t + sigma / 2.0) / sigma),
    )
    deriv = np.where(
        t >= 0.0,
        0.0,
        np.where(t >= -sigma, t / sigma**2, -1.0 / sigma),
    )
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def h_delta(t, delta: float):
    """Smoothed positivity indicator: 0 below 0, linear ramp, 1 above delta.

    At both kinks the reported derivative is the subgradient choice 0.
    """
    if not (delta > 0):
        raise ValueError(f"delta must be positive, got {delta}")
    t = np.asarray(t, dtype=np.float64)
    value = np.clip(t / delta, 0.0, 1.0)
    deriv = np.where((t > 0.0) & (t < delta), 1.0 / delta, 0.0)
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def f_eps(t, eps: float, gamma: float, corner: float = 0.0):
    """Volume charge: slope 1/eps above the budget gamma, slope eps below.

    Convex, increasing, zero at gamma (for corner = 0); the derivative at
    t = gamma is the right-sided 1/eps.

    corner > 0 replaces the slope kink with a C1 blend on the window
    [gamma - corner/2, gamma + corner/2] whose slope rises geometrically
    from eps to 1/eps (so it crosses 1 at the budget itself, keeping the
    blended minimizer centered on the corner).  The solver descends this
    blended charge — at the exact kink the under-budget slope mispredicts
    the cost of growth and every line search fails — while all reporting
    uses corner = 0.
    """
    if not (eps > 0):
        raise ValueError(f"eps must be positive, got {eps}")
    if not (gamma > 0):
        raise ValueError(f"gamma must be positive, got {gamma}")
    if corner < 0:
        raise ValueError(f"corner width must be nonnegative, got {corner}")
    t = np.asarray(t, dtype=np.float64)
    if corner == 0.0 or eps == 1.0:
        above = t >= gamma
        value = np.where(above, (t - gamma) / eps, eps * (t - gamma))
        deriv = np.where(above, 1.0 / eps, eps)
    else:
        lo = gamma - 0.5 * corner
        hi = gamma + 0.5 * corner
        L = np.log(1.0 / eps)
        s = np.clip((t - lo) / corner, 0.0, 1.0)
        # slope eps^(1-2s) on the window; value by integrating it
        blend_val = corner * eps * (np.exp(2.0 * L * s) - 1.0) / (2.0 * L)
        f_lo = eps * (lo - gamma)
        f_hi = f_lo + corner * (1.0 / eps - eps) / (2.0 * L)
        value = np.where(
            t <= lo, eps * (t - gamma),
            np.where(t >= hi, f_hi + (t - hi) / eps, f_lo + blend_val))
        deriv = np.where(
            t <= lo, eps,
            np.where(t >= hi, 1.0 / eps, eps * np.exp(2.0 * L * s)))
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def f_eps_curvature(t, eps: float, gamma: float, corner: float = 0.0) -> float:
    """Second derivative of the blended volume charge at scalar t (zero
    outside the blend window and for the exact kinked charge)."""
    if corner <= 0.0 or eps == 1.0:
        return 0.0
    if abs(t - gamma) < 0.5 * corner:
        L = np.log(1.0 / eps)
        _, deriv = f_eps(t, eps, gamma, corner)
        return float(deriv * 2.0 * L / corner)
    return 0.0
