"""Energy minimization and the three-stage limit schedule.

Each stage minimizes the penalized energy with L-BFGS-B (scipy) on the
nodal values, using the exact analytic gradient.  Two ingredients keep the
nonsmooth parts tractable: the volume charge's budget kink is replaced by a
narrow C1 blend during descent (see f_eps), and when the positivity ramp
width delta shrinks between stages the old ramp band is cleared so the
re-evaluated volume measure never jumps above the budget (over-budget
states cannot relax: shedding volume means lowering a front node against
its own kink force, which monotone descent never does).

All stage drivers warm start from the previous solution; the limit order is
fixed: (sigma, delta) jointly to their floors at the first exponent, then
the volume-penalty scale, then the exponent sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage, optimize

from .energy import (EnergyBreakdown, cell_gradient_magnitude, dirichlet_curvature,
                     dirichlet_gradient, eval_energy_gradient,
                     eval_penalized_energy, _dirichlet_sum)
from .geometry import (DomainSpec, competitor_seed, default_threshold,
                       positive_volume_outside)
from .grids import Grid, ScalarField
from .penalties import PenaltyParams, f_eps, f_eps_curvature, h_delta


class StepFailure(RuntimeError):
    """The optimizer aborted while far from stationarity."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


class VolumeNotSaturable(RuntimeError):
    """The volume-penalty scale underflowed before the budget was reached."""

    def __init__(self, message: str, achieved_volume: float):
        super().__init__(message)
        self.achieved_volume = achieved_volume


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 4000
    tol_grad: float = 0.02          # relative to the free-boundary flux scale
    tol_energy: float = 1e-12       # relative energy decrease per iteration
    # width of the volume charge's internal C1 corner blend, as a fraction
    # of the budget gamma; bounds how far from the budget the measured
    # volume can settle when the budget constraint is active
    corner_frac: float = 0.02
    # pointwise (diagonal-Newton) relaxation budget appended to each stage;
    # crushes the high-frequency residual the quasi-Newton phase leaves
    # behind on ill-conditioned large-p stages
    polish_iters: int = 2000

    def __post_init__(self):
        for name in ("max_iters", "tol_grad", "tol_energy"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive")
        if self.corner_frac < 0:
            raise ValueError("corner_frac must be nonnegative")
        if self.polish_iters < 0:
            raise ValueError("polish_iters must be nonnegative")


@dataclass(frozen=True)
class ContinuationSchedule:
    sigmas: tuple[float, ...]
    deltas: tuple[float, ...]
    ps: tuple[float, ...]
    eps: float

    def __post_init__(self):
        for name, seq, decreasing in (("sigmas", self.sigmas, True),
                                      ("deltas", self.deltas, True),
                                      ("ps", self.ps, False)):
            if len(seq) == 0:
                raise ValueError(f"{name} must be nonempty")
            if any(v <= 0 for v in seq):
                raise ValueError(f"{name} must be positive")
            diffs = np.diff(seq)
            if decreasing and np.any(diffs >= 0):
                raise ValueError(f"{name} must be strictly decreasing")
            if not decreasing and np.any(diffs <= 0):
                raise ValueError(f"{name} must be strictly increasing")
        if not (self.eps > 0):
            raise ValueError("eps must be positive")

    def stages(self) -> list[tuple[float, float]]:
        """Joint (sigma, delta) ladder, padding the shorter list with its floor."""
        n = max(len(self.sigmas), len(self.deltas))
        sig = list(self.sigmas) + [self.sigmas[-1]] * (n - len(self.sigmas))
        del_ = list(self.deltas) + [self.deltas[-1]] * (n - len(self.deltas))
        return list(zip(sig, del_))


@dataclass
class SolveReport:
    energy: EnergyBreakdown
    volume_outside: float
    lip_estimate: float
    iters: int
    grad_norm: float
    converged: bool
    params: PenaltyParams | None = None
    trace: list = field(default_factory=list, repr=False)


def _flux_scale(grad_max: float, p: float, h: float) -> float:
    """Natural magnitude of the pointwise operator residual: the flux a
    free-boundary kink concentrates on one cell, |grad|^(p-1)/h."""
    if grad_max <= 0.0:
        return 1.0
    return max(1.0, grad_max ** (p - 1.0) / h)


def _lbfgs(x0: np.ndarray, fg, opts: SolveOptions, bounds=None):
    """Run L-BFGS-B with a per-iteration energy trace.

    fg(x) -> (energy, flat gradient).  Returns (x, result, trace)."""
    last_e = [np.nan]

    def wrapped(x):
        e, g = fg(x)
        last_e[0] = e
        return e, g

    trace: list[float] = []

    def callback(_xk):
        trace.append(last_e[0])

    e0, _ = wrapped(x0)
    trace.append(e0)
    res = optimize.minimize(
        wrapped, x0, jac=True, method="L-BFGS-B", bounds=bounds,
        callback=callback,
        options=dict(maxiter=opts.max_iters, ftol=opts.tol_energy,
                     gtol=1e-16, maxcor=20, maxls=60))
    return res.x, res, trace


def _polish(values: np.ndarray, domain: DomainSpec, params_s: PenaltyParams,
            opts: SolveOptions) -> tuple[np.ndarray, float, int]:
    """Damped diagonal-Newton (Jacobi) relaxation of the blended energy.

    The quasi-Newton phase leaves a sign-alternating, high-frequency
    residual on ill-conditioned large-p stages; pointwise relaxation is the
    right smoother for it.  The search direction is the residual divided by
    a per-node curvature bound, projected at the penalty kinks with
    one-sided derivatives: the raw gradient is blind to the cost of rising
    off the positivity-ramp floor (h_delta's subgradient at zero is zero)
    and to the obstacle wall below contact nodes.  Returns the relaxed
    values, the max projected residual, and the iterations used.
    """
    grid = domain.grid
    h = grid.h
    hh = h * h
    phi = domain.phi.values
    outside = domain.outside()
    delta = params_s.delta
    sigma = params_s.sigma

    def energy(v: np.ndarray) -> float:
        return eval_penalized_energy(ScalarField(grid, v), domain, params_s).total

    e = energy(values)
    best_window = e
    gnorm = np.inf
    iters = 0
    for iters in range(1, opts.polish_iters + 1):
        f = ScalarField(grid, values)
        r = eval_energy_gradient(f, domain, params_s).values / hh
        P = dirichlet_curvature(f, params_s.p)
        P = P + np.where(values - phi < 0.0, 1.0 / sigma**2, 0.0)
        h_val, h_der = h_delta(values, delta)
        vol = hh * float(np.sum(h_val[outside]))
        _, f_der = f_eps(vol, params_s.eps, params_s.gamma, params_s.corner)
        f_curv = f_eps_curvature(vol, params_s.eps, params_s.gamma, params_s.corner)
        P = P + np.where(outside & (h_der > 0.0),
                         (f_der + f_curv * hh) / delta**2, 0.0)
        P = np.where(np.isfinite(P), P, 1e300)
        P = np.maximum(P, 1e-12 * float(P.max()))
        # one-sided residual: rising off the ramp floor costs f'/delta
        front_kink = outside & (values <= 0.0)
        r_up = r + np.where(front_kink, f_der / delta, 0.0)
        r_eff = np.where(front_kink & (r < 0.0),
                         np.where(r_up < 0.0, r_up, 0.0), r)
        # contact nodes cannot move into the obstacle
        r_eff = np.where((values - phi <= 0.0) & (r_eff > 0.0), 0.0, r_eff)
        gnorm = float(np.abs(r_eff).max())
        gmax = float(cell_gradient_magnitude(f).max())
        if gnorm <= opts.tol_grad * h * _flux_scale(gmax, params_s.p, h):
            break
        d = r_eff / P
        slope = hh * float(np.sum(r_eff * d))
        t = 1.0
        accepted = False
        for _ in range(30):
            candidate = values - t * d
            e_new = energy(candidate)
            if e_new <= e - 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        values, e = candidate, e_new
        if iters % 100 == 0:
            if best_window - e <= opts.tol_energy * (abs(e) + 1e-300):
                break
            best_window = e
    return values, gnorm, iters


def _drop_disconnected(values: np.ndarray, domain: DomainSpec) -> tuple[np.ndarray, int]:
    """Zero every 4-connected component of {u > 0} that does not touch the
    room.

    The positivity set of the limit solution is connected — it grows
    linearly off the free boundary of the heated core — but the discrete
    descent path can strand specks beyond the front: the cell-average
    gradient has a checkerboard null mode, so an isolated positive node
    costs almost no Dirichlet energy while its measure earns the
    under-budget volume slope.  Such specks are gradient-invisible
    (pointwise residuals vanish on the null mode) and poison the
    non-degeneracy scans; removing them costs at most their measure charge
    and re-polishing recovers it on the connected front.  Returns the
    values and the number of nodes zeroed.
    """
    pos = values > 0.0
    four = ndimage.generate_binary_structure(2, 1)
    labels, n = ndimage.label(pos, structure=four)
    if n <= 1:
        return values, 0
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[domain.inside() & pos])] = True
    keep[0] = True
    drop = ~keep[labels]
    count = int(np.count_nonzero(drop))
    if count:
        values = values.copy()
        values[drop] = 0.0
    return values, count


def _patch_dirichlet(sub: np.ndarray, p: float, h: float) -> float:
    gx = (sub[:-1, 1:] - sub[:-1, :-1] + sub[1:, 1:] - sub[1:, :-1]) / (2.0 * h)
    gy = (sub[1:, :-1] - sub[:-1, :-1] + sub[1:, 1:] - sub[:-1, 1:]) / (2.0 * h)
    return _dirichlet_sum(np.hypot(gx, gy), p, h)


def _trim_spikes(values: np.ndarray, domain: DomainSpec,
                 params_s: PenaltyParams, max_sweeps: int = 50,
                 ) -> tuple[np.ndarray, int]:
    """Energy-monotone combinatorial cleanup of the outer front.

    Gradient descent cannot zero a stray positive node beyond the front in
    one move — lowering it crosses the positivity ramp, whose measure term
    resists every intermediate value — so the quasi-Newton path leaves
    one-node islands and single-cell fingers sticking out of the front.
    Zeroing such a node is a feasible competitor (the obstacle vanishes
    there); each sweep zeroes every front node whose removal strictly
    lowers the blended energy the solver descends, and sweeping repeats
    until nothing changes.  The decision must use the blended volume
    charge: at the saturation corner its slope prices every counted node
    at about h^2, which is what makes gradient-invisible dust (the
    cell-average gradient has a checkerboard null mode) strictly
    unprofitable.  Returns the values and the number of nodes zeroed.
    """
    grid = domain.grid
    h = grid.h
    hh = h * h
    p = params_s.p
    delta = params_s.delta
    outside = domain.outside()
    phi = domain.phi.values
    ny, nx = grid.shape
    h_val, _ = h_delta(values, delta)
    vol = hh * float(np.sum(h_val[outside]))
    removed = 0
    for _ in range(max_sweeps):
        # front nodes: positive, outside, clear of the obstacle, with at
        # least one nonpositive 4-neighbor (off-grid neighbors don't count)
        nb_min = np.full((ny, nx), np.inf)
        nb_min[:, :-1] = np.minimum(nb_min[:, :-1], values[:, 1:])
        nb_min[:, 1:] = np.minimum(nb_min[:, 1:], values[:, :-1])
        nb_min[:-1, :] = np.minimum(nb_min[:-1, :], values[1:, :])
        nb_min[1:, :] = np.minimum(nb_min[1:, :], values[:-1, :])
        cand = outside & (values > 0.0) & (phi <= 0.0) & (nb_min <= 0.0)
        changed = 0
        for j, i in zip(*np.nonzero(cand)):
            v = values[j, i]
            if v <= 0.0:
                continue
            j0, j1 = max(j - 1, 0), min(j + 1, ny - 1)
            i0, i1 = max(i - 1, 0), min(i + 1, nx - 1)
            sub = values[j0:j1 + 1, i0:i1 + 1].copy()
            d_old = _patch_dirichlet(sub, p, h)
            sub[j - j0, i - i0] = 0.0
            d_new = _patch_dirichlet(sub, p, h)
            dvol = -hh * min(v / delta, 1.0)
            f_old, _ = f_eps(vol, params_s.eps, params_s.gamma, params_s.corner)
            f_new, _ = f_eps(vol + dvol, params_s.eps, params_s.gamma,
                             params_s.corner)
            if d_new - d_old + f_new - f_old < 0.0:
                values[j, i] = 0.0
                vol += dvol
                changed += 1
        removed += changed
        if changed == 0:
            break
    return values, removed


def minimize(u0: ScalarField, domain: DomainSpec, params: PenaltyParams,
             opts: SolveOptions = SolveOptions(),
             tau: float | None = None) -> tuple[ScalarField, SolveReport]:
    """Descend the penalized energy from u0 until the scaled gradient meets
    tolerance, the energy stalls, or the iteration budget runs out.

    The stopping gradient tolerance is tol_grad times the current
    free-boundary flux scale, so it tracks the exponent p.  The energy-stall
    exit counts as converged: at the penalty kinks the raw gradient cannot
    vanish even at the minimizer.
    """
    u0.check_finite("initial iterate")
    grid = u0.grid
    h = grid.h
    shape = grid.shape
    if tau is None:
        tau = default_threshold(domain)

    # descend the corner-blended charge (see f_eps); report the exact one
    params_s = replace(params, corner=opts.corner_frac * params.gamma)

    def fg(x: np.ndarray) -> tuple[float, np.ndarray]:
        f = ScalarField(grid, x.reshape(shape))
        e = eval_penalized_energy(f, domain, params_s).total
        g = eval_energy_gradient(f, domain, params_s)
        return e, g.values.ravel()

    values_flat, res, trace = _lbfgs(u0.values.ravel(), fg, opts)
    values = values_flat.reshape(shape)

    gnorm = float(np.abs(res.jac).max()) / (h * h)
    gmax = float(cell_gradient_magnitude(ScalarField(grid, values)).max())
    tol = opts.tol_grad * _flux_scale(gmax, params.p, h)
    if res.status == 2 and res.nit <= 1 and gnorm > 1e6 * tol:
        raise StepFailure(
            f"optimizer aborted immediately at grad norm {gnorm}: "
            f"{res.message}", trace)

    # truncation to the feasible box [0, max phi] above the obstacle: both
    # truncations are energy-nonincreasing competitors, so they only trim
    # the tolerance-sized infeasibilities a stalled stage leaves behind
    max_phi = float(domain.phi.values.max())
    values = np.minimum(np.maximum(values, domain.phi.values), max_phi)

    if opts.polish_iters > 0:
        values, gnorm, _ = _polish(values, domain, params_s, opts)
        values = np.minimum(np.maximum(values, domain.phi.values), max_phi)
        # alternate cleanup and re-polishing: dropping stranded specks and
        # trimming unprofitable front nodes exposes descent the pointwise
        # relaxation then follows
        for _ in range(3):
            values, n_dropped = _drop_disconnected(values, domain)
            values, n_trimmed = _trim_spikes(values, domain, params_s)
            if n_dropped + n_trimmed == 0:
                break
            values, gnorm, _ = _polish(values, domain, params_s, opts)
            values = np.minimum(np.maximum(values, domain.phi.values), max_phi)

    u = ScalarField(grid, values)
    u.check_finite("solution")
    gmax = float(cell_gradient_magnitude(u).max())
    tol = opts.tol_grad * _flux_scale(gmax, params.p, h)
    # status 0 is scipy's clean convergence (energy decrease below ftol);
    # at kink-set stationary points that is the only achievable exit.
    # After polishing, gnorm is the projected one-sided residual
    converged = gnorm <= tol or res.status == 0

    breakdown = eval_penalized_energy(u, domain, params)
    report = SolveReport(
        energy=breakdown,
        volume_outside=positive_volume_outside(u, domain, tau),
        lip_estimate=breakdown.grad_max,
        iters=int(res.nit),
        grad_norm=gnorm,
        converged=converged,
        params=params,
        trace=trace,
    )
    return u, report


def p_harmonic_replacement(u: ScalarField, ball: tuple[tuple[float, float], float],
                           p: float, opts: SolveOptions = SolveOptions(),
                           ) -> ScalarField:
    """Overwrite u inside the ball with the discrete p-energy minimizer for
    the frozen boundary values.  Never increases the Dirichlet term.
    """
    center, radius = ball
    grid = u.grid
    h = grid.h
    shape = grid.shape
    r = grid.radius_from(center)
    free = (r < radius).ravel()
    ox, oy = grid.origin
    ex, ey = grid.extent
    if (center[0] - radius <= ox or center[0] + radius >= ox + ex
            or center[1] - radius <= oy or center[1] + radius >= oy + ey):
        raise ValueError("replacement ball must lie strictly inside the grid")
    if not free.any():
        return u.copy()

    def fg(x: np.ndarray) -> tuple[float, np.ndarray]:
        f = ScalarField(grid, x.reshape(shape))
        e = _dirichlet_sum(cell_gradient_magnitude(f), p, h)
        g = dirichlet_gradient(f, p).ravel()
        g[~free] = 0.0
        return e, g

    # frozen nodes are pinned by equal bounds
    x0 = u.values.ravel()
    lb = np.where(free, -np.inf, x0)
    ub = np.where(free, np.inf, x0)
    values_flat, _, _ = _lbfgs(x0, fg, opts, bounds=optimize.Bounds(lb, ub))
    return ScalarField(grid, values_flat.reshape(shape))


def clear_ramp_band(u: ScalarField, domain: DomainSpec, delta: float) -> ScalarField:
    """Zero the outside nodes below delta before a stage with a smaller
    ramp width.

    When delta shrinks, nodes that the old ramp counted fractionally become
    fully counted, so the smoothed volume measure jumps upward.  If that
    jump strands the measure above the budget the iterate cannot recover:
    shedding volume requires lowering a front node against its own Dirichlet
    kink force, which monotone descent never does.  Restarting the stage
    with the old band cleared keeps the re-evaluated measure at or below
    its previous value; the stage then regrows the band at the new width,
    and growth toward the budget is downhill all the way.
    """
    values = u.values.copy()
    values[domain.outside() & (values < delta)] = 0.0
    return ScalarField(u.grid, values)


def run_continuation(domain: DomainSpec, schedule: ContinuationSchedule,
                     opts: SolveOptions = SolveOptions(),
                     u0: ScalarField | None = None,
                     ) -> tuple[ScalarField, list[SolveReport]]:
    """Warm-started solves along the joint (sigma, delta) ladder at the
    first exponent and fixed eps; the final iterate approximates the
    two-limit solution.  The default start is the Lipschitz competitor
    seed, which already spends (most of) the volume budget."""
    u = u0.copy() if u0 is not None else competitor_seed(
        domain, default_threshold(domain))
    p0 = schedule.ps[0]
    trace: list[SolveReport] = []
    prev_delta = None
    for sigma, delta in schedule.stages():
        if prev_delta is not None and delta < prev_delta:
            u = clear_ramp_band(u, domain, prev_delta)
        prev_delta = delta
        params = PenaltyParams(sigma=sigma, delta=delta, eps=schedule.eps,
                               p=p0, gamma=domain.gamma)
        try:
            u, report = minimize(u, domain, params, opts)
        except StepFailure as err:
            raise StepFailure(
                f"continuation stage (sigma={sigma}, delta={delta}) failed: {err}",
                err.trace) from err
        trace.append(report)
    return u, trace


def tune_epsilon(domain: DomainSpec, schedule: ContinuationSchedule,
                 target_tol: float, opts: SolveOptions = SolveOptions(),
                 eps_floor: float = 1e-9, u0: ScalarField | None = None,
                 on_probe=None,
                 ) -> tuple[float, ScalarField, list[tuple[float, float]]]:
    """Shrink eps until the measured outside volume is within
    target_tol * gamma of the budget.

    Measured volume decreases in eps (a larger eps taxes every unit of
    positivity volume harder), but the descent dynamics are hysteretic:
    both growing and shrinking the positivity set cross penalty kinks and
    can freeze far from the target.  Every probe therefore restarts from
    the same base iterate (the continuation result, which the competitor
    seed placed near the budget) and eps is bisected geometrically once a
    bracket exists.  Returns the saturating eps, its solution, and the
    (eps, volume) probe ladder.
    """
    if not (target_tol > 0):
        raise ValueError("target_tol must be positive")
    tau = default_threshold(domain)
    sigma_f, delta_f = schedule.stages()[-1]
    if u0 is None:
        u0, _ = run_continuation(domain, schedule, opts)
    u_base = u0
    eps = schedule.eps
    eps_under: float | None = None  # an eps whose probe overshot the budget
    eps_over: float | None = None   # an eps whose probe fell short
    probes: list[tuple[float, float]] = []
    for _ in range(60):
        params = PenaltyParams(sigma=sigma_f, delta=delta_f, eps=eps,
                               p=schedule.ps[0], gamma=domain.gamma)
        u, report = minimize(u_base, domain, params, opts)
        vol = positive_volume_outside(u, domain, tau)
        probes.append((eps, vol))
        if on_probe is not None:
            on_probe(eps, vol, u, report)
        if abs(vol - domain.gamma) <= target_tol * domain.gamma:
            return eps, u, probes
        if vol < domain.gamma:
            eps_over = eps
            eps = (np.sqrt(eps * eps_under) if eps_under is not None
                   else 0.5 * eps)
        else:
            eps_under = eps
            # the two penalty slopes swap roles past eps = 1, so the
            # upward search stops at 0.5 rather than enter that regime
            eps = (np.sqrt(eps_over * eps) if eps_over is not None
                   else min(2.0 * eps, 0.5))
            if eps_under >= 0.5:
                raise VolumeNotSaturable(
                    f"volume stuck at {vol}, above budget {domain.gamma} "
                    "even with the volume charge at its usable maximum", vol)
        bracket_closed = (eps_under is not None and eps_over is not None
                          and eps_over / eps_under < 1.0 + 1e-6)
        if eps < eps_floor or bracket_closed:
            raise VolumeNotSaturable(
                f"volume not saturable at this resolution: reached {vol} "
                f"of budget {domain.gamma}", vol)
    raise VolumeNotSaturable(
        "volume not saturable: probe budget exhausted", probes[-1][1])


def p_sweep(domain: DomainSpec, schedule: ContinuationSchedule,
            opts: SolveOptions = SolveOptions(),
            u0: ScalarField | None = None,
            ) -> tuple[list[tuple[float, ScalarField, SolveReport]], ScalarField]:
    """Warm-started solves along the exponent ladder at the penalty floors;
    the last iterate serves as the infinity-limit surrogate."""
    sigma_f, delta_f = schedule.stages()[-1]
    u = u0.copy() if u0 is not None else domain.phi.copy()
    results: list[tuple[float, ScalarField, SolveReport]] = []
    for p in schedule.ps:
        params = PenaltyParams(sigma=sigma_f, delta=delta_f, eps=schedule.eps,
                               p=p, gamma=domain.gamma)
        u, report = minimize(u, domain, params, opts)
        results.append((p, u.copy(), report))
    return results, u
