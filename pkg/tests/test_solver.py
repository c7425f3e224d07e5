"""Descent engine, continuation ladder, budget tuning and cleanup passes."""

import numpy as np
import pytest

from conftest import make_bench_domain
from insulab.energy import eval_penalized_energy
from insulab.geometry import (DomainSpec, competitor_seed, default_threshold,
                              positive_volume_outside)
from insulab.grids import ScalarField, build_grid
from insulab.penalties import PenaltyParams
from insulab.solver import (ContinuationSchedule, SolveOptions,
                            VolumeNotSaturable, _drop_disconnected,
                            _trim_spikes, clear_ramp_band, minimize,
                            p_harmonic_replacement, p_sweep, run_continuation,
                            tune_epsilon)

FAST = SolveOptions(max_iters=1500, tol_grad=0.05, polish_iters=400)


def _params(p=2.0, sigma=0.01, delta=0.05, eps=0.05):
    return PenaltyParams(sigma=sigma, delta=delta, eps=eps, p=p, gamma=0.45)


def _schedule(eps=0.05):
    return ContinuationSchedule(sigmas=(0.01, 0.002), deltas=(0.08, 0.05),
                                ps=(2.0, 4.0), eps=eps)


def test_solve_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(max_iters=0)
    with pytest.raises(ValueError):
        SolveOptions(tol_grad=0.0)
    with pytest.raises(ValueError):
        SolveOptions(tol_energy=-1.0)
    with pytest.raises(ValueError):
        SolveOptions(corner_frac=-0.1)
    with pytest.raises(ValueError):
        SolveOptions(polish_iters=-1)


def test_schedule_validation_and_stages():
    with pytest.raises(ValueError):
        ContinuationSchedule(sigmas=(), deltas=(0.1,), ps=(2.0,), eps=0.1)
    with pytest.raises(ValueError):
        ContinuationSchedule(sigmas=(0.1, 0.1), deltas=(0.1,), ps=(2.0,),
                             eps=0.1)
    with pytest.raises(ValueError):
        ContinuationSchedule(sigmas=(0.1,), deltas=(0.1,), ps=(4.0, 2.0),
                             eps=0.1)
    with pytest.raises(ValueError):
        ContinuationSchedule(sigmas=(0.1,), deltas=(-0.1,), ps=(2.0,), eps=0.1)
    with pytest.raises(ValueError):
        ContinuationSchedule(sigmas=(0.1,), deltas=(0.1,), ps=(2.0,), eps=0.0)
    sched = ContinuationSchedule(sigmas=(0.1, 0.01, 0.001), deltas=(0.2,),
                                 ps=(2.0,), eps=0.1)
    assert sched.stages() == [(0.1, 0.2), (0.01, 0.2), (0.001, 0.2)]


def test_minimize_descends_and_stays_feasible(bench_domain_coarse):
    domain = bench_domain_coarse
    params = _params(p=4.0)
    seed = competitor_seed(domain, default_threshold(domain))
    e0 = eval_penalized_energy(seed, domain, params).total
    u, report = minimize(seed, domain, params, FAST)
    assert report.converged
    assert report.energy.total <= e0 + 1e-10
    max_phi = float(domain.phi.values.max())
    assert u.values.min() >= -1e-8 * max_phi
    assert u.values.max() <= max_phi + 1e-8 * max_phi
    assert float((u.values - domain.phi.values).min()) >= -1e-6 * max_phi


def test_minimize_trivial_zero_obstacle():
    grid = build_grid((-1, 1, -1, 1), 1.0 / 16.0)
    mask = ScalarField.from_function(
        grid, lambda x, y: (np.hypot(x, y) <= 0.55).astype(float))
    domain = DomainSpec(omega_mask=mask, phi=ScalarField.full(grid, 0.0),
                        gamma=0.45)
    u0 = ScalarField.full(grid, 0.0)
    u, report = minimize(u0, domain, _params(), FAST)
    # nothing to insulate: the zero field is stationary and optimal
    np.testing.assert_array_equal(u.values, 0.0)
    assert report.converged


def test_minimize_rejects_nonfinite_start(bench_domain_coarse):
    u0 = ScalarField.full(bench_domain_coarse.grid, 0.0)
    u0.values[3, 3] = np.nan
    with pytest.raises(FloatingPointError):
        minimize(u0, bench_domain_coarse, _params(), FAST)


def test_p_harmonic_replacement_lowers_dirichlet_and_pins_boundary(rng):
    grid = build_grid((-1, 1, -1, 1), 1.0 / 16.0)
    u = ScalarField(grid, 0.3 * rng.standard_normal(grid.shape))
    p = 4.0
    ball = ((0.1, -0.2), 0.4)
    v = p_harmonic_replacement(u, ball, p)
    r = grid.radius_from(ball[0])
    frozen = r >= ball[1]
    np.testing.assert_array_equal(v.values[frozen], u.values[frozen])

    def dirichlet(f):
        from insulab.energy import cell_gradient_magnitude
        mag = cell_gradient_magnitude(f)
        return (grid.h**2 / p) * float(np.sum(mag**p))

    assert dirichlet(v) <= dirichlet(u) + 1e-12


def test_p_harmonic_replacement_rejects_leaking_ball():
    grid = build_grid((-1, 1, -1, 1), 1.0 / 8.0)
    u = ScalarField.full(grid, 0.0)
    with pytest.raises(ValueError):
        p_harmonic_replacement(u, ((0.9, 0.0), 0.5), 2.0)


def test_drop_disconnected_removes_stranded_speck(bench_domain_coarse):
    domain = bench_domain_coarse
    values = np.maximum(domain.phi.values, 0.0).copy()
    j, i = 1, 1  # far corner, outside the room and off the front
    assert not domain.inside()[j, i]
    values[j, i] = 0.01
    cleaned, count = _drop_disconnected(values, domain)
    assert count == 1
    assert cleaned[j, i] == 0.0
    # the component touching the room is untouched
    inside = domain.inside()
    np.testing.assert_array_equal(cleaned[inside], values[inside])


def test_drop_disconnected_keeps_connected_front(bench_domain_coarse):
    domain = bench_domain_coarse
    seed = competitor_seed(domain, default_threshold(domain))
    cleaned, count = _drop_disconnected(seed.values.copy(), domain)
    assert count == 0
    np.testing.assert_array_equal(cleaned, seed.values)


def test_trim_spikes_removes_isolated_dust(bench_domain_coarse):
    domain = bench_domain_coarse
    params = _params(p=4.0)
    seed = competitor_seed(domain, default_threshold(domain))
    values = seed.values.copy()
    j, i = 2, 2  # isolated positive node with all-zero neighbours
    assert values[j, i] == 0.0 and not domain.inside()[j, i]
    values[j, i] = 0.005
    trimmed, count = _trim_spikes(values, domain, params)
    assert count >= 1
    assert trimmed[j, i] == 0.0


def test_trim_spikes_leaves_clean_front_alone(bench_domain_coarse):
    domain = bench_domain_coarse
    params = _params(p=4.0)
    seed = competitor_seed(domain, default_threshold(domain))
    u, _ = minimize(seed, domain, params, FAST)
    values = u.values.copy()
    _, count = _trim_spikes(values, domain, params)
    assert count == 0


def test_clear_ramp_band_zeroes_only_outside_subdelta(bench_domain_coarse):
    domain = bench_domain_coarse
    seed = competitor_seed(domain, default_threshold(domain))
    delta = 0.05
    cleared = clear_ramp_band(seed, domain, delta)
    outside = domain.outside()
    assert np.all(cleared.values[outside & (seed.values < delta)] == 0.0)
    keep = ~(outside & (seed.values < delta))
    np.testing.assert_array_equal(cleared.values[keep], seed.values[keep])


def test_run_continuation_reports_every_stage(bench_domain_coarse):
    sched = _schedule()
    u, trace = run_continuation(bench_domain_coarse, sched, FAST)
    assert len(trace) == len(sched.stages())
    assert all(r.converged for r in trace)
    assert np.isfinite(u.values).all()
    max_phi = float(bench_domain_coarse.phi.values.max())
    assert u.values.max() <= max_phi + 1e-8 * max_phi


def test_tune_epsilon_saturates_budget(bench_domain_coarse):
    domain = bench_domain_coarse
    sched = _schedule()
    eps, u, probes = tune_epsilon(domain, sched, target_tol=0.15, opts=FAST)
    tau = default_threshold(domain)
    vol = positive_volume_outside(u, domain, tau)
    assert abs(vol - domain.gamma) <= 0.15 * domain.gamma
    assert probes[-1][0] == eps
    # the search may move eps either way but never past the usable cap
    assert 0 < eps <= 0.5


def test_tune_epsilon_validates_tolerance(bench_domain_coarse):
    with pytest.raises(ValueError):
        tune_epsilon(bench_domain_coarse, _schedule(), target_tol=0.0)


def test_tune_epsilon_raises_when_floor_blocks_search(bench_domain_coarse):
    domain = bench_domain_coarse
    sched = _schedule()
    with pytest.raises(VolumeNotSaturable):
        tune_epsilon(domain, sched, target_tol=1e-12, opts=FAST,
                     eps_floor=sched.eps)


def test_p_sweep_warm_starts_along_exponents(bench_domain_coarse):
    domain = bench_domain_coarse
    sched = _schedule()
    u0, _ = run_continuation(domain, sched, FAST)
    results, final = p_sweep(domain, sched, FAST, u0=u0)
    assert [p for p, _, _ in results] == list(sched.ps)
    np.testing.assert_array_equal(results[-1][1].values, final.values)
    for _, field, report in results:
        assert report.converged
        assert np.isfinite(field.values).all()
    # lip estimates grow toward the limit slope as p increases
    lips = [r.lip_estimate for _, _, r in results]
    assert lips[-1] > 0
