import numpy as np
import pytest

from heatid.elliptic import Gauge, solve_elliptic
from heatid.grid import BoundaryCurve, StructuredGrid, TraceMeasurement, trace_extract
from heatid.harness import Experiment
from heatid.inverse import (EmptyIdentifiableInterval, ReconstructionResult, error_sup, merge_results,
                            ratio_estimate, reconstruct_elliptic, reconstruct_parabolic, recover_principal,
                            smooth_trace, write_result)
from heatid.kirchhoff import ConductionLaw, builtin_law
from heatid.parabolic import Ramp, Schedule, simulate
from heatid.poisson import CompatibilityViolation, FluxData, solve_neumann


def flat_result(v, a):
    return ReconstructionResult(v=v, a_hat=a, slope=np.ones_like(v), interval=(v[0], v[-1]), min_slope=1.0)


@pytest.mark.parametrize("kappa", [1.0, 0.6, 2.5])
def test_constant_laws_recovered(kappa):
    exp = Experiment(n=33)
    r = exp.reconstruct(exp.trace(ConductionLaw.constant(kappa)))
    np.testing.assert_allclose(r.a_hat, kappa, atol=1e-8)


def test_analytic_trace_exact_for_constant_law():
    exp = Experiment(n=33, amplitude=1.3)
    kappa = 1.7
    x = exp.curve.positions
    g = TraceMeasurement(exp.curve, (0.5 - x) * 1.3 / kappa + 0.42)
    r = exp.reconstruct(g)
    np.testing.assert_allclose(r.a_hat, kappa, atol=1e-8)


@pytest.mark.slow
def test_tanh_law_fine_grid(tanh_law):
    exp = Experiment(n=257)
    err = error_sup(exp.reconstruct(exp.trace(tanh_law)), tanh_law)
    assert err <= 5e-2
    assert err <= 1e-4


def test_interval_inside_trace_range(tanh_law):
    exp = Experiment(n=33)
    g = exp.trace(tanh_law)
    r = exp.reconstruct(g)
    assert g.values.min() < r.interval[0] < r.interval[1] < g.values.max()
    assert np.all(np.diff(r.v) > 0)


def test_gauge_shift_moves_labels_only(tanh_law):
    exp = Experiment(n=33)
    g = exp.trace(tanh_law)
    r0 = exp.reconstruct(g)
    r1 = exp.reconstruct(g.shifted(0.375))
    np.testing.assert_allclose(r1.v, r0.v + 0.375, atol=1e-12)
    np.testing.assert_allclose(r1.a_hat, r0.a_hat, rtol=1e-10)


def test_neumann_constant_does_not_matter(tanh_law):
    exp = Experiment(n=33)
    g = exp.trace(tanh_law)
    U = trace_extract(solve_neumann(exp.grid, exp.source, exp.flux), exp.curve)
    r0 = ratio_estimate(U, g)
    r1 = ratio_estimate(U.shifted(3.0), g)
    np.testing.assert_array_equal(r1.v, r0.v)
    np.testing.assert_allclose(r1.a_hat, r0.a_hat, rtol=1e-12)


def test_consistency_under_refinement(tanh_law):
    errs = [error_sup(Experiment(n=n).reconstruct(Experiment(n=n).trace(tanh_law)), tanh_law)
            for n in (17, 33, 65)]
    assert errs[0] > errs[1] > errs[2]
    assert np.log2(errs[1] / errs[2]) >= 1.0


def test_zero_flux_is_not_identifiable():
    exp = Experiment(n=17, amplitude=0.0)
    with pytest.raises(EmptyIdentifiableInterval):
        exp.reconstruct(exp.trace(ConductionLaw.constant(1.0)))


def test_incompatible_data_rejected():
    exp = Experiment(n=17)
    g = exp.trace(ConductionLaw.constant(1.0))
    with pytest.raises(CompatibilityViolation):
        reconstruct_elliptic(exp.grid, 1.0, exp.flux, g)


def test_smoothing_keeps_linear_exactness():
    exp = Experiment(n=33)
    g = exp.trace(ConductionLaw.constant(2.0))
    r = exp.reconstruct(g, smoothing=3)
    np.testing.assert_allclose(r.a_hat, 2.0, atol=1e-8)
    assert smooth_trace(g, 1) is g


def test_recover_principal_examples():
    v = np.linspace(0.2, 0.8, 13)
    vv, A = recover_principal(flat_result(v, np.ones_like(v)))
    np.testing.assert_allclose(A, v - 0.2, atol=1e-15)
    _, A2 = recover_principal(flat_result(v, 2 * np.ones_like(v)))
    assert A2[-1] == pytest.approx(2 * 0.6)


def test_recover_principal_derivative_second_order():
    errs = []
    for m in (41, 81):
        v = np.linspace(-1.0, 1.0, m)
        a = 1 + 0.5 * np.tanh(2 * v)
        _, A = recover_principal(flat_result(v, a))
        d = (A[2:] - A[:-2]) / (v[2:] - v[:-2])
        errs.append(np.max(np.abs(d - a[1:-1])))
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_error_sup_examples(tanh_law):
    v = np.linspace(-0.5, 0.5, 21)
    assert error_sup(flat_result(v, tanh_law(v)), tanh_law) == 0.0
    assert error_sup(flat_result(v, tanh_law(v) + 0.1), tanh_law) == pytest.approx(0.1)
    noise = np.random.default_rng(2).uniform(-0.03, 0.03, v.size)
    noise[7] = -0.05
    assert error_sup(flat_result(v, tanh_law(v) + noise), tanh_law) == pytest.approx(0.05)


def test_merge_weights_by_slope():
    v = np.linspace(0, 1, 11)
    r1 = ReconstructionResult(v, np.full(11, 1.0), np.full(11, 3.0), (0.0, 1.0), 3.0)
    r2 = ReconstructionResult(v, np.full(11, 2.0), np.full(11, 1.0), (0.0, 1.0), 1.0)
    m = merge_results([r1, r2])
    np.testing.assert_allclose(m.a_hat, 1.25)
    r3 = ReconstructionResult(v + 2.0, np.full(11, 5.0), np.ones(11), (2.0, 3.0), 1.0)
    m = merge_results([r1, r3])
    assert np.all(np.isfinite(m.a_hat)) and m.interval == (0.0, 3.0)


def _ramp_run(law, t_ramp, n=33, hold=8):
    exp = Experiment(n=n, amplitude=2.0)
    dt = t_ramp / 16
    sched = Schedule((16 + hold) * dt, dt, exp.flux, 0.0, Ramp("smooth", t_ramp))
    traj = simulate(exp.grid, law, sched, exp.curve)
    return exp, sched, traj


def test_parabolic_at_equilibrium_matches_elliptic(tanh_law):
    exp = Experiment(n=33, amplitude=2.0)
    sched = Schedule(8.0, 0.1, exp.flux, 0.0, Ramp("step"))
    traj = simulate(exp.grid, tanh_law, sched, exp.curve)
    r_par = reconstruct_parabolic(exp.grid, sched.data, traj.trace, [traj.times[-1]])
    r_ell = exp.reconstruct(exp.trace(tanh_law))
    np.testing.assert_allclose(r_par.v, r_ell.v, atol=1e-6)
    np.testing.assert_allclose(r_par.a_hat, r_ell.a_hat, atol=1e-6)


def test_parabolic_unit_law_error_falls_with_ramp_rate():
    law = ConductionLaw.constant(1.0)
    errs = []
    for t_ramp in (0.25, 0.5, 1.0, 2.0):
        exp, sched, traj = _ramp_run(law, t_ramp)
        r = reconstruct_parabolic(exp.grid, sched.data, traj.trace, traj.times[16:])
        errs.append(error_sup(r, law))
    assert np.all(np.diff(errs) < 0)


def test_parabolic_per_time_failures_not_fatal(tanh_law):
    exp, sched, traj = _ramp_run(tanh_law, 1.0)
    r = reconstruct_parabolic(exp.grid, sched.data, traj.trace, traj.times[[0, 16, 20]])
    oks = [row["ok"] for row in r.per_time]
    assert oks == [False, True, True]
    with pytest.raises(EmptyIdentifiableInterval):
        reconstruct_parabolic(exp.grid, sched.data, traj.trace, [0.0])
    with pytest.raises(ValueError):
        reconstruct_parabolic(exp.grid, sched.data, traj.trace, [123.0])


def test_write_result(tmp_path):
    v = np.linspace(0, 1, 5)
    write_result(flat_result(v, v + 1), tmp_path / "r.csv", {"sup_error": 0.5})
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "v,a_hat" and len(lines) == 6
    assert '"sup_error": 0.5' in (tmp_path / "r.json").read_text()
