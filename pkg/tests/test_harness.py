import json

import numpy as np
import pytest
from scipy.integrate import quad

from heatid import harness
from heatid.harness import (DesignInfeasible, Experiment, ExperimentDesign, bump, bump_l2, bump_w1inf,
                            convergence_study, design_ramp, equilibrium_mode, loglog_slope,
                            observed_orders, ramp_experiment, result_distance, stability_study,
                            validation_run)
from heatid.inverse import EmptyIdentifiableInterval, error_sup
from heatid.kirchhoff import ConductionLaw

BOUNDS = (0.5, 1.5)


def test_bump_norms_closed_form():
    w = harness.BUMP_HALF_WIDTH
    l2, _ = quad(lambda x: bump(x, 0.5) ** 2, 0.5 - w, 0.5 + w)
    assert np.sqrt(l2) == pytest.approx(bump_l2(), rel=1e-10)
    x = np.linspace(0.5 - w, 0.5 + w, 20001)
    slope = np.max(np.abs(np.gradient(bump(x, 0.5), x)))
    assert 1.0 + slope == pytest.approx(bump_w1inf(), rel=1e-6)


def test_design_large_eps_first_validation(monkeypatch):
    calls = []
    real = harness.validation_run
    monkeypatch.setattr(harness, "validation_run", lambda d, law: calls.append(d) or real(d, law))
    d = design_ramp(BOUNDS, 0.2, 0.8, 1.0, n=17)
    assert len(calls) == 1
    assert d.max_ut <= d.ut_budget


def test_design_halving_eps_lengthens_ramp():
    d1 = design_ramp(BOUNDS, 0.2, 0.8, 0.5, n=17)
    d2 = design_ramp(BOUNDS, 0.2, 0.8, 0.25, n=17)
    assert d2.t_ramp >= 3.5 * d1.t_ramp
    assert d2.amplitude == d1.amplitude


def test_design_replay_is_bit_identical():
    d = design_ramp(BOUNDS, 0.2, 0.8, 0.5, n=17)
    assert validation_run(d, ConductionLaw.constant(1.0)) == d.max_ut
    back = ExperimentDesign.from_json(d.to_json())
    assert back == d
    assert json.loads(d.to_json())["t_ramp"] == d.t_ramp


def test_design_covers_target_and_invariants():
    d = design_ramp(BOUNDS, -0.3, 0.6, 0.5, n=17)
    sched = d.schedule()
    assert sched.ramp(0.0) == 0.0
    rho = [sched.ramp(t) for t in sched.times]
    assert np.all(np.diff(rho) >= 0)
    g = d.experiment.trace(ConductionLaw.constant(1.0)).values
    assert g.min() <= -0.3 and g.max() >= 0.6
    assert d.window == (d.t_ramp, d.T)


def test_design_errors():
    with pytest.raises(ValueError):
        design_ramp(BOUNDS, 0.8, 0.2, 0.5, n=17)
    with pytest.raises(DesignInfeasible):
        design_ramp(BOUNDS, 0.2, 0.8, 0.5, n=17, max_iter=0)


def test_designed_ramp_meets_accuracy(tanh_law):
    d = design_ramp(BOUNDS, 0.2, 0.8, 0.05, n=33)
    result, max_ut = ramp_experiment(tanh_law, d)
    # validated on the mid-range law; the truth may run hotter by the conductivity ratio
    assert max_ut <= (BOUNDS[1] / BOUNDS[0]) * d.ut_budget
    assert result.interval[0] <= 0.2 and result.interval[1] >= 0.8
    assert error_sup(result, tanh_law) <= 0.05


def test_doubling_ramp_reduces_error(tanh_law):
    d = design_ramp(BOUNDS, 0.2, 0.8, 1.0, n=17)
    errs = [error_sup(ramp_experiment(tanh_law, d.with_ramp(m * d.t_ramp))[0], tanh_law) for m in (1, 2)]
    assert errs[1] < errs[0]


def test_equilibrium_unit_law():
    law = ConductionLaw.constant(1.0)
    d = design_ramp(BOUNDS, 0.2, 0.8, 1.0, n=17)
    r = equilibrium_mode(law, d)
    np.testing.assert_allclose(r.a_hat, 1.0, atol=1e-6)


def test_equilibrium_agrees_with_slow_ramp(tanh_law):
    d = design_ramp(BOUNDS, 0.2, 0.8, 0.5, n=33)
    r_eq = equilibrium_mode(tanh_law, d)
    r_ramp, _ = ramp_experiment(tanh_law, d.with_ramp(4 * d.t_ramp))
    exp = d.experiment
    baseline = error_sup(exp.reconstruct(exp.trace(tanh_law)), tanh_law)
    assert result_distance(r_eq, r_ramp) <= 2 * baseline


def test_equilibrium_zero_data():
    d = ExperimentDesign(0.2, 0.8, 0.5, amplitude=0.0, t_ramp=1.0, n=17)
    with pytest.raises(EmptyIdentifiableInterval):
        equilibrium_mode(ConductionLaw.constant(1.0), d)


def test_stability_zero_delta_is_baseline(tanh_law):
    exp = Experiment(n=33)
    base = error_sup(exp.reconstruct(exp.trace(tanh_law)), tanh_law)
    for mode in ("flux", "source", "measurement"):
        study = stability_study(tanh_law, [0.0], mode, exp)
        assert study["rows"][0][1] == pytest.approx(base, rel=1e-9)
        assert study["slope"] is None


@pytest.mark.parametrize("mode", ["flux", "measurement"])
def test_stability_monotone_above_floor(tanh_law, mode):
    study = stability_study(tanh_law, [1e-1, 3e-2, 1e-2, 3e-3], mode, Experiment(n=33))
    errs = [e for _, e in study["rows"]]
    assert np.all(np.diff(errs) < 0)


def test_stability_parallel_matches_serial(tanh_law):
    deltas = [1e-2, 1e-3]
    serial = stability_study(tanh_law, deltas, "flux", Experiment(n=17))
    parallel = stability_study(tanh_law, deltas, "flux", Experiment(n=17), jobs=2)
    assert serial == parallel


def test_stability_rejects_negative(tanh_law):
    with pytest.raises(ValueError):
        stability_study(tanh_law, [-1e-3], "flux")
    with pytest.raises(ValueError):
        stability_study(tanh_law, [1e-3], "bogus", Experiment(n=17))


def test_convergence_study_orders(tanh_law):
    study = convergence_study(tanh_law, [17, 33, 65])
    assert min(study["poisson_orders"]) > 1.8
    assert min(study["forward_orders"]) > 1.8
    assert min(study["reconstruction_orders"]) >= 1.0


def test_convergence_study_input_errors(tanh_law):
    with pytest.raises(ValueError):
        convergence_study(tanh_law, [17, 17, 33])
    with pytest.raises(ValueError):
        convergence_study(tanh_law, [17, 33])


def test_helpers():
    assert observed_orders([0.1, 0.05], [4.0, 1.0]) == pytest.approx([2.0])
    assert loglog_slope([1e-1, 1e-2, 1e-3], [3e-2, 3e-3, 3e-4]) == pytest.approx(1.0)
