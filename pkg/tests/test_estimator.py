import math

import numpy as np
import pytest
from sklearn.base import clone

from chameleon import exact
from chameleon.estimator import (AlphaSchedule, CoexistenceStats, ExactPiEstimator, MonteCarloPiEstimator,
                                 PiEstimate, PropertyReport, coexistence_experiment, default_step_cap,
                                 estimate_pi, property_report, sweep_p)


def test_counts_and_invariants():
    e = estimate_pi(10, 0.5, 0.4, 500, seed=1)
    assert e.absorbed_red + e.absorbed_blue + e.unabsorbed == e.trials
    assert e.point_estimate == e.absorbed_red / e.absorbed
    assert e.ci_half_width == pytest.approx(1.96 * math.sqrt(e.point_estimate * (1 - e.point_estimate) / e.absorbed), rel=1e-3)
    assert e.step_cap == default_step_cap(10) == 5000
    assert PiEstimate.from_dict(e.to_dict()) == e


def test_bit_reproducible_and_thread_independent():
    a = estimate_pi(30, 0.4, 0.3, 300, seed=7, n_threads=1)
    b = estimate_pi(30, 0.4, 0.3, 300, seed=7, n_threads=0)
    assert a == b
    assert estimate_pi(30, 0.4, 0.3, 300, seed=8) != a


@pytest.mark.parametrize("N,alpha,p", [(8, 0.5, 0.3), (6, 0.3, 0.8), (20, 0.7, 0.15)])
def test_colour_flip_coupling_swaps_counts(N, alpha, p):
    a = estimate_pi(N, alpha, p, 2000, seed=3)
    b = estimate_pi(N, alpha, 1 - p, 2000, seed=3, flip=True)
    assert (a.absorbed_red, a.absorbed_blue, a.unabsorbed) == (b.absorbed_blue, b.absorbed_red, b.unabsorbed)


def test_half_is_half():
    e = estimate_pi(50, 0.5, 0.5, 4000, seed=2)
    assert abs(e.point_estimate - 0.5) <= 3 * e.null_se(0.5)


@pytest.mark.parametrize("N", [4, 6, 8])
@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_against_exact(N, alpha, p):
    pi = exact.absorption_probability_exact(N, alpha, p).pi
    e = estimate_pi(N, alpha, p, 5000, seed=N * 100 + int(10 * alpha) * 10 + int(10 * p))
    assert abs(e.point_estimate - pi) <= 3 * e.null_se(pi)


def test_unabsorbed_fraction_small_at_default_cap():
    for a in (0.2, 0.8):
        e = estimate_pi(60, a, 0.5, 300, seed=5)
        assert e.unabsorbed / e.trials < 0.05


def test_tiny_cap_reports_unabsorbed():
    e = estimate_pi(50, 0.5, 0.5, 100, step_cap=1, seed=1)
    assert e.unabsorbed > 90 and e.absorbed_red + e.absorbed_blue + e.unabsorbed == 100


def test_sweep_endpoints_and_independence():
    curve = sweep_p(12, 0.5, [0.0, 0.3, 0.3, 1.0], 400, seed=3)
    assert curve[0].point_estimate == 0.0 and curve[0].all_blue_start == 400
    assert curve[-1].point_estimate == 1.0
    # identical p at different grid positions draw from different streams
    assert curve[1].absorbed_red != curve[2].absorbed_red or curve[1].stream != curve[2].stream
    assert [e.stream for e in curve] == [0, 1, 2, 3]
    again = sweep_p(12, 0.5, [0.0, 0.3, 0.3, 1.0], 400, seed=3)
    assert again == curve


def test_property_report_rows():
    curve = sweep_p(40, 0.5, [0.0, 0.05, 0.3, 0.5, 0.7, 1.0], 1500, seed=4)
    rep = property_report(curve)
    props = {r.prop for r in rep.rows}
    assert {"bounds", "symmetry", "underdog", "continuity", "monotone"} <= props
    under = [r for r in rep.rows if r.prop == "underdog"]
    assert all(r.status == "info" for r in under)  # N < 200: reported only
    assert all(r.status == "pass" for r in rep.rows if r.prop in ("bounds", "symmetry"))
    assert PropertyReport.from_dict(rep.to_dict()).to_dict() == rep.to_dict()


def test_property_report_flags_violation():
    fake = [PiEstimate(0.5, 0.3, 200, 1000, 900, 100, 0, 0)]
    rep = property_report(fake)
    assert not rep.passed and rep.failed[0].prop == "bounds"


def test_alpha_schedule():
    s = AlphaSchedule.parse("power:2")
    v = s.values(100)
    assert v[1] < 1 and v[10] == pytest.approx(0.01) and s.summable
    assert not AlphaSchedule.parse("power:1").summable
    assert not AlphaSchedule.parse("constant:0.5").summable
    assert AlphaSchedule.parse("constant:1").summable
    assert str(s) == "power:2"
    with pytest.raises(ValueError):
        AlphaSchedule.parse("linear:3")
    with pytest.raises(ValueError):
        AlphaSchedule("constant", 1.5)


def test_coexistence_summable_matches_exact_no_move_probability():
    st = coexistence_experiment(AlphaSchedule("power", q=2.0), 10_000, 1000, seed=10)
    pred = st.predicted_frozen[10]
    assert pred == pytest.approx(
        np.prod([1 - 2 * t ** -2.0 * (1 - t ** -2.0) for t in range(11, 10_001)]), rel=1e-12)
    assert abs(st.frozen_fraction[10] - pred) <= 3 * math.sqrt(pred * (1 - pred) / 1000)
    assert 1 - st.union_bound[10] <= pred
    assert st.both_colors_fraction == 1.0
    assert CoexistenceStats.from_dict(st.to_dict()) == st


def test_coexistence_constant_half_moves_away():
    st = coexistence_experiment(AlphaSchedule("constant", 0.5), 10_000, 500, seed=11)
    assert st.frozen_fraction[10] <= 0.2
    assert st.far_fraction >= 0.5


def test_coexistence_alpha_one_is_frozen():
    st = coexistence_experiment(AlphaSchedule("constant", 1.0), 500, 50, seed=1)
    assert st.frozen_fraction[10] == 1.0 and st.both_colors_fraction == 1.0


def test_monte_carlo_estimator_api():
    est = MonteCarloPiEstimator(alpha=0.5, n_sites=10, n_trials=500, random_state=1)
    assert clone(est).get_params() == est.get_params()
    est.fit(np.array([[0.0], [0.5], [1.0]]))
    pred = est.predict([0.25, 0.75])
    assert pred.shape == (2,) and np.all((0 <= pred) & (pred <= 1))
    assert est.report().rows
    with pytest.raises(ValueError):
        est.fit([[0.1, 0.2]])
    with pytest.raises(ValueError):
        est.fit([1.5])


def test_exact_estimator_api():
    est = ExactPiEstimator(alpha=0.5, n_sites=6).fit()
    assert est.predict([0.3])[0] == pytest.approx(0.31577962098692, abs=1e-9)
    lin = clone(est).set_params(method="linear").fit()
    assert lin.predict([0.3])[0] == pytest.approx(est.predict([0.3])[0], abs=1e-9)
    with pytest.raises(ValueError):
        ExactPiEstimator(n_sites=20).fit()
