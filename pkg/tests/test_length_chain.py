import math

import numpy as np
import pytest

from chameleon import length_chain as lc

ALPHA_GRID = np.linspace(0.01, 0.99, 50)


def test_row_one_at_half():
    row = lc.build_model(0.5).row(1)
    assert [row[j] for j in range(4)] == pytest.approx([0.375, 0.25, 0.25, 0.125])


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.77])
def test_rows_are_stochastic(alpha):
    m = lc.build_model(alpha)
    for i in range(6):
        assert sum(m.row(i).values()) == pytest.approx(1.0, abs=1e-12)
    th = m.theta
    assert m.row(5)[3] == pytest.approx(th * th) and m.row(5)[7] == pytest.approx(th * th)
    assert m.row(0) == {0: 1.0}
    P = m.matrix(50)
    assert np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0)


def test_model_rejects_bad_alpha():
    for a in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            lc.build_model(a)


def test_h_of_theta():
    assert lc.h_of_theta(0.25) == pytest.approx(2 * (math.sqrt(2) - 1))
    th = np.linspace(1e-4, 0.25, 500)
    h = lc.h_of_theta(th)
    assert np.all(h > 0.8)
    assert np.all(1 - h <= th / 2 + 2.18 * th ** 2)
    with pytest.raises(ValueError):
        lc.h_of_theta(0.3)
    with pytest.raises(ValueError):
        lc.h_of_theta(0.0)


def test_absorption_scalars_at_half():
    s = lc.absorption_scalars(0.5)
    assert s.gamma1 == pytest.approx(0.171573, abs=1e-6)
    assert s.u2 == pytest.approx(0.828427, abs=1e-6)
    assert s.u3 == pytest.approx(0.857864, abs=1e-6)
    assert s.f11_star == pytest.approx(0.564340, abs=1e-6)
    assert s.expected_returns == pytest.approx(2.2954, abs=1e-4)
    assert s.expected_returns == pytest.approx(1 / (1 - s.f11_star))
    assert 1 / (2 * s.theta) == 2
    assert lc.AbsorptionScalars.from_dict(s.to_dict()) == s


@pytest.mark.parametrize("alpha", ALPHA_GRID)
def test_roots_and_lower_bound_on_grid(alpha):
    s = lc.absorption_scalars(float(alpha))
    assert 0 < s.gamma1 < 1 and s.gamma2 > 1
    roots = np.sort_complex(np.roots(lc.characteristic_polynomial(s.theta)))
    assert np.allclose(np.sort(roots.real), [-s.gamma2, -s.gamma1, 1, 1], atol=1e-6)
    assert np.max(np.abs(roots.imag)) < 1e-6
    assert s.expected_returns > 1 / (2 * s.theta)
    assert 0 <= s.f11_star < 1


def test_beta0_makes_the_recursion_stochastic():
    for th in (0.05, 0.2, 0.25):
        b0, b1, b2 = lc.characteristic_coefficients(th)
        assert b0 + 2 * b1 + 2 * b2 == pytest.approx(1.0, abs=1e-15)


def test_abort_on_wrong_root(monkeypatch):
    monkeypatch.setattr(lc, "h_of_theta", lambda th: 0.5)
    with pytest.raises(lc.CharacteristicEquationError):
        lc.absorption_scalars(0.5)


def test_truncated_solve_matches_closed_form():
    u = lc.u_truncated_solve(0.5, 400)
    s = lc.absorption_scalars(0.5)
    assert u[0] == 0 and u[1] == 1
    assert u[2] == pytest.approx(s.h, abs=1e-6)
    k = np.arange(2, 60)
    assert np.allclose(u[k], lc.u_closed_form(0.5, k), atol=1e-9)
    assert abs(u[400] - 1 / (1 + s.gamma1)) <= s.gamma1 ** 400 / (1 + s.gamma1) + 1e-9


def test_absorbing_tail_has_first_order_bias():
    s = lc.absorption_scalars(0.5)
    err = {K: abs(lc.u_truncated_solve(0.5, K, "absorb0")[2] - s.u2) for K in (100, 200, 400)}
    assert err[400] > 1e-4
    assert err[100] / err[400] == pytest.approx(4, rel=0.1)


def test_expected_returns_truncated_and_converged():
    s = lc.absorption_scalars(0.3)
    assert lc.expected_returns_truncated(0.3, 400) == pytest.approx(s.expected_returns, abs=1e-9)
    val, K = lc.converged_truncation(lc.expected_returns_truncated, 0.3)
    assert val == pytest.approx(s.expected_returns, abs=1e-9)


def test_simulate_returns():
    s = lc.absorption_scalars(0.5)
    r = lc.simulate_returns(0.5, 100_000, seed=12)
    assert abs(r.mean - s.expected_returns) <= 3 * r.se
    assert r.unterminated_fraction < 0.01
    assert lc.simulate_returns(0.5, 10, step_cap=0).mean == 0
    big = lc.simulate_returns(0.99, 2000, seed=1)
    assert big.mean > 1 / (2 * 0.99 * 0.01)
    assert lc.ReturnsEstimate.from_dict(r.to_dict()) == r


def test_simulate_returns_threads_agree():
    a = lc.simulate_returns(0.4, 5000, 10_000, seed=2, n_threads=1)
    b = lc.simulate_returns(0.4, 5000, 10_000, seed=2, n_threads=0)
    assert a == b


def test_chain_distribution_small_t():
    m = lc.build_model(0.5)
    assert m.distribution(0).tolist() == [0.0, 1.0]
    assert m.distribution(1)[1] == pytest.approx(0.25)
    for t in range(6):
        assert m.distribution(t).sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_lattice_cross_check(alpha):
    cc = lc.lattice_cross_check(alpha, 6, 20_000, seed=5)
    assert cc.passed
    assert cc.tv[0] == 0.0
    if alpha == 0.5:
        se = math.sqrt(0.25 * 0.75 / cc.trials)
        assert abs(cc.p11_lattice[1] - 0.25) <= 3 * se
    assert lc.CrossCheck.from_dict(cc.to_dict()).to_dict() == cc.to_dict()


@pytest.mark.parametrize("t", [0, 1, 2, 3])
def test_isolated_red_leading_term(t):
    p = 1e-3
    ratio, p11 = lc.isolated_red_ratio(0.5, t, p)
    assert abs(ratio - p11) <= 2 * (2 * t + 4) * p


def test_final_inequality_chain():
    a = np.linspace(0.005, 0.995, 199)
    chain = lc.lower_bound_chain(a)
    for hi, lo in zip(chain, chain[1:]):
        assert np.all(hi >= lo - 1e-12)
    assert np.all(chain[-1] > 0)
    assert np.all(a * (1 - a) ** 3 <= 27 / 256 + 1e-15)
