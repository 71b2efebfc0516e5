import itertools
import warnings

import numpy as np
import pytest

from chameleon import exact
from chameleon.lattice import FIXED_BLUE_LINE, Configuration, ModelParams, Neighborhood, apply_rule

#: exact pi_6(1/2, 0.3), frozen from the absorbing-chain linear solve
PI6_HALF_03 = 0.31577962098692


def test_initial_laws():
    d = exact.initial_distribution(2, 0.3)
    p = 0.3
    assert np.allclose(d.probs, [(1 - p) ** 2, p * (1 - p), p * (1 - p), p * p])
    assert exact.initial_distribution(5, 1.0).probs[31] == 1.0
    allb = exact.initial_distribution(4, Configuration.monochrome("B", 4))
    assert allb.probs[0] == 1.0
    with pytest.warns(exact.RotationInvarianceWarning):
        exact.initial_distribution(4, Configuration.from_word("RBBB"))
    with pytest.raises(ValueError):
        exact.initial_distribution(4, Configuration.from_word("RBBB"), require_invariant=True)
    m = exact.initial_distribution(6, [[0.8, 0.2], [0.3, 0.7]])
    assert m.rotation_invariant


def test_transition_matrix_brute_force_n4():
    params = ModelParams(0.3, 0.6)
    K = exact.transition_matrix(4, params).toarray()
    coins = np.array(list(itertools.product((0, 1), repeat=4)), np.uint8)
    for s in range(16):
        cfg = Configuration.from_index(s, 4).sites
        row = np.zeros(16)
        for c in coins:
            p = np.where(cfg == 1, params.p_red, params.p_blue)
            w = np.prod(np.where(c == 1, p, 1 - p))
            row[Configuration(apply_rule(cfg, c, True, False)).index] += w
        assert np.allclose(K[s], row, atol=1e-15)


@pytest.mark.parametrize("n", [4, 6, 8])
@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_mass_and_rotation_invariance_preserved(n, alpha):
    traj = exact.trajectory(exact.iid(n, 0.4), ModelParams.critical(alpha), 10)
    for d in traj:
        assert abs(d.total_mass - 1) <= 1e-12
        assert d.rotation_spread() <= 1e-12


def test_absorbing_point_masses():
    d = exact.point_mass(Configuration.monochrome("R", 6))
    assert exact.evolve(d, ModelParams.critical(0.4)).probs[63] == pytest.approx(1, abs=1e-15)
    assert exact.pattern_probability(d, "RR") == 1.0


def test_pattern_probability():
    p = 0.35
    d = exact.iid(8, p)
    assert exact.pattern_probability(d, "BRRB") == pytest.approx(p * p * (1 - p) ** 2, abs=1e-15)
    assert exact.pattern_probability(d, "R") == pytest.approx(p, abs=1e-15)
    with pytest.raises(ValueError):
        exact.pattern_probability(d, "R" * 9)


def test_pattern_average_warns_when_not_invariant():
    d = exact.point_mass(Configuration.from_word("RBBBBB"))
    with pytest.warns(exact.RotationInvarianceWarning):
        assert exact.pattern_probability(d, "R") == pytest.approx(1 / 6)


def test_r_recursion_against_evolve():
    # one two-sided step of P(R) from the length-3 marginals
    a, d = 0.6, exact.iid(6, 0.3)
    d1 = exact.evolve(d, ModelParams.critical(a))
    P = lambda w: exact.pattern_probability(d, w)  # noqa: E731
    assert exact.pattern_probability(d1, "R") - P("R") == pytest.approx(a * a * (1 - a) * (P("BRB") - P("RBR")), abs=1e-14)


@pytest.mark.parametrize("n", [6, 8])
@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
def test_identity_grid(n, alpha, p):
    for ident in exact.EQUALITY_IDENTITIES + ("f", "f2", "g"):
        rep = exact.check_identity(ident, n, alpha, p, 20)
        assert rep.passed, rep


def test_identity_examples_from_reference_points():
    assert exact.check_identity("a", 8, 0.5, 0.3, 20).residual <= 1e-10
    assert exact.check_identity("e", 8, 0.7, 0.4, 20).residual <= 1e-10


def test_identities_with_markov_initial_law():
    init = exact.cyclic_markov(8, [[0.7, 0.3], [0.4, 0.6]])
    for ident in exact.EQUALITY_IDENTITIES:
        assert exact.check_identity(ident, 8, 0.4, float("nan"), 10, initial=init).passed


def test_typeset_rr_equation_is_incomplete():
    # the displayed RR recursion leaves out the BRBR and RBRB windows
    assert exact.check_identity("c_printed", 8, 0.5, 0.3, 5).residual > 1e-3


def test_identity_errors():
    with pytest.raises(KeyError):
        exact.check_identity("z", 8, 0.5, 0.3, 5)
    with pytest.raises(ValueError):
        exact.check_identity("a", 5, 0.5, 0.3, 5)


def test_rr_table_examples():
    rows = {r.word: r for r in exact.transition_rr_table(0.5)}
    assert rows["RRRR"].brute_force == 1 and rows["BBBB"].brute_force == 0 and rows["BBBR"].brute_force == 0
    assert rows["BRRB"].printed == pytest.approx(0.5625) and rows["BRRB"].brute_force == pytest.approx(0.5625)
    assert rows["RBBR"].brute_force == pytest.approx(0.0625)


@pytest.mark.parametrize("alpha", np.round(np.arange(1, 10) / 10, 2))
def test_rr_table_corrected_matches_brute_force(alpha):
    for row in exact.transition_rr_table(float(alpha)):
        assert row.closed_form_matches, row
        if row.word != "RBRB":
            assert row.printed_matches, row


def test_printed_rbrb_row_differs_from_its_mirror():
    # BRBR and RBRB are mirror images, so their probabilities must agree
    rows = {r.word: r for r in exact.transition_rr_table(0.5)}
    assert rows["BRBR"].brute_force == pytest.approx(rows["RBRB"].brute_force, abs=1e-15)
    assert not rows["RBRB"].printed_matches


def test_conditional_rr_matches_table_at_t0():
    d = exact.iid(8, 0.4)
    cond = exact.conditional_rr_probabilities(d, ModelParams.critical(0.3))
    for row in exact.transition_rr_table(0.3):
        assert cond[row.word] == pytest.approx(row.brute_force, abs=1e-12)


def test_absorption_trivial_values():
    assert exact.absorption_probability_exact(6, 0.4, 0.0).pi == 0.0
    assert exact.absorption_probability_exact(6, 0.4, 1.0).pi == 1.0
    for n in (4, 6):
        for a in (0.3, 0.7):
            assert exact.absorption_probability_exact(n, a, 0.5).pi == pytest.approx(0.5, abs=1e-9)


def test_absorption_regression_constant():
    res = exact.absorption_probability_exact(6, 0.5, 0.3)
    assert res.converged and res.residual_mass < 1e-10
    assert res.pi == pytest.approx(PI6_HALF_03, abs=1e-9)
    assert exact.absorption_probability_linear(6, 0.5, 0.3) == pytest.approx(PI6_HALF_03, abs=1e-12)


def test_general_conv_examples():
    rep = exact.general_conv_run(8, 0.5, 0.5, 60)
    assert rep.passed and rep.rb_final < 0.01
    rep = exact.general_conv_run(8, 0.3, 0.2, 60)
    assert abs(rep.trajectories["R"][-1] - 0.2) <= 0.05
    traj = exact.trajectory(exact.point_mass(Configuration.monochrome("R", 8)), ModelParams.critical(0.5), 10)
    rep = exact.check_general_conv(traj)
    assert max(rep.trajectories["RB"]) == 0.0
    assert exact.GeneralConvReport.from_dict(rep.to_dict()).to_dict() == rep.to_dict()


def test_noncritical_red_density_nondecreasing():
    findings = []
    for n in (6, 8):
        for pr, pb in ((0.7, 0.5), (0.6, 0.2), (0.9, 0.8)):
            for p in (0.1, 0.5, 0.9):
                if exact.red_density_drift(n, pr, pb, p, 20) > 1e-12:
                    findings.append((n, pr, pb, p))
    if findings:
        warnings.warn(f"P_t(R) decreased at {findings}")
    assert not findings


def test_line_topology_kernel_is_stochastic():
    K = exact.transition_matrix(5, ModelParams.critical(0.5), FIXED_BLUE_LINE)
    assert np.allclose(np.asarray(K.sum(axis=1)).ravel(), 1.0)


def test_one_directional_kernel_is_stochastic():
    K = exact.transition_matrix(6, ModelParams.critical(0.5, Neighborhood.ONE_DIRECTIONAL))
    assert np.allclose(np.asarray(K.sum(axis=1)).ravel(), 1.0)


def test_report_roundtrip():
    rep = exact.check_identity("b", 6, 0.5, 0.3, 3)
    assert exact.IdentityReport.from_dict(rep.to_dict()) == rep
