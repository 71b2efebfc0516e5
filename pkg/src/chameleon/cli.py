"""Command-line front end.

Every subcommand builds a :class:`chameleon.reports.Report` and writes it as
JSON (default, lossless) or CSV.  Exit codes: 0 success, 1 a checked
assertion failed, 2 usage error.  Output depends only on the arguments and
the seed (``--seed``, else ``$CHAMELEON_SEED``, else 0), never on
``--threads``.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .reports import Report, write_text

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_ENV = "CHAMELEON_SEED"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- argument types

def _prob(open_interval=False):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        ok = 0 < v < 1 if open_interval else 0 <= v <= 1
        if not ok:
            rng = "(0, 1)" if open_interval else "[0, 1]"
            raise argparse.ArgumentTypeError(f"must lie in {rng}, got {text}")
        return v
    return parse


def _int(lo=0, hi=None):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if v < lo or (hi is not None and v > hi):
            rng = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
            raise argparse.ArgumentTypeError(f"must be {rng}, got {text}")
        return v
    return parse


def _int_list(lo=0):
    item = _int(lo)

    def parse(text):
        return [item(s) for s in text.split(",") if s.strip()]
    return parse


def p_grid(text):
    """``"0,0.05,0.5"`` or an inclusive range ``"start:stop:step"``."""
    if ":" in text:
        try:
            start, stop, step = (float(s) for s in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step, got {text!r}") from None
        if step <= 0:
            raise argparse.ArgumentTypeError(f"range step must be > 0, got {step}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 12) for i in range(max(n, 0))]
    else:
        values = [_prob()(s) for s in text.split(",") if s.strip()]
    parse_p = _prob()
    values = [parse_p(repr(v)) for v in values]
    if not values:
        raise argparse.ArgumentTypeError("empty p grid")
    return values


def _schedule(text):
    from .estimator import AlphaSchedule

    try:
        return AlphaSchedule.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{exc} (constant value in [0, 1], power q > 0)") from None


# ---------------------------------------------------------------- subcommands

def _params(args, *names):
    return {k: getattr(args, k) for k in names}


def cmd_verify_identities(args) -> Report:
    from .exact import check_identity

    recs = [check_identity(i, args.n, args.alpha, args.p, args.T).to_dict() for i in args.ids]
    return Report("verify-identities", _params(args, "n", "alpha", "p", "T", "ids"), args.seed, recs,
                  all(r["passed"] for r in recs if r["kind"] != "informational"))


def cmd_rr_table(args) -> Report:
    from .exact import transition_rr_table

    recs = [{"word": r.word, "printed": r.printed, "closed_form": r.closed_form, "brute_force": r.brute_force,
             "printed_matches": r.printed_matches, "closed_form_matches": r.closed_form_matches}
            for r in transition_rr_table(args.alpha)]
    return Report("rr-table", _params(args, "alpha"), args.seed, recs,
                  all(r["closed_form_matches"] for r in recs))


def cmd_exact_pi(args) -> Report:
    from . import exact

    recs = []
    for p in args.p:
        res = exact.absorption_probability_exact(args.n, args.alpha, p)
        rec = {"n": args.n, "alpha": args.alpha, "p": p, "pi": res.pi, "residual_mass": res.residual_mass,
               "steps": res.steps, "converged": res.converged}
        if args.linear:
            rec["pi_linear"] = exact.absorption_probability_linear(args.n, args.alpha, p)
        recs.append(rec)
    return Report("exact-pi", _params(args, "n", "alpha", "p", "linear"), args.seed, recs,
                  all(r["converged"] for r in recs))


def _model(args):
    from .lattice import ModelParams

    pr = args.alpha if args.p_red is None else args.p_red
    pb = args.alpha if args.p_blue is None else args.p_blue
    return ModelParams(pr, pb, args.neighborhood)


def cmd_interface(args) -> Report:
    from .interface import increment_law, run_step_profile, verify_increment_exhaustive

    params = _model(args)
    ver = verify_increment_exhaustive(params)
    traj = run_step_profile(params, args.T, args.trials, args.seed, n_threads=args.threads)
    freq = traj.increment_frequencies()
    n_inc = traj.trials * args.T
    xT = traj.x[:, -1]
    rec = {"p_red": params.p_red, "p_blue": params.p_blue, "neighborhood": params.neighborhood.value,
           "exhaustive_match": ver.matches, "enumerated_law": {str(k): v for k, v in ver.law.items()},
           "freq_minus": freq[-1], "freq_zero": freq[0], "freq_plus": freq[1],
           "mean_XT": float(xT.mean()), "var_XT_over_T": float(xT.var() / args.T) if args.T else None}
    passed = True
    if not params.one_directional:
        law = increment_law(params).as_array()
        z = [abs(f - q) / np.sqrt(q * (1 - q) / n_inc) if 0 < q < 1 else (0.0 if f == q else np.inf)
             for f, q in zip((freq[-1], freq[0], freq[1]), law)]
        rec.update(law_minus=law[0], law_zero=law[1], law_plus=law[2], max_z=float(max(z)))
        passed = ver.matches and max(z) <= 3.0
    return Report("interface", _params(args, "p_red", "p_blue", "alpha", "neighborhood", "T", "trials"),
                  args.seed, [rec], passed)


def cmd_block(args) -> Report:
    from .interface import run_block_experiment

    params = _model(args)
    if params.p_red <= params.p_blue and not args.allow_critical:
        raise UsageError(f"--p-red must exceed --p-blue for the block experiment (got {params.p_red}, "
                         f"{params.p_blue}); pass --allow-critical to run anyway")
    st = run_block_experiment(params, args.block_len, args.T, args.trials, args.seed, ks=args.k,
                              times=args.times, n_threads=args.threads)
    d = st.to_dict()
    recs = [{"t": t, "extinction_fraction": f} for t, f in zip(d["times"], d["extinction_fraction"])]
    recs += [{"k": int(k), "survival_fraction": v} for k, v in d["survival_fraction"].items()]
    recs.append({"ruin_survival_bound": d["ruin_bound"]})
    return Report("block", _params(args, "p_red", "p_blue", "alpha", "neighborhood", "block_len", "T",
                                   "trials", "k", "times"), args.seed, recs)


def cmd_length_chain(args) -> Report:
    from . import length_chain as lc

    sc = lc.absorption_scalars(args.alpha)
    trunc = lc.expected_returns_truncated(args.alpha, args.K)
    rec = sc.to_dict()
    rec.update(expected_returns_truncated=trunc, K=args.K, lower_bound=1 / (2 * sc.theta))
    passed = sc.expected_returns > 1 / (2 * sc.theta) and abs(trunc - sc.expected_returns) <= 1e-6
    if args.trials:
        sim = lc.simulate_returns(args.alpha, args.trials, args.step_cap, args.seed, args.threads)
        rec.update(sim_mean=sim.mean, sim_se=sim.se, sim_unterminated_fraction=sim.unterminated_fraction,
                   sim_step_cap=sim.step_cap)
        passed = passed and abs(sim.mean - sc.expected_returns) <= max(1e-6, 3 * sim.se)
    recs = [rec]
    if args.cross_check_t is not None:
        cc = lc.lattice_cross_check(args.alpha, args.cross_check_t, args.cross_check_trials, args.seed,
                                    args.threads)
        for t in range(cc.t + 1):
            recs.append({"t": t, "p11": cc.p11[t], "p11_lattice": cc.p11_lattice[t], "tv": cc.tv[t],
                         "mc_bound": cc.mc_bound[t]})
        passed = passed and cc.passed
    return Report("length-chain", _params(args, "alpha", "K", "trials", "step_cap", "cross_check_t",
                                          "cross_check_trials"), args.seed, recs, passed)


def _sweep(args):
    from .estimator import sweep_p

    return sweep_p(args.N, args.alpha, args.p, args.trials, args.seed, args.step_cap, args.threads)


def cmd_pi_sweep(args) -> Report:
    recs = [e.to_dict() for e in _sweep(args)]
    return Report("pi-sweep", _params(args, "N", "alpha", "p", "trials", "step_cap"), args.seed, recs)


def cmd_property_report(args) -> Report:
    from .estimator import property_report

    curve = _sweep(args)
    rep = property_report(curve, small_p=tuple(args.small_p), n_min=args.n_min)
    recs = [r.to_dict() for r in rep.rows]
    return Report("property-report", _params(args, "N", "alpha", "p", "trials", "step_cap", "small_p", "n_min"),
                  args.seed, recs, rep.passed)


def cmd_coexist(args) -> Report:
    from .estimator import coexistence_experiment

    st = coexistence_experiment(args.schedule, args.T, args.trials, args.seed, t0s=args.t0,
                                n_threads=args.threads)
    recs = [{"t0": t0, "frozen_fraction": st.frozen_fraction[t0],
             "same_position_fraction": st.same_position_fraction[t0],
             "predicted_frozen": st.predicted_frozen[t0], "union_bound": st.union_bound[t0]}
            for t0 in st.t0s]
    recs.append({"both_colors_fraction": st.both_colors_fraction, "far_fraction": st.far_fraction,
                 "summable": st.summable})
    params = _params(args, "T", "trials", "t0")
    params["schedule"] = str(args.schedule)
    return Report("coexist", params, args.seed, recs)


def cmd_selftest(args) -> Report:
    from . import acceptance

    results = acceptance.run(args.only, n_threads=args.threads, echo=sys.stderr)
    recs = [r.to_dict() for r in results]
    return Report("selftest", _params(args, "only"), args.seed, recs, all(r.passed for r in results))


# ---------------------------------------------------------------- parser

def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json", help="output format (default json)")
    common.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    common.add_argument("--threads", type=_int(0), default=0, help="worker threads, 0 = all (default 0)")
    common.add_argument("--seed", type=_int(0, 2 ** 64 - 1), default=None,
                        help=f"master seed (default ${SEED_ENV}, else 0)")
    return common


def _model_args(p: argparse.ArgumentParser, alpha=0.5):
    p.add_argument("--alpha", type=_prob(), default=alpha, help="common success probability")
    p.add_argument("--p-red", type=_prob(), default=None, help="success probability of red (default --alpha)")
    p.add_argument("--p-blue", type=_prob(), default=None, help="success probability of blue (default --alpha)")
    p.add_argument("--neighborhood", choices=("two_sided", "one_directional"), default="two_sided")


def _sweep_args(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=_prob(), default=0.5)
    p.add_argument("--N", type=_int(3), default=200, help="ring size (>= 3)")
    p.add_argument("--p", type=p_grid, default=p_grid("0:1:0.1"),
                   help="p grid: comma list or start:stop:step (default 0:1:0.1)")
    p.add_argument("--trials", type=_int(1), default=1000)
    p.add_argument("--step-cap", type=_int(0), default=None, help="default 50 N^2")


CSV_COLUMNS = {
    "verify-identities": "identity, n, alpha, p, T, residual, kind, tolerance, passed",
    "rr-table": "word, printed, closed_form, brute_force, printed_matches, closed_form_matches",
    "exact-pi": "n, alpha, p, pi, residual_mass, steps, converged[, pi_linear]",
    "interface": "increment frequencies, closed-form law, max z-score, exhaustive check, mean and Var(X_T)/T",
    "block": "t, extinction_fraction | k, survival_fraction | ruin_survival_bound",
    "length-chain": "absorption scalars, truncated and simulated returns; with --cross-check-t one row per t",
    "pi-sweep": "alpha, p, N, trials, absorbed_red, absorbed_blue, unabsorbed, point_estimate, ci_half_width, ...",
    "property-report": "prop, p, status, value, detail",
    "coexist": "t0, frozen_fraction, same_position_fraction, predicted_frozen, union_bound | summary row",
    "selftest": "number, title, passed, elapsed, budget, detail",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chameleon", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    common = _common()

    def add(name, fn, help_):
        epilog = ("CSV columns (after tool_version, seed and param.* columns): " + CSV_COLUMNS[name])
        p = sub.add_parser(name, parents=[common], help=help_, description=help_, epilog=epilog)
        p.set_defaults(func=fn)
        return p

    p = add("verify-identities", cmd_verify_identities, "exact residuals of the pattern-probability identities")
    p.add_argument("--n", type=_int(6, 12), default=8, help="ring size, 6..12")
    p.add_argument("--alpha", type=_prob(), default=0.5)
    p.add_argument("--p", type=_prob(), default=0.3, help="IID initial density")
    p.add_argument("--T", type=_int(1), default=20)
    p.add_argument("--ids", type=lambda s: s.split(","), default=["a", "b", "c", "d", "e", "f", "f2", "g"],
                   help="comma list from a,b,c,d,e,f,f2,g,f_swapped,c_printed")

    p = add("rr-table", cmd_rr_table, "closed forms and brute force for the 16 RR transition probabilities")
    p.add_argument("--alpha", type=_prob(), default=0.5)

    p = add("exact-pi", cmd_exact_pi, "exact all-red absorption probability on a small ring")
    p.add_argument("--n", type=_int(3, 12), default=6, help="ring size, 3..12")
    p.add_argument("--alpha", type=_prob(True), default=0.5)
    p.add_argument("--p", type=p_grid, default=[0.3], help="p grid")
    p.add_argument("--linear", action="store_true", help="also solve the absorbing linear system")

    p = add("interface", cmd_interface, "step-profile interface walk and its increment law")
    _model_args(p)
    p.add_argument("--T", type=_int(1), default=1000)
    p.add_argument("--trials", type=_int(1), default=100)

    p = add("block", cmd_block, "planted red block in a blue sea")
    _model_args(p)
    p.add_argument("--block-len", type=_int(0), default=20)
    p.add_argument("--T", type=_int(0), default=2000)
    p.add_argument("--trials", type=_int(1), default=1000)
    p.add_argument("--k", type=_int_list(), default=[0, 10, 100], help="displacements for the survival fraction")
    p.add_argument("--times", type=_int_list(), default=None, help="record times for the extinction fraction")
    p.add_argument("--allow-critical", action="store_true", help="allow p_red <= p_blue")

    p = add("length-chain", cmd_length_chain, "block-length chain: closed forms, truncation, simulation")
    p.add_argument("--alpha", type=_prob(True), default=0.5)
    p.add_argument("--K", type=_int(10), default=400, help="truncation state (>= 10)")
    p.add_argument("--trials", type=_int(0), default=0, help="simulated chains (0 = skip)")
    p.add_argument("--step-cap", type=_int(0), default=1_000_000)
    p.add_argument("--cross-check-t", type=_int(0, 12), default=None, help="compare with the lattice up to t")
    p.add_argument("--cross-check-trials", type=_int(1), default=10000)

    p = add("pi-sweep", cmd_pi_sweep, "Monte Carlo estimate of the all-red probability across p")
    _sweep_args(p)

    p = add("property-report", cmd_property_report, "pass/fail/finding rows for the properties of the p-curve")
    _sweep_args(p)
    p.add_argument("--small-p", type=lambda s: [_prob()(x) for x in s.split(",")], default=[0.02, 0.05])
    p.add_argument("--n-min", type=_int(3), default=200, help="smallest N at which the underdog row is asserted")

    p = add("coexist", cmd_coexist, "interface under a time-dependent alpha")
    p.add_argument("--schedule", type=_schedule, default=_schedule("power:2"), help="constant:<alpha> or power:<q>")
    p.add_argument("--T", type=_int(1), default=10000)
    p.add_argument("--trials", type=_int(1), default=1000)
    p.add_argument("--t0", type=_int_list(), default=[10, 100, 1000])

    p = add("selftest", cmd_selftest, "run the acceptance suite")
    p.add_argument("--only", type=_int_list(1), default=None, help="criterion numbers to run (default all)")
    return parser


def _resolve_seed(args, parser):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        seed = int(env)
    except ValueError:
        seed = -1
    if not 0 <= seed < 2 ** 64:
        parser.error(f"${SEED_ENV} must be an integer in [0, 2^64), got {env!r}")
    return seed


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        args.seed = _resolve_seed(args, parser)
    except SystemExit as exc:
        return int(exc.code)
    try:
        report = args.func(args)
    except (UsageError, ValueError, TypeError, KeyError) as exc:
        print(f"chameleon {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as exc:
        print(f"chameleon {args.command}: assertion failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_text(report.render(args.format), args.output, sys.stdout)
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
