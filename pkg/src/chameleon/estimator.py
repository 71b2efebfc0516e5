"""Monte Carlo estimation of the all-red absorption probability on rings.

A finite ring stands in for the infinite line: the estimates here are
finite-N proxies and every report carries N.  Trials not absorbed by the step
cap are counted but excluded from the point estimate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels
from ._validation import check_int, check_p_values, check_probability
from .interface import WindowError, _run_line
from .lattice import STEP_PROFILE_LINE, Configuration, ModelParams
from .rng import resolve_seed

Z95 = 1.959963984540054


def default_step_cap(N: int) -> int:
    return 50 * N * N


@dataclass
class PiEstimate:
    alpha: float
    p: float
    N: int
    trials: int
    absorbed_red: int
    absorbed_blue: int
    unabsorbed: int
    seed: int
    stream: int = 0
    step_cap: int = 0
    all_blue_start: int = 0
    flip: bool = False

    @property
    def absorbed(self) -> int:
        return self.absorbed_red + self.absorbed_blue

    @property
    def point_estimate(self) -> float:
        return self.absorbed_red / self.absorbed if self.absorbed else float("nan")

    @property
    def se(self) -> float:
        if not self.absorbed:
            return float("nan")
        q = self.point_estimate
        return math.sqrt(q * (1 - q) / self.absorbed)

    @property
    def ci_half_width(self) -> float:
        return Z95 * self.se

    def null_se(self, pi: float) -> float:
        """Standard error of the estimate if the true value were ``pi``."""
        return math.sqrt(pi * (1 - pi) / self.absorbed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(point_estimate=self.point_estimate, ci_half_width=self.ci_half_width)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PiEstimate":
        keys = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in keys})


def estimate_pi(N: int, alpha: float, p: float, trials: int, step_cap: int | None = None, seed=0,
                stream: int = 0, flip: bool = False, n_threads: int = 0, p_blue: float | None = None) -> PiEstimate:
    """Run ``trials`` rings of size ``N`` from IID(``p``) until monochrome.

    ``flip`` uses the complementary initial draw (see
    :func:`chameleon.lattice.iid_configuration`), so ``flip=True`` on
    ``1 - p`` follows the colour-flipped trajectories of ``flip=False`` on
    ``p`` with the same seed and stream.  ``p_blue`` (default ``alpha``) gives
    a non-critical model.
    """
    check_int(N, "N", minimum=3)
    alpha = check_probability(alpha, "alpha")
    p = check_probability(p, "p")
    pb = alpha if p_blue is None else check_probability(p_blue, "p_blue")
    check_int(trials, "trials", minimum=1)
    step_cap = default_step_cap(N) if step_cap is None else check_int(step_cap, "step_cap")
    seed = resolve_seed(seed)
    winner = np.zeros(trials, dtype=np.int8)
    time = np.zeros(trials, dtype=np.int64)
    with _kernels.threads(n_threads):
        _kernels.ring_absorption(N, p, alpha, pb, False, trials, step_cap, seed, stream, flip, 0, winner, time)
    red = int(np.sum(winner == 1))
    blue = int(np.sum(winner == 0))
    return PiEstimate(alpha, p, N, trials, red, blue, trials - red - blue, seed, stream, step_cap,
                      int(np.sum((winner == 0) & (time == 0))), flip)


def sweep_p(N: int, alpha: float, p_grid, trials: int, seed=0, step_cap: int | None = None,
            n_threads: int = 0) -> list[PiEstimate]:
    """One :func:`estimate_pi` per grid point; point ``j`` uses stream ``j`` so points are independent."""
    grid = check_p_values(p_grid)
    return [estimate_pi(N, alpha, float(p), trials, step_cap, seed, stream=j, n_threads=n_threads)
            for j, p in enumerate(grid)]


# ---------------------------------------------------------------- properties

@dataclass
class PropertyRow:
    prop: str
    p: float
    status: str
    value: float
    detail: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PropertyReport:
    alpha: float
    N: int
    rows: list[PropertyRow] = field(default_factory=list)

    @property
    def failed(self) -> list[PropertyRow]:
        return [r for r in self.rows if r.status == "fail"]

    @property
    def passed(self) -> bool:
        return not self.failed

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "N": self.N, "rows": [r.to_dict() for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "PropertyReport":
        return cls(d["alpha"], d["N"], [PropertyRow(**r) for r in d["rows"]])


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def property_report(curve: list[PiEstimate], small_p=(0.02, 0.05), n_min: int = 200,
                    z: float = 3.0) -> PropertyReport:
    """Check the qualitative properties of ``p -> pi(alpha, p)`` on a sweep.

    Symmetry and the ``p^2 <= pi <= 2p - p^2`` bounds are asserted within
    the sampling error; the underdog advantage ``pi(p) > p`` is asserted at
    the ``small_p`` points when ``N >= n_min`` and otherwise only reported;
    the largest adjacent jump and the rank correlation are informational.
    All of these are finite-N proxies.
    """
    if not curve:
        raise ValueError("empty curve")
    curve = sorted(curve, key=lambda e: e.p)
    rep = PropertyReport(curve[0].alpha, curve[0].N)
    by_p = {round(e.p, 12): e for e in curve}
    for e in curve:
        q, se = e.point_estimate, e.se
        if math.isnan(q):
            rep.rows.append(PropertyRow("bounds", e.p, "info", q, "no absorbed trials"))
            continue
        lo, hi = e.p * e.p, 2 * e.p - e.p * e.p
        ok = lo - Z95 * se <= q <= hi + Z95 * se
        rep.rows.append(PropertyRow("bounds", e.p, _status(ok), q, f"[{lo:.6g}, {hi:.6g}] +- {Z95 * se:.3g}"))
        if abs(e.p - 0.5) < 1e-12:
            dev = abs(q - 0.5)
            rep.rows.append(PropertyRow("symmetry", e.p, _status(dev <= z * se), dev, f"|pi - 1/2| vs {z:g} SE = {z * se:.3g}"))
        elif e.p < 0.5 and round(1 - e.p, 12) in by_p:
            f = by_p[round(1 - e.p, 12)]
            joint = math.hypot(se, f.se)
            dev = abs(q + f.point_estimate - 1)
            rep.rows.append(PropertyRow("symmetry", e.p, _status(dev <= z * joint + 1e-15), dev,
                                        f"|pi(p) + pi(1-p) - 1| vs {z:g} joint SE = {z * joint:.3g}"))
    for sp in small_p:
        e = by_p.get(round(sp, 12))
        if e is None:
            continue
        margin = (e.point_estimate - e.p) / e.se if e.se > 0 else float("nan")
        if e.N >= n_min:
            status = _status(margin >= z)
        else:
            status = "info"
        rep.rows.append(PropertyRow("underdog", e.p, status, e.point_estimate,
                                    f"(pi - p) / SE = {margin:.3f}, finite-N proxy at N={e.N}"))
    ps = np.array([e.p for e in curve])
    qs = np.array([e.point_estimate for e in curve])
    if len(curve) > 1:
        jumps = np.abs(np.diff(qs))
        j = int(np.nanargmax(jumps))
        rep.rows.append(PropertyRow("continuity", float(ps[j]), "info", float(jumps[j]),
                                    f"largest adjacent jump, between p={ps[j]:g} and p={ps[j + 1]:g}"))
    if len(curve) > 2:
        rho = float(stats.spearmanr(ps, qs).statistic)
        rep.rows.append(PropertyRow("monotone", float("nan"), "pass" if rho > 0.9 else "finding", rho,
                                    "Spearman rank correlation, reported not claimed"))
    return rep


# ---------------------------------------------------------------- time-dependent alpha

@dataclass(frozen=True)
class AlphaSchedule:
    """``alpha_t`` for ``t >= 1``: ``constant`` (value) or ``power`` (``t^-q``)."""

    kind: str = "constant"
    value: float = 0.5
    q: float = 2.0

    EPS = 1e-12

    def __post_init__(self):
        if self.kind == "constant":
            check_probability(self.value, "value")
        elif self.kind == "power":
            if not self.q > 0:
                raise ValueError(f"q must be > 0, got {self.q}")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def parse(cls, spec: str) -> "AlphaSchedule":
        """``"constant:0.5"`` or ``"power:2"``."""
        kind, _, arg = spec.partition(":")
        if kind == "constant":
            return cls("constant", float(arg or 0.5))
        if kind == "power":
            return cls("power", q=float(arg or 2.0))
        raise ValueError(f"unknown schedule {spec!r}; use constant:<alpha> or power:<q>")

    def __str__(self) -> str:
        return f"constant:{self.value:g}" if self.kind == "constant" else f"power:{self.q:g}"

    def values(self, T: int) -> np.ndarray:
        """Array of length ``T + 1``; entry ``t`` is ``alpha_t`` (entry 0 is unused)."""
        t = np.arange(T + 1, dtype=np.float64)
        if self.kind == "constant":
            return np.full(T + 1, float(self.value))
        a = np.ones(T + 1)
        a[1:] = t[1:] ** -self.q
        return np.clip(a, self.EPS, 1 - self.EPS)

    @property
    def summable(self) -> bool:
        """Whether ``sum_t alpha_t (1 - alpha_t)`` is finite."""
        if self.kind == "constant":
            return self.value in (0.0, 1.0)
        return self.q > 1


@dataclass
class CoexistenceStats:
    schedule: str
    T: int
    trials: int
    seed: int
    t0s: list[int]
    frozen_fraction: dict[int, float]
    same_position_fraction: dict[int, float]
    predicted_frozen: dict[int, float]
    union_bound: dict[int, float]
    both_colors_fraction: float
    far_fraction: float
    summable: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("frozen_fraction", "same_position_fraction", "predicted_frozen", "union_bound"):
            d[k] = {str(t): v for t, v in d[k].items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoexistenceStats":
        d = dict(d)
        for k in ("frozen_fraction", "same_position_fraction", "predicted_frozen", "union_bound"):
            d[k] = {int(t): v for t, v in d[k].items()}
        return cls(**d)


def coexistence_experiment(schedule: AlphaSchedule, T: int, trials: int, seed=0, t0s=(10, 100, 1000),
                           window: int | None = None, far: int = 10, n_threads: int = 0,
                           stream: int = 4) -> CoexistenceStats:
    """Follow the step-profile interface under a time-dependent ``alpha_t``.

    ``frozen_fraction[t0]`` is the fraction of trials whose interface never
    moves at steps ``t0 + 1..T``; ``same_position_fraction[t0]`` the fraction
    with ``X_T = X_t0``.  The interface moves at step ``t`` exactly when one of
    its two coins fails, so ``predicted_frozen[t0] = prod_{t > t0} (1 - 2
    alpha_t (1 - alpha_t))`` is the exact value of the first and
    ``union_bound[t0] = sum_{t > t0} 2 alpha_t (1 - alpha_t)`` bounds its
    complement.
    """
    check_int(T, "T", minimum=1)
    check_int(trials, "trials", minimum=1)
    window = T + 1 if window is None else check_int(window, "window", minimum=1)
    if window <= T:
        raise WindowError(f"window radius {window} must exceed T={T}")
    t0s = sorted(int(t) for t in t0s if 0 <= int(t) <= T)
    alphas = schedule.values(T)
    sites = np.array([0] * window + [1] * window, dtype=np.uint8)
    ext = Configuration(sites, STEP_PROFILE_LINE).extended()
    rec = sorted(set(t0s) | {T})
    params = ModelParams.critical(float(alphas[-1]))
    red, left, _, _, last_move = _run_line(ext, params, T, rec, seed, trials, stream, n_threads, schedule=alphas)
    x = left - (window + 1)
    xT = x[:, rec.index(T)]
    move = 2 * alphas * (1 - alphas)
    frozen, same, pred, union = {}, {}, {}, {}
    for t0 in t0s:
        frozen[t0] = float(np.mean(last_move <= t0))
        same[t0] = float(np.mean(x[:, rec.index(t0)] == xT))
        pred[t0] = float(np.prod(1 - move[t0 + 1:]))
        union[t0] = float(np.sum(move[t0 + 1:]))
    n_real = ext.size - 2
    both = float(np.mean((red[:, rec.index(T)] > 0) & (red[:, rec.index(T)] < n_real)))
    return CoexistenceStats(str(schedule), T, trials, resolve_seed(seed), t0s, frozen, same, pred, union,
                            both, float(np.mean(np.abs(xT) > far)), schedule.summable)


# ---------------------------------------------------------------- estimator objects

class MonteCarloPiEstimator(BaseEstimator):
    """Monte Carlo curve ``p -> pi_N(alpha, p)`` in estimator form.

    ``fit(X)`` runs one ring experiment per p value in ``X`` (a column or
    1-D sequence) and stores them in ``estimates_``; ``predict`` interpolates
    the fitted curve linearly.

    Parameters
    ----------
    alpha : float
        Common success probability.
    n_sites : int
        Ring size N.
    n_trials : int
        Trials per p value.
    step_cap : int or None
        Steps before a trial counts as unabsorbed; None means ``50 N^2``.
    random_state : int
        Master seed.
    n_threads : int
        Worker threads (0 = all).
    """

    def __init__(self, alpha=0.5, n_sites=200, n_trials=10000, step_cap=None, random_state=0, n_threads=0):
        self.alpha = alpha
        self.n_sites = n_sites
        self.n_trials = n_trials
        self.step_cap = step_cap
        self.random_state = random_state
        self.n_threads = n_threads

    def fit(self, X, y=None):
        p = check_p_values(X)
        check_probability(self.alpha, "alpha")
        check_int(self.n_sites, "n_sites", minimum=3)
        check_int(self.n_trials, "n_trials", minimum=1)
        order = np.argsort(p, kind="stable")
        self.estimates_ = sweep_p(self.n_sites, self.alpha, p[order], self.n_trials, self.random_state,
                                  self.step_cap, self.n_threads)
        self.p_grid_ = p[order]
        self.curve_ = np.array([e.point_estimate for e in self.estimates_])
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "estimates_")
        return np.interp(check_p_values(X), self.p_grid_, self.curve_)

    def report(self, **kwargs) -> PropertyReport:
        check_is_fitted(self, "estimates_")
        return property_report(self.estimates_, **kwargs)


class ExactPiEstimator(BaseEstimator):
    """Exact finite-ring absorption probability, same interface as :class:`MonteCarloPiEstimator`."""

    def __init__(self, alpha=0.5, n_sites=6, method="iterate"):
        self.alpha = alpha
        self.n_sites = n_sites
        self.method = method

    def fit(self, X=None, y=None):
        from .exact import MAX_SITES

        check_probability(self.alpha, "alpha", open_interval=True)
        check_int(self.n_sites, "n_sites", minimum=3, maximum=MAX_SITES)
        if self.method not in ("iterate", "linear"):
            raise ValueError(f"method must be 'iterate' or 'linear', got {self.method!r}")
        self.n_features_in_ = 1
        self.fitted_ = True
        return self

    def predict(self, X):
        from . import exact

        check_is_fitted(self, "fitted_")
        p = check_p_values(X)
        if self.method == "linear":
            return np.array([exact.absorption_probability_linear(self.n_sites, self.alpha, float(q)) for q in p])
        return np.array([exact.absorption_probability_exact(self.n_sites, self.alpha, float(q)).pi for q in p])
