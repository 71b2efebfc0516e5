"""The block-length chain: how many reds remain from a single red start.

States are the block length ``L >= 0`` with 0 absorbing.  From a lone red the
next length is in ``{0, 1, 2, 3}``; from a block of two or more each end moves
by an independent ``Z`` with ``P(Z = +-1) = theta``, ``P(Z = 0) = 1 - 2 theta``
and ``theta = alpha (1 - alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from ._validation import check_int, check_probability
from .lattice import FIXED_BLUE_LINE, Configuration, ModelParams
from .rng import resolve_seed

CHAR_TOL = 1e-10


class CharacteristicEquationError(ArithmeticError):
    """The claimed root does not solve the absorption difference equation."""


@dataclass(frozen=True)
class LengthChainModel:
    alpha: float

    def __post_init__(self):
        check_probability(self.alpha, "alpha", open_interval=True)

    @property
    def theta(self) -> float:
        return self.alpha * (1.0 - self.alpha)

    @property
    def jump_law(self) -> dict[int, float]:
        """Law of ``Z1 + Z2`` (the jump from any state >= 2)."""
        th = self.theta
        return {-2: th * th, -1: 2 * th * (1 - 2 * th), 0: (1 - 2 * th) ** 2 + 2 * th * th,
                1: 2 * th * (1 - 2 * th), 2: th * th}

    def row(self, i: int) -> dict[int, float]:
        a = self.alpha
        if i == 0:
            return {0: 1.0}
        if i == 1:
            return {0: 2 * a * (1 - a) ** 2 + a * a * (1 - a), 1: 1 - 3 * a * (1 - a),
                    2: 2 * a * a * (1 - a), 3: a * (1 - a) ** 2}
        return {i + d: w for d, w in self.jump_law.items()}

    def matrix(self, K: int, tail: str = "reflect") -> sp.csr_matrix:
        """Transition matrix on states ``0..K``.

        ``tail="reflect"`` sends mass that would leave the range to state K;
        ``tail="absorb0"`` sends it to state 0.
        """
        if tail not in ("reflect", "absorb0"):
            raise ValueError(f"unknown tail {tail!r}")
        rows, cols, vals = [], [], []
        for i in range(K + 1):
            for j, w in self.row(i).items():
                if j > K:
                    j = K if tail == "reflect" else 0
                rows.append(i)
                cols.append(j)
                vals.append(w)
        return sp.csr_matrix((vals, (rows, cols)), shape=(K + 1, K + 1))

    def distribution(self, t: int) -> np.ndarray:
        """Exact law of ``L_t`` given ``L_0 = 1`` (entries ``0..2t+1``)."""
        size = 2 * t + 2
        dist = np.zeros(size)
        dist[1] = 1.0
        for _ in range(t):
            nxt = np.zeros(size)
            for i in np.nonzero(dist)[0]:
                for j, w in self.row(int(i)).items():
                    nxt[j] += dist[i] * w
            dist = nxt
        return dist


def build_model(alpha: float) -> LengthChainModel:
    return LengthChainModel(float(alpha))


def h_of_theta(theta):
    theta = np.asarray(theta, dtype=np.float64)
    if np.any((theta <= 0) | (theta > 0.25)):
        raise ValueError("theta must lie in (0, 1/4]")
    out = (np.sqrt(1 - 2 * theta) - (1 - 2 * theta)) / theta
    return float(out) if out.ndim == 0 else out


def characteristic_coefficients(theta: float) -> tuple[float, float, float]:
    """``(beta0, beta1, beta2)`` of the difference equation for ``u_k``.

    ``beta0`` is the holding probability ``P(Z1 + Z2 = 0)``, so that
    ``beta0 + 2 beta1 + 2 beta2 = 1``.
    """
    b2 = theta * theta
    b1 = 2 * theta * (1 - 2 * theta)
    b0 = (1 - 2 * theta) ** 2 + 2 * theta * theta
    return b0, b1, b2


def characteristic_polynomial(theta: float) -> np.ndarray:
    """Coefficients (highest degree first) of ``b2 l^4 + b1 l^3 + (b0 - 1) l^2 + b1 l + b2``."""
    b0, b1, b2 = characteristic_coefficients(theta)
    return np.array([b2, b1, b0 - 1.0, b1, b2])


def characteristic_roots(theta: float) -> np.ndarray:
    """The four roots, sorted by real part; for valid theta they are ``-g2, -g1, 1, 1``."""
    # substituting mu = l + 1/l leaves a quadratic with roots 2 and -2 (1 - theta) / theta
    mu = -2.0 * (1.0 - theta) / theta
    disc = math.sqrt(mu * mu - 4.0)
    return np.array([(mu - disc) / 2.0, (mu + disc) / 2.0, 1.0, 1.0])


@dataclass
class AbsorptionScalars:
    alpha: float
    theta: float
    h: float
    gamma1: float
    gamma2: float
    u2: float
    u3: float
    f11_star: float
    expected_returns: float
    char_residual: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AbsorptionScalars":
        return cls(**d)


def absorption_scalars(alpha: float) -> AbsorptionScalars:
    """Closed-form absorption quantities of the chain started at 1.

    Raises :class:`CharacteristicEquationError` when ``-gamma1`` fails to solve
    the characteristic equation to ``1e-10``.
    """
    model = build_model(alpha)
    th = model.theta
    h = h_of_theta(th)
    g1 = 1.0 - h
    poly = characteristic_polynomial(th)
    residual = abs(float(np.polyval(poly, -g1)))
    if residual > CHAR_TOL:
        raise CharacteristicEquationError(f"-gamma1 leaves residual {residual:.3g} at alpha={alpha}")
    g2 = -characteristic_roots(th)[0]
    u2 = 1.0 - g1
    u3 = 1.0 - g1 + g1 * g1
    row = model.row(1)
    f11 = row[1] + row[2] * u2 + row[3] * u3
    return AbsorptionScalars(model.alpha, th, h, g1, float(g2), u2, u3, f11, 1.0 / (1.0 - f11), residual)


def u_closed_form(alpha: float, k) -> np.ndarray:
    g1 = absorption_scalars(alpha).gamma1
    k = np.asarray(k, dtype=np.float64)
    return (1.0 - (-g1) ** k) / (1.0 + g1)


def u_truncated_solve(alpha: float, K: int = 400, tail: str = "reflect") -> np.ndarray:
    """Hitting probabilities of 1 before 0 on states ``0..K`` by a direct solve.

    States 0 and 1 are both absorbing.  See :meth:`LengthChainModel.matrix`
    for ``tail``; with ``"absorb0"`` the excursions that reach K are lost,
    which biases ``u_k`` by about ``k / K`` since the chain has no drift.
    """
    check_int(K, "K", minimum=10)
    model = build_model(alpha)
    P = model.matrix(K, tail).tolil()
    for s in (0, 1):
        P.rows[s], P.data[s] = [s], [1.0]
    P = P.tocsr()
    inner = np.arange(2, K + 1)
    A = sp.identity(len(inner), format="csr") - P[inner][:, inner]
    b = np.asarray(P[inner][:, [1]].todense()).ravel()
    u = np.zeros(K + 1)
    u[1] = 1.0
    u[2:] = spla.spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(u)):
        raise np.linalg.LinAlgError("singular absorption system")
    return u


def expected_returns_truncated(alpha: float, K: int = 400, tail: str = "reflect") -> float:
    """``E[visits to 1 | L_0 = 1]`` from the fundamental matrix of the truncated chain."""
    check_int(K, "K", minimum=10)
    P = build_model(alpha).matrix(K, tail)
    Q = P[1:, 1:]
    e1 = np.zeros(K)
    e1[0] = 1.0
    x = spla.spsolve((sp.identity(K, format="csc") - Q).tocsc(), e1)
    return float(x[0])


def converged_truncation(fn, alpha, K0=400, tol=1e-9, K_max=1 << 16):
    """Double K until ``fn(alpha, K)`` stops moving by more than ``tol``."""
    K, prev = K0, fn(alpha, K0)
    while K < K_max:
        K *= 2
        cur = fn(alpha, K)
        if np.max(np.abs(np.asarray(cur)[:3] - np.asarray(prev)[:3]) if np.ndim(cur) else abs(cur - prev)) <= tol:
            return cur, K
        prev = cur
    return prev, K


@dataclass
class ReturnsEstimate:
    alpha: float
    trials: int
    step_cap: int
    seed: int
    mean: float
    se: float
    unterminated_fraction: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ReturnsEstimate":
        return cls(**d)


def simulate_returns(alpha: float, trials: int, step_cap: int = 1_000_000, seed: int = 0,
                     n_threads: int = 0) -> ReturnsEstimate:
    """Monte Carlo mean of the number of visits to 1 at times ``0..step_cap-1``.

    Trials still away from 0 at the cap are reported; they bias the mean down.
    """
    model = build_model(alpha)
    check_int(trials, "trials", minimum=1)
    check_int(step_cap, "step_cap", minimum=0)
    row = model.row(1)
    cum_first = np.cumsum([row[j] for j in range(4)])
    cum_bulk = np.cumsum([model.jump_law[d] for d in range(-2, 3)])
    visits = np.zeros(trials, dtype=np.int64)
    final = np.zeros(trials, dtype=np.int64)
    with _kernels.threads(n_threads):
        _kernels.chain_returns(cum_first, cum_bulk, trials, step_cap, resolve_seed(seed), 0, visits, final)
    mean = float(visits.mean())
    se = float(visits.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    return ReturnsEstimate(model.alpha, trials, step_cap, resolve_seed(seed), mean, se,
                           float(np.mean(final != 0)) if step_cap else 1.0)


@dataclass
class CrossCheck:
    alpha: float
    t: int
    trials: int
    seed: int
    p11: list[float]
    p11_lattice: list[float]
    tv: list[float]
    mc_bound: list[float]
    lattice_dist: list[list[float]]
    chain_dist: list[list[float]]

    @property
    def passed(self) -> bool:
        return all(tv <= 3 * b + 1e-15 for tv, b in zip(self.tv, self.mc_bound))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CrossCheck":
        return cls(**d)


def mc_tv_bound(probs: np.ndarray, trials: int) -> float:
    """``0.5 sum_j sqrt(p_j (1 - p_j) / trials)``, an upper bound on E[TV] of an empirical law."""
    probs = np.asarray(probs)
    return float(0.5 * np.sum(np.sqrt(probs * (1 - probs) / trials)))


def lattice_lengths(alpha: float, t: int, trials: int, seed: int = 0, n_threads: int = 0) -> np.ndarray:
    """Red counts at times ``0..t`` from a single red on an all-blue window of radius ``t + 2``."""
    radius = t + 2
    n = 2 * radius + 1
    sites = np.zeros(n, dtype=np.uint8)
    sites[radius] = 1
    ext = Configuration(sites, FIXED_BLUE_LINE).extended()
    times = np.arange(t + 1, dtype=np.int64)
    rec = np.zeros((trials, t + 1), dtype=np.int64)
    left = np.zeros_like(rec)
    right = np.zeros_like(rec)
    mb = np.zeros(trials, dtype=np.int64)
    lm = np.zeros(trials, dtype=np.int64)
    with _kernels.threads(n_threads):
        _kernels.line_trials(ext, False, alpha, alpha, np.empty(0), t, times, resolve_seed(seed), 1,
                             trials, rec, left, right, mb, lm)
    if np.any(mb > 2):
        raise AssertionError("a single red block split into several blocks")
    return rec


def lattice_cross_check(alpha: float, t: int, trials: int, seed: int = 0, n_threads: int = 0) -> CrossCheck:
    """Compare the lattice law of ``L_s`` (``s <= t``) with powers of the chain matrix."""
    check_int(t, "t", minimum=0, maximum=12)
    model = build_model(alpha)
    rec = lattice_lengths(model.alpha, t, trials, seed, n_threads)
    p11, p11_lat, tvs, bounds, lat_d, ch_d = [], [], [], [], [], []
    for s in range(t + 1):
        exact = model.distribution(s)
        emp = np.bincount(rec[:, s], minlength=exact.size).astype(np.float64) / trials
        if emp.size > exact.size:
            raise AssertionError("lattice block grew faster than two sites per step")
        p11.append(float(exact[1]))
        p11_lat.append(float(emp[1]))
        tvs.append(float(0.5 * np.abs(emp - exact).sum()))
        bounds.append(mc_tv_bound(exact, trials))
        lat_d.append(emp.tolist())
        ch_d.append(exact.tolist())
    return CrossCheck(model.alpha, t, trials, resolve_seed(seed), p11, p11_lat, tvs, bounds, lat_d, ch_d)


def isolated_red_ratio(alpha: float, t: int, p: float = 1e-3) -> tuple[float, float]:
    """``P_t(BRBB) / (p (1-p)^(2t+3))`` on the window ``[-t-1, t+2]`` vs ``p11^(t)``.

    Computed with the exact engine on a line window whose outside is blue;
    returns ``(ratio, p11^(t))``.
    """
    from . import exact

    n = 2 * t + 4
    check_int(n, "window size", maximum=exact.MAX_SITES - 2)
    dist = exact.iid(n, p, FIXED_BLUE_LINE)
    traj = exact.trajectory(dist, ModelParams.critical(alpha), t)
    # site -1 of the lattice is window index t
    prob = exact.pattern_probability(traj[-1], "BRBB", anchor=t)
    ratio = prob / (p * (1 - p) ** (2 * t + 3))
    return float(ratio), float(build_model(alpha).distribution(t)[1])


def lower_bound_chain(alpha) -> list[np.ndarray]:
    """Successive members of the final inequality chain for the returns bound.

    Entry 0 is ``h (3a - 1) - a + (1 - a) h^2`` and each later entry should
    bound the previous one from below; the last is ``a (0.8 (3/2 - 2.18 *
    27/256) - 1)``, positive for every ``a`` in (0, 1).
    """
    a = np.asarray(alpha, dtype=np.float64)
    th = a * (1 - a)
    h = h_of_theta(th)
    c = 2.18
    return [
        h * (3 * a - 1) - a + (1 - a) * h * h,
        a * (2 * h - 1) - (1 - a) * h * th * (0.5 + c * th),
        a * (h * (2 - 0.5 - c * a * (1 - a) ** 3) - 1),
        a * (0.8 * (1.5 - c * 27 / 256) - 1),
    ]
