"""Exact distribution evolution on small lattices.

States are bit-packed configurations (bit ``i`` = site ``i``, 1 = red).  The
one-step kernel is built by pushing every (state, coin draw) pair through
:func:`chameleon.lattice.apply_rule`, so it shares the dynamics with the
simulators and nothing else.
"""

from __future__ import annotations

import functools
import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import check_int, check_probability
from .lattice import RING, Color, Configuration, ModelParams, Neighborhood, Topology, apply_rule

MAX_SITES = 12
MASS_TOL = 1e-12
IDENTITY_TOL = 1e-10


class RotationInvarianceWarning(UserWarning):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass(eq=False)
class StateDistribution:
    n: int
    probs: np.ndarray
    topology: Topology = field(default=RING)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} probabilities for n={self.n}, got {self.probs.shape}")
        if np.any(self.probs < -MASS_TOL):
            raise ValueError("probabilities must be non-negative")
        if abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {self.probs.sum()}, not 1")

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    def rotation_spread(self) -> float:
        """Largest change in probability under a one-site rotation (0 iff rotation invariant)."""
        if not self.topology.is_ring:
            return float("inf")
        return float(np.max(np.abs(self.probs[_rotation_perm(self.n)] - self.probs)))

    @property
    def rotation_invariant(self) -> bool:
        return self.rotation_spread() <= MASS_TOL


# ---------------------------------------------------------------- state tables

@functools.lru_cache(maxsize=None)
def _state_bits(n: int) -> np.ndarray:
    s = np.arange(1 << n, dtype=np.int64)
    bits = ((s[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    bits.setflags(write=False)
    return bits


@functools.lru_cache(maxsize=None)
def _rotation_perm(n: int) -> np.ndarray:
    # index of the state obtained by rotating each state one site to the right
    bits = _state_bits(n)
    rolled = np.roll(bits, 1, axis=1).astype(np.int64)
    return rolled @ (1 << np.arange(n, dtype=np.int64))


@functools.lru_cache(maxsize=4096)
def _word_mask(n: int, word: str, anchor: int, ring: bool) -> np.ndarray:
    bits = _state_bits(n)
    mask = np.ones(1 << n, dtype=bool)
    for j, ch in enumerate(word):
        site = anchor + j
        if ring:
            site %= n
        elif not 0 <= site < n:
            raise ValueError(f"word {word!r} at anchor {anchor} leaves the {n}-site window")
        mask &= bits[:, site] == int(Color.parse(ch))
    mask.setflags(write=False)
    return mask


def run_word(outer: str, inner: str, k: int) -> str:
    """``outer inner^k outer``, e.g. ``run_word("B", "R", 2) == "BRRB"``."""
    return outer + inner * k + outer


# ---------------------------------------------------------------- initial laws

def iid(n: int, p: float, topology: Topology = RING) -> StateDistribution:
    check_probability(p, "p")
    reds = _state_bits(n).sum(axis=1)
    probs = p ** reds * (1.0 - p) ** (n - reds)
    return StateDistribution(n, probs, topology)


def point_mass(config: Configuration) -> StateDistribution:
    probs = np.zeros(1 << len(config))
    probs[config.index] = 1.0
    return StateDistribution(len(config), probs, config.topology)


def cyclic_markov(n: int, transition) -> StateDistribution:
    """Ring law with weight ``prod_i M[x_i, x_{i+1}]`` (indices mod n).

    Rotation invariant by construction; ``transition[a][b]`` is the weight of
    colour ``b`` following colour ``a`` (0 = B, 1 = R).
    """
    M = np.asarray(transition, dtype=np.float64)
    if M.shape != (2, 2) or np.any(M < 0):
        raise ValueError("transition must be a non-negative 2x2 array")
    bits = _state_bits(n).astype(np.int64)
    nxt = np.roll(bits, -1, axis=1)
    w = np.prod(M[bits, nxt], axis=1)
    if w.sum() <= 0:
        raise ValueError("transition weights give an empty law")
    return StateDistribution(n, w / w.sum(), RING)


def initial_distribution(n: int, law, topology: Topology = RING, *, require_invariant=False) -> StateDistribution:
    """Build an initial law.

    ``law`` may be a float (i.i.d. density of red), a :class:`Configuration`
    (point mass), a 2x2 array (:func:`cyclic_markov`) or an explicit
    probability vector of length ``2**n``.
    """
    check_int(n, "n", minimum=1, maximum=MAX_SITES + 2)
    if isinstance(law, Configuration):
        dist = point_mass(law)
    elif np.isscalar(law):
        dist = iid(n, float(law), topology)
    else:
        arr = np.asarray(law, dtype=np.float64)
        if arr.shape == (2, 2):
            dist = cyclic_markov(n, arr)
        else:
            dist = StateDistribution(n, arr, topology)
    if topology.is_ring and not dist.rotation_invariant:
        msg = "initial law is not rotation invariant"
        if require_invariant:
            raise ValueError(msg)
        warnings.warn(msg, RotationInvarianceWarning, stacklevel=2)
    return dist


# ---------------------------------------------------------------- one-step kernel

@functools.lru_cache(maxsize=64)
def transition_matrix(n: int, params: ModelParams, topology: Topology = RING) -> sp.csr_matrix:
    """Sparse ``2**n x 2**n`` row-stochastic kernel (rows = current state)."""
    check_int(n, "n", minimum=2, maximum=MAX_SITES)
    if topology.is_ring and n < (2 if params.one_directional else 3):
        raise ValueError("ring too small for this neighbourhood")
    S = 1 << n
    M = topology.coin_count(n)
    ring = topology.is_ring
    coins = ((np.arange(1 << M)[:, None] >> np.arange(M)) & 1).astype(np.uint8)
    bits = _state_bits(n)
    weight_of = np.array([[1.0 - params.p_blue, params.p_blue],
                          [1.0 - params.p_red, params.p_red]])
    powers = 1 << np.arange(n, dtype=np.int64)
    chunk = max(1, (1 << 21) // ((1 << M) * M))
    blocks = []
    for lo in range(0, S, chunk):
        hi = min(S, lo + chunk)
        cols = bits[lo:hi]
        if not ring:
            cols = np.concatenate([np.full((hi - lo, 1), topology.left, np.uint8), cols,
                                   np.full((hi - lo, 1), topology.right, np.uint8)], axis=1)
        ext = np.broadcast_to(cols[:, None, :], (hi - lo, coins.shape[0], M))
        kk = np.broadcast_to(coins[None, :, :], ext.shape)
        new = apply_rule(ext, kk, ring, params.one_directional)
        if not ring:
            new = new[..., 1:-1]
        target = new.astype(np.int64) @ powers
        w = np.prod(weight_of[ext, kk], axis=-1)
        rows = np.arange(hi - lo)[:, None] * S + target
        dense = np.bincount(rows.ravel(), weights=w.ravel(), minlength=(hi - lo) * S)
        blocks.append(sp.csr_matrix(dense.reshape(hi - lo, S)))
    K = sp.vstack(blocks, format="csr")
    K.eliminate_zeros()
    return K


def evolve(dist: StateDistribution, params: ModelParams) -> StateDistribution:
    K = transition_matrix(dist.n, params, dist.topology)
    probs = K.T @ dist.probs
    return StateDistribution(dist.n, probs, dist.topology)


def trajectory(dist: StateDistribution, params: ModelParams, steps: int) -> list[StateDistribution]:
    K = transition_matrix(dist.n, params, dist.topology)
    KT = K.T.tocsr()
    out = [dist]
    probs = dist.probs
    for _ in range(steps):
        probs = KT @ probs
        out.append(StateDistribution(dist.n, probs, dist.topology))
    return out


def pattern_probability(dist: StateDistribution, word: str, anchor: int | None = None) -> float:
    """Probability that the sites starting at ``anchor`` read ``word``.

    With ``anchor=None`` on a ring the value is position-free; if the law is
    not rotation invariant the average over all anchors is returned and a
    :class:`RotationInvarianceWarning` is issued.
    """
    word = word.upper()
    if not 1 <= len(word) <= dist.n:
        raise ValueError(f"pattern length {len(word)} must be between 1 and n={dist.n}")
    ring = dist.topology.is_ring
    if anchor is not None:
        return float(dist.probs[_word_mask(dist.n, word, anchor, ring)].sum())
    if not ring:
        raise ValueError("a line window needs an explicit anchor")
    value = float(dist.probs[_word_mask(dist.n, word, 0, True)].sum())
    if not dist.rotation_invariant:
        warnings.warn("distribution is not rotation invariant; averaging over anchors",
                      RotationInvarianceWarning, stacklevel=2)
        value = float(np.mean([dist.probs[_word_mask(dist.n, word, a, True)].sum()
                               for a in range(dist.n)]))
    return value


def anchor_spread(dist: StateDistribution, words) -> float:
    """Max over ``words`` of the spread of the pattern probability across anchors."""
    spread = 0.0
    for word in words:
        vals = [dist.probs[_word_mask(dist.n, word, a, True)].sum() for a in range(dist.n)]
        spread = max(spread, float(np.max(vals) - np.min(vals)))
    return spread


# ---------------------------------------------------------------- the RR table

WORDS4 = tuple("".join(w) for w in itertools.product("RB", repeat=4))

#: closed forms as printed (keyed by the colours at i-1, i, i+1, i+2)
RR_TABLE_PRINTED = {
    "RRRR": lambda a: 1.0,
    "BRRR": lambda a: a + (1 - a) ** 2,
    "RRRB": lambda a: a + (1 - a) ** 2,
    "BRRB": lambda a: a ** 2 + 2 * a * (1 - a) ** 2 + (1 - a) ** 4,
    "RRBR": lambda a: a * (1 - a) * (2 - a),
    "BRBR": lambda a: a * (1 - a) * (1 + (1 - a) ** 2),
    "RRBB": lambda a: a * (1 - a),
    "BRBB": lambda a: a * (1 - a),
    "RBRR": lambda a: a * (1 - a) * (2 - a),
    "BBRR": lambda a: a * (1 - a),
    "RBRB": lambda a: a * (1 - a) * (2 - a),
    "BBRB": lambda a: a * (1 - a),
    "RBBR": lambda a: a ** 2 * (1 - a) ** 2,
    "BBBR": lambda a: 0.0,
    "RBBB": lambda a: 0.0,
    "BBBB": lambda a: 0.0,
}

#: RBRB is the mirror image of BRBR and the target RR is mirror symmetric
RR_TABLE = dict(RR_TABLE_PRINTED, RBRB=lambda a: a * (1 - a) * (1 + (1 - a) ** 2))


@dataclass
class RRTableRow:
    word: str
    printed: float
    closed_form: float
    brute_force: float

    @property
    def printed_matches(self) -> bool:
        return abs(self.printed - self.brute_force) <= MASS_TOL

    @property
    def closed_form_matches(self) -> bool:
        return abs(self.closed_form - self.brute_force) <= MASS_TOL


def rr_brute_force(word: str, alpha: float) -> float:
    """P(sites i, i+1 are RR after one step | colours at i-1..i+2 read ``word``).

    Enumerates the coins of the four window sites and of the two sites just
    outside it, for every colour of those outer sites; raises if the outer
    sites ever matter.
    """
    word = word.upper()
    if len(word) != 4:
        raise ValueError("word must have length 4")
    values = set()
    coins = ((np.arange(64)[:, None] >> np.arange(6)) & 1).astype(np.uint8)
    for outer_left in (0, 1):
        for outer_right in (0, 1):
            cols = np.array([outer_left, *[int(Color.parse(c)) for c in word], outer_right], np.uint8)
            ext = np.broadcast_to(cols, coins.shape)
            new = apply_rule(ext, coins, False, False)
            hit = (new[:, 2] == 1) & (new[:, 3] == 1)
            k = coins.sum(axis=1)
            w = alpha ** k * (1 - alpha) ** (6 - k)
            values.add(round(float(w[hit].sum()), 14))
    if len(values) != 1:
        raise AssertionError(f"outer sites changed the RR probability for {word}: {values}")
    return values.pop()


def transition_rr_table(alpha: float) -> list[RRTableRow]:
    alpha = check_probability(alpha, "alpha")
    return [RRTableRow(w, RR_TABLE_PRINTED[w](alpha), RR_TABLE[w](alpha), rr_brute_force(w, alpha))
            for w in WORDS4]


def conditional_rr_probabilities(dist: StateDistribution, params: ModelParams) -> dict[str, float]:
    """P(RR at sites 1, 2 at t+1 | window word at sites 0..3 at t), from the exact kernel."""
    K = transition_matrix(dist.n, params, dist.topology)
    rr_next = _word_mask(dist.n, "RR", 1, dist.topology.is_ring).astype(np.float64)
    p_rr = K @ rr_next
    out = {}
    for w in WORDS4:
        mask = _word_mask(dist.n, w, 0, dist.topology.is_ring)
        mass = dist.probs[mask].sum()
        out[w] = float((dist.probs[mask] * p_rr[mask]).sum() / mass) if mass > 0 else float("nan")
    return out


# ---------------------------------------------------------------- identity suite

@dataclass
class IdentityReport:
    identity: str
    n: int
    alpha: float
    p: float
    T: int
    residual: float
    kind: str = "equality"
    tolerance: float = IDENTITY_TOL

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def to_dict(self) -> dict:
        return {"identity": self.identity, "n": self.n, "alpha": self.alpha, "p": self.p, "T": self.T,
                "residual": self.residual, "kind": self.kind, "tolerance": self.tolerance,
                "passed": self.passed}

    @classmethod
    def from_dict(cls, d: dict) -> "IdentityReport":
        return cls(d["identity"], d["n"], d["alpha"], d["p"], d["T"], d["residual"], d["kind"], d["tolerance"])


def _P(d, w):
    return float(d.probs[_word_mask(d.n, w, 0, True)].sum())


def _id_a(d0, d1, a):
    return _P(d1, "R") - _P(d0, "R")


def _id_b(d0, d1, a):
    th = a * (1 - a)
    return _P(d1, "RR") - _P(d0, "RR") - th * (_P(d0, "RBR") + _P(d0, "BRB"))


def _id_c(d0, d1, a, table=RR_TABLE):
    return _P(d1, "RR") - sum(table[w](a) * _P(d0, w) for w in WORDS4)


def _id_c_printed(d0, d1, a):
    # the combination exactly as printed: no BRBR / RBRB terms
    P = lambda w: _P(d0, w)
    rhs = (P("RRRR") + (a + (1 - a) ** 2) * (P("BRRR") + P("RRRB"))
           + (a ** 2 + 2 * a * (1 - a) ** 2 + (1 - a) ** 4) * P("BRRB")
           + a * (1 - a) * (2 - a) * (P("RRBR") + P("RBRR"))
           + a * (1 - a) * (P("RRBB") + P("BRBB") + P("BBRR") + P("BBRB"))
           + a ** 2 * (1 - a) ** 2 * P("RBBR"))
    return _P(d1, "RR") - rhs


def _id_d(d0, d1, a):
    th = a * (1 - a)
    P = lambda w: _P(d0, w)
    bracket = (th * (P("BRRB") + P("RBBR")) + (1 - a) * (P("RRBR") + P("RBRR"))
               + (1 + (1 - a) ** 2) * (P("BRBR") + P("RBRB")) + (P("BRBB") + P("BBRB")))
    return _P(d1, "RR") - _P(d0, "RR") - th * bracket


def _id_e(d0, d1, a):
    return _P(d1, "R") - _P(d0, "R") - a ** 2 * (1 - a) * (_P(d0, "BRB") - _P(d0, "RBR"))


def _mixed_violation(d_small, d_big, a, kmax):
    # positive part of a^{k+1}(1-a) P_big(x Y_k x) - P_small(x Y_{k-1} x)
    worst = 0.0
    for k in range(1, kmax + 1):
        for outer, inner in (("B", "R"), ("R", "B")):
            lhs = a ** (k + 1) * (1 - a) * _P(d_big, run_word(outer, inner, k))
            rhs = _P(d_small, run_word(outer, inner, k - 1))
            worst = max(worst, lhs - rhs)
    return worst


# name -> (neighbourhood, kind, function of (d_t, d_{t+1}, alpha))
IDENTITIES = {
    "a": (Neighborhood.ONE_DIRECTIONAL, "equality", _id_a),
    "b": (Neighborhood.ONE_DIRECTIONAL, "equality", _id_b),
    "c": (Neighborhood.TWO_SIDED, "equality", _id_c),
    "d": (Neighborhood.TWO_SIDED, "equality", _id_d),
    "e": (Neighborhood.TWO_SIDED, "equality", _id_e),
    "f": (Neighborhood.ONE_DIRECTIONAL, "inequality", None),
    "f2": (Neighborhood.TWO_SIDED, "inequality", None),
    "f_swapped": (Neighborhood.TWO_SIDED, "informational", None),
    "g": (Neighborhood.TWO_SIDED, "equality", None),
    "c_printed": (Neighborhood.TWO_SIDED, "informational", _id_c_printed),
}
EQUALITY_IDENTITIES = ("a", "b", "c", "d", "e")


def check_identity(identity: str, n: int, alpha: float, p: float, T: int, initial=None) -> IdentityReport:
    """Max residual of one identity over ``t < T`` along an exact trajectory.

    ``initial`` defaults to IID(p) and must be rotation invariant.  For the
    inequalities the residual is the largest violation (0 when they hold).
    """
    if identity not in IDENTITIES:
        raise KeyError(f"unknown identity {identity!r}; choose from {sorted(IDENTITIES)}")
    check_int(n, "n", minimum=6, maximum=MAX_SITES)
    alpha = check_probability(alpha, "alpha")
    check_int(T, "T", minimum=1)
    mode, kind, fn = IDENTITIES[identity]
    dist = iid(n, p) if initial is None else initial
    if not dist.rotation_invariant:
        raise ValueError("the identity suite needs a rotation-invariant initial law")
    traj = trajectory(dist, ModelParams.critical(alpha, mode), T)
    kmax = min(4, n - 2)
    residual = 0.0
    for t in range(T):
        d0, d1 = traj[t], traj[t + 1]
        if identity in ("f", "f2"):
            r = _mixed_violation(d1, d0, alpha, kmax)
        elif identity == "f_swapped":
            r = _mixed_violation(d0, d1, alpha, kmax)
        elif identity == "g":
            r = max(d1.rotation_spread(), anchor_spread(d1, WORDS4))
        else:
            r = abs(fn(d0, d1, alpha))
        residual = max(residual, r)
    if identity == "g":
        residual = max(residual, traj[0].rotation_spread())
    return IdentityReport(identity, n, alpha, float(p) if initial is None else float("nan"),
                          T, float(residual), kind)


# ---------------------------------------------------------------- absorption

@dataclass
class AbsorptionResult:
    n: int
    alpha: float
    p: float
    pi: float
    residual_mass: float
    steps: int
    converged: bool


def _absorbing_indices(n):
    return (1 << n) - 1, 0


def absorption_probability_exact(n: int, alpha: float, p: float, *, tol: float = 1e-10,
                                 max_steps: int = 1_000_000) -> AbsorptionResult:
    """Iterate the exact kernel from IID(p) until the non-monochrome mass is below ``tol``."""
    alpha = check_probability(alpha, "alpha", open_interval=True)
    p = check_probability(p, "p")
    K = transition_matrix(n, ModelParams.critical(alpha)).T.tocsr()
    red, blue = _absorbing_indices(n)
    probs = iid(n, p).probs
    steps = 0
    residual = 1.0 - probs[red] - probs[blue]
    while residual >= tol and steps < max_steps:
        for _ in range(16):
            probs = K @ probs
        steps += 16
        residual = max(0.0, 1.0 - probs[red] - probs[blue])
    converged = residual < tol
    if not converged:
        warnings.warn(f"absorption not reached in {max_steps} steps (residual mass {residual:.3g})",
                      ConvergenceWarning, stacklevel=2)
    pi = probs[red] / (probs[red] + probs[blue]) if probs[red] + probs[blue] > 0 else float("nan")
    return AbsorptionResult(n, alpha, p, float(pi), float(residual), steps, converged)


def absorption_probability_linear(n: int, alpha: float, p: float) -> float:
    """Same quantity by solving the absorbing-chain linear system."""
    K = transition_matrix(n, ModelParams.critical(alpha))
    red, blue = _absorbing_indices(n)
    S = 1 << n
    transient = np.array([s for s in range(S) if s not in (red, blue)])
    Q = K[transient][:, transient]
    r = np.asarray(K[transient][:, [red]].todense()).ravel()
    x = spla.spsolve((sp.identity(len(transient), format="csc") - Q).tocsc(), r)
    init = iid(n, p).probs
    return float(init[red] + init[transient] @ x)


# ---------------------------------------------------------------- convergence criterion

@dataclass
class GeneralConvReport:
    n: int
    alpha: float
    T: int
    eps: float
    trajectories: dict[str, list[float]]

    @property
    def rb_final(self) -> float:
        return self.trajectories["RB"][-1]

    @property
    def passed(self) -> bool:
        rb = self.trajectories["RB"]
        decreased = rb[-1] < rb[0] or rb[0] <= MASS_TOL
        return decreased and rb[-1] < self.eps

    def to_dict(self) -> dict:
        return {"n": self.n, "alpha": self.alpha, "T": self.T, "eps": self.eps,
                "trajectories": self.trajectories, "passed": self.passed}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneralConvReport":
        return cls(d["n"], d["alpha"], d["T"], d["eps"], d["trajectories"])


def general_conv_words(kmax: int = 4) -> list[str]:
    words = ["R", "RR", "RB"]
    for k in range(1, kmax + 1):
        words += [run_word("B", "R", k), run_word("R", "B", k)]
    return words


def check_general_conv(dists, T: int | None = None, *, eps: float = 0.01) -> GeneralConvReport:
    """Track the hypotheses of the single-colour convergence criterion along ``dists``.

    The conclusion checked is that the mixed pair probability P_t(RB) has
    decreased by time ``T`` and ended below ``eps``.
    """
    dists = list(dists)
    if T is not None:
        dists = dists[:T + 1]
    if not dists[0].rotation_invariant:
        raise ValueError("the criterion needs a rotation-invariant sequence")
    n = dists[0].n
    words = [w for w in general_conv_words() if len(w) <= n]
    traj = {w: [_P(d, w) for d in dists] for w in words}
    return GeneralConvReport(n, float("nan"), len(dists) - 1, eps, traj)


def general_conv_run(n: int, alpha: float, p: float, T: int, *, eps: float = 0.01) -> GeneralConvReport:
    rep = check_general_conv(trajectory(iid(n, p), ModelParams.critical(alpha), T), eps=eps)
    rep.alpha = float(alpha)
    return rep


def red_density_drift(n: int, p_red: float, p_blue: float, p: float, T: int) -> float:
    """Largest one-step decrease of P_t(R) along an exact run (<= 0 means non-decreasing)."""
    traj = trajectory(iid(n, p), ModelParams(p_red, p_blue), T)
    dens = np.array([_P(d, "R") for d in traj])
    return float(np.max(dens[:-1] - dens[1:]))
