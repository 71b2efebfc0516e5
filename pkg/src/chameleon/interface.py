"""Interface experiments: step profile, increment law and planted red blocks.

Information moves at most one site per step, so a line window of radius
greater than T whose virtual sites carry the colours of the infinite profile
reproduces the infinite-lattice dynamics exactly up to time T.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from ._validation import check_int
from .lattice import (FIXED_BLUE_LINE, STEP_PROFILE_LINE, Configuration, ModelParams,
                      Neighborhood, apply_rule)
from .rng import resolve_seed


class WindowError(ValueError):
    """The window is too small for the requested horizon."""


@dataclass(frozen=True)
class IncrementLaw:
    minus: float
    zero: float
    plus: float

    def __post_init__(self):
        probs = np.array([self.minus, self.zero, self.plus])
        if np.any(probs < -1e-15) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"not a probability law: {probs}")

    def as_array(self) -> np.ndarray:
        return np.array([self.minus, self.zero, self.plus])

    @property
    def mean(self) -> float:
        return self.plus - self.minus

    @property
    def variance(self) -> float:
        return self.plus + self.minus - self.mean ** 2


def increment_law(params: ModelParams) -> IncrementLaw:
    """Law of ``X_{t+1} - X_t`` for the step profile in two-sided mode."""
    if params.one_directional:
        raise ValueError("the closed-form increment law is for the two-sided neighbourhood")
    pr, pb = params.p_red, params.p_blue
    return IncrementLaw(pr * (1 - pb), pr * pb + (1 - pr) * (1 - pb), pb * (1 - pr))


@dataclass
class IncrementVerification:
    params: ModelParams
    matches: bool
    law: dict[int, float]
    mismatches: int

    def __bool__(self) -> bool:
        return self.matches


def verify_increment_exhaustive(params: ModelParams, radius: int = 3) -> IncrementVerification:
    """Enumerate every coin draw on a window around the step interface.

    The window holds ``radius`` blue then ``radius`` red sites, with blue and
    red virtual sites outside.  For every draw the new profile must again be
    sharp, and the increment must equal ``-1`` if the blue at ``X-1`` fails
    while the red at ``X`` succeeds, ``+1`` in the opposite case and 0
    otherwise.  ``law`` is the increment law induced by the enumeration with
    weights from ``params``; in one-directional mode it is reported as is
    and ``matches`` tests the same mapping.
    """
    check_int(radius, "radius", minimum=2)
    n = 2 * radius
    sites = np.array([0] * radius + [1] * radius, dtype=np.uint8)
    ext = Configuration(sites, STEP_PROFILE_LINE).extended()
    m = ext.size
    draws = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.uint8)
    new = apply_rule(np.broadcast_to(ext, draws.shape), draws, False, params.one_directional)
    prob = np.where(ext == 1, params.p_red, params.p_blue)
    weights = np.prod(np.where(draws == 1, prob, 1 - prob), axis=1)
    x0 = radius + 1  # coin-layout index of the leftmost red
    law: dict[int, float] = {}
    mismatches = 0
    for row, coins, w in zip(new, draws, weights):
        real = row[1:-1]
        if np.any(np.diff(real.astype(np.int8)) < 0):
            mismatches += 1
            continue
        x1 = 1 + int(np.argmax(real)) if real.any() else n + 1
        inc = x1 - x0
        expected = int(coins[x0 - 1] == 1 and coins[x0] == 0) - int(coins[x0 - 1] == 0 and coins[x0] == 1)
        if inc != expected:
            mismatches += 1
        law[inc] = law.get(inc, 0.0) + float(w)
    return IncrementVerification(params, mismatches == 0, dict(sorted(law.items())), mismatches)


@dataclass
class InterfaceTrajectory:
    """Positions of the left interface; ``x[trial, j]`` is ``X`` at ``times[j]``."""

    params: ModelParams
    T: int
    seed: int
    times: np.ndarray
    x: np.ndarray

    @property
    def trials(self) -> int:
        return self.x.shape[0]

    def increments(self) -> np.ndarray:
        if not np.array_equal(self.times, np.arange(self.T + 1)):
            raise ValueError("increments need every time recorded")
        return np.diff(self.x, axis=1)

    def increment_frequencies(self) -> dict[int, float]:
        inc = self.increments().ravel()
        return {k: float(np.mean(inc == k)) for k in (-1, 0, 1)}


def _run_line(ext, params, steps, times, seed, trials, stream, n_threads, schedule=None):
    times = np.asarray(times, dtype=np.int64)
    shape = (trials, times.size)
    red = np.zeros(shape, dtype=np.int64)
    left = np.zeros(shape, dtype=np.int64)
    right = np.zeros(shape, dtype=np.int64)
    mb = np.zeros(trials, dtype=np.int64)
    lm = np.zeros(trials, dtype=np.int64)
    sched = np.empty(0) if schedule is None else np.ascontiguousarray(schedule, dtype=np.float64)
    with _kernels.threads(n_threads):
        _kernels.line_trials(ext, params.one_directional, params.p_red, params.p_blue, sched, steps,
                             times, resolve_seed(seed), stream, trials, red, left, right, mb, lm)
    return red, left, right, mb, lm


def run_step_profile(params: ModelParams, T: int, trials: int = 1, seed=0, window: int | None = None,
                     times=None, n_threads: int = 0, stream: int = 2) -> InterfaceTrajectory:
    """Simulate the blue-then-red step profile and record ``X_t``.

    ``X_0 = 0`` and ``window`` is the radius (default ``T + 1``).  Raises
    :class:`WindowError` if ``window <= T`` and ``AssertionError`` if any
    trial leaves the sharp-interface form.
    """
    check_int(T, "T", minimum=0)
    check_int(trials, "trials", minimum=1)
    window = T + 1 if window is None else check_int(window, "window", minimum=1)
    if window <= T:
        raise WindowError(f"window radius {window} must exceed T={T}")
    sites = np.array([0] * window + [1] * window, dtype=np.uint8)
    ext = Configuration(sites, STEP_PROFILE_LINE).extended()
    times = np.arange(T + 1) if times is None else np.asarray(times, dtype=np.int64)
    _, left, _, mb, _ = _run_line(ext, params, T, times, seed, trials, stream, n_threads)
    if np.any(mb != 1):
        raise AssertionError("the step profile lost its sharp interface")
    return InterfaceTrajectory(params, T, resolve_seed(seed), times, left - (window + 1))


@dataclass
class BlockStats:
    params: ModelParams
    block_len: int
    T: int
    trials: int
    seed: int
    times: list[int]
    extinction_fraction: list[float]
    ks: list[int]
    survival_fraction: dict[int, float] = field(default_factory=dict)
    ruin_bound: float = float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = {"p_red": self.params.p_red, "p_blue": self.params.p_blue,
                       "neighborhood": self.params.neighborhood.value}
        d["survival_fraction"] = {str(k): v for k, v in self.survival_fraction.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BlockStats":
        d = dict(d)
        d["params"] = ModelParams(**d["params"])
        d["survival_fraction"] = {int(k): v for k, v in d["survival_fraction"].items()}
        return cls(**d)


def ruin_survival_bound(params: ModelParams, block_len: int) -> float:
    """Lower bound on the probability that a planted block never dies.

    The block can only die once one edge has moved inward by at least
    ``ceil((block_len - 1) / 2)``.  Each edge is a walk with the increment law
    while the block has length >= 2, and gambler's ruin bounds the chance of
    ever moving inward by ``d`` by ``(p_in / p_out)^d``.
    """
    if block_len < 2:
        return 0.0
    law = increment_law(params)
    if law.minus <= law.plus:
        return 0.0
    d = math.ceil((block_len - 1) / 2)
    return max(0.0, 1.0 - 2.0 * (law.plus / law.minus) ** d)


def run_block_experiment(params: ModelParams, block_len: int, T: int, trials: int, seed=0,
                         ks=(0, 10, 100), window: int | None = None, times=None,
                         n_threads: int = 0, stream: int = 3) -> BlockStats:
    """Plant ``block_len`` reds in a blue sea and follow both interfaces to ``T``.

    ``survival_fraction[k]`` is the fraction of trials in which red survives
    to ``T`` with the left edge at least ``k`` left of its start and the right
    edge at least ``k`` right of its start.  ``extinction_fraction`` is given
    at each of ``times`` (default ``[T]``).
    """
    check_int(block_len, "block_len", minimum=0)
    check_int(T, "T", minimum=0)
    check_int(trials, "trials", minimum=1)
    window = T + 1 if window is None else check_int(window, "window", minimum=1)
    if window <= T:
        raise WindowError(f"window radius {window} must exceed T={T}")
    times = [T] if times is None else sorted(int(t) for t in times)
    if times and (times[0] < 0 or times[-1] > T):
        raise ValueError("record times must lie in [0, T]")
    sites = np.zeros(2 * window + block_len, dtype=np.uint8)
    sites[window:window + block_len] = 1
    ext = Configuration(sites, FIXED_BLUE_LINE).extended()
    rec_times = sorted(set(times) | {T})
    red, left, right, _, _ = _run_line(ext, params, T, rec_times, seed, trials, stream, n_threads)
    ext_frac = [float(np.mean(red[:, rec_times.index(t)] == 0)) for t in times]
    j = rec_times.index(T)
    alive = red[:, j] > 0
    l0, r0 = window + 1, window + block_len
    surv = {int(k): float(np.mean(alive & (left[:, j] <= l0 - k) & (right[:, j] >= r0 + k))) for k in ks}
    bound = ruin_survival_bound(params, block_len) if not params.one_directional else float("nan")
    return BlockStats(params, block_len, T, trials, resolve_seed(seed), times, ext_frac,
                      [int(k) for k in ks], surv, bound)


__all__ = ["IncrementLaw", "IncrementVerification", "InterfaceTrajectory", "BlockStats",
           "WindowError", "increment_law", "verify_increment_exhaustive", "run_step_profile",
           "run_block_experiment", "ruin_survival_bound", "Neighborhood"]
