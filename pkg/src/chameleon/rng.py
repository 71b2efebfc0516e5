"""Counter-based random numbers addressed by (seed, stream, trial, time, site).

Every uniform used by the simulators is a pure function of its address, so a
kernel that only looks at the sites near an interface sees exactly the coins a
full-lattice step would have drawn, and parallel runs match serial runs.
"""

from dataclasses import dataclass

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SITE_MUL = np.uint64(0xD6E8FEB86659FD93)
_TWO53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def _mix(z):
    # splitmix64 finalizer
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def trial_key(seed, stream, trial):
    k = _mix(np.uint64(seed))
    k = _mix(k ^ np.uint64(stream))
    return _mix(k ^ np.uint64(trial))


@nb.njit(cache=True, inline="always")
def uniform_at(key, t, site):
    h = _mix(key ^ _mix(np.uint64(t)))
    h = _mix(h + np.uint64(site) * _SITE_MUL)
    return (h >> np.uint64(11)) * _TWO53


@nb.njit(cache=True)
def _fill_uniforms(key, t, m, out):
    for i in range(m):
        out[i] = uniform_at(key, t, i)


def uniforms(key, t, m):
    """Uniforms in [0, 1) for sites ``0..m-1`` at time index ``t``."""
    out = np.empty(m, dtype=np.float64)
    _fill_uniforms(np.uint64(key), np.int64(t), m, out)
    return out


def resolve_seed(seed):
    if seed is None:
        return 0
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return seed % (1 << 64)


@dataclass(frozen=True)
class CoinStream:
    """Deterministic coin source for one trial.

    Time index 0 is reserved for the initial configuration; the coins that
    produce the configuration at time ``t`` use time index ``t``.
    """

    seed: int = 0
    trial: int = 0
    stream: int = 0

    @property
    def key(self):
        return int(trial_key(np.uint64(resolve_seed(self.seed)), np.uint64(self.stream),
                             np.uint64(self.trial)))

    def uniforms(self, t, m):
        return uniforms(self.key, t, m)
