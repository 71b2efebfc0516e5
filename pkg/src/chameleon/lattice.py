"""Rule-I dynamics on finite lattices.

Colours are stored as ``uint8`` with ``1 = R`` and ``0 = B``; a configuration
of ``n`` sites therefore doubles as an ``n``-bit integer (bit ``i`` = site
``i``), which is the state index used by :mod:`chameleon.exact`.

Two topologies are supported:

* ``Ring``: periodic boundary, coins indexed ``0..n-1``.
* ``Line``: a segment whose two out-of-range neighbours are permanent
  chameleons of fixed colour.  They toss their own coins, so a coin draw on a
  line has ``n + 2`` entries: index 0 is the left virtual site, ``1..n`` the
  real sites and ``n + 1`` the right virtual site.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_probability
from .rng import CoinStream


class Color(enum.IntEnum):
    B = 0
    R = 1

    def flip(self) -> "Color":
        return Color(1 - self)

    @classmethod
    def parse(cls, value) -> "Color":
        if isinstance(value, Color):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


class Neighborhood(str, enum.Enum):
    TWO_SIDED = "two_sided"
    ONE_DIRECTIONAL = "one_directional"


@dataclass(frozen=True)
class Topology:
    kind: str = "ring"
    left: Color = Color.B
    right: Color = Color.B

    def __post_init__(self):
        if self.kind not in ("ring", "line"):
            raise ValueError(f"unknown topology kind {self.kind!r}")

    @property
    def is_ring(self) -> bool:
        return self.kind == "ring"

    def coin_count(self, n: int) -> int:
        return n if self.is_ring else n + 2


RING = Topology("ring")
FIXED_BLUE_LINE = Topology("line", Color.B, Color.B)
#: blue to the left, red to the right: the step profile seen through a window
STEP_PROFILE_LINE = Topology("line", Color.B, Color.R)


@dataclass(frozen=True)
class ModelParams:
    p_red: float
    p_blue: float
    neighborhood: Neighborhood = Neighborhood.TWO_SIDED

    def __post_init__(self):
        check_probability(self.p_red, "p_red")
        check_probability(self.p_blue, "p_blue")
        object.__setattr__(self, "neighborhood", Neighborhood(self.neighborhood))

    @classmethod
    def critical(cls, alpha: float, neighborhood=Neighborhood.TWO_SIDED) -> "ModelParams":
        return cls(float(alpha), float(alpha), neighborhood)

    @property
    def is_critical(self) -> bool:
        return self.p_red == self.p_blue

    @property
    def one_directional(self) -> bool:
        return self.neighborhood is Neighborhood.ONE_DIRECTIONAL


def _as_colors(sites) -> np.ndarray:
    if isinstance(sites, str):
        return np.array([Color.parse(ch) for ch in sites], dtype=np.uint8)
    arr = np.asarray(sites)
    if arr.dtype.kind in "UO":
        return np.array([Color.parse(ch) for ch in arr], dtype=np.uint8)
    arr = arr.astype(np.uint8)
    if np.any(arr > 1):
        raise ValueError("colours must be 0 (B) or 1 (R)")
    return arr


@dataclass(frozen=True, eq=False)
class Configuration:
    sites: np.ndarray
    topology: Topology = field(default=RING)

    def __post_init__(self):
        sites = _as_colors(self.sites)
        if sites.ndim != 1 or sites.size < 1:
            raise ValueError("a configuration needs at least one site")
        sites.setflags(write=False)
        object.__setattr__(self, "sites", sites)

    @classmethod
    def from_word(cls, word: str, topology: Topology = RING) -> "Configuration":
        return cls(_as_colors(word), topology)

    @classmethod
    def from_index(cls, index: int, n: int, topology: Topology = RING) -> "Configuration":
        bits = (int(index) >> np.arange(n)) & 1
        return cls(bits.astype(np.uint8), topology)

    @classmethod
    def monochrome(cls, color, n: int, topology: Topology = RING) -> "Configuration":
        return cls(np.full(n, int(Color.parse(color)), dtype=np.uint8), topology)

    def __len__(self) -> int:
        return self.sites.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.topology == other.topology and np.array_equal(self.sites, other.sites)

    def __hash__(self) -> int:
        return hash((self.topology, self.sites.tobytes()))

    def __repr__(self) -> str:
        return f"Configuration({self.word!r}, {self.topology.kind})"

    @property
    def word(self) -> str:
        return "".join("R" if s else "B" for s in self.sites)

    @property
    def index(self) -> int:
        return int(np.dot(self.sites.astype(np.int64), 1 << np.arange(len(self), dtype=np.int64)))

    @property
    def red_count(self) -> int:
        return int(self.sites.sum())

    def is_monochrome(self) -> bool:
        return bool(self.sites.min() == self.sites.max())

    def extended(self) -> np.ndarray:
        """Colours in coin layout (virtual sites included for a line)."""
        if self.topology.is_ring:
            return self.sites.copy()
        return np.concatenate(([self.topology.left], self.sites, [self.topology.right])).astype(np.uint8)

    def flip_colors(self) -> "Configuration":
        topo = self.topology
        if not topo.is_ring:
            topo = Topology("line", topo.left.flip(), topo.right.flip())
        return Configuration(1 - self.sites, topo)

    def rotate(self, k: int) -> "Configuration":
        if not self.topology.is_ring:
            raise ValueError("rotation is only defined on a ring")
        return Configuration(np.roll(self.sites, k), self.topology)

    def red_runs(self) -> list[tuple[int, int]]:
        """Maximal red runs as ``(start, stop)`` half-open index pairs (non-periodic view)."""
        runs, start = [], None
        for i, s in enumerate(self.sites):
            if s and start is None:
                start = i
            elif not s and start is not None:
                runs.append((start, i))
                start = None
        if start is not None:
            runs.append((start, len(self)))
        return runs


@dataclass(frozen=True, eq=False)
class CoinDraw:
    outcomes: np.ndarray

    def __post_init__(self):
        out = np.asarray(self.outcomes).astype(np.uint8)
        if out.ndim != 1 or np.any(out > 1):
            raise ValueError("coin outcomes must be a 1-D array of 0/1")
        out.setflags(write=False)
        object.__setattr__(self, "outcomes", out)

    def __len__(self) -> int:
        return self.outcomes.size

    def rotate(self, k: int) -> "CoinDraw":
        return CoinDraw(np.roll(self.outcomes, k))


def local_rule(own: Color, own_coin: int, neighbours) -> Color:
    """New colour of one chameleon.

    ``neighbours`` lists ``(colour, coin)`` for the rest of the neighbourhood.
    A colour absent from the neighbourhood has success proportion 0, and a
    failed chameleon switches only when the other colour's proportion is
    strictly larger than its own.
    """
    own = Color.parse(own)
    if own_coin:
        return own
    n_own, s_own, n_other, s_other = 1, 0, 0, 0
    for colour, coin in neighbours:
        if Color.parse(colour) == own:
            n_own += 1
            s_own += int(coin)
        else:
            n_other += 1
            s_other += int(coin)
    if n_other and s_other * n_own > s_own * n_other:
        return own.flip()
    return own


def apply_rule(colors: np.ndarray, coins: np.ndarray, ring: bool, one_directional: bool) -> np.ndarray:
    """Vectorised synchronous update along the last axis.

    ``colors`` and ``coins`` are in coin layout; for a line the first and
    last entries are the fixed virtual sites and are returned unchanged.
    Leading axes are batch axes.
    """
    c = colors.astype(np.int16)
    k = coins.astype(np.int16)
    if ring:
        right_c, right_k = np.roll(c, -1, axis=-1), np.roll(k, -1, axis=-1)
        left_c, left_k = np.roll(c, 1, axis=-1), np.roll(k, 1, axis=-1)
        core = slice(None)
        cc, kk = c, k
    else:
        core = slice(1, -1)
        cc, kk = c[..., 1:-1], k[..., 1:-1]
        right_c, right_k = c[..., 2:], k[..., 2:]
        left_c, left_k = c[..., :-2], k[..., :-2]

    same_r = right_c == cc
    n_own = 1 + same_r
    s_own = kk + np.where(same_r, right_k, 0)
    n_other = (~same_r).astype(np.int16)
    s_other = np.where(same_r, 0, right_k)
    if not one_directional:
        same_l = left_c == cc
        n_own = n_own + same_l
        s_own = s_own + np.where(same_l, left_k, 0)
        n_other = n_other + ~same_l
        s_other = s_other + np.where(same_l, 0, left_k)
    switch = (kk == 0) & (n_other > 0) & (s_other * n_own > s_own * n_other)
    out = colors.copy()
    out[..., core] = np.where(switch, 1 - cc, cc).astype(colors.dtype)
    return out


def _check_ring_size(n: int, params: ModelParams, topology: Topology):
    if topology.is_ring and n < (2 if params.one_directional else 3):
        raise ValueError(f"a ring needs at least {2 if params.one_directional else 3} sites for this neighbourhood, got {n}")


def step(config: Configuration, params: ModelParams, coins: CoinDraw) -> Configuration:
    """One synchronous Rule-I update given every coin outcome."""
    n = len(config)
    m = config.topology.coin_count(n)
    if len(coins) != m:
        raise ValueError(f"expected {m} coin outcomes for {n} sites on a {config.topology.kind}, got {len(coins)}")
    _check_ring_size(n, params, config.topology)
    ext = apply_rule(config.extended(), coins.outcomes, config.topology.is_ring, params.one_directional)
    sites = ext if config.topology.is_ring else ext[1:-1]
    return Configuration(sites, config.topology)


def draw_coins(config: Configuration, params: ModelParams, stream: CoinStream, t: int) -> CoinDraw:
    ext = config.extended()
    u = stream.uniforms(t, ext.size)
    p = np.where(ext == 1, params.p_red, params.p_blue)
    return CoinDraw((u < p).astype(np.uint8))


def sample_step(config: Configuration, params: ModelParams, stream: CoinStream, t: int) -> Configuration:
    """Draw the coins for time index ``t`` from ``stream`` and apply :func:`step`.

    A site's success probability is ``p_red`` or ``p_blue`` according to its
    colour before the update.
    """
    if t < 1:
        raise ValueError("coin time indices start at 1 (index 0 seeds the initial configuration)")
    return step(config, params, draw_coins(config, params, stream, t))


def iid_configuration(n: int, p: float, stream: CoinStream, topology: Topology = RING,
                      flip: bool = False) -> Configuration:
    """I.i.d. colours drawn from time index 0 of ``stream``.

    Site ``i`` is red iff ``u_i < p``; with ``flip`` it is blue iff
    ``u_i < 1 - p``, so ``flip`` on ``1 - p`` is the colour-flip of the plain
    draw on ``p`` under the same stream.
    """
    check_probability(p, "p")
    u = stream.uniforms(0, topology.coin_count(n))
    if not topology.is_ring:
        u = u[1:-1]
    red = (u >= 1.0 - p) if flip else (u < p)
    return Configuration(red.astype(np.uint8), topology)
