import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chameleon import _kernels
from chameleon.lattice import (FIXED_BLUE_LINE, RING, CoinDraw, Color, Configuration, ModelParams,
                               Neighborhood, apply_rule, iid_configuration, local_rule, sample_step, step)
from chameleon.rng import CoinStream

B, R = Color.B, Color.R
ONE_DIR = Neighborhood.ONE_DIRECTIONAL


def all_bits(m):
    return np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.uint8)


def test_color_flip_involution():
    for c in Color:
        assert c.flip().flip() is c
    assert Color.parse("r") is R and Color.parse(0) is B


@pytest.mark.parametrize("own,coin,nbrs,expected", [
    (R, 1, [(B, 1), (B, 1)], R),
    (R, 0, [(R, 1), (R, 1)], R),
    (R, 0, [(B, 1), (R, 1)], B),
    (R, 0, [(B, 0), (R, 0)], R),
    (B, 0, [(R, 1)], B.flip()),
    (B, 0, [(B, 1)], B),
])
def test_local_rule_examples(own, coin, nbrs, expected):
    assert local_rule(own, coin, nbrs) == expected


def test_apply_rule_matches_local_rule_everywhere():
    # every colour/coin pattern of a closed two-sided neighbourhood
    for cols in itertools.product((0, 1), repeat=3):
        for coins in itertools.product((0, 1), repeat=3):
            new = apply_rule(np.array(cols, np.uint8), np.array(coins, np.uint8), False, False)
            want = local_rule(cols[1], coins[1], [(cols[0], coins[0]), (cols[2], coins[2])])
            assert new[1] == want
            new1 = apply_rule(np.array(cols, np.uint8), np.array(coins, np.uint8), False, True)
            assert new1[1] == local_rule(cols[1], coins[1], [(cols[2], coins[2])])


@pytest.mark.parametrize("n", [3, 5, 8])
def test_monochrome_configurations_absorb(n):
    params = ModelParams(0.3, 0.6)
    for color in (R, B):
        cfg = Configuration.monochrome(color, n)
        for coins in all_bits(n):
            assert step(cfg, params, CoinDraw(coins)) == cfg


@pytest.mark.parametrize("n,mode", [(n, m) for n in range(3, 9) for m in Neighborhood])
def test_colour_flip_symmetry_exhaustive(n, mode):
    # all configurations against all coin draws, batched
    states = all_bits(n)
    coins = all_bits(n)
    one = mode is ONE_DIR
    for cfg in states:
        a = apply_rule(np.broadcast_to(cfg, coins.shape), coins, True, one)
        b = apply_rule(np.broadcast_to(1 - cfg, coins.shape), coins, True, one)
        assert np.array_equal(1 - a, b)


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 24).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.integers(-n, n))), st.sampled_from(list(Neighborhood)))
def test_rotation_equivariance(data, mode):
    sites, coins, k = data
    params = ModelParams.critical(0.5, mode)
    cfg = Configuration(sites)
    draw = CoinDraw(coins)
    assert step(cfg.rotate(k), params, draw.rotate(k)) == step(cfg, params, draw).rotate(k)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=2, max_size=20), st.data())
def test_line_flip_symmetry(sites, data):
    coins = data.draw(st.lists(st.integers(0, 1), min_size=len(sites) + 2, max_size=len(sites) + 2))
    params = ModelParams.critical(0.4)
    cfg = Configuration(sites, FIXED_BLUE_LINE)
    assert step(cfg, params, CoinDraw(coins)).flip_colors() == step(cfg.flip_colors(), params, CoinDraw(coins))


@pytest.mark.parametrize("block", [1, 2, 3, 4])
@pytest.mark.parametrize("mode", list(Neighborhood))
def test_single_block_stays_contiguous(block, mode):
    n = block + 4
    sites = np.zeros(n, np.uint8)
    sites[2:2 + block] = 1
    ext = Configuration(sites, FIXED_BLUE_LINE).extended()
    coins = all_bits(n + 2)
    new = apply_rule(np.broadcast_to(ext, coins.shape), coins, False, mode is ONE_DIR)[:, 1:-1]
    for row in new:
        red = np.flatnonzero(row)
        assert red.size == 0 or red[-1] - red[0] + 1 == red.size
    assert np.all(apply_rule(np.broadcast_to(ext, coins.shape), coins, False, mode is ONE_DIR)[:, [0, -1]] == 0)


def test_dependency_radius():
    # changing a coin or colour outside {i-1, i, i+1} never changes site i
    rng = np.random.default_rng(0)
    n = 9
    for mode, reach in ((Neighborhood.TWO_SIDED, {3, 4, 5}), (ONE_DIR, {4, 5})):
        for _ in range(300):
            c = rng.integers(0, 2, n).astype(np.uint8)
            k = rng.integers(0, 2, n).astype(np.uint8)
            j = int(rng.integers(0, n))
            c2, k2 = c.copy(), k.copy()
            if rng.random() < 0.5:
                c2[j] ^= 1
            else:
                k2[j] ^= 1
            a = apply_rule(c, k, True, mode is ONE_DIR)[4]
            b = apply_rule(c2, k2, True, mode is ONE_DIR)[4]
            if j not in reach:
                assert a == b


def test_step_profile_move_left():
    cfg = Configuration.from_word("BBBBRRRR")
    coins = np.ones(8, np.uint8)
    coins[3] = 0  # blue at X-1 fails, red at X succeeds
    out = step(cfg, ModelParams.critical(0.5), CoinDraw(coins))
    assert out.word == "BBBRRRRR"


def test_step_errors():
    params = ModelParams.critical(0.5)
    with pytest.raises(ValueError, match="coin outcomes"):
        step(Configuration.from_word("RBRB"), params, CoinDraw([1, 0, 1]))
    with pytest.raises(ValueError, match="coin outcomes"):
        step(Configuration.from_word("RBRB", FIXED_BLUE_LINE), params, CoinDraw([1, 0, 1, 1]))
    with pytest.raises(ValueError, match="at least 3"):
        step(Configuration.from_word("RB"), params, CoinDraw([1, 0]))
    with pytest.raises(ValueError):
        ModelParams(1.2, 0.5)


def test_step_leaves_input_unchanged():
    cfg = Configuration.from_word("RBBRRB")
    before = cfg.sites.copy()
    step(cfg, ModelParams.critical(0.5), CoinDraw(np.zeros(6)))
    assert np.array_equal(cfg.sites, before)
    with pytest.raises(ValueError):
        cfg.sites[0] = 0


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_degenerate_alpha_freezes(alpha):
    stream = CoinStream(seed=3)
    cfg = iid_configuration(30, 0.5, stream)
    params = ModelParams.critical(alpha)
    cur = cfg
    for t in range(1, 20):
        cur = sample_step(cur, params, stream, t)
    assert cur == cfg


def test_sample_step_deterministic():
    params = ModelParams(0.6, 0.4)
    runs = []
    for _ in range(2):
        stream = CoinStream(seed=11, trial=2)
        cur = iid_configuration(40, 0.5, stream)
        for t in range(1, 50):
            cur = sample_step(cur, params, stream, t)
        runs.append(cur)
    assert runs[0] == runs[1]
    with pytest.raises(ValueError):
        sample_step(runs[0], params, CoinStream(), 0)


def test_flip_initial_draw_is_colour_flip():
    s = CoinStream(seed=4, trial=9)
    assert iid_configuration(50, 0.3, s).flip_colors() == iid_configuration(50, 0.7, s, flip=True)


@pytest.mark.parametrize("mode", [False, True])
def test_event_kernel_matches_full_lattice(mode):
    params = ModelParams(0.55, 0.45, ONE_DIR if mode else Neighborhood.TWO_SIDED)
    for trial in range(10):
        stream = CoinStream(seed=21, trial=trial)
        cfg = iid_configuration(25, 0.5, stream)
        out = np.zeros((41, 25), np.uint8)
        _kernels.ring_trajectory(cfg.sites.copy(), mode, params.p_red, params.p_blue, np.uint64(stream.key), 40, out)
        cur = cfg
        for t in range(1, 41):
            cur = sample_step(cur, params, stream, t)
            assert np.array_equal(out[t], cur.sites)


def test_configuration_roundtrips():
    cfg = Configuration.from_word("RBBRB")
    assert Configuration.from_index(cfg.index, 5) == cfg
    assert cfg.red_count == 2 and cfg.red_runs() == [(0, 1), (3, 4)]
    assert Configuration.from_word("RBR", FIXED_BLUE_LINE).extended().tolist() == [0, 1, 0, 1, 0]
    assert RING.coin_count(5) == 5 and FIXED_BLUE_LINE.coin_count(5) == 7
    with pytest.raises(ValueError):
        Configuration.from_word("RB", FIXED_BLUE_LINE).rotate(1)
