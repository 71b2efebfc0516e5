"""Event-driven numba kernels.

A chameleon can only change colour when some neighbour has the other colour,
so each step only visits the sites next to a colour boundary.  Coins come from
:func:`chameleon.rng.uniform_at`, which makes a kernel step identical to
:func:`chameleon.lattice.sample_step` on the full lattice.

Layout matches :mod:`chameleon.lattice`: a ring of ``m`` sites, or a line
stored as ``m = n + 2`` entries whose first and last entries are fixed.
"""

from contextlib import contextmanager

import numba as nb
import numpy as np

from .rng import trial_key, uniform_at

EXTINCT = np.iinfo(np.int64).min


@contextmanager
def threads(n_threads):
    """Temporarily set the numba worker count (0 or None = all available)."""
    if not n_threads:
        n_threads = nb.config.NUMBA_NUM_THREADS
    n_threads = max(1, min(int(n_threads), nb.config.NUMBA_NUM_THREADS))
    previous = nb.get_num_threads()
    nb.set_num_threads(n_threads)
    try:
        yield n_threads
    finally:
        nb.set_num_threads(previous)


@nb.njit(cache=True, inline="always")
def _coin(key, t, i, col, p_red, p_blue):
    u = uniform_at(key, t, i)
    if col[i] == 1:
        return 1 if u < p_red else 0
    return 1 if u < p_blue else 0


@nb.njit(cache=True)
def _new_color(i, col, m, ring, onedir, key, t, p_red, p_blue):
    c = col[i]
    if _coin(key, t, i, col, p_red, p_blue) == 1:
        return c
    n_own = 1
    s_own = 0
    n_oth = 0
    s_oth = 0
    r = i + 1
    if ring and r == m:
        r = 0
    kr = _coin(key, t, r, col, p_red, p_blue)
    if col[r] == c:
        n_own += 1
        s_own += kr
    else:
        n_oth += 1
        s_oth += kr
    if not onedir:
        left = i - 1
        if ring and left < 0:
            left = m - 1
        kl = _coin(key, t, left, col, p_red, p_blue)
        if col[left] == c:
            n_own += 1
            s_own += kl
        else:
            n_oth += 1
            s_oth += kl
    if n_oth > 0 and s_oth * n_own > s_own * n_oth:
        return 1 - c
    return c


@nb.njit(cache=True)
def _scan_bounds(col, m, ring, bounds):
    nbd = 0
    last = m if ring else m - 1
    for b in range(last):
        r = b + 1
        if r == m:
            r = 0
        if col[b] != col[r]:
            bounds[nbd] = b
            nbd += 1
    return nbd


@nb.njit(cache=True)
def _advance(col, m, ring, onedir, key, t, p_red, p_blue,
             bounds, nbd, active, newc, chg, stamp_a, stamp_b, scratch):
    """One step.  Returns ``(new boundary count, number of changed sites)``.

    ``chg[:nchg]`` holds the changed sites; ``bounds`` is rewritten in place.
    """
    na = 0
    for j in range(nbd):
        b = bounds[j]
        i = b
        if (ring or i >= 1) and stamp_a[i] != t:
            stamp_a[i] = t
            active[na] = i
            na += 1
        if not onedir:
            i = b + 1
            if ring and i == m:
                i = 0
            if (ring or i <= m - 2) and stamp_a[i] != t:
                stamp_a[i] = t
                active[na] = i
                na += 1
    nchg = 0
    for j in range(na):
        i = active[j]
        c = _new_color(i, col, m, ring, onedir, key, t, p_red, p_blue)
        if c != col[i]:
            chg[nchg] = i
            newc[nchg] = c
            nchg += 1
    if nchg == 0:
        return nbd, 0
    for j in range(nchg):
        col[chg[j]] = newc[j]
    # boundary status can only change next to a changed site
    ns = 0
    for j in range(nbd):
        b = bounds[j]
        if stamp_b[b] != t:
            stamp_b[b] = t
            scratch[ns] = b
            ns += 1
    for j in range(nchg):
        i = chg[j]
        b = i - 1
        if b < 0:
            b = m - 1
        if stamp_b[b] != t:
            stamp_b[b] = t
            scratch[ns] = b
            ns += 1
        b = i
        if (ring or b <= m - 2) and stamp_b[b] != t:
            stamp_b[b] = t
            scratch[ns] = b
            ns += 1
    out = 0
    for j in range(ns):
        b = scratch[j]
        r = b + 1
        if r == m:
            r = 0
        if col[b] != col[r]:
            bounds[out] = b
            out += 1
    return out, nchg


@nb.njit(cache=True)
def _leftmost_red(col, m, bounds, nbd):
    if col[1] == 1:
        return 1
    best = -1
    for j in range(nbd):
        b = bounds[j]
        if b >= 1 and b + 1 <= m - 2 and col[b] == 0 and col[b + 1] == 1:
            if best < 0 or b + 1 < best:
                best = b + 1
    return best


@nb.njit(cache=True)
def _rightmost_red(col, m, bounds, nbd):
    if col[m - 2] == 1:
        return m - 2
    best = -1
    for j in range(nbd):
        b = bounds[j]
        if b >= 1 and b + 1 <= m - 2 and col[b] == 1 and col[b + 1] == 0:
            if b > best:
                best = b
    return best


@nb.njit(parallel=True, cache=True)
def ring_absorption(n, p, p_red, p_blue, onedir, trials, step_cap, seed, stream, flip,
                    trial_offset, out_winner, out_time):
    """Run IID(p) ring trials until monochrome or ``step_cap``.

    ``out_winner`` gets 1 (all red), 0 (all blue) or -1 (not absorbed).
    """
    for tr in nb.prange(trials):
        key = trial_key(np.uint64(seed), np.uint64(stream), np.uint64(trial_offset + tr))
        col = np.empty(n, dtype=np.uint8)
        for i in range(n):
            u = uniform_at(key, 0, i)
            if flip:
                col[i] = 1 if u >= 1.0 - p else 0
            else:
                col[i] = 1 if u < p else 0
        bounds = np.empty(n, dtype=np.int64)
        active = np.empty(n, dtype=np.int64)
        chg = np.empty(n, dtype=np.int64)
        scratch = np.empty(2 * n + 2, dtype=np.int64)
        newc = np.empty(n, dtype=np.uint8)
        stamp_a = np.full(n, -1, dtype=np.int64)
        stamp_b = np.full(n, -1, dtype=np.int64)
        nbd = _scan_bounds(col, n, True, bounds)
        t = 0
        while nbd > 0 and t < step_cap:
            t += 1
            nbd, _ = _advance(col, n, True, onedir, key, t, p_red, p_blue,
                              bounds, nbd, active, newc, chg, stamp_a, stamp_b, scratch)
        out_winner[tr] = col[0] if nbd == 0 else -1
        out_time[tr] = t


@nb.njit(cache=True)
def ring_trajectory(col, onedir, p_red, p_blue, key, steps, out):
    """Serial reference run on one ring, writing every configuration into ``out``."""
    n = col.size
    bounds = np.empty(n, dtype=np.int64)
    active = np.empty(n, dtype=np.int64)
    chg = np.empty(n, dtype=np.int64)
    scratch = np.empty(2 * n + 2, dtype=np.int64)
    newc = np.empty(n, dtype=np.uint8)
    stamp_a = np.full(n, -1, dtype=np.int64)
    stamp_b = np.full(n, -1, dtype=np.int64)
    nbd = _scan_bounds(col, n, True, bounds)
    out[0, :] = col
    for t in range(1, steps + 1):
        if nbd > 0:
            nbd, _ = _advance(col, n, True, onedir, key, t, p_red, p_blue,
                              bounds, nbd, active, newc, chg, stamp_a, stamp_b, scratch)
        out[t, :] = col


@nb.njit(parallel=True, cache=True)
def line_trials(init_ext, onedir, p_red, p_blue, schedule, steps, rec_times, seed, stream,
                trials, rec_red, rec_left, rec_right, max_bounds, last_left_move):
    """Run ``trials`` copies of a line experiment from the same start.

    ``schedule`` (length ``steps + 1``, or empty) overrides both success
    probabilities at every step.  Positions are in coin layout (real sites are
    ``1..m-2``); -1 marks "no red site".
    """
    m = init_ext.size
    nrec = rec_times.size
    for tr in nb.prange(trials):
        key = trial_key(np.uint64(seed), np.uint64(stream), np.uint64(tr))
        col = init_ext.copy()
        bounds = np.empty(m, dtype=np.int64)
        active = np.empty(m, dtype=np.int64)
        chg = np.empty(m, dtype=np.int64)
        scratch = np.empty(2 * m + 2, dtype=np.int64)
        newc = np.empty(m, dtype=np.uint8)
        stamp_a = np.full(m, -1, dtype=np.int64)
        stamp_b = np.full(m, -1, dtype=np.int64)
        nbd = _scan_bounds(col, m, False, bounds)
        red = 0
        for i in range(1, m - 1):
            red += col[i]
        left = _leftmost_red(col, m, bounds, nbd)
        mb = nbd
        last_move = 0
        r = 0
        while r < nrec and rec_times[r] == 0:
            rec_red[tr, r] = red
            rec_left[tr, r] = left
            rec_right[tr, r] = _rightmost_red(col, m, bounds, nbd)
            r += 1
        for t in range(1, steps + 1):
            if schedule.size > 0:
                pr = schedule[t]
                pb = schedule[t]
            else:
                pr = p_red
                pb = p_blue
            if nbd > 0:
                nbd, nchg = _advance(col, m, False, onedir, key, t, pr, pb,
                                     bounds, nbd, active, newc, chg, stamp_a, stamp_b, scratch)
                if nchg > 0:
                    for j in range(nchg):
                        red += 1 if newc[j] == 1 else -1
                    new_left = _leftmost_red(col, m, bounds, nbd)
                    if new_left != left:
                        left = new_left
                        last_move = t
                    if nbd > mb:
                        mb = nbd
            while r < nrec and rec_times[r] == t:
                rec_red[tr, r] = red
                rec_left[tr, r] = left
                rec_right[tr, r] = _rightmost_red(col, m, bounds, nbd)
                r += 1
        max_bounds[tr] = mb
        last_left_move[tr] = last_move


@nb.njit(parallel=True, cache=True)
def chain_returns(cum_first, cum_bulk, trials, step_cap, seed, stream, out_visits, out_final):
    """Simulate the block-length chain from state 1.

    ``cum_first`` is the cumulative row of state 1 over targets 0..3 and
    ``cum_bulk`` the cumulative law of the jump -2..+2 from states >= 2.
    Visits to 1 are counted at times ``0..step_cap-1``.
    """
    for tr in nb.prange(trials):
        key = trial_key(np.uint64(seed), np.uint64(stream), np.uint64(tr))
        state = 1
        visits = 0
        for t in range(step_cap):
            if state == 0:
                break
            if state == 1:
                visits += 1
            u = uniform_at(key, t + 1, 0)
            if state == 1:
                j = 0
                while j < 3 and u >= cum_first[j]:
                    j += 1
                state = j
            else:
                j = 0
                while j < 4 and u >= cum_bulk[j]:
                    j += 1
                state = state + j - 2
        out_visits[tr] = visits
        out_final[tr] = state
