"""Pure numpy implementations of the sampling kernels.

Results are bit-identical to the compiled versions in ``_native.pyx``: both
use the same counter-based generator and the same floating-point operations
in the same order.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0xD1B54A32D192ED03)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_INV53 = 1.0 / 9007199254740992.0


def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_keys(seed, samples):
    samples = np.asarray(samples, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = _mix64(np.full(samples.shape, np.uint64(seed), dtype=np.uint64) ^ _SEED_SALT)
        return _mix64(base + (samples + np.uint64(1)) * _GOLDEN)


def uniforms(seed, samples, counter):
    """Uniform doubles in [0, 1) for draw ``counter`` of each sample's stream."""
    keys = stream_keys(seed, samples)
    with np.errstate(over="ignore"):
        z = _mix64(keys + (np.uint64(counter) + np.uint64(1)) * _GOLDEN)
    return (z >> _S11).astype(np.float64) * _INV53


def _searchsorted_hi(cum, pos):
    """First index with ``cum[j] > pos``, clamped to the last index."""
    j = np.searchsorted(cum, pos, side="right")
    return np.minimum(j, len(cum) - 1)


def branch_walk(seed, first_sample, n_samples, init_cdf, init_index,
                lo, width, group, g_start, g_len, cum_hi, target):
    """Markov walk over joint configurations, one stage at a time.

    ``lo[s, i]``/``width[s, i]`` locate configuration ``i`` inside the
    conditional CDF of its group before stage ``s``; the group's outgoing CDF
    (``cum_hi``) and configurations (``target``) live in the flat slices
    ``g_start[g] : g_start[g] + g_len[g]``.
    """
    samples = np.arange(first_sample, first_sample + n_samples, dtype=np.uint64)
    n_stages = lo.shape[0]
    hist = np.empty((n_samples, n_stages + 1), dtype=np.int32)
    u0 = uniforms(seed, samples, 0)
    cur = init_index[_searchsorted_hi(init_cdf, u0)]
    hist[:, 0] = cur
    for s in range(n_stages):
        u = uniforms(seed, samples, s + 1)
        pos = lo[s, cur] + u * width[s, cur]
        grp = group[s, cur]
        nxt = np.empty_like(cur)
        for g in np.unique(grp):
            sel = grp == g
            a = g_start[g]
            seg = slice(a, a + g_len[g])
            nxt[sel] = target[seg][_searchsorted_hi(cum_hi[seg], pos[sel])]
        cur = nxt
        hist[:, s + 1] = cur
    return hist


def route_walk(seed, first_sample, counter_offset, partner, det_id, intensity, start_modes):
    """Route independent particles through junctions by output-intensity share.

    ``intensity[i, s, m]`` is the field intensity on mode ``m`` leaving stage
    ``s`` for sample ``i``.  Returns the detector id reached by each photon
    (-1 if none), its final mode, and a per-sample breakdown flag set when a
    particle meets a junction whose outputs are all dark.
    """
    n, n_stages, _ = intensity.shape
    n_photons = len(start_modes)
    samples = np.arange(first_sample, first_sample + n, dtype=np.uint64)
    detected = np.full((n, n_photons), -1, dtype=np.int32)
    final = np.empty((n, n_photons), dtype=np.int32)
    broken = np.zeros(n, dtype=np.uint8)
    rows = np.arange(n)
    for p in range(n_photons):
        mode = np.full(n, start_modes[p], dtype=np.int32)
        for s in range(n_stages):
            u = uniforms(seed, samples, counter_offset + p * n_stages + s)
            other = partner[s, mode]
            junction = other >= 0
            if junction.any():
                ia = intensity[rows, s, mode]
                ib = intensity[rows, s, np.where(junction, other, mode)]
                tot = ia + ib
                dark = junction & (tot <= 0.0)
                broken |= dark.astype(np.uint8)
                take_other = junction & ~dark & ~(u * tot < ia)
                mode = np.where(take_other, other, mode).astype(np.int32)
            d = det_id[s, mode]
            hit = (d >= 0) & (detected[:, p] < 0)
            detected[hit, p] = d[hit]
        final[:, p] = mode
    return detected, final, broken
