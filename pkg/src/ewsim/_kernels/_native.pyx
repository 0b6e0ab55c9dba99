# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels; see ``_fallback.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int32_t, int64_t, uint8_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL
cdef uint64_t SEED_SALT = 0xD1B54A32D192ED03ULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline uint64_t stream_key(uint64_t seed, uint64_t sample) noexcept nogil:
    return mix64(mix64(seed ^ SEED_SALT) + (sample + 1) * GOLDEN)


cdef inline double draw(uint64_t key, uint64_t counter) noexcept nogil:
    return <double>(mix64(key + (counter + 1) * GOLDEN) >> 11) * INV53


cdef inline int64_t search_hi(const double[::1] cum, int64_t a, int64_t n, double pos) noexcept nogil:
    # first j in [a, a+n) with cum[j] > pos, clamped to the last entry
    cdef int64_t lo = a, hi = a + n
    cdef int64_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] > pos:
            hi = mid
        else:
            lo = mid + 1
    if lo >= a + n:
        lo = a + n - 1
    return lo


def stream_keys(uint64_t seed, samples):
    cdef const uint64_t[::1] s = np.ascontiguousarray(samples, dtype=np.uint64)
    out = np.empty(s.shape[0], dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(s.shape[0]):
            o[i] = stream_key(seed, s[i])
    return out


def uniforms(uint64_t seed, samples, uint64_t counter):
    cdef const uint64_t[::1] s = np.ascontiguousarray(samples, dtype=np.uint64)
    out = np.empty(s.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(s.shape[0]):
            o[i] = draw(stream_key(seed, s[i]), counter)
    return out


def branch_walk(uint64_t seed, int64_t first_sample, int64_t n_samples,
                init_cdf, init_index, lo, width, group, g_start, g_len, cum_hi, target):
    cdef const double[::1] icdf = np.ascontiguousarray(init_cdf, dtype=np.float64)
    cdef const int32_t[::1] iidx = np.ascontiguousarray(init_index, dtype=np.int32)
    cdef const double[:, ::1] lo_ = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[:, ::1] w_ = np.ascontiguousarray(width, dtype=np.float64)
    cdef const int32_t[:, ::1] grp = np.ascontiguousarray(group, dtype=np.int32)
    cdef const int64_t[::1] gs = np.ascontiguousarray(g_start, dtype=np.int64)
    cdef const int64_t[::1] gl = np.ascontiguousarray(g_len, dtype=np.int64)
    cdef const double[::1] cum = np.ascontiguousarray(cum_hi, dtype=np.float64)
    cdef const int32_t[::1] tgt = np.ascontiguousarray(target, dtype=np.int32)
    cdef int64_t n_stages = lo_.shape[0]
    hist = np.empty((n_samples, n_stages + 1), dtype=np.int32)
    cdef int32_t[:, ::1] h = hist
    cdef int64_t i, s, g, j
    cdef int32_t cur
    cdef uint64_t key
    cdef double pos
    with nogil:
        for i in range(n_samples):
            key = stream_key(seed, <uint64_t>(first_sample + i))
            j = search_hi(icdf, 0, icdf.shape[0], draw(key, 0))
            cur = iidx[j]
            h[i, 0] = cur
            for s in range(n_stages):
                pos = lo_[s, cur] + draw(key, s + 1) * w_[s, cur]
                g = grp[s, cur]
                cur = tgt[search_hi(cum, gs[g], gl[g], pos)]
                h[i, s + 1] = cur
    return hist


def route_walk(uint64_t seed, int64_t first_sample, int64_t counter_offset,
               partner, det_id, intensity, start_modes):
    cdef const int32_t[:, ::1] par = np.ascontiguousarray(partner, dtype=np.int32)
    cdef const int32_t[:, ::1] det = np.ascontiguousarray(det_id, dtype=np.int32)
    cdef const double[:, :, ::1] inten = np.ascontiguousarray(intensity, dtype=np.float64)
    cdef const int32_t[::1] start = np.ascontiguousarray(start_modes, dtype=np.int32)
    cdef int64_t n = inten.shape[0]
    cdef int64_t n_stages = inten.shape[1]
    cdef int64_t n_photons = start.shape[0]
    detected_arr = np.full((n, n_photons), -1, dtype=np.int32)
    final_arr = np.empty((n, n_photons), dtype=np.int32)
    broken_arr = np.zeros(n, dtype=np.uint8)
    cdef int32_t[:, ::1] detected = detected_arr
    cdef int32_t[:, ::1] final = final_arr
    cdef uint8_t[::1] broken = broken_arr
    cdef int64_t i, p, s
    cdef int32_t mode, other, d
    cdef uint64_t key
    cdef double u, ia, tot
    with nogil:
        for i in range(n):
            key = stream_key(seed, <uint64_t>(first_sample + i))
            for p in range(n_photons):
                mode = start[p]
                for s in range(n_stages):
                    u = draw(key, <uint64_t>(counter_offset + p * n_stages + s))
                    other = par[s, mode]
                    if other >= 0:
                        ia = inten[i, s, mode]
                        tot = ia + inten[i, s, other]
                        if tot <= 0.0:
                            broken[i] = 1
                        elif not (u * tot < ia):
                            mode = other
                    d = det[s, mode]
                    if d >= 0 and detected[i, p] < 0:
                        detected[i, p] = d
                final[i, p] = mode
    return detected_arr, final_arr, broken_arr
