"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--samples N] [--repeat R]

Both backends must return identical arrays; the script checks that before
reporting timings.
"""

import argparse
import time

import numpy as np

from ewsim import bohmian, builders, emptywave
from ewsim._kernels import fallback, native


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def branch_case(n):
    t = bohmian.branch_tables(builders.croca_full(tau=0.7))
    args = (t.init_cdf, t.init_index, t.lo, t.width, t.group, t.g_start, t.g_len, t.cum_hi, t.target)
    return lambda k: k.branch_walk(42, 0, n, *args)


def route_case(n):
    c = builders.croca_full(delta_phi=0.4)
    src = emptywave.source_waves(c)
    f = emptywave.propagate_fields(c, src.inputs, src.overlap)
    phases = 2 * np.pi * fallback.uniforms(42, np.arange(n, dtype=np.uint64), 0)
    inten = np.ascontiguousarray(emptywave._intensities(f, src.idler_wave, phases))
    partner, det = emptywave._junction_tables(c)
    starts = np.asarray(src.particles, dtype=np.int32)
    return lambda k: k.route_walk(42, 0, 1, partner, det, inten, starts)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if native is None:
        raise SystemExit("compiled extension not available; build with pip install -e .")
    samples = np.arange(args.samples, dtype=np.uint64)
    cases = {
        "uniforms": lambda k: k.uniforms(42, samples, 3),
        "branch_walk": branch_case(args.samples),
        "route_walk": route_case(args.samples),
    }
    print(f"{'kernel':<12} {'samples':>9} {'python s':>10} {'native s':>10} {'speedup':>8}")
    for name, run in cases.items():
        tp, outp = best_of(lambda: run(fallback), args.repeat)
        tn, outn = best_of(lambda: run(native), args.repeat)
        outs_p = outp if isinstance(outp, tuple) else (outp,)
        outs_n = outn if isinstance(outn, tuple) else (outn,)
        if not all(np.array_equal(a, b) for a, b in zip(outs_p, outs_n)):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<12} {args.samples:>9} {tp:>10.4f} {tn:>10.4f} {tp / tn:>7.1f}x")


if __name__ == "__main__":
    main()
