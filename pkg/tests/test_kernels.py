import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ewsim import _kernels, bohmian, builders, emptywave
from ewsim._kernels import fallback, native

needs_native = pytest.mark.skipif(native is None, reason="compiled extension not built")


def test_backend_name():
    assert _kernels.BACKEND in ("native", "python")


def test_uniforms_range_and_independence():
    u = fallback.uniforms(1, np.arange(100_000, dtype=np.uint64), 0)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005
    v = fallback.uniforms(1, np.arange(100_000, dtype=np.uint64), 1)
    assert abs(np.corrcoef(u, v)[0, 1]) < 0.01


def test_streams_depend_on_seed_sample_and_counter():
    s = np.arange(4, dtype=np.uint64)
    a = fallback.uniforms(1, s, 0)
    assert not np.array_equal(a, fallback.uniforms(2, s, 0))
    assert not np.array_equal(a, fallback.uniforms(1, s, 1))
    assert len(set(a)) == 4


@needs_native
@given(seed=st.integers(0, 2**63), first=st.integers(0, 2**40), counter=st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_uniforms_bit_identical(seed, first, counter):
    s = np.arange(first, first + 64, dtype=np.uint64)
    assert np.array_equal(native.uniforms(seed, s, counter), fallback.uniforms(seed, s, counter))
    assert np.array_equal(native.stream_keys(seed, s), fallback.stream_keys(seed, s))


@needs_native
@pytest.mark.parametrize("circuit", [builders.hom(), builders.hom(tau=0.8), builders.croca_full(delta_phi=0.3),
                                     builders.appendix1(tau=0.5), builders.mz(1.1)])
def test_branch_walk_bit_identical(circuit):
    t = bohmian.branch_tables(circuit)
    args = (t.init_cdf, t.init_index, t.lo, t.width, t.group, t.g_start, t.g_len, t.cum_hi, t.target)
    a = native.branch_walk(9, 17, 5000, *args)
    b = fallback.branch_walk(9, 17, 5000, *args)
    assert np.array_equal(a, b)


@needs_native
@given(seed=st.integers(0, 2**32), phi=st.floats(0, 6.28))
@settings(max_examples=20, deadline=None)
def test_route_walk_bit_identical(seed, phi):
    c = builders.croca_full(delta_phi=phi)
    src = emptywave.source_waves(c)
    f = emptywave.propagate_fields(c, src.inputs, src.overlap)
    phases = 2 * np.pi * fallback.uniforms(seed, np.arange(2000, dtype=np.uint64), 0)
    inten = np.ascontiguousarray(emptywave._intensities(f, src.idler_wave, phases))
    partner, det = emptywave._junction_tables(c)
    starts = np.asarray(src.particles, dtype=np.int32)
    a = native.route_walk(seed, 0, 1, partner, det, inten, starts)
    b = fallback.route_walk(seed, 0, 1, partner, det, inten, starts)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_route_walk_flags_dark_junction():
    partner = np.array([[1, 0]], dtype=np.int32)
    det = np.array([[1, 2]], dtype=np.int32)
    inten = np.zeros((3, 1, 2))
    _, _, broken = fallback.route_walk(0, 0, 0, partner, det, inten, np.array([0], dtype=np.int32))
    assert broken.all()


def test_chunking_is_consistent():
    t = bohmian.branch_tables(builders.croca_full())
    args = (t.init_cdf, t.init_index, t.lo, t.width, t.group, t.g_start, t.g_len, t.cum_hi, t.target)
    whole = _kernels.branch_walk(3, 0, 1000, *args)
    parts = np.vstack([_kernels.branch_walk(3, 0, 400, *args), _kernels.branch_walk(3, 400, 600, *args)])
    assert np.array_equal(whole, parts)
