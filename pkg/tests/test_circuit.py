import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ewsim import builders
from ewsim.circuit import (
    Beamsplitter,
    Circuit,
    CircuitError,
    Detector,
    FockInput,
    PhaseShift,
    TwoPhotonSource,
    compile_unitary,
    is_unitary,
    make_modes,
    random_circuit,
    validate,
)

H = 1 / math.sqrt(2)


def two_modes(*elements, source=None):
    return Circuit(make_modes(["a", "b"]), tuple(elements), source)


def test_builders_validate():
    for c in (builders.hom(), builders.mz(), builders.croca_full(), builders.appendix1(), builders.laser()):
        assert validate(c).ok, validate(c).violations


def test_non_unitary_beamsplitter():
    rep = validate(two_modes(Beamsplitter(0, 1, 1, 1)))
    assert not rep.ok
    assert any("non-unitary element" in v for v in rep.violations)


def test_unknown_detector_mode():
    rep = validate(two_modes(Detector(5, 1, 0)))
    assert any("unknown mode" in v for v in rep.violations)


def test_mode_used_twice_in_stage():
    rep = validate(two_modes(Beamsplitter(0, 1, stage=0), PhaseShift(0, 0.1, 0)))
    assert any("two elements" in v for v in rep.violations)


def test_stage_order_cycle():
    rep = validate(two_modes(PhaseShift(0, 0.1, 2), PhaseShift(0, 0.1, 1)))
    assert any("cycle" in v for v in rep.violations)


def test_mode_after_detector():
    rep = validate(two_modes(Detector(0, 1, 0), PhaseShift(0, 0.2, 1)))
    assert any("after its detector" in v for v in rep.violations)


def test_dangling_mode():
    c = two_modes(Beamsplitter(0, 1), Detector(0, 1, 1), source=FockInput((1, 0)))
    rep = validate(c)
    assert any("dangling" in v for v in rep.violations)


def test_bad_two_photon_source():
    c = two_modes(Detector(0, 1, 0), Detector(1, 2, 0), source=TwoPhotonSource(0, 0))
    assert any("distinct" in v for v in validate(c).violations)


def test_single_beamsplitter_unitary():
    u = compile_unitary(two_modes(Beamsplitter(0, 1)))
    assert np.allclose(u, H * np.array([[1, 1j], [1j, 1]]), atol=1e-15)


def test_mz_transparent():
    u = compile_unitary(builders.mz(0.0))
    assert np.allclose(np.abs(u), [[0, 1], [1, 0]], atol=1e-12)


def test_empty_circuit_identity():
    assert np.array_equal(compile_unitary(two_modes()), np.eye(2))


def test_compile_rejects_invalid():
    with pytest.raises(CircuitError):
        compile_unitary(two_modes(Beamsplitter(0, 1, 1, 1)))


@given(n=st.integers(2, 6), depth=st.integers(0, 6), seed=st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_random_circuits_unitary(n, depth, seed):
    c = random_circuit(n, depth, np.random.default_rng(seed))
    assert validate(c).ok
    assert is_unitary(compile_unitary(c), 1e-12)


@given(n=st.integers(2, 5), seed=st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_composition(n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_circuit(n, 3, rng), random_circuit(n, 2, rng)
    both = compile_unitary(a.then(b))
    assert np.max(np.abs(both - compile_unitary(b) @ compile_unitary(a))) < 1e-12


def test_between_and_detectors():
    c = builders.croca_full()
    assert [d.detector_id for d in c.detectors()] == [1, 2, 3, 4]
    assert c.detector_mode(3) == builders.TAP_IDLER
    assert c.mode("signal") == builders.SIGNAL
    sub = c.between(3, 6)
    assert sub.n_stages == 3
