import math

import numpy as np
import pytest

from ewsim import builders, emptywave, fock
from ewsim.circuit import Beamsplitter, Circuit, Detector, make_modes
from ewsim.emptywave import Fixed, ModelBreakdown, ParticleState, UniformRandom, route_particle

H = 1 / math.sqrt(2)


def splitter():
    return Circuit(make_modes(["a", "b"]), (Beamsplitter(0, 1), Detector(0, 1, 1), Detector(1, 2, 1)))


def test_splitter_internal_amplitudes():
    f = emptywave.propagate_fields(splitter(), [[H, H]])
    assert np.allclose(f.coherent_sum(1), [(1 + 1j) / 2, (1 + 1j) / 2], atol=1e-15)


def test_relative_phase_darkens_an_arm():
    f = emptywave.propagate_fields(splitter(), [[1j * H, H]])
    assert f.intensity(1) == pytest.approx([1.0, 0.0], abs=1e-15)


def test_partial_overlap_intensity():
    f = emptywave.propagate_fields(splitter(), [[1, 0], [0, 1]], [[1, 0.3], [0.3, 1]])
    # cross term 2 Re(conj(t) r V) vanishes for the symmetric splitter
    assert f.intensity(1) == pytest.approx([1.0, 1.0], abs=1e-15)
    assert f.intensity(0) == pytest.approx([1.0, 1.0], abs=1e-15)


def test_empty_circuit_is_identity():
    c = Circuit(make_modes(["a", "b"]), ())
    f = emptywave.propagate_fields(c, [[0.3, 0.4j]])
    assert f.n_stages == 0
    assert np.array_equal(f.coherent_sum(), np.array([0.3, 0.4j]))


def test_field_linearity():
    c = builders.croca_full().with_source(None)
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4))
    fa = emptywave.propagate_fields(c, [a]).waves
    fb = emptywave.propagate_fields(c, [b]).waves
    fab = emptywave.propagate_fields(c, [2 * a - 1j * b]).waves
    assert np.max(np.abs(fab - (2 * fa - 1j * fb))) < 1e-14


def test_route_particle_cases():
    p = ParticleState(0)
    assert route_particle(p, [0, 1], [1, 1], 0.49).mode == 0
    assert route_particle(p, [0, 1], [1, 1], 0.51).mode == 1
    assert route_particle(p, [0, 1], [1, 0], 0.999).mode == 0
    assert route_particle(p, [0, 1], [3, 1], 0.74).mode == 0
    assert route_particle(p, [0, 1], [3, 1], 0.76).mode == 1
    with pytest.raises(ModelBreakdown):
        route_particle(p, [0, 1], [0, 0], 0.5)


def test_coherence_from():
    assert emptywave.coherence_from("uniform-random") == UniformRandom()
    assert emptywave.coherence_from(0.5) == Fixed(0.5)
    assert emptywave.coherence_from("1.5") == Fixed(1.5)


def test_simulate_matches_analytic():
    c = builders.croca_full(delta_phi=0.4)
    n = 40_000
    mc = emptywave.simulate(c, Fixed(0.3), n, seed=2).joint
    ex = emptywave.analytic(c, Fixed(0.3)).joint
    for pat, p in ex.probs.items():
        assert abs(mc.probs.get(pat, 0.0) - p) < 5 * math.sqrt(p * (1 - p) / n) + 1e-12
    assert sum(ex.probs.values()) == pytest.approx(1.0, abs=1e-12)


def test_simulate_deterministic_and_chunked():
    c = builders.appendix1()
    a = emptywave.simulate(c, UniformRandom(), 2000, seed=5).joint.probs
    b = emptywave.simulate(c, UniformRandom(), 2000, seed=5).joint.probs
    assert a == b


def test_croca_conditional_half():
    for coh in (Fixed(0.0), Fixed(math.pi / 2), UniformRandom()):
        d = emptywave.run_croca(coh, exact=True)
        assert d.fires(1) == pytest.approx(0.5, abs=1e-9)
        assert d.fires(2) == pytest.approx(0.5, abs=1e-9)


def test_croca_conditional_normalized():
    d = emptywave.run_croca(Fixed(0.2), delta_phi=1.0, n_samples=5000, seed=1)
    assert sum(d.probs.values()) == pytest.approx(1.0, abs=1e-12)


def test_appendix1_fringe_fixed_vs_random():
    thetas = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    fixed = emptywave.run_appendix1(Fixed(0.0), thetas, exact=True)
    assert fixed.visibility > 0.999
    rand = emptywave.run_appendix1(UniformRandom(), thetas, exact=True)
    assert rand.visibility < 1e-9
    assert np.allclose(rand.p1, 0.5, atol=1e-9)


def test_hom_at_zero_delay():
    d = emptywave.analytic(builders.hom(), Fixed(0.0)).joint
    assert d.probability(lambda cc: cc[1] == 1 and cc[2] == 1) == pytest.approx(0.5, abs=1e-12)


def test_laser_field_matches_coherent_propagation():
    c = builders.laser(0.8 + 0.3j, 0.6, 1.7)
    src = emptywave.source_waves(c)
    f = emptywave.propagate_fields(c, src.inputs, src.overlap)
    alpha = fock.propagate_coherent(None, c).alpha
    assert np.max(np.abs(f.coherent_sum() - alpha)) < 1e-12
