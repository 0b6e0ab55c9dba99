import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.stats import poisson

from ewsim import builders, fock
from ewsim.circuit import Beamsplitter, Circuit, FockInput, PacketParams, make_modes, random_circuit
from ewsim.fock import FockState, apply_element, phase_distance

H = 1 / math.sqrt(2)


def bs_state(occ):
    return apply_element(FockState.basis(occ), Beamsplitter(0, 1))


def test_single_photon_beamsplitter():
    out = bs_state((1, 0))
    expect = FockState({(1, 0): H, (0, 1): 1j * H}, 2)
    assert phase_distance(out, expect) < 1e-12


def test_hom_pair():
    out = bs_state((1, 1))
    expect = FockState({(2, 0): 1j * H, (0, 2): 1j * H}, 2)
    assert phase_distance(out.pruned(1e-14), expect) < 1e-12


def test_two_photons_one_port():
    # oracle: expand (a1^+ + i a2^+)^2 / (2 sqrt2) with sympy's operator algebra
    import sympy as sp
    a1, a2 = sp.symbols("a1 a2", commutative=True)
    poly = sp.Poly(sp.expand((a1 + sp.I * a2) ** 2 / (2 * sp.sqrt(2))), a1, a2)
    oracle = {}
    for (n1, n2), coef in poly.terms():
        oracle[(n1, n2)] = complex(coef) * math.sqrt(math.factorial(n1) * math.factorial(n2))
    out = bs_state((2, 0))
    assert phase_distance(out, FockState(oracle, 2)) < 1e-12
    assert out.amplitude((2, 0)) == pytest.approx(0.5)
    assert out.amplitude((1, 1)) == pytest.approx(1j * H)
    assert out.amplitude((0, 2)) == pytest.approx(-0.5)


def test_vacuum_through_circuit():
    c = builders.croca_full().with_source(None)
    v = FockState.vacuum(4)
    assert fock.propagate(v, c).amplitudes == v.amplitudes


def test_mz_transparent_single_photon():
    d = fock.exact_distribution(builders.mz(0.0))
    assert d.fires(1) == pytest.approx(1.0, abs=1e-12)


def test_unknown_mode_and_nmax():
    with pytest.raises(fock.FockError):
        apply_element(FockState.basis((1, 0)), Beamsplitter(0, 3))
    big = FockState({(5, 0): 1.0}, 2, n_max=5)
    big.n_max = 4
    with pytest.raises(fock.FockError):
        apply_element(big, Beamsplitter(0, 1))


def _random_state(rng, modes, n):
    amps = {}
    for occ in fock._occupations(modes, n):
        if sum(occ) == n:
            amps[occ] = complex(rng.normal(), rng.normal())
    return FockState(amps, modes, 1, n).normalized()


@given(m=st.integers(2, 4), n=st.integers(1, 3), seed=st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_norm_and_number_preserved(m, n, seed):
    rng = np.random.default_rng(seed)
    s = _random_state(rng, m, n)
    c = random_circuit(m, 3, rng)
    out = fock.propagate(s, c)
    assert abs(out.norm() - 1) < 1e-10
    assert set(out.pruned(1e-12).photon_number_distribution()) == {n}


def test_packet_overlap_oracle():
    sigma, tau = 1.3, 0.9
    a, b = PacketParams(0.0, sigma), PacketParams(tau, sigma)

    def env(t, p):
        return (p.bandwidth ** 2 / math.pi) ** 0.25 * math.exp(-p.bandwidth ** 2 * (t - p.center_time) ** 2 / 2)

    v, _ = integrate.quad(lambda t: env(t, a) * env(t, b), -30, 30)
    assert fock.packet_overlap(a, b) == pytest.approx(v, abs=1e-12)
    assert fock.packet_overlap(a, b) == pytest.approx(math.exp(-sigma ** 2 * tau ** 2 / 4), abs=1e-14)


def test_two_photon_source_limits():
    same = fock.two_photon_source(0, 1)
    assert same.overlap == 1.0 and same.state.internal == 1
    far = fock.two_photon_source(0, 1, (PacketParams(0, 1), PacketParams(100, 1)))
    assert abs(far.overlap) < 1e-300 or far.overlap == 0.0
    with pytest.raises(fock.FockError):
        fock.two_photon_source(1, 1)


def test_hom_dip_values():
    dip = fock.hom_dip(1.0, [0.0, 2.0, -2.0, 50.0])
    assert dip[0] < 1e-10
    assert dip[1] == pytest.approx(0.5 * (1 - math.exp(-2)), abs=1e-12)
    assert dip[1] == pytest.approx(dip[2], abs=1e-14)
    assert dip[3] == pytest.approx(0.5, abs=1e-12)


def test_hom_dip_monotone():
    taus = np.linspace(0, 5, 21)
    dip = fock.hom_dip(0.8, taus)
    assert np.all(np.diff(dip) > 0)


def test_full_device_bookkeeping():
    d = fock.exact_distribution(builders.croca_full())
    assert d.probability(lambda c: c[3] == 1 and c[4] == 1) == pytest.approx(0.25, abs=1e-12)
    assert d.probability(lambda c: c[3] == 0 and c[4] == 0) == pytest.approx(0.25, abs=1e-12)
    both = fock.conditional_distribution(d, lambda c: c[3] == 0 and c[4] == 0)
    assert both.probability(lambda c: c[1] == 1 and c[2] == 1) == pytest.approx(1.0, abs=1e-12)


def test_conditional_on_tap():
    d = fock.exact_distribution(builders.croca_full())
    only3 = fock.conditional_distribution(d, lambda c: c[3] == 1 and c[4] == 0, "3 only")
    assert only3.fires(2) == pytest.approx(1.0, abs=1e-12)
    assert only3.fires(1) == pytest.approx(0.0, abs=1e-12)
    same = fock.conditional_distribution(d, lambda c: True)
    assert same.probs == pytest.approx(d.probs)
    with pytest.raises(fock.ZeroProbabilityError):
        fock.conditional_distribution(d, lambda c: c[1] == 2 and c[3] == 1)


def test_appendix1_joint_quarter():
    d = fock.exact_distribution(builders.appendix1(delta_theta=1.234))
    xor = lambda c: (c[3] > 0) != (c[4] > 0)
    assert d.probability(lambda c: c[1] > 0 and xor(c)) == pytest.approx(0.25, abs=1e-12)
    assert d.probability(lambda c: c[2] > 0 and xor(c)) == pytest.approx(0.25, abs=1e-12)


def test_mz_fringe_visibility_both_in_mz():
    phis = np.linspace(0, math.pi, 17)
    vals = []
    for phi in phis:
        d = fock.exact_distribution(builders.croca_full(delta_phi=phi))
        both = fock.conditional_distribution(d, lambda c: c[3] == 0 and c[4] == 0)
        vals.append(both.probability(lambda c: c[1] == 1 and c[2] == 1))
    assert np.allclose(vals, np.cos(phis) ** 2, atol=1e-12)
    assert max(vals) == pytest.approx(1.0) and min(vals) < 1e-12


def test_laser_amplitudes_closed_form():
    a, th, ph = 0.7 - 0.2j, 0.4, 1.9
    out = fock.propagate_coherent(None, builders.laser(a, th, ph)).alpha
    e = np.exp
    want = {
        1: 1j * a / 4 * (-1 + e(1j * th) + e(1j * ph) + e(1j * (th + ph))),
        2: 1j * a / 4 * (-1 + e(1j * th) - e(1j * ph) - e(1j * (th + ph))),
        3: 1j * a / 2,
        4: a / 2,
    }
    c = builders.laser(a, th, ph)
    got = np.array([out[c.detector_mode(d)] for d in (1, 2, 3, 4)])
    ref = np.array([want[d] for d in (1, 2, 3, 4)])
    g = np.vdot(got, ref) / abs(np.vdot(got, ref))
    assert np.max(np.abs(got * g - ref)) < 1e-12


def test_laser_equal_split_and_vacuum():
    c = builders.laser(1.3, 0.0, 0.0)
    stats = fock.coherent_click_statistics(fock.propagate_coherent(None, c), c)
    assert all(v == pytest.approx(1.3 ** 2 / 4, abs=1e-12) for v in stats.means.values())
    z = builders.laser(0.0)
    zs = fock.coherent_click_statistics(fock.propagate_coherent(None, z), z)
    assert zs.joint_probability({1: 0, 2: 0, 3: 0, 4: 0}) == 1.0


def test_coherent_matches_fock_expansion():
    c = builders.laser(0.5, 0.8, 2.1)
    n_max = 6
    means = fock.coherent_click_statistics(fock.propagate_coherent(None, c), c).means
    raw = fock.joint_counts(fock.propagate(fock.prepare(c, n_max), c), c)
    tail = 1 - poisson.cdf(n_max, 0.25)
    assert tail < 1e-6
    ids = [d.detector_id for d in c.detectors()]
    for pat, p in raw.items():
        prod = np.prod([poisson.pmf(n, means[k]) for k, n in zip(ids, pat)])
        assert abs(p - prod) <= 1e-6


def test_factorization():
    assert fock.factorization_check([1.0]) < 1e-12
    assert fock.factorization_check([H, H]) < 1e-12
    rng = np.random.default_rng(3)
    c = rng.normal(size=5) + 1j * rng.normal(size=5)
    assert fock.factorization_check(c / np.linalg.norm(c)) < 1e-12
    hom_out = fock.propagate(fock.prepare(builders.hom()), builders.hom())
    assert fock.product_residual(hom_out) >= 0.4


def test_product_residual_zero_for_products():
    s = fock.two_photon_from_spectrum([0.6, 0.8j])
    assert fock.product_residual(s) < 1e-12


def test_nonnormalized_spectrum_rejected():
    with pytest.raises(fock.FockError):
        fock.factorization_check([1.0, 1.0])


def test_conditional_state_product():
    psi = FockState({(1, 0, 1, 0): 1 / math.sqrt(2), (1, 0, 0, 1): 1 / math.sqrt(2)}, 4)
    cond = fock.conditional_state(psi, 0)
    expect = FockState({(0, 0, 1, 0): 1 / math.sqrt(2), (0, 0, 0, 1): 1 / math.sqrt(2)}, 4)
    assert phase_distance(cond, expect) < 1e-14
    with pytest.raises(fock.ZeroProbabilityError):
        fock.conditional_state(psi, 1)


def test_phase_distance():
    a = FockState({(1, 0): 0.6, (0, 1): 0.8j}, 2)
    assert phase_distance(a, a.scaled(np.exp(0.7j))) < 1e-13
    b = FockState({(1, 0): 0.6, (0, 1): -0.8j}, 2)
    assert phase_distance(a, b) > 0.5


def test_full_device_phase_invariant():
    # (xy * uv) / (xu * yv) is unchanged by any per-arm phase or global phase;
    # unitary propagation of the tapped device fixes it to +1
    c = builders.croca_full()
    out = fock.propagate(fock.prepare(c), c)
    a = out.amplitude
    ratio = a((1, 1, 0, 0)) * a((0, 0, 1, 1)) / (a((1, 0, 1, 0)) * a((0, 1, 0, 1)))
    assert ratio == pytest.approx(1.0, abs=1e-12)
    for occ in ((1, 1, 0, 0), (1, 0, 1, 0), (0, 1, 0, 1), (0, 0, 1, 1)):
        assert abs(a(occ)) == pytest.approx(0.5, abs=1e-12)
