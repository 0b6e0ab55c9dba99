"""Exact truncated-Fock-space engine for photon-number and coherent states.

This is the standard (collapse) quantum-mechanical reference used by every
other engine.  States are sparse maps from occupation vectors to complex
amplitudes.  Partial distinguishability is carried by ``internal`` temporal
sub-modes: flat mode ``m * internal + k`` is spatial mode ``m`` in internal
state ``k``, and every optical element acts as ``U (x) 1`` on the internal
index.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import optimize
from scipy.stats import poisson

from . import builders
from .circuit import (
    Beamsplitter,
    Circuit,
    CoherentSource,
    Delay,
    Detector,
    Element,
    FockInput,
    PacketParams,
    PhaseShift,
    TwoPhotonSource,
    compile_unitary,
    require_valid,
)

DEFAULT_N_MAX = 4
NORM_TOL = 1e-10


class FockError(ValueError):
    pass


class ZeroProbabilityError(FockError):
    pass


Occupation = tuple[int, ...]


@dataclass
class FockState:
    amplitudes: dict[Occupation, complex]
    modes: int
    internal: int = 1
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        width = self.modes * self.internal
        for occ in self.amplitudes:
            if len(occ) != width:
                raise FockError(f"occupation {occ} does not span {width} flat modes")
            if sum(occ) > self.n_max:
                raise FockError(f"occupation {occ} exceeds n_max={self.n_max}")

    @classmethod
    def vacuum(cls, modes: int, internal: int = 1, n_max: int = DEFAULT_N_MAX) -> "FockState":
        return cls({(0,) * (modes * internal): 1.0 + 0j}, modes, internal, n_max)

    @classmethod
    def basis(cls, occupation: Iterable[int], internal: int = 1,
              n_max: int = DEFAULT_N_MAX, amplitude: complex = 1.0) -> "FockState":
        occ = tuple(int(n) for n in occupation)
        if len(occ) % internal:
            raise FockError("occupation length must be a multiple of internal")
        return cls({occ: complex(amplitude)}, len(occ) // internal, internal, n_max)

    @property
    def flat_modes(self) -> int:
        return self.modes * self.internal

    def flat(self, mode: int, k: int = 0) -> int:
        return mode * self.internal + k

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalized(self) -> "FockState":
        n = self.norm()
        if n == 0:
            raise ZeroProbabilityError("cannot normalize a zero state")
        return self.scaled(1 / n)

    def scaled(self, factor: complex) -> "FockState":
        return FockState({k: v * factor for k, v in self.amplitudes.items()},
                         self.modes, self.internal, self.n_max)

    def spatial_counts(self, occ: Occupation) -> tuple[int, ...]:
        k = self.internal
        return tuple(sum(occ[m * k:(m + 1) * k]) for m in range(self.modes))

    def photon_number_distribution(self) -> dict[int, float]:
        out: dict[int, float] = defaultdict(float)
        for occ, a in self.amplitudes.items():
            out[sum(occ)] += abs(a) ** 2
        return dict(out)

    def amplitude(self, occupation: Iterable[int]) -> complex:
        return self.amplitudes.get(tuple(occupation), 0j)

    def pruned(self, tol: float = 1e-15) -> "FockState":
        return FockState({k: v for k, v in self.amplitudes.items() if abs(v) > tol},
                         self.modes, self.internal, self.n_max)


def phase_distance(a: FockState, b: FockState) -> float:
    """``min_phi max_n |a_n - exp(i phi) b_n|`` over the union of supports."""
    keys = sorted(set(a.amplitudes) | set(b.amplitudes))
    va = np.array([a.amplitude(k) for k in keys])
    vb = np.array([b.amplitude(k) for k in keys])
    if not len(keys):
        return 0.0
    overlap = np.vdot(vb, va)
    phi0 = cmath.phase(overlap) if abs(overlap) > 0 else 0.0

    def cost(phi):
        return float(np.max(np.abs(va - np.exp(1j * phi) * vb)))

    res = optimize.minimize_scalar(cost, bounds=(phi0 - 0.5, phi0 + 0.5), method="bounded",
                                   options={"xatol": 1e-14})
    return min(cost(phi0), float(res.fun))


# --- element application -------------------------------------------------------------


def _expand(local: Occupation, u: np.ndarray) -> dict[Occupation, complex]:
    """Image of the normalized local Fock state ``|local>`` under ``a_j^+ -> sum_k u[k, j] a_k^+``."""
    n_loc = len(local)
    coeff = 1.0 / math.sqrt(math.prod(math.factorial(n) for n in local))
    poly: dict[Occupation, complex] = {(0,) * n_loc: coeff}
    for j, n in enumerate(local):
        for _ in range(n):
            nxt: dict[Occupation, complex] = defaultdict(complex)
            for mono, c in poly.items():
                for k in range(n_loc):
                    if u[k, j] == 0:
                        continue
                    m = list(mono)
                    m[k] += 1
                    nxt[tuple(m)] += c * u[k, j]
            poly = nxt
    return {m: c * math.sqrt(math.prod(math.factorial(x) for x in m)) for m, c in poly.items()}


def apply_local(state: FockState, flat_modes: list[int], u: np.ndarray) -> FockState:
    """Apply a unitary ``u`` acting on the listed flat modes."""
    out: dict[Occupation, complex] = defaultdict(complex)
    cache: dict[Occupation, dict[Occupation, complex]] = {}
    for occ, amp in state.amplitudes.items():
        local = tuple(occ[m] for m in flat_modes)
        if not any(local):
            out[occ] += amp
            continue
        image = cache.get(local)
        if image is None:
            image = cache[local] = _expand(local, u)
        base = list(occ)
        for mono, c in image.items():
            for m, n in zip(flat_modes, mono):
                base[m] = n
            out[tuple(base)] += amp * c
    return FockState(dict(out), state.modes, state.internal, state.n_max)


def apply_element(state: FockState, element: Element) -> FockState:
    """Apply one passive element; delays and detectors leave amplitudes unchanged."""
    for m in element.modes:
        if not 0 <= m < state.modes:
            raise FockError(f"unknown mode {m}")
    if any(sum(occ) > state.n_max for occ in state.amplitudes):
        raise FockError("input state exceeds n_max")
    if isinstance(element, (Delay, Detector)):
        return state
    if isinstance(element, PhaseShift):
        ph = cmath.exp(1j * element.phase)
        k = state.internal
        lo, hi = element.mode * k, (element.mode + 1) * k
        return FockState({occ: a * ph ** sum(occ[lo:hi]) for occ, a in state.amplitudes.items()},
                         state.modes, state.internal, state.n_max)
    if isinstance(element, Beamsplitter):
        u = element.matrix()
        for k in range(state.internal):
            state = apply_local(state, [state.flat(element.mode_a, k), state.flat(element.mode_b, k)], u)
        return state.pruned()
    raise FockError(f"unsupported element {element!r}")


def propagate(state: FockState, circuit: Circuit, start: int = 0, stop: int | None = None) -> FockState:
    """Apply the circuit's stages ``start <= stage < stop`` in order."""
    require_valid(circuit)
    if state.modes != circuit.n_modes:
        raise FockError("state and circuit disagree on the number of modes")
    stop = circuit.n_stages if stop is None else stop
    for el in circuit.elements:
        if start <= el.stage < stop:
            state = apply_element(state, el)
    return state


# --- sources -----------------------------------------------------------------------


def packet_overlap(a: PacketParams, b: PacketParams) -> float:
    """Overlap of two normalized Gaussian envelopes (real for real envelopes)."""
    s1, s2 = a.bandwidth, b.bandwidth
    d = a.center_time - b.center_time
    pref = math.sqrt(2 * s1 * s2 / (s1 ** 2 + s2 ** 2))
    return pref * math.exp(-(s1 ** 2 * s2 ** 2) * d ** 2 / (2 * (s1 ** 2 + s2 ** 2)))


@dataclass
class TwoPhotonPreparation:
    state: FockState
    overlap: float


def two_photon_source(idler: int, signal: int, packets=(PacketParams(), PacketParams()),
                      relative_phase=0.0, n_modes: int = 2,
                      n_max: int = DEFAULT_N_MAX) -> TwoPhotonPreparation:
    """One photon in each of ``idler`` and ``signal`` with global phase ``exp(i relative_phase)``.

    When the packets are not identical the signal photon is split over two
    internal temporal modes so that its overlap with the idler is ``V``.
    """
    if idler == signal:
        raise FockError("idler and signal must be distinct modes")
    v = packet_overlap(*packets)
    phase = 1.0 if isinstance(relative_phase, str) else cmath.exp(1j * relative_phase)
    if abs(v) >= 1 - 1e-15:
        occ = [0] * n_modes
        occ[idler] = occ[signal] = 1
        return TwoPhotonPreparation(FockState({tuple(occ): phase}, n_modes, 1, n_max), 1.0)
    amps = {}
    for k, weight in ((0, v), (1, math.sqrt(max(0.0, 1 - v * v)))):
        occ = [0] * (2 * n_modes)
        occ[2 * idler] = 1
        occ[2 * signal + k] += 1
        if weight:
            amps[tuple(occ)] = phase * weight
    return TwoPhotonPreparation(FockState(amps, n_modes, 2, n_max), v)


def coherent_fock_state(alpha: Iterable[complex], n_max: int) -> FockState:
    """Multi-mode coherent product state truncated at total photon number ``n_max``."""
    alpha = [complex(a) for a in alpha]
    m = len(alpha)
    pref = math.exp(-sum(abs(a) ** 2 for a in alpha) / 2)
    amps = {}
    for occ in _occupations(m, n_max):
        c = pref
        for a, n in zip(alpha, occ):
            c *= a ** n / math.sqrt(math.factorial(n))
        if c != 0:
            amps[occ] = c
    return FockState(amps, m, 1, n_max)


def _occupations(m: int, n_max: int) -> Iterable[Occupation]:
    if m == 0:
        yield ()
        return
    for n in range(n_max + 1):
        for rest in _occupations(m - 1, n_max - n):
            yield (n,) + rest


def prepare(circuit: Circuit, n_max: int = DEFAULT_N_MAX) -> FockState:
    """Fock state injected by the circuit's source.

    Delays on a source mode that act before the first splitter on that mode
    shift the corresponding packet.
    """
    src = circuit.source
    if isinstance(src, FockInput):
        return FockState({tuple(src.occupation): 1.0 + 0j}, circuit.n_modes, 1,
                         max(n_max, sum(src.occupation)))
    if isinstance(src, CoherentSource):
        return coherent_fock_state(src.amplitudes, n_max)
    if isinstance(src, TwoPhotonSource):
        shifts = source_delays(circuit)
        packets = tuple(PacketParams(p.center_time + shifts[m], p.bandwidth, p.envelope)
                        for p, m in zip(src.packets, src.modes))
        return two_photon_source(src.idler_mode, src.signal_mode, packets,
                                 src.relative_phase, circuit.n_modes, n_max).state
    raise FockError("circuit has no source")


def source_delays(circuit: Circuit) -> dict[int, float]:
    shifts = {m.index: 0.0 for m in circuit.modes}
    mixed: set[int] = set()
    for el in circuit.elements:
        if isinstance(el, Beamsplitter):
            mixed.update(el.modes)
        elif isinstance(el, Delay) and el.mode not in mixed:
            shifts[el.mode] += el.delay
    return shifts


# --- detection ---------------------------------------------------------------------


Pattern = tuple[int, ...]


@dataclass
class ClickDistribution:
    """Probabilities of photon-count patterns, one count per detector in ``detectors`` order."""

    detectors: tuple[int, ...]
    probs: dict[Pattern, float]
    condition: str | None = None
    n_samples: int | None = None

    def counts(self, pattern: Pattern) -> dict[int, int]:
        return dict(zip(self.detectors, pattern))

    def total(self) -> float:
        return float(sum(self.probs.values()))

    def probability(self, predicate: Callable[[dict[int, int]], bool]) -> float:
        return float(sum(p for pat, p in self.probs.items() if predicate(self.counts(pat))))

    def stderr(self, predicate: Callable[[dict[int, int]], bool]) -> float:
        """Binomial standard error; zero for exact distributions."""
        if not self.n_samples:
            return 0.0
        p = self.probability(predicate)
        return math.sqrt(max(p * (1 - p), 0.0) / self.n_samples)

    def fires(self, detector: int) -> float:
        return self.probability(lambda c: c[detector] > 0)

    def pattern_probability(self, **counts: int) -> float:
        want = {int(k.lstrip("d")): v for k, v in counts.items()}
        return self.probability(lambda c: all(c[d] == n for d, n in want.items()))


def joint_counts(state: FockState, circuit: Circuit) -> dict[Pattern, float]:
    """Raw (unnormalized) probabilities of detector count patterns."""
    dets = circuit.detectors()
    mode_of = [d.mode for d in dets]
    detected = set(mode_of)
    out: dict[Pattern, float] = defaultdict(float)
    for occ, a in state.amplitudes.items():
        p = abs(a) ** 2
        if p == 0:
            continue
        spatial = state.spatial_counts(occ)
        if any(n and m not in detected for m, n in enumerate(spatial)):
            raise FockError(f"photons left in undetected modes: {spatial}")
        out[tuple(spatial[m] for m in mode_of)] += p
    return dict(out)


def detection_distribution(state: FockState, circuit: Circuit) -> ClickDistribution:
    probs = joint_counts(state, circuit)
    total = sum(probs.values())
    if abs(total - 1) > NORM_TOL:
        raise FockError(f"state not normalized at the detector plane (total {total})")
    return ClickDistribution(tuple(d.detector_id for d in circuit.detectors()), probs)


def conditional_distribution(dist: ClickDistribution, condition: Callable[[dict[int, int]], bool],
                             description: str = "condition") -> ClickDistribution:
    kept = {pat: p for pat, p in dist.probs.items() if condition(dist.counts(pat))}
    z = sum(kept.values())
    if z <= 0:
        raise ZeroProbabilityError(f"condition {description!r} has zero probability")
    n = None if dist.n_samples is None else int(round(dist.n_samples * z))
    return ClickDistribution(dist.detectors, {k: v / z for k, v in kept.items()}, description, n)


def exact_distribution(circuit: Circuit, n_max: int = DEFAULT_N_MAX) -> ClickDistribution:
    """Source -> propagate -> detector statistics."""
    return detection_distribution(propagate(prepare(circuit, n_max), circuit), circuit)


def hom_dip(sigma: float, taus: Iterable[float]) -> np.ndarray:
    """Coincidence probability between detectors 1 and 2 versus signal delay."""
    if not sigma > 0:
        raise FockError("sigma must be positive")
    out = []
    for tau in taus:
        dist = exact_distribution(builders.hom(tau=float(tau), sigma=sigma))
        out.append(dist.probability(lambda c: c[1] == 1 and c[2] == 1))
    return np.array(out)


# --- coherent states ---------------------------------------------------------------


@dataclass
class CoherentField:
    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=complex)
        if not np.all(np.isfinite(self.alpha)):
            raise FockError("coherent amplitudes must be finite")


def propagate_coherent(field: CoherentField | None, circuit: Circuit) -> CoherentField:
    """``alpha_out = U alpha_in``; the image of a coherent product is a coherent product."""
    require_valid(circuit)
    if field is None:
        if not isinstance(circuit.source, CoherentSource):
            raise FockError("circuit has no coherent source")
        field = CoherentField(circuit.source.amplitudes)
    return CoherentField(compile_unitary(circuit) @ field.alpha)


@dataclass
class CoherentClickStatistics:
    means: dict[int, float]
    independent: bool = True

    def joint_probability(self, counts: Mapping[int, int]) -> float:
        return float(np.prod([poisson.pmf(counts[d], mu) for d, mu in self.means.items()]))


def coherent_click_statistics(field: CoherentField, circuit: Circuit) -> CoherentClickStatistics:
    """Per-detector Poisson means ``|alpha_i|^2``; counts are independent for a product state."""
    means = {d.detector_id: float(abs(field.alpha[d.mode]) ** 2) for d in circuit.detectors()}
    return CoherentClickStatistics(means, independent=True)


# --- wave-function factorization ---------------------------------------------------


def two_photon_amplitude(state: FockState) -> np.ndarray:
    """``psi(m1, m2) = <0| a_m1 a_m2 |state> / sqrt(2)`` over flat modes."""
    n = state.flat_modes
    psi = np.zeros((n, n), dtype=complex)
    for occ, a in state.amplitudes.items():
        if sum(occ) != 2:
            continue
        modes = [m for m, k in enumerate(occ) for _ in range(k)]
        m1, m2 = modes
        if m1 == m2:
            psi[m1, m1] += math.sqrt(2) * a / math.sqrt(2)
        else:
            psi[m1, m2] += a / math.sqrt(2)
            psi[m2, m1] += a / math.sqrt(2)
    return psi


def two_photon_from_spectrum(c: Iterable[complex]) -> FockState:
    """``(sum_m c_m a_m^+)^2 / sqrt(2) |0>`` in a discrete mode basis."""
    c = [complex(x) for x in c]
    m = len(c)
    amps = {}
    for i in range(m):
        for j in range(i, m):
            occ = [0] * m
            occ[i] += 1
            occ[j] += 1
            amps[tuple(occ)] = c[i] * c[i] if i == j else math.sqrt(2) * c[i] * c[j]
    return FockState(amps, m, 1, 2)


def factorization_check(c: Iterable[complex]) -> float:
    """Max deviation of the two-photon amplitude from ``c(m1) c(m2)``."""
    c = np.asarray(list(c), dtype=complex)
    if abs(np.linalg.norm(c) - 1) > NORM_TOL:
        raise FockError("spectrum must be normalized")
    psi = two_photon_amplitude(two_photon_from_spectrum(c))
    return float(np.max(np.abs(psi - np.outer(c, c))))


def product_residual(state: FockState) -> float:
    """Max deviation of a two-photon state from its best symmetric product ``c c^T``."""
    psi = two_photon_amplitude(state)
    u, s, _ = np.linalg.svd(psi)
    vec = u[:, 0]
    lam = vec.conj() @ psi @ vec.conj()
    c = np.sqrt(lam + 0j) * vec
    return float(np.max(np.abs(psi - np.outer(c, c))))


# --- conditional wave function -----------------------------------------------------


def annihilate(state: FockState, mode: int) -> FockState:
    """Apply ``a_mode`` (spatial mode, requires a single internal mode)."""
    if state.internal != 1:
        raise FockError("conditioning needs a single internal mode per spatial mode")
    out: dict[Occupation, complex] = defaultdict(complex)
    for occ, a in state.amplitudes.items():
        n = occ[mode]
        if n:
            new = list(occ)
            new[mode] -= 1
            out[tuple(new)] += math.sqrt(n) * a
    return FockState(dict(out), state.modes, 1, state.n_max)


def conditional_state(state: FockState, mode: int) -> FockState:
    """Renormalized state of the remaining photons after one is found in ``mode``."""
    reduced = annihilate(state, mode)
    if reduced.norm() <= 1e-14:
        raise ZeroProbabilityError(f"no amplitude with a photon in mode {mode}")
    return reduced.normalized()
