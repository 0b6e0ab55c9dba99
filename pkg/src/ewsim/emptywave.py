"""Three-dimensional empty-wave hybrid model.

Each photon is a particle riding on its own classical wave.  Waves propagate
linearly through every branch of the network and never collapse, so a wave
keeps interfering after its particle has been detected elsewhere.  At a
splitter a particle picks an output with probability equal to that output's
share of the local intensity, where the intensity of mode ``m`` is

    I_m = sum_{w, w'} conj(A_w[m]) G[w, w'] A_w'[m]

with ``A_w`` the amplitude of wave ``w`` and ``G`` the overlap between the
wave envelopes (``G = 1`` everywhere for identical synchronized packets).
The idler wave carries the relative phase ``exp(i delta_theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from . import _kernels
from .circuit import (
    Beamsplitter,
    Circuit,
    CoherentSource,
    FockInput,
    TwoPhotonSource,
    element_unitary,
    require_valid,
)
from .fock import ClickDistribution, conditional_distribution, packet_overlap, source_delays
from .fringes import FringeFit, fit_fringe

PHASE_GRID = 4096


class ModelBreakdown(RuntimeError):
    """A particle reached a splitter whose outputs are all dark."""


@dataclass(frozen=True)
class Fixed:
    delta_theta: float = 0.0


@dataclass(frozen=True)
class UniformRandom:
    pass


CoherenceMode = Union[Fixed, UniformRandom]


def coherence_from(value) -> CoherenceMode:
    """``"uniform-random"`` (or an existing mode) passes through; numbers become :class:`Fixed`."""
    if isinstance(value, (Fixed, UniformRandom)):
        return value
    if isinstance(value, str):
        if value.lower() in ("uniform-random", "uniform", "random"):
            return UniformRandom()
        return Fixed(float(value))
    return Fixed(float(value))


# --- fields ------------------------------------------------------------------------


@dataclass
class ArmField:
    """Wave amplitudes per stage: ``waves[s, w, m]`` is wave ``w`` on mode ``m`` after ``s`` stages."""

    waves: np.ndarray
    overlap: np.ndarray

    @property
    def n_stages(self) -> int:
        return self.waves.shape[0] - 1

    def coherent_sum(self, step: int | None = None) -> np.ndarray:
        step = self.n_stages if step is None else step
        return self.waves[step].sum(axis=0)

    def intensity(self, step: int | None = None) -> np.ndarray:
        step = self.n_stages if step is None else step
        a = self.waves[step]
        return np.real(np.einsum("wm,wv,vm->m", a.conj(), self.overlap, a))


def _stage_unitaries(circuit: Circuit) -> list[np.ndarray]:
    out = []
    for s in range(circuit.n_stages):
        u = np.eye(circuit.n_modes, dtype=complex)
        for el in circuit.stage_elements(s):
            u = element_unitary(el, circuit.n_modes) @ u
        out.append(u)
    return out


def propagate_fields(circuit: Circuit, inputs, overlap=None) -> ArmField:
    """Propagate input wave amplitudes ``inputs[w, m]`` through every stage."""
    require_valid(circuit.with_source(None))
    a = np.atleast_2d(np.asarray(inputs, dtype=complex))
    if a.shape[1] != circuit.n_modes:
        raise ValueError("inputs must have one amplitude per mode")
    g = np.eye(len(a)) if overlap is None else np.asarray(overlap, dtype=complex)
    waves = [a]
    for u in _stage_unitaries(circuit):
        waves.append(waves[-1] @ u.T)
    return ArmField(np.array(waves), g)


@dataclass
class SourceWaves:
    inputs: np.ndarray
    overlap: np.ndarray
    particles: tuple[int, ...]  # starting mode of each particle
    idler_wave: int | None = None


def source_waves(circuit: Circuit, delta_theta: float = 0.0) -> SourceWaves:
    """Waves and particles launched by the circuit's source."""
    src = circuit.source
    m = circuit.n_modes
    if isinstance(src, TwoPhotonSource):
        shifts = source_delays(circuit)
        pk = [p.__class__(p.center_time + shifts[mode], p.bandwidth, p.envelope)
              for p, mode in zip(src.packets, src.modes)]
        v = packet_overlap(*pk)
        inputs = np.zeros((2, m), dtype=complex)
        inputs[0, src.idler_mode] = np.exp(1j * delta_theta)
        inputs[1, src.signal_mode] = 1.0
        return SourceWaves(inputs, np.array([[1.0, v], [v, 1.0]]), (src.idler_mode, src.signal_mode), 0)
    if isinstance(src, FockInput):
        modes = [i for i, n in enumerate(src.occupation) for _ in range(n)]
        occupied = sorted(set(modes))
        inputs = np.zeros((len(occupied), m), dtype=complex)
        for w, mode in enumerate(occupied):
            inputs[w, mode] = 1.0
        return SourceWaves(inputs, np.eye(len(occupied)), tuple(modes))
    if isinstance(src, CoherentSource):
        return SourceWaves(np.asarray(src.amplitudes, dtype=complex)[None, :], np.eye(1), ())
    raise ValueError("circuit has no source")


# --- particles ---------------------------------------------------------------------


@dataclass(frozen=True)
class ParticleState:
    mode: int
    detector: int | None = None


def route_particle(particle: ParticleState, outputs: Sequence[int], intensities: Sequence[float],
                   u: float) -> ParticleState:
    """Move to ``outputs[j]`` with probability ``I_j / sum(I)`` using the uniform ``u``."""
    w = np.maximum(np.asarray(intensities, dtype=float), 0.0)
    tot = w.sum()
    if not tot > 0:
        raise ModelBreakdown(f"all outputs dark at mode {particle.mode}")
    j = int(np.searchsorted(np.cumsum(w), u * tot, side="right"))
    return ParticleState(int(outputs[min(j, len(w) - 1)]), particle.detector)


def _junction_tables(circuit: Circuit) -> tuple[np.ndarray, np.ndarray]:
    s_n, m_n = circuit.n_stages, circuit.n_modes
    partner = np.full((s_n, m_n), -1, dtype=np.int32)
    det = np.full((s_n, m_n), -1, dtype=np.int32)
    for el in circuit.elements:
        if isinstance(el, Beamsplitter):
            partner[el.stage, el.mode_a] = el.mode_b
            partner[el.stage, el.mode_b] = el.mode_a
        elif hasattr(el, "detector_id"):
            det[el.stage, el.mode] = el.detector_id
    return partner, det


def _intensities(field: ArmField, idler_wave: int | None, phases: np.ndarray) -> np.ndarray:
    """``I[i, s, m]`` after stage ``s`` for per-sample relative phases ``phases[i]``.

    The base field is computed at zero phase and the idler wave rotated per sample.
    """
    a = field.waves[1:]  # (S, W, M)
    g = field.overlap
    if idler_wave is None or a.shape[1] == 1:
        return np.broadcast_to(np.real(np.einsum("swm,wv,svm->sm", a.conj(), g, a)),
                               (len(phases),) + a.shape[::2]).copy()
    other = 1 - idler_wave
    ai, ao = a[:, idler_wave], a[:, other]
    base = (abs(ai) ** 2 * g[idler_wave, idler_wave].real + abs(ao) ** 2 * g[other, other].real)
    cross = np.conj(ai) * g[idler_wave, other] * ao  # multiplied by exp(-i phase)
    rot = np.exp(-1j * np.asarray(phases))[:, None, None]
    return base[None] + 2 * np.real(rot * cross[None])


@dataclass
class EmptyWaveResult:
    joint: ClickDistribution
    breakdown_fraction: float
    coherence: CoherenceMode

    def conditional(self, condition, description: str) -> ClickDistribution:
        return conditional_distribution(self.joint, condition, description)


def _pattern_distribution(circuit: Circuit, detected: np.ndarray) -> ClickDistribution:
    dets = [d.detector_id for d in circuit.detectors()]
    col = {d: i for i, d in enumerate(dets)}
    n = len(detected)
    counts = np.zeros((n, len(dets)), dtype=np.int64)
    for p in range(detected.shape[1]):
        hit = detected[:, p] >= 0
        idx = np.array([col[d] for d in detected[hit, p]], dtype=np.int64)
        np.add.at(counts, (np.flatnonzero(hit), idx), 1)
    pats, freq = np.unique(counts, axis=0, return_counts=True)
    probs = {tuple(int(x) for x in pat): f / n for pat, f in zip(pats, freq)}
    return ClickDistribution(tuple(dets), probs, None, n)


def simulate(circuit: Circuit, coherence: CoherenceMode, n_samples: int, seed: int,
             first_sample: int = 0) -> EmptyWaveResult:
    """Monte-Carlo run: draw 0 of each stream sets a random phase, draws from 1 route particles."""
    require_valid(circuit)
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    src = source_waves(circuit, 0.0)
    field = propagate_fields(circuit, src.inputs, src.overlap)
    samples = np.arange(first_sample, first_sample + n_samples, dtype=np.uint64)
    if isinstance(coherence, UniformRandom):
        phases = 2 * math.pi * _kernels.uniforms(seed, samples, 0)
    else:
        phases = np.full(n_samples, float(coherence.delta_theta))
    inten = _intensities(field, src.idler_wave, phases)
    partner, det = _junction_tables(circuit)
    detected, _final, broken = _kernels.route_walk(int(seed), int(first_sample), 1, partner, det,
                                                   np.ascontiguousarray(inten),
                                                   np.asarray(src.particles, dtype=np.int32))
    dist = _pattern_distribution(circuit, np.asarray(detected))
    return EmptyWaveResult(dist, float(np.mean(broken)), coherence)


def _route_probabilities(circuit: Circuit, inten: np.ndarray, start: int,
                         partner: np.ndarray, det: np.ndarray) -> tuple[dict[int, float], float]:
    """Detector distribution of one particle given per-stage intensities ``inten[s, m]``."""
    p = np.zeros(circuit.n_modes)
    p[start] = 1.0
    dark = 0.0
    for s in range(circuit.n_stages):
        q = p.copy()
        for a in range(circuit.n_modes):
            b = partner[s, a]
            if b < 0 or p[a] == 0:
                continue
            tot = inten[s, a] + inten[s, b]
            if tot <= 0:
                dark += p[a]
                continue
            move = p[a] * inten[s, b] / tot
            q[a] -= move
            q[b] += move
        p = q
    out: dict[int, float] = {}
    for s in range(circuit.n_stages):
        for m in range(circuit.n_modes):
            if det[s, m] >= 0 and p[m] > 0:
                out[int(det[s, m])] = out.get(int(det[s, m]), 0.0) + float(p[m])
    return out, dark


def analytic(circuit: Circuit, coherence: CoherenceMode, grid: int = PHASE_GRID) -> EmptyWaveResult:
    """Exact routing statistics; a uniformly random phase is averaged on a periodic grid."""
    require_valid(circuit)
    src = source_waves(circuit, 0.0)
    field = propagate_fields(circuit, src.inputs, src.overlap)
    partner, det = _junction_tables(circuit)
    if isinstance(coherence, UniformRandom):
        phases = 2 * math.pi * np.arange(grid) / grid
    else:
        phases = np.array([float(coherence.delta_theta)])
    inten = _intensities(field, src.idler_wave, phases)
    dets = [d.detector_id for d in circuit.detectors()]
    col = {d: i for i, d in enumerate(dets)}
    probs: dict[tuple[int, ...], float] = {}
    dark_total = 0.0
    for k in range(len(phases)):
        joint = {(0,) * len(dets): 1.0}
        dark_any = 0.0
        for start in src.particles:
            routes, dark = _route_probabilities(circuit, inten[k], start, partner, det)
            dark_any = max(dark_any, dark)
            nxt: dict[tuple[int, ...], float] = {}
            for pat, pp in joint.items():
                for d, pd in routes.items():
                    new = list(pat)
                    new[col[d]] += 1
                    key = tuple(new)
                    nxt[key] = nxt.get(key, 0.0) + pp * pd
            joint = nxt
        for pat, pp in joint.items():
            probs[pat] = probs.get(pat, 0.0) + pp / len(phases)
        dark_total += dark_any / len(phases)
    return EmptyWaveResult(ClickDistribution(tuple(dets), probs), dark_total, coherence)


# --- the two proposed experiments ---------------------------------------------------


def tap_xor(c: dict[int, int]) -> bool:
    return (c[3] > 0) != (c[4] > 0)


def run_croca(coherence, delta_phi: float = 0.0, n_samples: int = 100_000, seed: int = 0,
              tau: float = 0.0, sigma: float = 1.0, exact: bool = False) -> ClickDistribution:
    """Conditional detector statistics given a click at 3 xor 4 on the full device."""
    from . import builders

    coherence = coherence_from(coherence)
    circuit = builders.croca_full(0.0, delta_phi, tau, sigma)
    res = analytic(circuit, coherence) if exact else simulate(circuit, coherence, n_samples, seed)
    return res.conditional(tap_xor, "3 xor 4")


@dataclass
class Appendix1Result:
    delta_theta: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    stderr: np.ndarray
    fit: FringeFit

    @property
    def visibility(self) -> float:
        return self.fit.visibility


def run_appendix1(coherence, delta_thetas: Iterable[float], n_samples: int = 100_000, seed: int = 0,
                  exact: bool = False) -> Appendix1Result:
    """``P(1 | 3 xor 4)`` over a relative-phase sweep and its fitted fringe visibility.

    For :class:`UniformRandom` the phase is redrawn per sample and the sweep
    value is ignored, so every point is an independent estimate of the flat
    response.
    """
    from . import builders

    coherence = coherence_from(coherence)
    thetas = np.asarray(list(delta_thetas), dtype=float)
    circuit = builders.appendix1()
    p1, p2, se = [], [], []
    for i, th in enumerate(thetas):
        mode = coherence if isinstance(coherence, UniformRandom) else Fixed(float(th))
        if exact:
            res = analytic(circuit, mode)
        else:
            res = simulate(circuit, mode, n_samples, seed, first_sample=i * n_samples)
        cond = res.conditional(tap_xor, "3 xor 4")
        p1.append(cond.fires(1))
        p2.append(cond.fires(2))
        se.append(cond.stderr(lambda c: c[1] > 0))
    se_arr = np.array(se)
    fit = fit_fringe(thetas, p1, se_arr if se_arr.any() else None)
    return Appendix1Result(thetas, np.array(p1), np.array(p2), se_arr, fit)
