"""Optical network topology shared by every physical engine.

A :class:`Circuit` is a stage-ordered list of passive elements acting on a
fixed set of labelled modes, plus an optional source description.  Circuits
are immutable; engines call :func:`require_valid` before touching one.

Beamsplitter convention: on modes ``(a, b)`` the mode operators transform as

    a_out = t * a_in + r * b_in
    b_out = r * a_in + t * b_in

so a transmitted photon keeps its mode index and a reflected one swaps.  The
default 50/50 splitter has ``t = 1/sqrt(2)`` and ``r = i/sqrt(2)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

UNITARITY_TOL = 1e-12

HALF = 1 / math.sqrt(2)


class CircuitError(ValueError):
    """Raised when an engine is handed a circuit that failed validation."""


@dataclass(frozen=True)
class ModeId:
    index: int
    label: str


@dataclass(frozen=True)
class Beamsplitter:
    mode_a: int
    mode_b: int
    t: complex = HALF
    r: complex = 1j * HALF
    stage: int = 0

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode_a, self.mode_b)

    def matrix(self) -> np.ndarray:
        return np.array([[self.t, self.r], [self.r, self.t]], dtype=complex)


@dataclass(frozen=True)
class PhaseShift:
    mode: int
    phase: float
    stage: int = 0

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode,)

    def matrix(self) -> np.ndarray:
        return np.array([[cmath.exp(1j * self.phase)]])


@dataclass(frozen=True)
class Delay:
    """Time offset on one mode.

    Only the wavepacket-overlap bookkeeping reads it; the mode unitary treats
    it as the identity.
    """

    mode: int
    delay: float
    stage: int = 0

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode,)

    def matrix(self) -> np.ndarray:
        return np.eye(1, dtype=complex)


@dataclass(frozen=True)
class Detector:
    mode: int
    detector_id: int
    stage: int = 0

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.mode,)

    def matrix(self) -> np.ndarray:
        return np.eye(1, dtype=complex)


Element = Union[Beamsplitter, PhaseShift, Delay, Detector]


@dataclass(frozen=True)
class PacketParams:
    """Gaussian temporal envelope ``exp(-bandwidth**2 (t - center_time)**2 / 2)``."""

    center_time: float = 0.0
    bandwidth: float = 1.0
    envelope: str = "gaussian"

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("packet bandwidth must be positive")
        if self.envelope != "gaussian":
            raise ValueError(f"unsupported envelope {self.envelope!r}")


UNIFORM_RANDOM = "uniform-random"


@dataclass(frozen=True)
class TwoPhotonSource:
    idler_mode: int
    signal_mode: int
    packets: tuple[PacketParams, PacketParams] = (PacketParams(), PacketParams())
    relative_phase: Union[float, str] = 0.0

    @property
    def modes(self) -> tuple[int, ...]:
        return (self.idler_mode, self.signal_mode)

    @property
    def random_phase(self) -> bool:
        return self.relative_phase == UNIFORM_RANDOM


@dataclass(frozen=True)
class CoherentSource:
    amplitudes: tuple[complex, ...]

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.amplitudes) if a != 0)


@dataclass(frozen=True)
class FockInput:
    occupation: tuple[int, ...]

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.occupation) if n)


SourceSpec = Union[TwoPhotonSource, CoherentSource, FockInput]


@dataclass(frozen=True)
class Circuit:
    modes: tuple[ModeId, ...]
    elements: tuple[Element, ...] = ()
    source: SourceSpec | None = None

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def n_stages(self) -> int:
        return max((e.stage for e in self.elements), default=-1) + 1

    def mode(self, label: str) -> int:
        for m in self.modes:
            if m.label == label:
                return m.index
        raise KeyError(label)

    def stage_elements(self, stage: int) -> list[Element]:
        return [e for e in self.elements if e.stage == stage]

    def detectors(self) -> list[Detector]:
        return sorted((e for e in self.elements if isinstance(e, Detector)),
                      key=lambda d: d.detector_id)

    def detector_mode(self, detector_id: int) -> int:
        for d in self.detectors():
            if d.detector_id == detector_id:
                return d.mode
        raise KeyError(f"no detector {detector_id}")

    def with_source(self, source: SourceSpec | None) -> "Circuit":
        return Circuit(self.modes, self.elements, source)

    def then(self, other: "Circuit") -> "Circuit":
        """Append ``other`` after this circuit (same mode set)."""
        if [m.index for m in other.modes] != [m.index for m in self.modes]:
            raise CircuitError("cannot compose circuits over different mode sets")
        offset = self.n_stages
        shifted = tuple(_restage(e, e.stage + offset) for e in other.elements)
        return Circuit(self.modes, self.elements + shifted, self.source)

    def between(self, start: int, stop: int | None = None) -> "Circuit":
        """Sub-circuit of stages ``start <= stage < stop``, renumbered from 0."""
        stop = self.n_stages if stop is None else stop
        kept = tuple(_restage(e, e.stage - start)
                     for e in self.elements if start <= e.stage < stop)
        return Circuit(self.modes, kept, None)


def _restage(element: Element, stage: int) -> Element:
    return type(element)(**{**element.__dict__, "stage": stage})


def make_modes(labels: Iterable[str]) -> tuple[ModeId, ...]:
    return tuple(ModeId(i, label) for i, label in enumerate(labels))


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(circuit: Circuit) -> ValidationReport:
    """Check referential integrity, unitarity and feed-forward structure."""
    report = ValidationReport()
    bad = report.violations
    indices = [m.index for m in circuit.modes]
    labels = [m.label for m in circuit.modes]
    if len(set(indices)) != len(indices):
        bad.append("duplicate mode index")
    if len(set(labels)) != len(labels):
        bad.append("duplicate mode label")
    if sorted(indices) != list(range(len(indices))):
        bad.append("mode indices must be 0..M-1")
    known = set(indices)

    last_stage = -1
    used: set[tuple[int, int]] = set()
    terminated: dict[int, int] = {}
    detector_ids: set[int] = set()
    for el in circuit.elements:
        if el.stage < 0:
            bad.append(f"negative stage in {el}")
        if el.stage < last_stage:
            bad.append(f"cycle: element {el} precedes an earlier stage")
        last_stage = max(last_stage, el.stage)
        for m in el.modes:
            if m not in known:
                bad.append(f"unknown mode {m} in {el}")
                continue
            if (el.stage, m) in used:
                bad.append(f"mode {m} feeds two elements at stage {el.stage}")
            used.add((el.stage, m))
            if m in terminated:
                bad.append(f"mode {m} continues after its detector at stage {terminated[m]}")
        if isinstance(el, Beamsplitter):
            if el.mode_a == el.mode_b:
                bad.append(f"cycle: beamsplitter couples mode {el.mode_a} to itself")
            u = el.matrix()
            if (abs(abs(el.t) ** 2 + abs(el.r) ** 2 - 1) > UNITARITY_TOL
                    or np.max(np.abs(u.conj().T @ u - np.eye(2))) > UNITARITY_TOL):
                bad.append(f"non-unitary element {el}")
        elif isinstance(el, PhaseShift):
            if not math.isfinite(el.phase):
                bad.append(f"non-finite phase in {el}")
        elif isinstance(el, Delay):
            if not math.isfinite(el.delay):
                bad.append(f"non-finite delay in {el}")
        elif isinstance(el, Detector):
            if el.detector_id in detector_ids:
                bad.append(f"duplicate detector id {el.detector_id}")
            detector_ids.add(el.detector_id)
            if el.mode in known:
                terminated[el.mode] = el.stage

    source = circuit.source
    if source is not None:
        bad.extend(_source_violations(source, circuit.n_modes, known))
        # every path leaving a source has to end in a detector
        reach = set(m for m in source.modes if m in known)
        for el in circuit.elements:
            if isinstance(el, Beamsplitter) and (el.mode_a in reach or el.mode_b in reach):
                reach.update(el.modes)
        for m in sorted(reach - set(terminated)):
            bad.append(f"dangling mode {m} ({labels[m] if m < len(labels) else '?'}) has no detector")
    return report


def _source_violations(source: SourceSpec, n_modes: int, known: set[int]) -> list[str]:
    out = []
    if isinstance(source, TwoPhotonSource):
        if source.idler_mode == source.signal_mode:
            out.append("two-photon source must feed two distinct modes")
        for m in source.modes:
            if m not in known:
                out.append(f"unknown mode {m} in source")
        phase = source.relative_phase
        if not source.random_phase and not (isinstance(phase, (int, float)) and math.isfinite(phase)):
            out.append(f"invalid relative phase {phase!r}")
    elif isinstance(source, CoherentSource):
        if len(source.amplitudes) != n_modes:
            out.append("coherent source needs one amplitude per mode")
        if not all(cmath.isfinite(complex(a)) for a in source.amplitudes):
            out.append("coherent amplitudes must be finite")
    elif isinstance(source, FockInput):
        if len(source.occupation) != n_modes:
            out.append("Fock input needs one occupation per mode")
        if any(n < 0 for n in source.occupation):
            out.append("negative occupation in Fock input")
    else:
        out.append(f"unknown source type {type(source).__name__}")
    return out


@lru_cache(maxsize=256)
def _cached_report(circuit: Circuit) -> tuple[str, ...]:
    return tuple(validate(circuit).violations)


def require_valid(circuit: Circuit) -> Circuit:
    violations = _cached_report(circuit)
    if violations:
        raise CircuitError("invalid circuit: " + "; ".join(violations))
    return circuit


def element_unitary(element: Element, n_modes: int) -> np.ndarray:
    u = np.eye(n_modes, dtype=complex)
    idx = list(element.modes)
    u[np.ix_(idx, idx)] = element.matrix()
    return u


def stage_unitary(circuit: Circuit, stage: int) -> np.ndarray:
    u = np.eye(circuit.n_modes, dtype=complex)
    for el in circuit.stage_elements(stage):
        idx = list(el.modes)
        u[np.ix_(idx, idx)] = el.matrix()
    return u


def compile_unitary(circuit: Circuit) -> np.ndarray:
    """Mode-space unitary ``U`` with ``a_out[k] = sum_j U[k, j] a_in[j]``.

    The source, delays and detectors do not contribute.
    """
    require_valid(circuit.with_source(None))
    u = np.eye(circuit.n_modes, dtype=complex)
    for stage in range(circuit.n_stages):
        u = stage_unitary(circuit, stage) @ u
    return u


def is_unitary(u: np.ndarray, tol: float = UNITARITY_TOL) -> bool:
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) <= tol)


def random_circuit(n_modes: int, depth: int, rng: np.random.Generator) -> Circuit:
    """Random lossless network, used by property tests and benchmarks."""
    elements = []
    for stage in range(depth):
        order = rng.permutation(n_modes)
        for a, b in zip(order[::2], order[1::2]):
            theta = rng.uniform(0, math.pi / 2)
            elements.append(Beamsplitter(int(a), int(b), math.cos(theta),
                                         1j * math.sin(theta), stage))
        if n_modes % 2:
            elements.append(PhaseShift(int(order[-1]), float(rng.uniform(0, 2 * math.pi)), stage))
    return Circuit(make_modes(f"m{i}" for i in range(n_modes)), tuple(elements))


def detector_modes(circuit: Circuit) -> dict[int, int]:
    """Map detector id to the mode it terminates."""
    return {d.detector_id: d.mode for d in circuit.detectors()}


def seq(elements: Sequence[Element]) -> tuple[Element, ...]:
    return tuple(sorted(elements, key=lambda e: e.stage))
