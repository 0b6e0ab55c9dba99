"""Canonical circuits for the interferometers studied by this package.

Mode layout used throughout (matches the detector pairing 3<->2, 4<->1):

* mode 0 ``idler`` - horizontal arm, leads to detector 2
* mode 1 ``signal`` - vertical arm, leads to detector 1
* mode 2 ``tap-idler`` - reflected port of the idler tap, detector 3
* mode 3 ``tap-signal`` - reflected port of the signal tap, detector 4

The tap splitters sit between the pair source and the first 50/50 splitter,
which is both the HOM splitter and the Mach-Zehnder input splitter.  The
internal Mach-Zehnder phase is a per-photon phase on the idler arm.  After the
output splitter the detector-2 lead carries a fixed path phase of -pi/2; it is
unobservable and only fixes the printed phases of the laser amplitudes.
"""

from __future__ import annotations

import math

from .circuit import (
    UNIFORM_RANDOM,
    Beamsplitter,
    Circuit,
    CoherentSource,
    Delay,
    Detector,
    FockInput,
    PacketParams,
    PhaseShift,
    TwoPhotonSource,
    make_modes,
)

IDLER, SIGNAL, TAP_IDLER, TAP_SIGNAL = 0, 1, 2, 3
LEAD_PHASE = -math.pi / 2


def _pair(delta_theta, tau: float, sigma: float) -> TwoPhotonSource:
    packets = (PacketParams(0.0, sigma), PacketParams(0.0, sigma))
    return TwoPhotonSource(IDLER, SIGNAL, packets, delta_theta)


def hom(tau: float = 0.0, sigma: float = 1.0, delta_theta=0.0) -> Circuit:
    """Pair source, optional signal delay, one 50/50 splitter, detectors 1 and 2."""
    els = (
        Delay(SIGNAL, tau, 0),
        Beamsplitter(IDLER, SIGNAL, stage=1),
        Detector(IDLER, 2, 2),
        Detector(SIGNAL, 1, 2),
    )
    return Circuit(make_modes(["idler", "signal"]), els, _pair(delta_theta, tau, sigma))


def mz(delta_phi: float = 0.0, input_mode: int = IDLER) -> Circuit:
    """Single photon through a Mach-Zehnder loop with internal phase ``delta_phi``."""
    occ = [0, 0]
    occ[input_mode] = 1
    els = (
        Beamsplitter(IDLER, SIGNAL, stage=0),
        PhaseShift(IDLER, delta_phi, 1),
        Beamsplitter(IDLER, SIGNAL, stage=2),
        PhaseShift(IDLER, LEAD_PHASE, 3),
        Detector(IDLER, 2, 4),
        Detector(SIGNAL, 1, 4),
    )
    return Circuit(make_modes(["mz-horizontal", "mz-vertical"]), els, FockInput(tuple(occ)))


_FULL_MODES = ["idler", "signal", "tap-idler", "tap-signal"]


def _taps(stage: int) -> tuple:
    return (
        Beamsplitter(IDLER, TAP_IDLER, stage=stage),
        Beamsplitter(SIGNAL, TAP_SIGNAL, stage=stage),
        Detector(TAP_IDLER, 3, stage + 1),
        Detector(TAP_SIGNAL, 4, stage + 1),
    )


def croca_full(delta_theta=0.0, delta_phi: float = 0.0, tau: float = 0.0,
               sigma: float = 1.0) -> Circuit:
    """Empty-wave generator and detector: taps to 3/4, then the HOM/MZ stage to 1/2."""
    els = (
        Delay(SIGNAL, tau, 0),
        *_taps(1),
        Beamsplitter(IDLER, SIGNAL, stage=3),
        PhaseShift(IDLER, delta_phi, 4),
        Beamsplitter(IDLER, SIGNAL, stage=5),
        PhaseShift(IDLER, LEAD_PHASE, 6),
        Detector(IDLER, 2, 7),
        Detector(SIGNAL, 1, 7),
    )
    return Circuit(make_modes(_FULL_MODES), els, _pair(delta_theta, tau, sigma))


def appendix1(delta_theta=0.0, tau: float = 0.0, sigma: float = 1.0) -> Circuit:
    """Simplified scheme: the Mach-Zehnder output splitter is removed."""
    els = (
        Delay(SIGNAL, tau, 0),
        *_taps(1),
        Beamsplitter(IDLER, SIGNAL, stage=3),
        Detector(IDLER, 2, 4),
        Detector(SIGNAL, 1, 4),
    )
    return Circuit(make_modes(_FULL_MODES), els, _pair(delta_theta, tau, sigma))


def laser(alpha: complex = 1.0, delta_theta: float = 0.0, delta_phi: float = 0.0) -> Circuit:
    """Pair source replaced by a laser on the signal port of a 50/50 splitter."""
    els = (
        Beamsplitter(IDLER, SIGNAL, stage=0),
        *_taps(1),
        PhaseShift(IDLER, delta_theta, 3),
        Beamsplitter(IDLER, SIGNAL, stage=4),
        PhaseShift(IDLER, delta_phi, 5),
        Beamsplitter(IDLER, SIGNAL, stage=6),
        PhaseShift(IDLER, LEAD_PHASE, 7),
        Detector(IDLER, 2, 8),
        Detector(SIGNAL, 1, 8),
    )
    source = CoherentSource((0j, complex(alpha), 0j, 0j))
    return Circuit(make_modes(_FULL_MODES), els, source)


def is_random_phase(delta_theta) -> bool:
    return delta_theta == UNIFORM_RANDOM
