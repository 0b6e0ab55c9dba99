"""Pilot-wave engines.

Two levels are provided:

* a continuous guidance-law integrator for massive-particle analogues on a
  configuration-space grid (one axis per particle), and
* a branch-level sampler for photons in an optical circuit.  Each sample
  carries a joint configuration (which arm, and which temporal slot, every
  photon occupies) and moves it stage by stage.  The move at a stage is the
  monotone (quantile) coupling between the conditional configuration
  distributions before and after the stage, given the occupation of every mode
  the stage does not touch.  Detected photons sit in untouched modes, so the
  survivors are moved by the conditional wave function of the remaining
  photons: the effective collapse.  By construction the marginal at every
  stage is the Born distribution.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _kernels
from .circuit import Beamsplitter, Circuit, CoherentSource, Detector, require_valid
from .fock import (
    DEFAULT_N_MAX,
    ClickDistribution,
    FockError,
    FockState,
    ZeroProbabilityError,
    conditional_state,
    prepare,
    propagate,
)

DENSITY_FLOOR = 1e-12
MAX_HALVINGS = 20


class GuidanceError(RuntimeError):
    pass


# --- continuous guidance law --------------------------------------------------------


@dataclass
class GuidanceField:
    """Wave function sampled on a regular grid; axis ``j`` is particle ``j``'s coordinate."""

    psi: np.ndarray
    axes: tuple[np.ndarray, ...]
    hbar_over_m: float = 1.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if self.psi.shape != tuple(len(a) for a in self.axes):
            raise ValueError("psi shape does not match the grid axes")
        if self.hbar_over_m <= 0:
            raise ValueError("hbar/m must be positive")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def norm(self) -> float:
        return float(math.sqrt(self.density.sum() * np.prod(self.spacing)))

    def currents(self) -> list[np.ndarray]:
        """``Im(psi* d_j psi)`` per axis by centred differences."""
        grads = np.gradient(self.psi, *self.spacing, edge_order=2)
        if self.psi.ndim == 1:
            grads = [grads]
        return [np.imag(self.psi.conj() * g) for g in grads]


def guidance_velocity(field: GuidanceField, points) -> tuple[np.ndarray, np.ndarray]:
    """Velocity ``(hbar/m) Im(psi* grad psi) / |psi|^2`` at configuration points.

    ``points`` has shape ``(n, n_particles)``.  Current and density are
    interpolated separately.  Returns ``(v, ok)``; ``v`` is NaN where the
    density is below ``DENSITY_FLOOR`` times its peak or the point is off-grid.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rho_grid = field.density
    floor = DENSITY_FLOOR * rho_grid.max() if rho_grid.size else 0.0
    interp = lambda g: RegularGridInterpolator(field.axes, g, bounds_error=False, fill_value=np.nan)(pts)
    rho = interp(rho_grid)
    ok = np.isfinite(rho) & (rho > floor)
    v = np.full(pts.shape, np.nan)
    for j, cur in enumerate(field.currents()):
        jj = interp(cur)
        v[ok, j] = field.hbar_over_m * jj[ok] / rho[ok]
    return v, ok


def sample_born(field: GuidanceField, n: int, seed: int, first_sample: int = 0) -> np.ndarray:
    """Draw ``n`` configurations from ``|psi|^2`` with counter-based streams.

    One dimension uses the inverse of the piecewise-linear CDF; more
    dimensions pick a cell by weight and jitter uniformly inside it.
    """
    samples = np.arange(first_sample, first_sample + n, dtype=np.uint64)
    rho = field.density
    if field.psi.ndim == 1:
        x = field.axes[0]
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(x))])
        cdf /= cdf[-1]
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        return np.interp(_kernels.uniforms(seed, samples, 0), cdf[keep], x[keep])[:, None]
    flat = rho.ravel() / rho.sum()
    cells = np.minimum(np.searchsorted(np.cumsum(flat), _kernels.uniforms(seed, samples, 0), side="right"),
                       flat.size - 1)
    idx = np.unravel_index(cells, rho.shape)
    out = np.empty((n, rho.ndim))
    for j, (ax, h) in enumerate(zip(field.axes, field.spacing)):
        jitter = _kernels.uniforms(seed, samples, 1 + j) - 0.5
        out[:, j] = np.clip(ax[idx[j]] + jitter * h, ax[0], ax[-1])
    return out


@dataclass
class TrajectoryResult:
    times: np.ndarray
    positions: np.ndarray  # (n_times, n, n_particles)
    failed: np.ndarray  # per trajectory
    halvings: int = 0


def integrate_trajectories(field_at: Callable[[float], GuidanceField], times: Sequence[float],
                           initial=None, n: int = 10_000, seed: int = 0) -> TrajectoryResult:
    """RK4 transport of configurations by the guidance law.

    ``field_at(t)`` returns the guiding wave at time ``t``.  Without explicit
    ``initial`` points, ``n`` points are drawn from ``|psi(times[0])|^2``.  A
    step that lands a stage evaluation on a node is retried with halved steps
    for the affected trajectories, up to ``MAX_HALVINGS`` times, after which
    the trajectory is frozen and flagged.
    """
    times = np.asarray(times, dtype=float)
    x = sample_born(field_at(times[0]), n, seed) if initial is None else np.atleast_2d(
        np.asarray(initial, dtype=float)).reshape(len(initial), -1).copy()
    out = np.empty((len(times),) + x.shape)
    out[0] = x
    failed = np.zeros(len(x), dtype=bool)
    deepest = 0
    cache: dict[float, GuidanceField] = {}

    def vel(t, pts):
        if t not in cache:
            if len(cache) > 8:
                cache.clear()
            cache[t] = field_at(t)
        return guidance_velocity(cache[t], pts)

    def rk4(t, dt, pts):
        k1, ok1 = vel(t, pts)
        k2, ok2 = vel(t + dt / 2, pts + dt / 2 * k1)
        k3, ok3 = vel(t + dt / 2, pts + dt / 2 * k2)
        k4, ok4 = vel(t + dt, pts + dt * k3)
        ok = ok1 & ok2 & ok3 & ok4
        return pts + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), ok

    def advance(t, dt, pts, depth):
        nonlocal deepest
        new, ok = rk4(t, dt, pts)
        bad = ~ok
        if bad.any():
            if depth >= MAX_HALVINGS:
                new[bad] = pts[bad]
                return new, bad
            deepest = max(deepest, depth + 1)
            sub = pts[bad]
            sub, fail1 = advance(t, dt / 2, sub, depth + 1)
            sub, fail2 = advance(t + dt / 2, dt / 2, sub, depth + 1)
            new[bad] = sub
            fail = np.zeros(len(pts), dtype=bool)
            fail[bad] = fail1 | fail2
            return new, fail
        return new, np.zeros(len(pts), dtype=bool)

    for i in range(1, len(times)):
        live = ~failed
        x_live, fail = advance(times[i - 1], times[i] - times[i - 1], x[live], 0)
        x[live] = x_live
        failed[np.flatnonzero(live)[fail]] = True
        out[i] = x
    return TrajectoryResult(times, out, failed, deepest)


@dataclass(frozen=True)
class FreeGaussian:
    """Freely spreading 1D Gaussian packet centred at the origin.

    ``s0`` is the initial position standard deviation.
    """

    s0: float = 1.0
    hbar_over_m: float = 1.0

    @property
    def tau(self) -> float:
        return 2 * self.s0 ** 2 / self.hbar_over_m

    def width(self, t):
        return self.s0 * np.sqrt(1 + (np.asarray(t) / self.tau) ** 2)

    def psi(self, x, t: float) -> np.ndarray:
        z = 1 + 1j * t / self.tau
        return (2 * math.pi * self.s0 ** 2) ** -0.25 / np.sqrt(z) * np.exp(-np.asarray(x) ** 2 / (4 * self.s0 ** 2 * z))

    def trajectory(self, x0, t):
        return np.asarray(x0) * self.width(t) / self.s0

    def field(self, t: float, half_width: float | None = None, points: int = 4001) -> GuidanceField:
        half_width = 10 * float(self.width(t)) if half_width is None else half_width
        x = np.linspace(-half_width, half_width, points)
        return GuidanceField(self.psi(x, t), (x,), self.hbar_over_m)

    def cdf(self, x, t: float):
        from scipy.stats import norm
        return norm.cdf(x, scale=float(self.width(t)))


def free_gaussian(s0: float = 1.0, hbar_over_m: float = 1.0) -> FreeGaussian:
    return FreeGaussian(s0, hbar_over_m)


# --- branch-level photon dynamics ---------------------------------------------------


@dataclass
class BranchTables:
    """Stage-wise transition tables over joint configurations.

    ``configs[i]`` is a flat occupation vector; ``states[s]`` is the joint
    state before stage ``s`` (``states[-1]`` is at the detector plane).
    """

    circuit: Circuit
    configs: list[tuple[int, ...]]
    states: list[FockState]
    init_cdf: np.ndarray
    init_index: np.ndarray
    lo: np.ndarray
    width: np.ndarray
    group: np.ndarray
    g_start: np.ndarray
    g_len: np.ndarray
    cum_hi: np.ndarray
    target: np.ndarray

    @property
    def internal(self) -> int:
        return self.states[0].internal


def _probabilities(state: FockState, index: dict) -> np.ndarray:
    p = np.zeros(len(index))
    for occ, a in state.amplitudes.items():
        p[index[occ]] += abs(a) ** 2
    return p


def branch_tables(circuit: Circuit, n_max: int = DEFAULT_N_MAX) -> BranchTables:
    require_valid(circuit)
    if isinstance(circuit.source, CoherentSource):
        raise FockError("branch sampling needs a photon-number source")
    states = [prepare(circuit, n_max)]
    for s in range(circuit.n_stages):
        states.append(propagate(states[-1], circuit, s, s + 1).pruned(1e-300))
    seen: dict[tuple[int, ...], int] = {}
    for st in states:
        for occ, a in st.amplitudes.items():
            if abs(a) > 0 and occ not in seen:
                seen[occ] = len(seen)
    configs = list(seen)
    n_cfg = len(configs)
    k = states[0].internal
    probs = [_probabilities(st, seen) for st in states]

    p0 = probs[0]
    init_index = np.flatnonzero(p0 > 0).astype(np.int32)
    init_cdf = np.cumsum(p0[init_index])

    n_stages = circuit.n_stages
    lo = np.zeros((n_stages, n_cfg))
    width = np.zeros((n_stages, n_cfg))
    group = np.zeros((n_stages, n_cfg), dtype=np.int32)
    g_start, g_len, cum_hi, target = [], [], [], []
    for s in range(n_stages):
        local = sorted({m * k + j for el in circuit.stage_elements(s) if isinstance(el, Beamsplitter)
                        for m in el.modes for j in range(k)})
        before, after = probs[s], probs[s + 1]
        members: dict[tuple, list[int]] = defaultdict(list)
        for i, occ in enumerate(configs):
            rest = tuple(n for m, n in enumerate(occ) if m not in local) if local else (i,)
            members[rest].append(i)
        for rest, idx in members.items():
            idx.sort(key=lambda i: tuple(configs[i][m] for m in local))
            g = len(g_start)
            acc = 0.0
            for i in idx:
                group[s, i] = g
                lo[s, i] = acc
                width[s, i] = before[i]
                acc += before[i]
            outs = [i for i in idx if after[i] > 0] or idx[-1:]
            g_start.append(len(cum_hi))
            g_len.append(len(outs))
            cum_hi.extend(np.cumsum(after[outs]) if local else [math.inf])
            target.extend(outs)
    return BranchTables(circuit, configs, states, init_cdf, init_index, lo, width, group,
                        np.array(g_start, dtype=np.int64), np.array(g_len, dtype=np.int64),
                        np.array(cum_hi, dtype=float), np.array(target, dtype=np.int32))


@dataclass
class PhotonRecord:
    arm: int
    position: float
    detector: int | None = None
    detection_time: float | None = None


@dataclass
class BranchConfiguration:
    """Per-photon state at one time; photons are labelled in arm order."""

    time: float
    photons: list[PhotonRecord]


@dataclass
class TrajectoryEnsemble:
    seed: int
    n_samples: int
    tables: BranchTables
    history: np.ndarray  # (n_samples, n_stages + 1) configuration indices
    distribution: ClickDistribution = field(init=False)

    def __post_init__(self):
        circ = self.tables.circuit
        dets = circ.detectors()
        k = self.tables.internal
        final = self.history[:, -1]
        ids, counts = np.unique(final, return_counts=True)
        probs: dict[tuple[int, ...], float] = defaultdict(float)
        for i, c in zip(ids, counts):
            occ = self.tables.configs[i]
            spatial = [sum(occ[m * k:(m + 1) * k]) for m in range(circ.n_modes)]
            probs[tuple(spatial[d.mode] for d in dets)] += c / self.n_samples
        self.distribution = ClickDistribution(tuple(d.detector_id for d in dets), dict(probs),
                                              None, self.n_samples)

    def arms(self, sample: int, step: int) -> list[int]:
        occ = self.tables.configs[self.history[sample, step]]
        k = self.tables.internal
        return [m // k for m, n in enumerate(occ) for _ in range(n)]

    def configuration(self, sample: int, step: int, c: float = 1.0) -> BranchConfiguration:
        """Configuration after ``step`` stages; arms have unit length, photons move at ``c``."""
        circ = self.tables.circuit
        det_stage = {d.mode: (d.detector_id, d.stage) for d in circ.detectors()}
        photons = []
        for arm in self.arms(sample, step):
            hit = det_stage.get(arm)
            if hit is not None and hit[1] < step:
                photons.append(PhotonRecord(arm, float(hit[1] + 1), hit[0], (hit[1] + 1) / c))
            else:
                photons.append(PhotonRecord(arm, float(step)))
        return BranchConfiguration(step / c, photons)

    def write_csv(self, path, samples: Iterable[int] | None = None, c: float = 1.0):
        """Rows ``sample, time, photon, arm, position``."""
        samples = range(min(self.n_samples, 100)) if samples is None else samples
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample", "time", "photon", "arm", "position"])
            for i in samples:
                for step in range(self.history.shape[1]):
                    cfg = self.configuration(i, step, c)
                    for p, rec in enumerate(cfg.photons):
                        w.writerow([i, f"{cfg.time:.12g}", p, rec.arm, f"{rec.position:.12g}"])


def sample_branch_dynamics(circuit: Circuit, n_samples: int, seed: int,
                           n_max: int = DEFAULT_N_MAX, first_sample: int = 0,
                           tables: BranchTables | None = None) -> TrajectoryEnsemble:
    """Sample photon branch trajectories through ``circuit``.

    Draw ``0`` of each sample's stream picks the initial configuration and
    draw ``s + 1`` drives stage ``s``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    t = branch_tables(circuit, n_max) if tables is None else tables
    hist = _kernels.branch_walk(int(seed), int(first_sample), int(n_samples), t.init_cdf, t.init_index,
                                t.lo, t.width, t.group, t.g_start, t.g_len, t.cum_hi, t.target)
    return TrajectoryEnsemble(int(seed), int(n_samples), t, np.asarray(hist))


def conditional_wavefunction(joint: FockState, detected: int, circuit: Circuit) -> FockState:
    """State of the remaining photons once detector ``detected`` has clicked."""
    try:
        mode = circuit.detector_mode(detected)
    except KeyError as exc:
        raise FockError(str(exc)) from None
    return conditional_state(joint, mode)


def detection_stage(circuit: Circuit, detector_id: int) -> int:
    for d in circuit.elements:
        if isinstance(d, Detector) and d.detector_id == detector_id:
            return d.stage
    raise KeyError(detector_id)


__all__ = [
    "BranchConfiguration", "BranchTables", "FreeGaussian", "GuidanceError", "GuidanceField",
    "TrajectoryEnsemble", "TrajectoryResult", "ZeroProbabilityError", "branch_tables",
    "conditional_wavefunction", "detection_stage", "free_gaussian", "guidance_velocity",
    "integrate_trajectories", "sample_born", "sample_branch_dynamics",
]
