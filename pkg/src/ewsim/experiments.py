"""Prebuilt experiments and the cross-model comparison harness.

Three models are available:

``CI``
    exact standard quantum optics (``fock``), projective collapse at detection.
``Bohm3ND``
    branch-level pilot-wave sampling in configuration space (``bohmian``).
``DeBroglie3D``
    particles routed by the intensity of non-collapsing 3D waves (``emptywave``).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import bohmian, builders, emptywave, fock
from .circuit import UNIFORM_RANDOM, Circuit, require_valid
from .fock import ClickDistribution
from .fringes import FringeFit, fit_fringe

MODELS = ("CI", "Bohm3ND", "DeBroglie3D")
EXPERIMENTS = ("hom", "mz", "croca_full", "appendix1", "laser_calibration")
SWEEPABLE = ("delta_theta", "delta_phi", "tau", "alpha")
PHASE_PARAMS = ("delta_theta", "delta_phi")
DIVERGENCE_SIGMAS = 5.0
EXACT_TOL = 1e-9

DEFAULTS = {
    "hom": {"tau": 0.0, "sigma": 1.0, "delta_theta": 0.0},
    "mz": {"delta_phi": 0.0},
    "croca_full": {"delta_theta": 0.0, "delta_phi": 0.0, "tau": 0.0, "sigma": 1.0},
    "appendix1": {"delta_theta": 0.0, "tau": 0.0, "sigma": 1.0},
    "laser_calibration": {"alpha": 1.0, "delta_theta": 0.0, "delta_phi": 0.0},
}


class ExperimentError(ValueError):
    """Invalid experiment name or parameters."""


class EngineError(RuntimeError):
    """An engine failed while running a model; ``model`` names it."""

    def __init__(self, model: str, message: str):
        super().__init__(f"{model}: {message}")
        self.model = model


def _check_phase(name: str, value) -> None:
    if value == UNIFORM_RANDOM:
        if name != "delta_theta":
            raise ExperimentError(f"{name} cannot be uniform-random")
        return
    v = float(value)
    if not 0 <= v < 2 * math.pi:
        raise ExperimentError(f"{name} must lie in [0, 2*pi), got {v}")


def parameters(name: str, **params) -> dict:
    """Defaults merged with ``params`` after validation."""
    if name not in DEFAULTS:
        raise ExperimentError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    unknown = set(params) - set(DEFAULTS[name])
    if unknown:
        raise ExperimentError(f"{name} does not take {', '.join(sorted(unknown))}")
    out = {**DEFAULTS[name], **params}
    for key in PHASE_PARAMS:
        if key in out:
            _check_phase(key, out[key])
    if "sigma" in out and not float(out["sigma"]) > 0:
        raise ExperimentError("sigma must be positive")
    if "tau" in out and not math.isfinite(float(out["tau"])):
        raise ExperimentError("tau must be finite")
    if "alpha" in out:
        a = complex(out["alpha"])
        if not (math.isfinite(a.real) and math.isfinite(a.imag)):
            raise ExperimentError("alpha must be finite")
    return out


def build(name: str, **params) -> Circuit:
    """Validated circuit (with source) for a named experiment."""
    p = parameters(name, **params)
    if name == "hom":
        c = builders.hom(float(p["tau"]), float(p["sigma"]), p["delta_theta"])
    elif name == "mz":
        c = builders.mz(float(p["delta_phi"]))
    elif name == "croca_full":
        c = builders.croca_full(p["delta_theta"], float(p["delta_phi"]), float(p["tau"]), float(p["sigma"]))
    elif name == "appendix1":
        c = builders.appendix1(p["delta_theta"], float(p["tau"]), float(p["sigma"]))
    else:
        c = builders.laser(complex(p["alpha"]), float(p["delta_theta"]), float(p["delta_phi"]))
    return require_valid(c)


# --- statistics --------------------------------------------------------------------


Predicate = Callable[[dict], bool]


def _only(d: int, other: int) -> Predicate:
    return lambda c: c[d] > 0 and c[other] == 0


def _none_tapped(c) -> bool:
    return c[3] == 0 and c[4] == 0


@dataclass(frozen=True)
class Statistic:
    name: str
    event: Predicate
    condition: Predicate | None = None


_TAPPED = [
    Statistic("P(3&4)", lambda c: c[3] > 0 and c[4] > 0),
    Statistic("P(both in MZ)", _none_tapped),
]

STATISTICS: dict[str, list[Statistic]] = {
    "hom": [Statistic("P(1&2)", lambda c: c[1] > 0 and c[2] > 0)],
    "mz": [Statistic("P(1)", lambda c: c[1] > 0), Statistic("P(2)", lambda c: c[2] > 0)],
    "croca_full": _TAPPED + [
        Statistic("P(1|3 xor 4)", lambda c: c[1] > 0, emptywave.tap_xor),
        Statistic("P(2|3 xor 4)", lambda c: c[2] > 0, emptywave.tap_xor),
        Statistic("P(2|3)", lambda c: c[2] > 0, _only(3, 4)),
        Statistic("P(1|4)", lambda c: c[1] > 0, _only(4, 3)),
        Statistic("P(1&2|both in MZ)", lambda c: c[1] > 0 and c[2] > 0, _none_tapped),
        Statistic("P(same port|both in MZ)", lambda c: c[1] == 2 or c[2] == 2, _none_tapped),
    ],
    "appendix1": _TAPPED + [
        Statistic("P(1|3 xor 4)", lambda c: c[1] > 0, emptywave.tap_xor),
        Statistic("P(2|3 xor 4)", lambda c: c[2] > 0, emptywave.tap_xor),
        Statistic("P(1 & 3 xor 4)", lambda c: c[1] > 0 and emptywave.tap_xor(c)),
        Statistic("P(2 & 3 xor 4)", lambda c: c[2] > 0 and emptywave.tap_xor(c)),
    ],
}

LASER_STATISTICS = [f"mean({d})" for d in (1, 2, 3, 4)]

# two-photon fringes in the interferometer oscillate at twice the arm phase
HARMONIC = {"P(1&2|both in MZ)": 2, "P(same port|both in MZ)": 2}


def statistic_names(name: str) -> list[str]:
    if name == "laser_calibration":
        return list(LASER_STATISTICS)
    return [s.name for s in STATISTICS[name]]


def evaluate(stat: Statistic, dist: ClickDistribution) -> tuple[float, float]:
    """Value and binomial standard error; NaN when the condition never occurs."""
    if stat.condition is None:
        return dist.probability(stat.event), dist.stderr(stat.event)
    z = dist.probability(stat.condition)
    if z <= 0:
        return math.nan, math.nan
    p = dist.probability(lambda c: stat.condition(c) and stat.event(c)) / z
    if not dist.n_samples:
        return p, 0.0
    n = z * dist.n_samples
    return p, math.sqrt(max(p * (1 - p), 0.0) / n)


# --- running models ----------------------------------------------------------------


@dataclass
class ExperimentSpec:
    name: str
    params: dict = field(default_factory=dict)
    models: tuple[str, ...] = MODELS
    n_samples: int = 100_000
    seed: int = 0
    exact: bool = False  # DeBroglie3D via the analytic routing path
    first_sample: int = 0

    def __post_init__(self):
        self.params = parameters(self.name, **self.params)
        bad = [m for m in self.models if m not in MODELS]
        if bad:
            raise ExperimentError(f"unknown model(s) {', '.join(bad)}; choose from {', '.join(MODELS)}")
        if not self.models:
            raise ExperimentError("no models requested")
        if int(self.n_samples) < 1:
            raise ExperimentError("n_samples must be at least 1")
        if int(self.seed) < 0:
            raise ExperimentError("seed must be non-negative")


@dataclass
class ModelResult:
    model: str
    distribution: ClickDistribution | None
    statistics: dict[str, tuple[float, float]]
    runtime: float
    breakdown_fraction: float = 0.0


@dataclass(frozen=True)
class Divergence:
    statistic: str
    model_a: str
    model_b: str
    difference: float
    combined_stderr: float


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    models: dict[str, ModelResult]
    divergences: list[Divergence]

    @property
    def diverged(self) -> bool:
        return bool(self.divergences)

    def value(self, model: str, statistic: str) -> float:
        return self.models[model].statistics[statistic][0]

    def stderr(self, model: str, statistic: str) -> float:
        return self.models[model].statistics[statistic][1]


def _laser_model(spec: ExperimentSpec, circuit: Circuit, model: str) -> ModelResult:
    t0 = time.perf_counter()
    dets = circuit.detectors()
    if model == "DeBroglie3D":
        src = emptywave.source_waves(circuit)
        inten = emptywave.propagate_fields(circuit, src.inputs, src.overlap).intensity()
        means = {d.detector_id: float(inten[d.mode]) for d in dets}
    else:
        # the pilot-wave model is in quantum equilibrium, so its count means are Born's
        field_out = fock.propagate_coherent(None, circuit)
        means = fock.coherent_click_statistics(field_out, circuit).means
    stats = {f"mean({d})": (means[d], 0.0) for d in sorted(means)}
    return ModelResult(model, None, stats, time.perf_counter() - t0)


def run_model(spec: ExperimentSpec, model: str, circuit: Circuit | None = None) -> ModelResult:
    circuit = build(spec.name, **spec.params) if circuit is None else circuit
    if spec.name == "laser_calibration":
        return _laser_model(spec, circuit, model)
    t0 = time.perf_counter()
    breakdown = 0.0
    try:
        if model == "CI":
            dist = fock.exact_distribution(circuit)
        elif model == "Bohm3ND":
            dist = bohmian.sample_branch_dynamics(circuit, spec.n_samples, spec.seed,
                                                  first_sample=spec.first_sample).distribution
        else:
            coherence = emptywave.coherence_from(spec.params.get("delta_theta", 0.0))
            if spec.exact:
                res = emptywave.analytic(circuit, coherence)
            else:
                res = emptywave.simulate(circuit, coherence, spec.n_samples, spec.seed, spec.first_sample)
            dist, breakdown = res.joint, res.breakdown_fraction
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        raise EngineError(model, str(exc)) from exc
    stats = {s.name: evaluate(s, dist) for s in STATISTICS[spec.name]}
    if model == "DeBroglie3D":
        stats["breakdown"] = (breakdown, 0.0)
    return ModelResult(model, dist, stats, time.perf_counter() - t0, breakdown)


def divergences(results: dict[str, ModelResult], sigmas: float = DIVERGENCE_SIGMAS) -> list[Divergence]:
    """Pairs of models whose shared statistics differ beyond ``sigmas`` combined errors.

    Exact-versus-exact comparisons use an absolute tolerance of ``EXACT_TOL``.
    """
    out = []
    names = list(results)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            for stat, (va, sa) in results[a].statistics.items():
                if stat == "breakdown" or stat not in results[b].statistics:
                    continue
                vb, sb = results[b].statistics[stat]
                if math.isnan(va) or math.isnan(vb):
                    continue
                se = math.hypot(sa, sb)
                diff = abs(va - vb)
                if (se > 0 and diff > sigmas * se) or (se == 0 and diff > EXACT_TOL):
                    out.append(Divergence(stat, a, b, va - vb, se))
    return out


def compare_models(spec: ExperimentSpec) -> ExperimentResult:
    """Run every requested model on the same circuit and seed."""
    circuit = build(spec.name, **spec.params)
    results = {m: run_model(spec, m, circuit) for m in spec.models}
    return ExperimentResult(spec, results, divergences(results))


# --- sweeps ------------------------------------------------------------------------


@dataclass
class SweepResult:
    parameter: str
    grid: np.ndarray
    points: list[ExperimentResult]
    fits: dict[tuple[str, str], FringeFit]

    def series(self, model: str, statistic: str) -> tuple[np.ndarray, np.ndarray]:
        vals = np.array([p.value(model, statistic) for p in self.points])
        errs = np.array([p.stderr(model, statistic) for p in self.points])
        return vals, errs


def sweep(spec: ExperimentSpec, parameter: str, grid: Iterable[float]) -> SweepResult:
    """Evaluate ``spec`` along ``grid``; phase sweeps also get fringe fits.

    Point ``i`` uses sample indices starting at ``i * n_samples`` so points
    are statistically independent but reproducible.
    """
    if parameter not in SWEEPABLE:
        raise ExperimentError(f"{parameter!r} is not sweepable; choose from {', '.join(SWEEPABLE)}")
    if parameter not in DEFAULTS[spec.name]:
        raise ExperimentError(f"{spec.name} has no parameter {parameter!r}")
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0:
        raise ExperimentError("empty sweep grid")
    points = []
    for i, v in enumerate(grid):
        params = {**spec.params, parameter: float(v)}
        point = replace(spec, params=params, first_sample=spec.first_sample + i * spec.n_samples)
        points.append(compare_models(point))
    fits: dict[tuple[str, str], FringeFit] = {}
    if parameter in PHASE_PARAMS and len(grid) >= 4:
        for model in spec.models:
            for stat in statistic_names(spec.name):
                vals = np.array([p.value(model, stat) for p in points])
                errs = np.array([p.stderr(model, stat) for p in points])
                if np.all(np.isfinite(vals)):
                    fits[(model, stat)] = fit_fringe(grid, vals, errs if errs.any() else None,
                                                     HARMONIC.get(stat, 1))
    return SweepResult(parameter, grid, points, fits)
