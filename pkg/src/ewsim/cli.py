"""Command-line front end.

    ewsim list
    ewsim run     --experiment croca_full --model all --delta-phi 0 --samples 100000 --seed 42 --out r.csv
    ewsim sweep   --experiment hom --param tau --from -4 --to 4 --steps 65 --model CI
    ewsim compare --experiment laser_calibration --alpha 1.0

Exit status: 0 on success, 1 on invalid input, 2 when an engine fails.
Data goes to ``--out`` or stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, _kernels
from .circuit import UNIFORM_RANDOM
from .experiments import (
    DEFAULTS,
    EXPERIMENTS,
    MODELS,
    SWEEPABLE,
    EngineError,
    ExperimentError,
    ExperimentResult,
    ExperimentSpec,
    SweepResult,
    compare_models,
    statistic_names,
    sweep,
)

SAMPLES_ENV = "EWSIM_SAMPLES"
DEFAULT_SAMPLES = 100_000
PARAM_FLAGS = ("delta_theta", "delta_phi", "tau", "sigma", "alpha")
RUN_KEYS = {"experiment", "models", "samples", "seed", "out", "format", "exact", *PARAM_FLAGS}
SWEEP_KEYS = {"param", "from", "to", "steps"}


class UsageError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, complex):
        return f"{x.real:.12g}{x.imag:+.12g}j" if x.imag else f"{x.real:.12g}"
    return f"{float(x):.12g}"


# --- configuration -----------------------------------------------------------------


@dataclass
class RunConfig:
    experiment: str
    models: tuple[str, ...] = MODELS
    params: dict = field(default_factory=dict)
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    exact: bool = False
    sweep: dict | None = None  # param, from, to, steps

    def spec(self) -> ExperimentSpec:
        return ExperimentSpec(self.experiment, dict(self.params), self.models, self.n_samples,
                              self.seed, self.exact)

    def grid(self) -> np.ndarray:
        s = self.sweep
        return np.linspace(s["from"], s["to"], s["steps"])

    def dumps(self) -> str:
        cp = configparser.ConfigParser()
        run = {"experiment": self.experiment, "models": ", ".join(self.models),
               "samples": str(self.n_samples), "seed": str(self.seed), "format": self.format,
               "exact": str(self.exact).lower()}
        if self.out:
            run["out"] = self.out
        for k, v in self.params.items():
            run[k] = v if isinstance(v, str) else repr(v)
        cp["run"] = run
        if self.sweep:
            cp["sweep"] = {"param": self.sweep["param"], "from": repr(self.sweep["from"]),
                           "to": repr(self.sweep["to"]), "steps": str(self.sweep["steps"])}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].split(":", 1)[0].strip().lower() == key:
            return no
    return None


def read_config(path: str) -> dict:
    """Parse a config file into flat settings, rejecting unknown sections and keys."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    out: dict = {}
    for section in cp.sections():
        allowed = {"run": RUN_KEYS, "sweep": SWEEP_KEYS}.get(section)
        if allowed is None:
            raise UsageError(f"{path}:{_line_of(text, section, '') or '?'}: unknown section [{section}]")
        for key, value in cp[section].items():
            if key not in allowed:
                line = _line_of(text, section, key)
                raise UsageError(f"{path}:{line}: unknown key {key!r} in [{section}]")
            out[(section, key)] = (value, _line_of(text, section, key))
    return out


def _number(value: str, what: str, kind=float):
    try:
        v = kind(value)
    except (TypeError, ValueError):
        raise UsageError(f"{what}: expected {kind.__name__}, got {value!r}") from None
    if kind is float and not math.isfinite(v):
        raise UsageError(f"{what}: must be finite")
    return v


def _phase(value: str, what: str):
    if str(value).strip().lower() in ("uniform-random", "uniform", "random"):
        return UNIFORM_RANDOM
    return _number(value, what)


def _models(value: str) -> tuple[str, ...]:
    names = [v.strip() for v in value.replace(",", " ").split() if v.strip()]
    if not names or names == ["all"]:
        return MODELS
    lookup = {m.lower(): m for m in MODELS}
    out = []
    for n in names:
        if n.lower() == "all":
            return MODELS
        if n.lower() not in lookup:
            raise UsageError(f"unknown model {n!r}; choose from {', '.join(MODELS)} or all")
        out.append(lookup[n.lower()])
    return tuple(dict.fromkeys(out))


def resolve(args: argparse.Namespace, command: str) -> RunConfig:
    """Merge config file, environment and flags (flags win) into a :class:`RunConfig`."""
    raw: dict = {}
    if getattr(args, "config", None):
        raw = read_config(args.config)

    def pick(section, key, flag):
        v = getattr(args, flag, None)
        if v is not None:
            return str(v) if not isinstance(v, str) else v, f"--{flag.replace('_', '-')}"
        if (section, key) in raw:
            value, line = raw[(section, key)]
            return value, f"{args.config}:{line}: {key}"
        return None, key

    experiment, _ = pick("run", "experiment", "experiment")
    if experiment is None:
        raise UsageError("no experiment given (use --experiment or a config file)")
    if experiment not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    models, _ = pick("run", "models", "model")
    params = {}
    for p in PARAM_FLAGS:
        v, where = pick("run", p, p)
        if v is None:
            continue
        if p not in DEFAULTS[experiment]:
            raise UsageError(f"{where}: {experiment} does not take {p}")
        if p == "delta_theta":
            params[p] = _phase(v, where)
        elif p == "alpha":
            try:
                params[p] = complex(v.replace(" ", ""))
            except ValueError:
                raise UsageError(f"{where}: expected a complex number, got {v!r}") from None
            if params[p].imag == 0:
                params[p] = params[p].real
        else:
            params[p] = _number(v, where)
    samples, where = pick("run", "samples", "samples")
    if samples is None and os.environ.get(SAMPLES_ENV):
        samples, where = os.environ[SAMPLES_ENV], SAMPLES_ENV
    n = DEFAULT_SAMPLES if samples is None else _number(samples, where, int)
    if n < 1:
        raise UsageError(f"{where}: sample count must be positive")
    seed_v, where = pick("run", "seed", "seed")
    seed = 0 if seed_v is None else _number(seed_v, where, int)
    if seed < 0:
        raise UsageError(f"{where}: seed must be non-negative")
    out, _ = pick("run", "out", "out")
    fmt_v, where = pick("run", "format", "format")
    fmt_v = (fmt_v or "csv").lower()
    if fmt_v not in ("csv", "json"):
        raise UsageError(f"{where}: format must be csv or json")
    exact_v, where = pick("run", "exact", "exact")
    exact = False
    if exact_v is not None:
        if str(exact_v).lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise UsageError(f"{where}: expected true or false")
        exact = str(exact_v).lower() in ("true", "1", "yes")

    sweep_cfg = None
    if command == "sweep":
        got = {}
        for key, flag, kind in (("param", "param", str), ("from", "start", float),
                                ("to", "stop", float), ("steps", "steps", int)):
            v, where = pick("sweep", key, flag)
            if v is None:
                raise UsageError(f"sweep needs --{key} (or '{key}' in [sweep])")
            got[key] = v if kind is str else _number(v, where, kind)
        if got["param"] not in SWEEPABLE:
            raise UsageError(f"cannot sweep {got['param']!r}; choose from {', '.join(SWEEPABLE)}")
        if got["param"] not in DEFAULTS[experiment]:
            raise UsageError(f"{experiment} has no parameter {got['param']!r}")
        if got["steps"] < 1:
            raise UsageError("steps must be at least 1")
        sweep_cfg = got

    return RunConfig(experiment, _models(models) if models else MODELS, params, n, seed, out,
                     fmt_v, exact, sweep_cfg)


# --- output ------------------------------------------------------------------------


def provenance(cfg: RunConfig) -> dict:
    return {
        "version": __version__,
        "backend": _kernels.BACKEND,
        "experiment": cfg.experiment,
        "models": list(cfg.models),
        "parameters": {k: fmt(v) for k, v in cfg.spec().params.items()},
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "exact": cfg.exact,
        "sweep": None if cfg.sweep is None else {k: (v if isinstance(v, str) else fmt(v))
                                                 for k, v in cfg.sweep.items()},
    }


def result_rows(result: ExperimentResult, extra: dict | None = None) -> list[dict]:
    rows = []
    for model, mr in result.models.items():
        for stat, (value, err) in mr.statistics.items():
            row = {"experiment": result.spec.name, "model": model, "statistic": stat,
                   "value": fmt(value), "stderr": fmt(err)}
            if extra:
                row.update({k: fmt(v) for k, v in extra.items()})
            rows.append(row)
    return rows


def divergence_rows(result: ExperimentResult) -> list[dict]:
    return [{"statistic": d.statistic, "model_a": d.model_a, "model_b": d.model_b,
             "difference": fmt(d.difference), "combined_stderr": fmt(d.combined_stderr)}
            for d in result.divergences]


def write_csv(fh, rows: list[dict], columns: list[str]) -> None:
    w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


def emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


BASE_COLUMNS = ["experiment", "model", "statistic", "value", "stderr"]


def do_run(cfg: RunConfig) -> str:
    result = compare_models(cfg.spec())
    rows = result_rows(result)
    if cfg.format == "json":
        return json.dumps({"provenance": provenance(cfg), "rows": rows,
                           "divergences": divergence_rows(result)}, indent=2) + "\n"
    buf = io.StringIO()
    write_csv(buf, rows, BASE_COLUMNS)
    return buf.getvalue()


def do_sweep(cfg: RunConfig) -> str:
    res: SweepResult = sweep(cfg.spec(), cfg.sweep["param"], cfg.grid())
    param = cfg.sweep["param"]
    rows = []
    for v, point in zip(res.grid, res.points):
        rows.extend(result_rows(point, {param: v}))
    if cfg.format == "json":
        fits = [{"model": m, "statistic": s, "visibility": fmt(f.visibility),
                 "visibility_stderr": fmt(f.visibility_stderr), "harmonic": f.harmonic}
                for (m, s), f in res.fits.items()]
        div = [{param: fmt(v), **d} for v, p in zip(res.grid, res.points) for d in divergence_rows(p)]
        return json.dumps({"provenance": provenance(cfg), "rows": rows, "fits": fits,
                           "divergences": div}, indent=2) + "\n"
    buf = io.StringIO()
    write_csv(buf, rows, BASE_COLUMNS + [param])
    return buf.getvalue()


def do_compare(cfg: RunConfig) -> str:
    result = compare_models(cfg.spec())
    flagged = {d.statistic for d in result.divergences}
    stats = statistic_names(cfg.experiment)
    if cfg.format == "json":
        table = [{"statistic": s, **{m: fmt(result.value(m, s)) for m in cfg.models},
                  "diverged": s in flagged} for s in stats]
        return json.dumps({"provenance": provenance(cfg), "table": table,
                           "divergences": divergence_rows(result)}, indent=2) + "\n"
    rows = []
    for s in stats:
        row = {"statistic": s, "diverged": "yes" if s in flagged else "no"}
        for m in cfg.models:
            row[m] = fmt(result.value(m, s))
            row[f"{m}_stderr"] = fmt(result.stderr(m, s))
        rows.append(row)
    cols = ["statistic"] + [c for m in cfg.models for c in (m, f"{m}_stderr")] + ["diverged"]
    buf = io.StringIO()
    write_csv(buf, rows, cols)
    return buf.getvalue()


def do_list() -> str:
    lines = []
    for name in EXPERIMENTS:
        params = ", ".join(f"{k}={fmt(v)}" for k, v in DEFAULTS[name].items())
        lines.append(f"{name}: {params}")
        lines.append(f"  statistics: {'; '.join(statistic_names(name))}")
    lines.append(f"models: {', '.join(MODELS)}")
    lines.append(f"sweepable: {', '.join(SWEEPABLE)}")
    return "\n".join(lines) + "\n"


# --- argument parsing --------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with [run] (and [sweep]) sections")
    p.add_argument("--experiment", choices=None, help=f"one of {', '.join(EXPERIMENTS)}")
    p.add_argument("--model", help="model name, comma list, or all")
    p.add_argument("--delta-theta", dest="delta_theta", help="relative source phase or uniform-random")
    p.add_argument("--delta-phi", dest="delta_phi", help="Mach-Zehnder arm phase")
    p.add_argument("--tau", help="signal delay")
    p.add_argument("--sigma", help="packet bandwidth")
    p.add_argument("--alpha", help="laser amplitude (complex allowed, e.g. 0.5+0.5j)")
    p.add_argument("--samples", help=f"Monte-Carlo samples (default {DEFAULT_SAMPLES} or ${SAMPLES_ENV})")
    p.add_argument("--seed")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", help="csv or json")
    p.add_argument("--exact", action="store_const", const="true", default=None,
                   help="use the analytic routing path for DeBroglie3D")
    p.add_argument("--dump-config", dest="dump_config", help="write the resolved configuration here")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ewsim", description="Empty-wave interferometry simulator")
    parser.add_argument("--version", action="version", version=f"ewsim {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, text in (("run", "run one parameter point"), ("compare", "side-by-side model table")):
        _common(sub.add_parser(name, help=text))
    sp = sub.add_parser("sweep", help="sweep one parameter")
    _common(sp)
    sp.add_argument("--param")
    sp.add_argument("--from", dest="start")
    sp.add_argument("--to", dest="stop")
    sp.add_argument("--steps")
    sub.add_parser("list", help="list experiments, models and statistics")
    return parser


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing command (run, sweep, compare, list)")
        if args.command == "list":
            sys.stdout.write(do_list())
            return 0
        cfg = resolve(args, args.command)
        cfg.spec()  # validate parameters before any engine runs
        if args.dump_config:
            with open(args.dump_config, "w") as fh:
                fh.write(cfg.dumps())
        text = {"run": do_run, "sweep": do_sweep, "compare": do_compare}[args.command](cfg)
        emit(cfg, text)
        return 0
    except (UsageError, ExperimentError) as exc:
        print(f"ewsim: error: {exc}", file=sys.stderr)
        return 1
    except EngineError as exc:
        print(f"ewsim: engine failure in {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ewsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
