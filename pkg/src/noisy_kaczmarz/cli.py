"""Command-line interface: ``noisy-kaczmarz {solve,experiment,bounds,gen}``.

Exit status is 0 on success, 1 for usage errors and 2 for runtime failures.

Experiment configuration files are flat ``key = value`` text::

    name = my-run
    source = gaussian:400x200        # or mtx:PATH; repeat the key for several
    normalize_rows = false
    noise = additive
    sigma_e = 0.01
    sigma_eps = 0.01
    methods = rk:1:1, rgrk:1:1, rgrk-sa:1:20   # method:theta:N
    trials = 50
    max_iterations = 4000
    stop_tolerance = 0.1
    base_seed = 0

Command-line flags override values read from ``--config``.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bounds as bnd
from .errors import ContractError, GenerationError, InvariantError, ParseError
from .harness import (DEFAULT_COMPARISON, ExperimentSpec, GaussianSource, MatrixMarketSource,
                      MethodConfig, median_curve_entries, run_trials)
from .io import (TraceEntry, find_matrix, load_matrix_market, write_bounds_csv,
                 write_summary_csv, write_trace_csv)
from .noise import (ADDITIVE, MULTIPLICATIVE, GroundTruth, NoiseSpec,
                    generate_gaussian_ground_truth, make_additive_ensemble,
                    make_multiplicative_noisy, noise_of, random_solution)
from .solvers import METHODS, RGRK_SA, SolverConfig, WorkingSystem, solve

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
_RUNTIME_ERRORS = (ContractError, ParseError, GenerationError, InvariantError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_usage()}")


@dataclass(frozen=True)
class Preset:
    """A named experiment; one spec per matrix source."""

    name: str
    specs: tuple

    def with_overrides(self, **changes) -> "Preset":
        return Preset(self.name, tuple(replace(s, **changes) for s in self.specs))


def _thetas():
    return (0.2, 0.4, 0.6, 0.8, 1.0)


def preset_catalog() -> list:
    """The four built-in experiment presets."""
    sim = GaussianSource(400, 200)
    noise = NoiseSpec(ADDITIVE, 0.01, 0.01)
    base = dict(noise=noise, trials=50, stop_tolerance=1e-1, max_iterations=4000)
    sweep = tuple(MethodConfig(m, th, 10 if m == RGRK_SA else 1)
                  for m in ("rgrk", RGRK_SA) for th in _thetas())
    real = tuple(ExperimentSpec(MatrixMarketSource(f"{name}.mtx", name),
                                methods=DEFAULT_COMPARISON, **{**base, "max_iterations": 2000})
                 for name in ("ash958", "ash219", "abtaha1", "abtaha2"))
    return [
        Preset("figure2-theta-sweep", (ExperimentSpec(sim, methods=sweep, **base),)),
        Preset("figure3-n-sweep", (ExperimentSpec(
            sim, methods=tuple(MethodConfig(RGRK_SA, 1.0, N) for N in (1, 10, 100, 1000)),
            **base),)),
        Preset("figure4-simulated", (ExperimentSpec(sim, methods=DEFAULT_COMPARISON, **base),)),
        Preset("figure5-realworld", real),
    ]


def find_preset(name: str) -> Preset:
    """Exact name or unique prefix (``figure3`` selects ``figure3-n-sweep``)."""
    catalog = preset_catalog()
    for p in catalog:
        if p.name == name:
            return p
    hits = [p for p in catalog if p.name.startswith(name)]
    if len(hits) != 1:
        names = ", ".join(p.name for p in catalog)
        raise UsageError(f"unknown preset {name!r}; choose from {names}")
    return hits[0]


# --- declarative config --------------------------------------------------

def _source_text(src) -> str:
    if isinstance(src, GaussianSource):
        return f"gaussian:{src.m}x{src.n}"
    text = f"mtx:{src.path}"
    return text if src.name is None else f"{text}|{src.name}"


def _parse_source(text: str, normalize: bool):
    kind, _, rest = text.partition(":")
    if kind == "gaussian":
        m, n = _parse_shape(rest)
        return GaussianSource(m, n, normalize)
    if kind == "mtx" and rest:
        path, _, name = rest.partition("|")
        return MatrixMarketSource(path, name or None)
    raise ValueError(f"bad source {text!r}; expected gaussian:MxN or mtx:PATH")


def _parse_shape(text: str):
    try:
        m, n = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"bad shape {text!r}; expected MxN such as 400x200") from None
    if m < 1 or n < 1:
        raise ValueError(f"shape {text!r} must be positive")
    return m, n


def _bool_text(v: bool) -> str:
    return "true" if v else "false"


def preset_to_text(preset: Preset) -> str:
    first = preset.specs[0]
    for s in preset.specs[1:]:
        if replace(s, source=first.source) != first:
            raise ContractError("config text needs specs that differ only in their source")
    norm = isinstance(first.source, GaussianSource) and first.source.normalize_rows
    lines = [f"name = {preset.name}"]
    lines += [f"source = {_source_text(s.source)}" for s in preset.specs]
    lines += [
        f"normalize_rows = {_bool_text(norm)}",
        f"noise = {first.noise.kind}",
        f"sigma_e = {first.noise.sigma_e!r}",
        f"sigma_eps = {first.noise.sigma_eps!r}",
        "methods = " + ", ".join(f"{mc.method}:{mc.theta!r}:{mc.N}" for mc in first.methods),
        f"trials = {first.trials}",
        f"max_iterations = {first.max_iterations}",
        f"stop_tolerance = {first.stop_tolerance!r}",
        f"base_seed = {first.base_seed}",
    ]
    return "\n".join(lines) + "\n"


_KEYS = {"name", "source", "normalize_rows", "noise", "sigma_e", "sigma_eps", "methods",
         "trials", "max_iterations", "stop_tolerance", "base_seed"}


def preset_from_text(text: str, origin: str = "<config>") -> Preset:
    values: dict = {}
    sources = []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (part.strip() for part in line.partition("="))
        if not sep or key not in _KEYS:
            raise ParseError(f"expected one of {sorted(_KEYS)} as 'key = value'", no, origin)
        if key == "source":
            sources.append((no, val))
        elif key in values:
            raise ParseError(f"duplicate key {key!r}", no, origin)
        else:
            values[key] = (no, val)

    def get(key, conv, default):
        if key not in values:
            return default
        no, val = values[key]
        try:
            return conv(val)
        except (ValueError, ContractError) as exc:
            raise ParseError(f"{key}: {exc}", no, origin) from None

    def to_bool(v):
        if v.lower() not in ("true", "false"):
            raise ValueError(f"expected true or false, got {v!r}")
        return v.lower() == "true"

    def to_methods(v):
        out = []
        for item in v.split(","):
            parts = item.strip().split(":")
            if len(parts) != 3:
                raise ValueError(f"method entry {item.strip()!r} is not method:theta:N")
            out.append(MethodConfig(parts[0], float(parts[1]), int(parts[2])))
        return tuple(out)

    normalize = get("normalize_rows", to_bool, False)
    try:
        noise = NoiseSpec(get("noise", str, ADDITIVE), get("sigma_e", float, 0.01),
                          get("sigma_eps", float, 0.01))
    except ContractError as exc:
        raise ParseError(str(exc), None, origin) from None
    if not sources:
        raise ParseError("at least one 'source' line is required", None, origin)
    specs = []
    for no, val in sources:
        try:
            src = _parse_source(val, normalize)
            specs.append(ExperimentSpec(
                src, noise=noise, methods=get("methods", to_methods, ()),
                trials=get("trials", int, 50), max_iterations=get("max_iterations", int, 4000),
                stop_tolerance=get("stop_tolerance", float, 1e-1),
                base_seed=get("base_seed", int, 0)))
        except ParseError:
            raise
        except (ValueError, ContractError) as exc:
            raise ParseError(str(exc), no, origin) from None
    return Preset(get("name", str, "custom"), tuple(specs))


# --- argument parsing ----------------------------------------------------

def _add_source(p, required_hint=True):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gaussian", metavar="MxN", help="random Gaussian system, e.g. 400x200")
    g.add_argument("--mtx", metavar="PATH", help="Matrix Market file")
    p.add_argument("--normalize-rows", action="store_true", default=None,
                   help="rescale Gaussian rows to unit norm")


def _add_noise(p):
    p.add_argument("--noise", choices=(ADDITIVE, MULTIPLICATIVE), default=None)
    p.add_argument("--sigma-e", type=float, default=None, metavar="FLOAT",
                   help="matrix noise standard deviation per entry (default 0.01)")
    p.add_argument("--sigma-eps", type=float, default=None, metavar="FLOAT",
                   help="right-hand-side noise standard deviation per entry (default 0.01)")
    p.add_argument("--n-meas", type=int, default=None, metavar="INT",
                   help="measurements averaged by rgrk-sa (default 1)")
    p.add_argument("--seed", type=int, default=None, metavar="INT")


def _add_solver(p):
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--theta", type=float, default=None, metavar="FLOAT")
    p.add_argument("--max-iters", type=int, default=None, metavar="INT")
    p.add_argument("--tol", type=float, default=None, metavar="FLOAT",
                   help="stop when the relative error falls below this")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="noisy-kaczmarz",
                     description="Kaczmarz solvers and experiments for doubly-noisy systems.")
    sub = parser.add_subparsers(dest="command", metavar="{solve,experiment,bounds,gen}",
                                parser_class=_Parser)

    p = sub.add_parser("solve", help="run one solver on one noisy system")
    _add_source(p)
    _add_noise(p)
    _add_solver(p)
    p.add_argument("--out", metavar="PATH", help="trace CSV destination")
    p.add_argument("--no-timing", action="store_true", help="leave elapsed_s empty")

    p = sub.add_parser("experiment", help="multi-trial experiment or preset")
    _add_source(p)
    _add_noise(p)
    _add_solver(p)
    p.add_argument("--preset", metavar="NAME", help="built-in preset (prefix allowed)")
    p.add_argument("--config", metavar="PATH", help="key = value experiment file")
    p.add_argument("--trials", type=int, default=None, metavar="INT")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, metavar="INT",
                   help="worker processes (default: logical processors)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--no-timing", action="store_true", help="leave timing columns empty")

    p = sub.add_parser("bounds", help="bound quantities for one noisy system")
    _add_source(p)
    _add_noise(p)
    p.add_argument("--theta", type=float, default=None, metavar="FLOAT")
    p.add_argument("--out", metavar="PATH", help="bounds CSV destination")

    p = sub.add_parser("gen", help="write a ground truth and its noisy ensemble to .npz")
    _add_source(p)
    _add_noise(p)
    p.add_argument("--out", metavar="PATH", required=True, help=".npz destination")
    return parser


def _pick(value, default):
    return default if value is None else value


def _truth_from_args(args) -> GroundTruth:
    seed = _pick(args.seed, 0)
    if args.gaussian:
        try:
            m, n = _parse_shape(args.gaussian)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return generate_gaussian_ground_truth(m, n, seed, bool(args.normalize_rows))
    if args.mtx:
        return random_solution(load_matrix_market(args.mtx, allow_zero_rows=False), seed)
    raise UsageError("a source is required: --gaussian MxN or --mtx PATH")


def _noise_from_args(args, seed) -> NoiseSpec:
    return NoiseSpec(_pick(args.noise, ADDITIVE), _pick(args.sigma_e, 0.01),
                     _pick(args.sigma_eps, 0.01), seed)


def _noisy_system(args, gt: GroundTruth, method: str):
    """Working ``(A, b)``: averaged for rgrk-sa, measurement 1 otherwise."""
    seed = _pick(args.seed, 0)
    spec = _noise_from_args(args, seed)
    n_meas = _pick(args.n_meas, 1)
    if n_meas < 1:
        raise UsageError("--n-meas must be at least 1")
    if spec.kind == MULTIPLICATIVE:
        if n_meas != 1:
            raise UsageError("multiplicative noise supports --n-meas 1 only")
        A, b, pert = make_multiplicative_noisy(gt, spec, seed)
        return A, b, pert, 1
    N = n_meas if method == RGRK_SA else 1
    ens = make_additive_ensemble(gt, N, spec)
    return ens.abar, ens.bbar, None, N


def _cmd_solve(args) -> int:
    gt = _truth_from_args(args)
    method = _pick(args.method, "rgrk")
    A, b, _, N = _noisy_system(args, gt, method)
    cfg = SolverConfig(method=method, theta=_pick(args.theta, 1.0),
                       max_iterations=_pick(args.max_iters, 4000),
                       stop_tolerance=_pick(args.tol, 1e-1), seed=_pick(args.seed, 0))
    tr = solve(WorkingSystem(A, b, gt), cfg)
    if args.out:
        write_trace_csv([TraceEntry("solve", method, cfg.theta, N, cfg.seed, tr)], args.out,
                        timing=not args.no_timing)
    print(f"method={method} theta={cfg.theta} N={N} iterations={tr.iterations} "
          f"final_error={tr.final_error:.6g} reason={tr.termination_reason}")
    return EXIT_OK


def _experiment_preset(args) -> Preset:
    if args.preset and args.config:
        raise UsageError("--preset and --config are mutually exclusive")
    if args.preset:
        preset = find_preset(args.preset)
    elif args.config:
        path = Path(args.config)
        preset = preset_from_text(path.read_text(encoding="utf-8"), str(path))
    else:
        if not (args.gaussian or args.mtx):
            raise UsageError("experiment needs --preset, --config or a source flag")
        preset = Preset("custom", (ExperimentSpec(GaussianSource(1, 1)),))

    if args.gaussian or args.mtx:
        try:
            src = (GaussianSource(*_parse_shape(args.gaussian), bool(args.normalize_rows))
                   if args.gaussian else MatrixMarketSource(args.mtx))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        preset = Preset(preset.name, (replace(preset.specs[0], source=src),))
    elif args.normalize_rows:
        preset = Preset(preset.name, tuple(
            replace(s, source=replace(s.source, normalize_rows=True))
            if isinstance(s.source, GaussianSource) else s for s in preset.specs))

    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.max_iters is not None:
        changes["max_iterations"] = args.max_iters
    if args.tol is not None:
        changes["stop_tolerance"] = args.tol
    noise = preset.specs[0].noise
    if any(v is not None for v in (args.noise, args.sigma_e, args.sigma_eps)):
        changes["noise"] = NoiseSpec(_pick(args.noise, noise.kind),
                                     _pick(args.sigma_e, noise.sigma_e),
                                     _pick(args.sigma_eps, noise.sigma_eps))
    if args.method is not None:
        N = _pick(args.n_meas, 1) if args.method == RGRK_SA else 1
        changes["methods"] = (MethodConfig(args.method, _pick(args.theta, 1.0), N),)
    elif args.theta is not None or args.n_meas is not None:
        raise UsageError("--theta and --n-meas need --method in experiment mode")
    preset = preset.with_overrides(**changes)
    if not preset.specs[0].methods:
        preset = preset.with_overrides(methods=DEFAULT_COMPARISON)
    return preset


def _resolve_source(spec: ExperimentSpec) -> ExperimentSpec:
    src = spec.source
    if isinstance(src, MatrixMarketSource) and not Path(src.path).is_file():
        found = find_matrix(Path(src.path).name.split(".")[0])
        if found is not None:
            return replace(spec, source=MatrixMarketSource(str(found), src.name))
    return spec


def _cmd_experiment(args) -> int:
    preset = _experiment_preset(args)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    summaries = []
    for spec in preset.specs:
        spec = _resolve_source(spec)
        if args.out:
            spec = replace(spec, keep_curves=True)
        print(f"[{preset.name}] {spec.source.label}: {len(spec.methods)} configurations x "
              f"{spec.trials} trials", file=sys.stderr)
        summaries.extend(run_trials(spec, jobs=args.jobs))
    timing = not args.no_timing
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_summary_csv(summaries, out / "summary.csv", timing=timing)
        write_trace_csv(median_curve_entries(summaries, preset.specs[0].base_seed),
                        out / "median_traces.csv", timing=False)
    for s in summaries:
        note = f" ({s.note})" if s.note else ""
        print(f"{s.matrix} {s.method} theta={s.theta} N={s.N}{note}: "
              f"median_final_error={s.median_final_error:.6g} "
              f"median_iters={s.median_iterations:g}")
    failed = [s for s in summaries if s.error]
    for s in failed:
        print(f"error: {s.matrix} {s.method} theta={s.theta} N={s.N}: {s.error}",
              file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


def _cmd_bounds(args) -> int:
    gt = _truth_from_args(args)
    A, b, pert, N = _noisy_system(args, gt, RGRK_SA)
    theta = _pick(args.theta, 1.0)
    labels, reports = [], []
    if pert is not None:
        eps = b - gt.b
        reports.append(bnd.multiplicative_report(A, gt, pert, eps, theta))
        labels.append("multiplicative")
    else:
        E, eps = noise_of(gt, A, b)
        reports.append(bnd.theorem1_report(A, gt, E, eps, theta))
        labels.append("realized" if N == 1 else f"realized-averaged-N{N}")
        if args.normalize_rows and gt.A.m >= 2:
            m, n = gt.A.shape
            noise = _noise_from_args(args, 0)
            s = reports[0].sigma_min_tilde
            reports.append(bnd.theorem2_report(
                m, theta, N, bnd.total_noise_level(noise.sigma_e, m, n),
                bnd.total_noise_level(noise.sigma_eps, m), float(gt.xhat @ gt.xhat), s * s))
            labels.append("unit-rows-expected")
    if args.out:
        write_bounds_csv(reports, args.out, labels)
    for label, rep in zip(labels, reports):
        exact = "exact" if rep.sigma_min_tilde_exact else "surrogate"
        print(f"{label}: gamma={rep.gamma:.6g} sigma_min_tilde={rep.sigma_min_tilde:.6g} "
              f"({exact}) first={rep.contraction_first_step:.10g} "
              f"steady={rep.contraction_steady:.10g} horizon={rep.horizon:.6g} "
              f"horizon_per_n={rep.horizon_per_n:.6g}")
    return EXIT_OK


def _cmd_gen(args) -> int:
    gt = _truth_from_args(args)
    A, b, _, N = _noisy_system(args, gt, RGRK_SA)
    arrays = {"xhat": gt.xhat, "b": gt.b, "abar": A.to_dense(), "bbar": b,
              "N": np.array(N), "seed": np.array(_pick(args.seed, 0))}
    if gt.A.is_sparse:
        arrays.update(A_indptr=gt.A.indptr, A_indices=gt.A.indices, A_data=gt.A.data,
                      A_shape=np.array(gt.A.shape))
    else:
        arrays["A"] = gt.A.dense
    with open(args.out, "wb") as fh:
        np.savez(fh, **arrays)
    print(f"wrote {args.out}: {gt.A.m}x{gt.A.n}, N={N}")
    return EXIT_OK


_COMMANDS = {"solve": _cmd_solve, "experiment": _cmd_experiment, "bounds": _cmd_bounds,
             "gen": _cmd_gen}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "noisy-kaczmarz: a subcommand is required")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help
        return int(exc.code or 0)
    except _RUNTIME_ERRORS as exc:
        print(f"noisy-kaczmarz: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
