"""Benchmark harness CLI.

Subcommands:
  run CONFIG                    sweep solvers/presets over an experiment
  verify SUITE                  run property suites (prox|operators|equivalence|all)
  print-default-config NAME     emit the default config for an experiment

Configs are INI files with an [experiment] section, a [run] section, and an
optional [custom] section holding explicit step sizes for ``presets = custom``.
The environment variable SPLITOPT_OUTPUT_DIR overrides the configured output
directory.

Exit codes: 0 success; 1 malformed config; 2 solver divergence;
3 verification failure; 4 unwritable output directory; 5 unknown solver id;
6 invalid preset/solver pairing (missing or inadmissible step sizes).

Each sweep cell (solver, inner-iteration count, tolerance) writes one trace
CSV ``<experiment>_<solver>_J<j>_eps<eps>.csv`` under a per-preset
subdirectory, plus one row in ``summary.csv``; the Iter column of the summary
reads MAXITER when the solver hit its iteration cap without converging.
Files are written atomically and reruns of the same config are byte-identical.
"""

import argparse
import configparser
import os
import sys
import tempfile

from .problems import build_ct_problem, build_fused_lasso, build_lrtv_problem
from .solvers import (
    DUAL_SOLVERS,
    PRIMAL_DUAL_SOLVERS,
    SOLVERS,
    ConfigError,
    DivergenceError,
    SolverConfig,
    preset_config,
)
from .verification import run_suite

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_VERIFY = 3
EXIT_OUTPUT_DIR = 4
EXIT_UNKNOWN_SOLVER = 5
EXIT_BAD_PAIRING = 6

ENV_OUTPUT_DIR = "SPLITOPT_OUTPUT_DIR"

DEFAULT_CONFIGS = {
    "fused-lasso": """\
[experiment]
name = fused-lasso
seed = 0
m = 100
n = 200
mu1 = 0.2
mu2 = 0.8
noise_var = 0.01

[run]
solvers = fb-dual, fb-pd, tos-dual, tos-pd
presets = type-I, type-II
inner_iters = 1
eps = 1e-4, 1e-8
max_outer = 5000
output_dir = results/fused-lasso
""",
    "constrained-tv-ct": """\
[experiment]
name = constrained-tv-ct
seed = 0
img_side = 64
views = 20
rays = 96
mu = 0.5
noise_var = 0.01
tv_kind = iso

[run]
solvers = fb-dual, fb-pd, tos-dual, tos-pd
presets = custom
inner_iters = 10
eps = 1e-4, 1e-6
max_outer = 20000
output_dir = results/constrained-tv-ct

[custom]
lambda = 0.125
sigma = 0.125
tau = 1.0
""",
    "lrtv-sr": """\
[experiment]
name = lrtv-sr
seed = 0
rows = 32
cols = 32
blur_sigma = 1.0
factor = 2
lambda1 = 0.01
lambda2 = 0.01

[run]
solvers = fb-dual, fb-pd, tos-dual, tos-pd
presets = custom
inner_iters = 10
eps = 1e-6
max_outer = 100000
output_dir = results/lrtv-sr

[custom]
gamma = 0.1
lambda = 0.125
sigma = 0.125
tau = 1.0
""",
}


class CliConfigError(Exception):
    pass


def _fmt(value):
    if value is None:
        return ""
    return f"{value:.17g}"


def _parse_list(raw, conv):
    items = [s.strip() for s in raw.replace(",", " ").split()]
    return [conv(s) for s in items if s]


def _build_experiment(section):
    name = section.get("name", "").strip()
    seed = section.getint("seed", fallback=0)
    if name == "fused-lasso":
        return build_fused_lasso(
            m=section.getint("m", fallback=100),
            n=section.getint("n", fallback=200),
            mu1=section.getfloat("mu1", fallback=0.2),
            mu2=section.getfloat("mu2", fallback=0.8),
            noise_var=section.getfloat("noise_var", fallback=0.01),
            seed=seed,
        )
    if name == "constrained-tv-ct":
        return build_ct_problem(
            img_side=section.getint("img_side", fallback=64),
            views=section.getint("views", fallback=20),
            rays=section.getint("rays", fallback=96),
            mu=section.getfloat("mu", fallback=0.5),
            noise_var=section.getfloat("noise_var", fallback=0.01),
            tv_kind=section.get("tv_kind", fallback="iso").strip(),
            seed=seed,
        )
    if name == "lrtv-sr":
        return build_lrtv_problem(
            rows=section.getint("rows", fallback=32),
            cols=section.getint("cols", fallback=32),
            blur_sigma=section.getfloat("blur_sigma", fallback=1.0),
            factor=section.getint("factor", fallback=2),
            lambda1=section.getfloat("lambda1", fallback=0.01),
            lambda2=section.getfloat("lambda2", fallback=0.01),
            seed=seed,
        )
    raise CliConfigError(f"unknown experiment {name!r}")


def _read_config(path):
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise CliConfigError(f"cannot read config file {path!r}")
    if "experiment" not in parser or "run" not in parser:
        raise CliConfigError("config needs [experiment] and [run] sections")
    run = parser["run"]
    cfg = {
        "experiment": parser["experiment"],
        "solvers": _parse_list(run.get("solvers", ""), str),
        "presets": _parse_list(run.get("presets", "type-II"), str),
        "inner_iters": _parse_list(run.get("inner_iters", "1"), int),
        "eps": _parse_list(run.get("eps", "1e-6"), float),
        "max_outer": run.getint("max_outer", fallback=5000),
        "warm_start_dual": run.getboolean("warm_start_dual", fallback=True),
        "output_dir": run.get("output_dir", "results"),
        "custom": parser["custom"] if "custom" in parser else None,
    }
    if not cfg["solvers"]:
        raise CliConfigError("solver list is empty")
    if any(e <= 0 for e in cfg["eps"]):
        raise CliConfigError("all eps values must be positive")
    if any(j < 1 for j in cfg["inner_iters"]):
        raise CliConfigError("all inner_iters values must be >= 1")
    for preset in cfg["presets"]:
        if preset not in ("type-I", "type-II", "custom"):
            raise CliConfigError(f"unknown preset {preset!r}")
        if preset == "custom" and cfg["custom"] is None:
            raise CliConfigError("preset 'custom' needs a [custom] section")
    return cfg


def _cell_config(problem, preset, custom, solver_id, inner, eps, max_outer, warm):
    common = dict(inner_iters=inner, eps=eps, max_outer=max_outer, warm_start_dual=warm)
    if preset in ("type-I", "type-II"):
        return preset_config(problem, preset, **common)
    gamma = custom.getfloat("gamma", fallback=None)
    if gamma is None:
        lip = problem.f.lipschitz
        if lip <= 0:
            raise ConfigError("custom preset needs gamma when L = 0")
        gamma = 1.9 / lip
    lam = custom.getfloat("lambda", fallback=None)
    sigma = custom.getfloat("sigma", fallback=None)
    tau = custom.getfloat("tau", fallback=None)
    if solver_id in DUAL_SOLVERS and lam is None:
        raise ConfigError(f"custom preset provides no lambda for dual solver {solver_id!r}")
    if solver_id in PRIMAL_DUAL_SOLVERS and (sigma is None or tau is None):
        raise ConfigError(
            f"custom preset provides no sigma/tau for primal-dual solver {solver_id!r}"
        )
    return SolverConfig(gamma=gamma, lam=lam, sigma=sigma, tau=tau,
                        param_preset="custom", **common)


def _atomic_write(path, text):
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _trace_csv(trace, with_ssim):
    header = "iter,objective,rel_change,snr,nmsd"
    if with_ssim:
        header += ",ssim"
    lines = [header]
    for r in trace.records:
        row = [str(r.k), _fmt(r.objective), _fmt(r.rel_change), _fmt(r.snr), _fmt(r.nmsd)]
        if with_ssim:
            row.append(_fmt(r.ssim))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def cmd_run(args):
    try:
        cfg = _read_config(args.config)
        problem = _build_experiment(cfg["experiment"])
    except (CliConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for solver_id in cfg["solvers"]:
        if solver_id not in SOLVERS:
            print(f"unknown solver id {solver_id!r}; known: {', '.join(sorted(SOLVERS))}",
                  file=sys.stderr)
            return EXIT_UNKNOWN_SOLVER

    out_dir = os.environ.get(ENV_OUTPUT_DIR) or cfg["output_dir"]
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write-probe")
        with open(probe, "w") as fh:
            fh.write("ok")
        os.unlink(probe)
    except OSError as exc:
        print(f"output directory {out_dir!r} is not writable: {exc}", file=sys.stderr)
        return EXIT_OUTPUT_DIR

    summary_lines = ["experiment,preset,solver,inner_iters,eps,iters,objective,nmsd,snr,ssim"]
    for preset in cfg["presets"]:
        preset_dir = os.path.join(out_dir, preset)
        os.makedirs(preset_dir, exist_ok=True)
        for solver_id in cfg["solvers"]:
            for inner in cfg["inner_iters"]:
                for eps in cfg["eps"]:
                    try:
                        solver_cfg = _cell_config(
                            problem, preset, cfg["custom"], solver_id, inner, eps,
                            cfg["max_outer"], cfg["warm_start_dual"],
                        )
                        trace = SOLVERS[solver_id](problem, solver_cfg)
                    except ConfigError as exc:
                        print(f"invalid preset/solver pairing for {solver_id!r}: {exc}",
                              file=sys.stderr)
                        return EXIT_BAD_PAIRING
                    except DivergenceError as exc:
                        print(f"divergence: {exc}", file=sys.stderr)
                        return EXIT_DIVERGENCE
                    fname = f"{problem.name}_{solver_id}_J{inner}_eps{eps:g}.csv"
                    _atomic_write(os.path.join(preset_dir, fname),
                                  _trace_csv(trace, problem.record_ssim))
                    last = trace.final_record
                    iters = str(trace.total_outer) if trace.converged else "MAXITER"
                    summary_lines.append(",".join([
                        problem.name, preset, solver_id, str(inner), f"{eps:g}", iters,
                        _fmt(last.objective), _fmt(last.nmsd), _fmt(last.snr), _fmt(last.ssim),
                    ]))
                    print(f"{preset} {solver_id} J={inner} eps={eps:g}: "
                          f"iters={iters} objective={last.objective:.9g}")
    _atomic_write(os.path.join(out_dir, "summary.csv"), "\n".join(summary_lines) + "\n")
    return EXIT_OK


def cmd_verify(args):
    try:
        results, ok = run_suite(args.suite)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'} {name} ({detail})")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_print_default_config(args):
    print(DEFAULT_CONFIGS[args.experiment], end="")
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="splitopt",
        description="Benchmark harness for operator-splitting solvers of f + g + h(Bx).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a sweep described by an INI config file")
    p_run.add_argument("config", help="path to the INI config")
    p_run.set_defaults(fn=cmd_run)

    p_verify = sub.add_parser("verify", help="run property suites and print PASS/FAIL lines")
    p_verify.add_argument("suite", choices=["prox", "operators", "equivalence", "all"])
    p_verify.set_defaults(fn=cmd_verify)

    p_cfg = sub.add_parser("print-default-config", help="emit the default config for an experiment")
    p_cfg.add_argument("experiment", choices=sorted(DEFAULT_CONFIGS))
    p_cfg.set_defaults(fn=cmd_print_default_config)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
