"""
Command-line front end.

    python cli.py solve --instance inst.json --epsilon 0.01
    python cli.py solve-refined --instance inst.json --beta 100
    python cli.py uc-demo --profile tiny --epsilon 0.01 --seed 7
    python cli.py bench-scaling --N 10,100,1000

Results go to files (written atomically) and a key=value summary on stdout.
Failures print ``error=<CODE> exit=<n>`` on stderr first.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, replace

import numpy as np
from jinja2 import Environment, FileSystemLoader

import config
from backend import SolverOptions
from errors import DrlpError, ModelError
from evaluation import holdout_select, out_of_sample, robust_epsilon, scaling_experiment, solve_mode
from exact import ExactOptions, ExactSolution, affine_gap, scenario_bound, solve_exact
from fileio import dump_instance, load_instance, load_samples, read_json, write_json, write_table
from models import FirstStageDecision
from reformulation import (FEASIBILITY_METHODS, AffineOptions, export_solution, load_solution, second_stage,
                           solve_affine_refined)
from synthetic import draw_scenarios, random_family, rng_from
from uc import PROFILES, balance_residual, build_uc_instance, ingest_uc, toy_system, uc_family, uc_support

log = logging.getLogger("cli")

EXACT_FORMAT = "drlp-exact-solution"
DEFAULT_GRID = (1e-3, 1e-2, 1e-1)

_env = Environment(loader=FileSystemLoader(config.TEMPLATE_DIR), trim_blocks=True, lstrip_blocks=True)
_env.filters["num"] = lambda v: format(v, ".10g") if isinstance(v, float) else v


class UsageParser(argparse.ArgumentParser):
    """argparse with the machine-readable error line in front of the usage text."""

    def error(self, message):
        sys.stderr.write("error=USAGE exit=2\n")
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


@dataclass(frozen=True)
class RunConfig:
    command: str
    instance: str | None = None
    samples: str | None = None
    system: str | None = None
    solution: str | None = None
    scenarios: str | None = None
    output: str | None = None
    trace: str | None = None
    out_dir: str | None = None
    epsilon: float | None = None
    grid: tuple = DEFAULT_GRID
    beta: float = config.BETA
    rho: float = config.RHO
    seed: int = 0
    mode: str = "plain"
    threads: int = config.THREADS
    solver: str = config.SOLVER
    gap_tol: float = config.MILP_GAP
    max_vertices: int = config.MAX_VERTICES
    export_lp: str | None = config.EXPORT_LP_DIR
    feasibility_method: str = "auto"
    profile: str = "tiny"
    N: int = 30
    N_list: tuple = (10, 100, 1000)
    family: str = "uc"
    repeats: int = config.TIMING_REPEATS
    eval_count: int = 500
    split: float = config.HOLDOUT_SPLIT
    certified: bool = False
    clamp: bool = False
    verbose: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        known = {k: v for k, v in vars(args).items() if k in cls.__dataclass_fields__ and v is not None}
        for key in ("grid", "N_list"):
            if key in known:
                known[key] = tuple(known[key])
        return cls(**known)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(gap_tol=self.gap_tol, engine=self.solver)

    def affine_options(self) -> AffineOptions:
        return AffineOptions(rho=self.rho, solver=self.solver_options(), feasibility_method=self.feasibility_method,
                             max_vertices=self.max_vertices, threads=self.threads, export_lp_dir=self.export_lp)

    def exact_options(self) -> ExactOptions:
        return ExactOptions(solver=self.solver_options())


def summary(command: str, fields: list[tuple]) -> None:
    print(_env.get_template("report/summary.txt").render(command=command, fields=fields), end="")


def _output(cfg: RunConfig, default: str) -> str:
    return cfg.output or default


def _trace_records(solution) -> list[dict]:
    return [asdict(record) for record in solution.history]


def _load(cfg: RunConfig):
    instance, structure = load_instance(cfg.instance)
    if cfg.samples:
        instance = instance.with_samples(load_samples(cfg.samples, instance.support, clamp=cfg.clamp))
    if cfg.epsilon is not None:
        instance = instance.with_epsilon(cfg.epsilon)
    return instance, structure


def exact_to_dict(solution: ExactSolution) -> dict:
    return {
        "format": EXACT_FORMAT,
        "version": 1,
        "objective": solution.objective,
        "x1": {"binary": solution.x1.binary, "continuous": solution.x1.continuous},
        "lambda": solution.lam,
        "lambda_bound": solution.lam_bound,
        "eta": solution.eta,
        "scenario_count": solution.scenario_count,
    }


def load_first_stage(path: str) -> FirstStageDecision:
    doc = read_json(path)
    if doc.get("format") == EXACT_FORMAT:
        return FirstStageDecision(doc["x1"]["binary"], doc["x1"]["continuous"])
    return load_solution(path).x1


# --- Commands ---

def cmd_solve(cfg: RunConfig) -> int:
    instance, structure = _load(cfg)
    if cfg.mode == "exact":
        return _write_exact(cfg, instance)
    solution = solve_mode(instance, structure, cfg.mode, cfg.beta, cfg.affine_options(), cfg.exact_options())
    path = _output(cfg, "solution.json")
    export_solution(path, solution)
    if cfg.trace:
        write_table(cfg.trace, _trace_records(solution))
    summary(cfg.command, [("mode", solution.mode), ("objective", solution.objective),
                          ("iterations", solution.iterations), ("master_vars", solution.master_dims[0]),
                          ("master_rows", solution.master_dims[1]), ("solution", path)])
    return 0


def cmd_solve_refined(cfg: RunConfig) -> int:
    return cmd_solve(replace(cfg, mode="refined"))


def _write_exact(cfg: RunConfig, instance) -> int:
    solution = solve_exact(instance, cfg.exact_options())
    path = _output(cfg, "exact.json")
    write_json(path, exact_to_dict(solution))
    summary("exact", [("objective", solution.objective), ("lambda", solution.lam),
                      ("scenarios", solution.scenario_count), ("scenario_bound", scenario_bound(instance)),
                      ("solution", path)])
    return 0


def cmd_exact(cfg: RunConfig) -> int:
    instance, _ = _load(cfg)
    return _write_exact(cfg, instance)


def cmd_evaluate(cfg: RunConfig) -> int:
    instance, _ = _load(cfg)
    x1 = load_first_stage(cfg.solution)
    if cfg.scenarios:
        scenarios = load_samples(cfg.scenarios, instance.support, clamp=cfg.clamp)
    else:
        scenarios = draw_scenarios(instance.support, cfg.eval_count, rng_from(cfg.seed))
    report = out_of_sample(x1, instance, scenarios, cfg.threads, cfg.certified, cfg.solver_options())
    path = _output(cfg, "evaluation.csv")
    write_table(path, report.records())
    summary(cfg.command, [("mean_cost", report.mean_cost), ("fixed_cost", report.fixed_cost),
                          ("scenarios", report.scenario_count), ("infeasible", report.infeasible_count),
                          ("table", path)])
    return 0


def cmd_holdout(cfg: RunConfig) -> int:
    instance, structure = _load(cfg)
    eps, records = holdout_select(instance, structure, cfg.grid, cfg.split, cfg.seed, cfg.mode, cfg.beta,
                                  cfg.affine_options())
    path = _output(cfg, "holdout.csv")
    write_table(path, records)
    summary(cfg.command, [("epsilon", eps), ("candidates", len(records)), ("table", path)])
    return 0


def cmd_uc_build(cfg: RunConfig) -> int:
    system, samples = ingest_uc(cfg.system, cfg.samples, clamp=cfg.clamp)
    instance, structure = build_uc_instance(system, samples, cfg.epsilon if cfg.epsilon is not None else 0.01)
    path = _output(cfg, "uc_instance.json")
    dump_instance(path, instance, structure)
    summary(cfg.command, [("n1", instance.n1), ("n2", instance.n2), ("m", instance.m), ("L", instance.L),
                          ("N", instance.N), ("parameters", structure.parameter_count), ("instance", path)])
    return 0


def cmd_uc_demo(cfg: RunConfig) -> int:
    out_dir = cfg.out_dir or "uc-demo-out"
    os.makedirs(out_dir, exist_ok=True)
    options = cfg.affine_options()
    system = toy_system(cfg.profile, cfg.seed)
    support = uc_support(system)
    samples = draw_scenarios(support, cfg.N, rng_from([cfg.seed, 1]))
    instance, structure = build_uc_instance(system, samples, cfg.epsilon if cfg.epsilon is not None else 0.0)

    fields = [("profile", cfg.profile), ("m", instance.m), ("N", instance.N)]
    eps = cfg.epsilon
    if eps is None:
        eps, records = holdout_select(instance, structure, cfg.grid, cfg.split, cfg.seed, "refined", cfg.beta,
                                      options)
        write_table(os.path.join(out_dir, "holdout.csv"), records)
    instance = instance.with_epsilon(eps)
    solution = solve_affine_refined(instance, structure, cfg.beta, options)
    export_solution(os.path.join(out_dir, "solution.json"), solution)
    write_table(os.path.join(out_dir, "trace.csv"), _trace_records(solution))

    scenarios = draw_scenarios(support, cfg.eval_count, rng_from([cfg.seed, 2]))
    report = out_of_sample(solution.x1, instance, scenarios, cfg.threads, certified=True,
                           options=options.solver)
    write_table(os.path.join(out_dir, "evaluation.csv"), report.records())
    residual = max(
        float(np.abs(balance_residual(system, second_stage(solution.x1, xi, instance, options.solver)[0], xi)).max())
        for xi in scenarios.points
    )

    robust = solve_mode(instance, structure, "robust", cfg.beta, options)
    robust_report = out_of_sample(robust.x1, instance, scenarios, cfg.threads, options=options.solver)
    fields += [("epsilon", eps), ("objective", solution.objective), ("iterations", solution.iterations),
               ("out_of_sample", report.mean_cost), ("infeasible", report.infeasible_count),
               ("balance_residual", residual), ("robust_epsilon", robust_epsilon(support)),
               ("robust_out_of_sample", robust_report.mean_cost), ("out_dir", out_dir)]
    summary(cfg.command, fields)
    return 0


def cmd_bench_scaling(cfg: RunConfig) -> int:
    epsilon = cfg.epsilon if cfg.epsilon is not None else 0.01
    if cfg.family == "uc":
        family = uc_family(cfg.profile, cfg.seed, epsilon)
    else:
        family = random_family(epsilon=epsilon, seed=cfg.seed)
    rows = scaling_experiment(family, cfg.N_list, cfg.seed, cfg.repeats, cfg.beta, cfg.affine_options())
    path = _output(cfg, "scaling.csv")
    write_table(path, rows)
    dims = {(r["master_vars"], r["master_rows"]) for r in rows}
    if len(dims) > 1:
        log.warning("[scaling] master dimensions differ across N: %s", sorted(dims))
    times = [r["wall_time"] for r in rows]
    summary(cfg.command, [("sizes", len(rows)), ("master_vars", rows[0]["master_vars"]),
                          ("master_rows", rows[0]["master_rows"]), ("same_dimensions", len(dims) == 1),
                          ("time_ratio", max(times) / max(min(times), 1e-12)), ("table", path)])
    return 0


def cmd_gap(cfg: RunConfig) -> int:
    instance, structure = _load(cfg)
    gap = affine_gap(instance, structure, cfg.affine_options(), cfg.exact_options())
    summary(cfg.command, [("gap", gap), ("finite", math.isfinite(gap))])
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "solve-refined": cmd_solve_refined,
    "exact": cmd_exact,
    "evaluate": cmd_evaluate,
    "holdout": cmd_holdout,
    "uc-build": cmd_uc_build,
    "uc-demo": cmd_uc_demo,
    "bench-scaling": cmd_bench_scaling,
    "gap": cmd_gap,
}


# --- Parser ---

def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rho", type=float, default=config.RHO, help="cut tolerance (default: %(default)s)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    common.add_argument("--gap-tol", type=float, default=config.MILP_GAP,
                        help="relative MILP gap (default: %(default)s)")
    common.add_argument("--max-vertices", type=int, default=config.MAX_VERTICES,
                        help="vertex enumeration cap (default: %(default)s)")
    common.add_argument("--threads", type=int, default=config.THREADS, help="worker threads (default: %(default)s)")
    common.add_argument("--solver", choices=("reference", "highs"), default=config.SOLVER,
                        help="LP/MILP engine (default: %(default)s)")
    common.add_argument("--feasibility-method", choices=FEASIBILITY_METHODS, default="auto",
                        help="feasibility subproblem method (default: %(default)s)")
    common.add_argument("--export-lp", metavar="DIR", default=config.EXPORT_LP_DIR,
                        help="write every master MILP as LP text into DIR (default: %(default)s)")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--output", help="output file")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(prog="cli.py", description="Two-stage Wasserstein DRO toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    common = [_common()]

    def instance_command(name, help_text):
        p = sub.add_parser(name, parents=common, help=help_text,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--instance", required=True, help="instance document (JSON)")
        p.add_argument("--samples", help="replace the instance samples with this CSV file")
        p.add_argument("--clamp", action="store_true", help="project samples onto the support")
        p.add_argument("--epsilon", type=float, help="Wasserstein radius (default: from the instance)")
        return p

    p = instance_command("solve", "affine-policy solve")
    modes = p.add_mutually_exclusive_group()
    for mode in ("plain", "refined", "saa", "robust", "exact"):
        modes.add_argument(f"--{mode}", dest="mode", action="store_const", const=mode)
    p.add_argument("--beta", type=float, default=config.BETA, help="refinement parameter")
    p.add_argument("--trace", help="iteration trace table (CSV)")

    p = instance_command("solve-refined", "affine-policy solve over the data-driven support")
    p.add_argument("--beta", type=float, required=True, help="refinement parameter")
    p.add_argument("--trace", help="iteration trace table (CSV)")

    instance_command("exact", "exact MILP baseline (desk scale)")
    instance_command("gap", "affine objective minus exact objective")

    p = instance_command("evaluate", "out-of-sample cost of a solution")
    p.add_argument("--solution", required=True, help="solution document from solve or exact")
    p.add_argument("--scenarios", help="evaluation scenarios (CSV); drawn synthetically when omitted")
    p.add_argument("--eval", dest="eval_count", type=int, default=500, help="synthetic scenario count")
    p.add_argument("--certified", action="store_true", help="fail on any infeasible scenario")

    p = instance_command("holdout", "choose epsilon on a validation split")
    p.add_argument("--grid", type=_float_list, default=list(DEFAULT_GRID), help="candidate radii")
    p.add_argument("--split", type=float, default=config.HOLDOUT_SPLIT, help="training share")
    p.add_argument("--beta", type=float, default=config.BETA, help="refinement parameter")
    p.add_argument("--mode", choices=("plain", "refined"), default="refined", help="solve mode per candidate")

    p = sub.add_parser("uc-build", parents=common, help="compile UC system and sample files to an instance",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--system", required=True, help="UC system document (JSON)")
    p.add_argument("--samples", required=True, help="forecast-error samples (CSV, bus-major columns)")
    p.add_argument("--epsilon", type=float, default=0.01, help="Wasserstein radius")
    p.add_argument("--clamp", action="store_true", help="project samples onto the support")

    p = sub.add_parser("uc-demo", parents=common, help="toy unit commitment end to end",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--profile", choices=PROFILES, default="tiny")
    p.add_argument("--epsilon", type=float, help="radius; chosen by holdout over --grid when omitted")
    p.add_argument("--grid", type=_float_list, default=list(DEFAULT_GRID), help="holdout candidates")
    p.add_argument("--split", type=float, default=config.HOLDOUT_SPLIT, help="holdout training share")
    p.add_argument("--beta", type=float, default=config.BETA, help="refinement parameter")
    p.add_argument("--N", type=int, default=30, help="historical samples")
    p.add_argument("--eval", dest="eval_count", type=int, default=500, help="out-of-sample scenarios")
    p.add_argument("--out-dir", default="uc-demo-out", help="directory for solution, trace and tables")
    p.set_defaults(seed=7)

    p = sub.add_parser("bench-scaling", parents=common, help="master size and time against N",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--N", dest="N_list", type=_int_list, default=[10, 100, 1000], help="sample sizes")
    p.add_argument("--family", choices=("uc", "random"), default="uc")
    p.add_argument("--profile", choices=PROFILES, default="tiny")
    p.add_argument("--epsilon", type=float, default=0.01, help="Wasserstein radius")
    p.add_argument("--beta", type=float, default=config.BETA, help="refinement parameter")
    p.add_argument("--repeats", type=int, default=config.TIMING_REPEATS, help="timed runs per N")
    return parser


def configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, str(config.LOG_LEVEL).upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s %(message)s", stream=sys.stderr, force=True)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    cfg = RunConfig.from_args(args)
    configure_logging(cfg.verbose)

    try:
        if cfg.threads < 1:
            raise ModelError("threads: must be >= 1")
        return COMMANDS[cfg.command](cfg)
    except DrlpError as e:
        print(f"error={e.code} exit={e.exit_code}", file=sys.stderr)
        print(f"{e.code}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        print("error=INTERNAL exit=3", file=sys.stderr)
        log.exception("unexpected failure: %s", e)
        return 3


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
