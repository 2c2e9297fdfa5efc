"""
Command line surface: validate schemes, run centralized iterations, run
decentralized simulations and inspect graphs.

Exit codes:
    0  valid scheme / converged run / success
    1  invalid input or invalid scheme
    2  max-iters reached
    3  diverged
    4  message audit failed
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import Settings, configure_logging
from .errors import ConfigError, ContractError, SplittingError, UnsupportedOperatorError
from .graph import (component_count, consensus_step_size, is_regular, laplacian, resolve_graph)
from .iteration import StopRule, TraceStatus, iterate, iterate_reduced
from .numerics import numerical_rank
from .problems import Problem, parse_problem_spec
from .scheme_core import validate
from .schemes import resolve_scheme
from .simulator import audit_messages, equivalence_check, simulate, x_pass_schedule

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_MAX_ITERS = 2
EXIT_DIVERGED = 3
EXIT_AUDIT = 4

STATUS_EXIT = {
    TraceStatus.CONVERGED: EXIT_OK,
    TraceStatus.MAX_ITERS: EXIT_MAX_ITERS,
    TraceStatus.DIVERGED: EXIT_DIVERGED,
}


class RunConfig(BaseModel):
    """Resolved options of a run or simulate command"""
    model_config = ConfigDict(frozen=True)

    scheme: Optional[str] = None
    graph: Optional[str] = None
    problem: str
    gamma: Optional[float] = Field(default=None, gt=0.0, lt=2.0)
    tol_fp: float = Field(gt=0.0)
    tol_consensus: float = Field(gt=0.0)
    max_iters: int = Field(ge=1)
    seed: int = 0
    output: Path
    reduced: bool = False
    allow_gamma: bool = False
    message_log: Optional[Path] = None
    include_payloads: bool = False
    audit: bool = False
    check: bool = False
    check_rounds: int = Field(default=100, ge=1)

    @property
    def non_conforming(self) -> bool:
        return self.gamma is not None and not 0.0 < self.gamma < 1.0

    @property
    def stop_rule(self) -> StopRule:
        return StopRule(self.tol_fp, self.tol_consensus, self.max_iters)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the invalid-input code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _format_vector(x: np.ndarray) -> str:
    return np.array2string(np.asarray(x), precision=10, separator=', ')


def _run_config(args, settings: Settings, default_output: str) -> RunConfig:
    gamma = args.gamma
    if gamma is None and not (getattr(args, 'scheme', None) or '').startswith('file:'):
        gamma = settings.gamma
    tol = settings.tol_fp if args.tol is None else args.tol
    tol_consensus = args.tol_consensus
    if tol_consensus is None:
        tol_consensus = settings.tol_consensus if args.tol is None else args.tol
    output = args.output or settings.output_dir / default_output
    try:
        return RunConfig(
            scheme=getattr(args, 'scheme', None), graph=getattr(args, 'graph', None),
            problem=args.problem, gamma=gamma, tol_fp=tol, tol_consensus=tol_consensus,
            max_iters=settings.max_iters if args.max_iters is None else args.max_iters,
            seed=settings.seed if args.seed is None else args.seed, output=output,
            reduced=getattr(args, 'reduced', False), allow_gamma=args.allow_gamma,
            message_log=getattr(args, 'message_log', None),
            include_payloads=getattr(args, 'include_payloads', False),
            audit=getattr(args, 'audit', False), check=getattr(args, 'check', False),
            check_rounds=getattr(args, 'check_rounds', 100),
        )
    except ValidationError as exc:
        first = exc.errors()[0]
        field_name = ".".join(str(part) for part in first['loc'])
        raise ContractError(f"option {field_name}: {first['msg']}") from exc


def _print_solution(problem: Problem, solution: np.ndarray, consensus: float) -> None:
    print(f"  solution: {_format_vector(solution)}")
    print(f"  consensus residual: {consensus:.3e}")
    if problem.reference is not None:
        error = float(np.linalg.norm(solution - problem.reference.solution))
        print(f"  reference ({problem.reference.provenance.value}): {_format_vector(problem.reference.solution)}"
              f"  error {error:.3e}")
    try:
        print(f"  ||sum F_i(x)||: {problem.residual(solution):.3e}")
    except UnsupportedOperatorError:
        pass


def _mark(ok: bool) -> str:
    return "[x]" if ok else "[ ]"


def _prepare_output(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_validate(args, settings: Settings) -> int:
    scheme = resolve_scheme(args.scheme, args.gamma, args.allow_gamma)
    report = validate(scheme)
    if args.json:
        print(json.dumps({'scheme': scheme.name, 'n': scheme.n, 'm': scheme.m, **report.to_dict()}, indent=2))
        return EXIT_OK if report.valid else EXIT_INVALID

    print(f"\n=== SCHEME VALIDATION: {args.scheme} ===")
    print(f"n={scheme.n}  m={scheme.m}  gamma={scheme.gamma:g}")
    print(f"  {_mark(report.condition_a)} (a) ker M = span{{e}}: |Me| = {report.kernel_residual:.3e}, rank {report.rank}")
    print(f"  {_mark(report.condition_b)} (b) N strictly lower triangular, entries sum to {report.row_sum_total:g}")
    print(f"  {_mark(report.condition_c)} (c) S = -M^T")
    print(f"  {_mark(report.condition_d)} (d) defect lambda_max = {report.defect_max_eigenvalue:.3e}")
    for warning in report.warnings:
        print(f"\n[WARNING] {warning}")
    if report.valid:
        print("\n[SUCCESS] scheme is valid")
        return EXIT_OK
    print("\n[FAILED] scheme is invalid:")
    for reason in report.failures():
        print(f"  - {reason}")
    return EXIT_INVALID


def cmd_run(args, settings: Settings) -> int:
    config = _run_config(args, settings, 'trace.csv')
    scheme = resolve_scheme(config.scheme, config.gamma, config.allow_gamma)
    report = validate(scheme)
    if not report.valid:
        print(f"[FAILED] scheme {scheme.name} is invalid:")
        for reason in report.failures():
            print(f"  - {reason}")
        return EXIT_INVALID
    problem = parse_problem_spec(config.problem, config.seed)
    reference = None if problem.reference is None else problem.reference.solution

    print(f"\n=== RUN: {scheme.name} on {problem.description} ===")
    for warning in report.warnings:
        print(f"[WARNING] {warning}")
    engine = iterate_reduced if config.reduced else iterate
    trace = engine(scheme, problem.operators, stop=config.stop_rule, reference=reference)
    trace.to_csv(_prepare_output(config.output))

    final = trace.final
    print(f"\nStatus: {trace.status.value} after {trace.iterations} iterations")
    print(f"  fixed-point residual: {final.fp_residual:.3e}")
    solution, consensus = trace.solution()
    _print_solution(problem, solution, consensus)
    print(f"\nTrace written to {config.output}")
    return STATUS_EXIT[trace.status]


def cmd_simulate(args, settings: Settings) -> int:
    config = _run_config(args, settings, 'sim_trace.csv')
    graph = resolve_graph(config.graph)
    problem = parse_problem_spec(config.problem, config.seed)
    gamma = settings.gamma if config.gamma is None else config.gamma
    reference = None if problem.reference is None else problem.reference.solution
    record = config.audit or config.message_log is not None

    print(f"\n=== SIMULATE: {graph.vertex_count} nodes, {graph.edge_count} edges on {problem.description} ===")
    trace = simulate(graph, problem.operators, gamma, stop=config.stop_rule, reference=reference,
                     allow_gamma=config.allow_gamma, record_messages=record)
    trace.to_csv(_prepare_output(config.output))
    if config.message_log is not None:
        _prepare_output(config.message_log).write_text(trace.message_log_lines(config.include_payloads),
                                                       encoding='utf-8')
        print(f"Message log written to {config.message_log}")

    print(f"\nStatus: {trace.status.value} after {trace.rounds} rounds (x-pass depth {len(trace.schedule)})")
    solution, consensus = trace.solution()
    _print_solution(problem, solution, consensus)
    print(f"\nTrace written to {config.output}")

    if config.check:
        deviation = equivalence_check(graph, problem.operators, gamma, config.check_rounds,
                                      allow_gamma=config.allow_gamma)
        print(f"Equivalence with centralized v-form over {config.check_rounds} rounds: max deviation {deviation:.3e}")

    code = STATUS_EXIT[trace.status]
    if config.audit:
        if audit_messages(trace, graph):
            print("[x] message audit passed: every message followed an edge")
        else:
            print("[ ] message audit FAILED")
            code = EXIT_AUDIT
    return code


def cmd_graph_info(args, settings: Settings) -> int:
    graph = resolve_graph(args.graph)
    degree = is_regular(graph)
    components = component_count(graph)
    print(f"\n=== GRAPH: {args.graph} ===")
    print(f"n={graph.vertex_count}")
    print(f"|E|={graph.edge_count}")
    print(f"regular={'yes' if degree is not None else 'no'}")
    print(f"d={degree if degree is not None else '-'}")
    print(f"connected={'true' if components == 1 else 'false'} ({components} components)")
    print(f"laplacian_rank={numerical_rank(laplacian(graph)) if graph.vertex_count else 0}")
    tau = consensus_step_size(graph) if graph.edge_count else None
    print(f"tau={tau if tau is not None else 'undefined'}")
    print(f"x_pass_depth={len(x_pass_schedule(graph))}")
    return EXIT_OK


def _add_iteration_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--problem', required=True,
                        help="consensus:a1,.. | intervals:l:u,.. | lasso:q,b,lam | game:n,du,dv | random:n,dim | file.json")
    parser.add_argument('--gamma', type=float, default=None, help="relaxation parameter (default FRUGAL_GAMMA)")
    parser.add_argument('--allow-gamma', action='store_true', help="permit gamma in [1, 2)")
    parser.add_argument('--tol', type=float, default=None, help="fixed-point tolerance")
    parser.add_argument('--tol-consensus', type=float, default=None, help="consensus tolerance (default --tol)")
    parser.add_argument('--max-iters', type=int, default=None)
    parser.add_argument('--seed', type=int, default=None, help="seed for random problem generators")
    parser.add_argument('--output', type=Path, default=None, help="trace CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='frugal', description="Frugal resolvent splitting toolkit")
    parser.add_argument('--log-level', default=None, help="override FRUGAL_LOG_LEVEL")
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = sub.add_parser('validate', help="check a scheme against conditions (a)-(d)")
    p.add_argument('--scheme', required=True, help="dr | ryu3 | minimal:<n> | ryu:<n> | graph:<g> | file:<path>")
    p.add_argument('--gamma', type=float, default=None)
    p.add_argument('--allow-gamma', action='store_true')
    p.add_argument('--json', action='store_true', help="print the report as JSON")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser('run', help="centralized fixed-point iteration")
    p.add_argument('--scheme', required=True)
    p.add_argument('--reduced', action='store_true', help="iterate the v-form")
    _add_iteration_options(p)
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser('simulate', help="decentralized simulation on a regular graph")
    p.add_argument('--graph', required=True, help="named graph (k3, c4, petersen, q3) or edge-list file")
    p.add_argument('--audit', action='store_true', help="audit the message log (exit 4 on violation)")
    p.add_argument('--check', action='store_true', help="compare with the centralized v-form")
    p.add_argument('--check-rounds', type=int, default=100)
    p.add_argument('--message-log', type=Path, default=None, help="write the JSON-lines message log")
    p.add_argument('--include-payloads', action='store_true')
    _add_iteration_options(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser('graph-info', help="summarize a graph")
    p.add_argument('graph', help="named graph or edge-list file")
    p.set_defaults(handler=cmd_graph_info)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        settings = Settings.from_env()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or settings.log_level)
    try:
        return args.handler(args, settings)
    except (SplittingError, OSError) as exc:
        logger.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
