"""Command-line driver: ``lrinv {solve,validate,match-square,propagate}``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .completeness import match_square
from .errors import LRError
from .propagate import gaussian_packet, split_step_evolve
from .scenario import (
    bundled_scenarios, dump_json, load_config, run_scenario, solve_stage, with_branch,
    write_wavefunction_csv,
)

DESCRIPTION = """\
Exact solutions of i d/dt psi = [p^2/2m + f(t) q] psi from linear and quadratic
invariants, checked against a split-step propagator. Units: hbar = 1, all
quantities dimensionless.
"""


def _output_dir(args, cfg) -> Path:
    out = Path(args.out) if args.out else Path(cfg.base_dir) / cfg.output
    if args.out is None and not Path(args.config).is_file():
        out = Path(cfg.output)  # bundled scenarios write relative to the working directory
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args, cfg) -> int:
    solve_stage(cfg, _output_dir(args, cfg))
    return 0


def cmd_validate(args, cfg) -> int:
    status, report = run_scenario(cfg, _output_dir(args, cfg))
    for check in report["checks"]:
        mark = "PASS" if check["passed"] else "FAIL"
        print(f"{mark} {check['name']}: {check['value']:.3e} ({check['comparison']} {check['tolerance']:.0e})")
    print("all checks passed" if status == 0 else "some checks failed")
    return status


def cmd_match_square(args, cfg) -> int:
    cfg = with_branch(cfg, "quadratic") if cfg.branch == "linear" else cfg
    from .auxiliary import solve_quadratic_coeffs

    traj = solve_quadratic_coeffs(cfg.force_profile(), cfg.mass, cfg.quadratic_constants, cfg.times)
    quick = match_square(traj, use_rank_shortcut=True)
    full = match_square(traj, use_rank_shortcut=False)
    agree = quick.verdict == full.verdict
    out = _output_dir(args, cfg)
    doc = {"shortcut": quick.to_dict(), "optimizer": full.to_dict(), "agree": agree}
    (out / "square_match.json").write_text(dump_json(doc) + "\n")
    print(f"{full.verdict}: residual {full.residual:.6g}, c = {full.c:.12g}, "
          f"(A0, B0, C0) = ({full.A0:.12g}, {full.B0:.12g}, {full.C0:.12g})")
    print(f"rank certificate {quick.certificate:.6g} -> {quick.verdict} ({'agrees' if agree else 'DISAGREES'})")
    return 0 if agree else 1


def cmd_propagate(args, cfg) -> int:
    out = _output_dir(args, cfg)
    psi0 = gaussian_packet(cfg.grid, cfg.packet_q0, cfg.packet_p0, cfg.packet_width)
    run = split_step_evolve(psi0, cfg.force_profile(), cfg.mass, cfg.dt, cfg.T, cfg.snapshot_times)
    for i, t in enumerate(run.times):
        write_wavefunction_csv(out / f"snapshot_t{t:.6g}.csv", run.state(i))
    (out / "run.json").write_text(dump_json(run.metadata()) + "\n")
    return 0


COMMANDS = {
    "solve": (cmd_solve, "solve the coefficient ODEs and write trajectories, transforms and phases"),
    "validate": (cmd_validate, "run the full pipeline and write a validation report"),
    "match-square": (cmd_match_square, "test whether the quadratic invariant is a squared linear one"),
    "propagate": (cmd_propagate, "propagate the configured Gaussian packet with split-step"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrinv", description=DESCRIPTION,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True,
                       help="config file path, or a bundled scenario name: " + ", ".join(bundled_scenarios()))
        p.add_argument("--out", default=None, help="output directory (default: the config's 'output' key)")
        p.add_argument("--branch", choices=("linear", "quadratic", "both"), default=None,
                       help="override the invariant branch from the config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    name = args.config
    try:
        cfg = with_branch(load_config(args.config), args.branch)
        name = cfg.name
        return COMMANDS[args.command][0](args, cfg)
    except LRError as exc:
        print(f"error: scenario {name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
