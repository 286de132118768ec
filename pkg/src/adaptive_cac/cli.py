"""Command-line front end: ``adaptive-cac {analytic,simulate,compare,validate}``.

Exit codes: 0 success, 1 invalid scenario, 2 runtime failure (including any
failed sweep rows).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .des import SimConfig, run_replication
from .errors import ScenarioError, ValidationError
from .scenario import bundled_scenario_path, emit, load_scenario, run_sweep

log = logging.getLogger("adaptive_cac")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
_MODE = {"analytic": "analytic", "simulate": "sim", "compare": "both"}


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-cac",
        description="Adaptive multi-level bandwidth CAC: closed-form chain and cell simulator.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="scenario JSON (default: bundled table1.json)")
    common.add_argument("-v", "--verbose", action="store_true")

    runs = argparse.ArgumentParser(add_help=False, parents=[common])
    runs.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    runs.add_argument("--format", choices=("csv", "plot"), default="csv")
    runs.add_argument("--seed", type=_seed, default=None, help="override the scenario seed")
    runs.add_argument("--workers", type=int, default=1, help="processes for simulation replications")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analytic", parents=[runs], help="evaluate the birth-death chain over the sweep")
    sim = sub.add_parser("simulate", parents=[runs], help="run the discrete-event simulator over the sweep")
    sim.add_argument("--trace", type=Path, default=None,
                     help="directory for per-point event traces of replication 0")
    sub.add_parser("compare", parents=[runs], help="analytic and simulated rows side by side")
    sub.add_parser("validate", parents=[common], help="check a scenario file and exit")
    return parser


def _write_traces(scenario, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for policy in scenario.policies:
        for idx, value in enumerate(scenario.sweep.values):
            cfg = SimConfig(scenario.mix, scenario.cell_at(value), policy,
                            horizon=scenario.sim.horizon, warmup=scenario.sim.warmup,
                            seed=scenario.sim.seed)
            name = policy.label.replace(":", "_")
            with (out_dir / f"trace_{name}_{idx:03d}.csv").open("w", encoding="utf-8") as fh:
                run_replication(cfg, 0, trace=fh)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = args.config or bundled_scenario_path()

    try:
        scenario = load_scenario(config)
    except (ScenarioError, ValidationError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        print(f"{config}: ok ({len(scenario.mix)} classes, {len(scenario.policies)} policies, "
              f"{len(scenario.sweep.values)} grid points)")
        return EXIT_OK

    mode = _MODE[args.command]
    if args.seed is not None and scenario.sim is not None:
        scenario = dataclasses.replace(scenario, sim=dataclasses.replace(scenario.sim, seed=args.seed))
    if mode != "analytic" and scenario.sim is None:
        print("invalid scenario: simulation requested but the config has no 'sim' section", file=sys.stderr)
        return EXIT_INVALID

    try:
        rows = run_sweep(scenario, mode, workers=args.workers)
        paths = emit(rows, args.out, args.format, stem=f"{scenario.name}_{mode}")
        if getattr(args, "trace", None) is not None:
            _write_traces(scenario, args.trace)
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        log.debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    for path in paths:
        print(path)
    failed = [r for r in rows if r.failed]
    if failed:
        print(f"{len(failed)} of {len(rows)} rows failed; see warnings", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
