import argparse
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from src.core.exceptions import SpikeCoreError
from src.core.schemas import Report, StageResult
from src.toolkit import SpikeToolkit, load_run_config
from src.utils.logger import LoggerSetup, get_logger
from src.utils.storage import digest, write_json

COMMANDS = ["profiles", "critpoints", "construct", "solve", "spectrum", "verify"]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_SETUP = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikecore",
        description="Multi-spike solutions of the planar Lane-Emden problem",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="Path to run config (YAML)")
    parser.add_argument(
        "--service-config",
        type=str,
        default="configs/toolkit_config.yaml",
        help="Path to numerical defaults",
    )
    parser.add_argument("--out", type=Path, help="Output directory for report and plot data")
    parser.add_argument("--p", type=float, nargs="+", help="Override p values")
    parser.add_argument("--k", type=int, help="Override number of spikes")
    parser.add_argument("--resolution", type=float, help="Override mesh resolution factor")
    parser.add_argument("--force", action="store_true", help="Recompute profiles ignoring cache")
    return parser


def rows_table(report: Report) -> pd.DataFrame:
    records = []
    for stage in report.stages:
        if stage.status == "error":
            records.append({"stage": stage.name, "check": "-", "passed": False, "note": stage.description_error})
        for row in stage.rows:
            records.append(
                {
                    "stage": stage.name,
                    "check": row.name,
                    "predicted": row.predicted,
                    "computed": row.computed,
                    "tolerance": row.tolerance,
                    "passed": row.passed,
                    "gating": row.gating,
                }
            )
    return pd.DataFrame.from_records(records)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger = get_logger("cli")
    out_dir = args.out
    try:
        toolkit = SpikeToolkit(args.service_config)
        if args.command == "profiles":
            out_dir = out_dir or Path(toolkit.construction.config.paths.output_dir)
            LoggerSetup.attach_run_log(out_dir)
            report = toolkit.profiles(force=args.force)
        else:
            if args.config is None:
                raise SpikeCoreError(f"{args.command} needs --config")
            overrides = {"p_values": args.p, "k": args.k, "resolution": args.resolution}
            if out_dir is not None:
                overrides["output_dir"] = str(out_dir)
            run = load_run_config(args.config, overrides)
            out_dir = Path(run.output_dir)
            LoggerSetup.attach_run_log(out_dir)
            report = toolkit.run(args.command, run, base_dir=args.config.parent, out_dir=out_dir)
    except SpikeCoreError as e:
        logger.error(f"{args.command} aborted: {e.__class__.__name__}: {e}")
        report = Report(
            command=args.command,
            config_digest=digest({"config": str(args.config)}),
            run={},
            stages=[
                StageResult(
                    name="setup",
                    status="error",
                    description_error=f"{e.__class__.__name__}: {e}",
                )
            ],
        )
        out_dir = out_dir or Path("outputs")
        write_json(out_dir / f"report_{args.command}.json", report)
        return EXIT_SETUP

    path = write_json(out_dir / f"report_{args.command}.json", report)
    table = rows_table(report)
    if not table.empty:
        print(table.to_string(index=False))
    print(f"{'PASS' if report.passed else 'FAIL'}: report written to {path}")
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
