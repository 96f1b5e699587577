# Copyright refab contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
The `refab` command: assemble, inspect, run and trace program images, and
run the benchmark suite against its oracles.

Exit status: 0 on success, 1 for diagnostics, faults and oracle mismatches,
2 for usage errors, 3 when a run ends in a trap. Standard output carries
only the requested artifact (disassembly, memory dump, trace, report path,
digest); everything else goes to standard error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

import refab
from refab.assembler import assemble, disassemble
from refab.benchmarks.harness import (
    cycles_stable,
    push_streams,
    report,
    run_suite,
    summary_table,
    write_csv,
)
from refab.benchmarks.problems import load_problems
from refab.constants import App, TraceFormat
from refab.controller import ControllerConfig, reset, run, write_trace
from refab.core.defaults import FABRIC_ENV_VARIABLE
from refab.core.utils import TRACE
from refab.exceptions import AssemblyException, RefabException
from refab.fabric import Fabric, FabricConfig
from refab.isa import ProgramImage, read_image, validate_program, write_image
from refab.results import RunOutcome


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_TRAP = 3

StreamSpec = Tuple[int, int, str]


def _stream_spec(text: str) -> StreamSpec:
    parts = text.split(":", 2)
    if len(parts) != 3 or not parts[0].isdigit() or not parts[1].isdigit():
        raise argparse.ArgumentTypeError(
            f"expected SLOT:CHANNEL:FILE, got '{text}'"
        )
    return int(parts[0]), int(parts[1]), parts[2]


def _non_negative(text: str) -> int:
    value = int(text, 0)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text, 0)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.DEBUG}.get(verbosity, TRACE)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    package_logger = logging.getLogger("refab")
    package_logger.handlers = [handler]
    package_logger.setLevel(level)
    package_logger.propagate = False


def _read_stream_words(path: str) -> List[int]:
    with open(path, "rb") as stream_file:
        data = stream_file.read()
    if len(data) % 4:
        raise RefabException(
            f"stream file '{path}' is {len(data)} bytes, not a whole number of words"
        )
    return [int(word) for word in np.frombuffer(data, dtype="<u4")]


def _fabric_config(path: Optional[str], fallback: FabricConfig) -> FabricConfig:
    """An explicit --fabric, else the environment's, else `fallback`."""
    path = path or os.environ.get(FABRIC_ENV_VARIABLE)
    if path:
        return FabricConfig.from_toml(path)
    return fallback


def _error(message: str) -> None:
    print(f"refab: {message}", file=sys.stderr)


def _cmd_asm(args: argparse.Namespace) -> int:
    with open(args.input) as source_file:
        source = source_file.read()
    try:
        result = assemble(source, filename=args.input)
    except AssemblyException as exc:
        for diagnostic in exc.diagnostics:
            print(diagnostic.format(args.input), file=sys.stderr)
        return EXIT_FAILURE
    for warning in result.warnings:
        print(warning.format(args.input), file=sys.stderr)
    write_image(args.output, result.image)
    return EXIT_OK


def _cmd_disasm(args: argparse.Namespace) -> int:
    sys.stdout.write(disassemble(read_image(args.input)))
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    image = read_image(args.input)
    diagnostics = validate_program(image)
    for diagnostic in diagnostics:
        print(f"{args.input}: {diagnostic}", file=sys.stderr)
    return EXIT_FAILURE if diagnostics else EXIT_OK


def _simulate(args: argparse.Namespace, trace: bool) -> Tuple[RunOutcome, Fabric]:
    image: ProgramImage = read_image(args.image)
    fabric_cfg = _fabric_config(args.fabric, FabricConfig.for_image(image))
    if args.stall_threshold is not None:
        fabric_cfg = fabric_cfg.with_options(stall_threshold=args.stall_threshold)
    fabric = Fabric(fabric_cfg)
    push_streams(
        fabric,
        [(slot, ch, _read_stream_words(path)) for slot, ch, path in args.stream],
    )
    controller_cfg = ControllerConfig(
        stall_threshold=fabric_cfg.stall_threshold
    ).with_options(max_cycles=args.max_cycles)
    state = reset(image, controller_cfg, fabric)
    return run(state, trace=trace), fabric


def _finish_run(args: argparse.Namespace, outcome: RunOutcome, fabric: Fabric) -> int:
    if outcome.trap is not None:
        _error(outcome.trap.describe())
        return EXIT_TRAP
    print(
        f"halted after {outcome.cycles} cycles "
        f"({outcome.retired_vliws} retired, {outcome.stalled_cycles} stalled)",
        file=sys.stderr,
    )
    if args.mem_dump is not None:
        address, length = args.mem_dump
        for offset, word in enumerate(fabric.dump_memory(address, length)):
            print(f"0x{address + offset:04x}: 0x{word:08x}")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    outcome, fabric = _simulate(args, trace=False)
    return _finish_run(args, outcome, fabric)


def _cmd_trace(args: argparse.Namespace) -> int:
    outcome, fabric = _simulate(args, trace=True)
    records = outcome.trace or []
    if args.output:
        with open(args.output, "w", newline="") as trace_file:
            count = write_trace(records, trace_file, args.format)
        logger.debug(f"wrote {count} trace records to '{args.output}'")
    else:
        write_trace(records, sys.stdout, args.format)
    return _finish_run(args, outcome, fabric)


def _write_text(path: str, text: str) -> None:
    with open(path, "w") as output_file:
        output_file.write(text)


def _cmd_bench(args: argparse.Namespace) -> int:
    problems = load_problems(args.app, args.input)
    fabric_cfg = _fabric_config(args.fabric, FabricConfig.for_app(args.app))
    results = run_suite(
        args.app, problems, fabric_cfg, repeat=args.repeat, jobs=args.jobs
    )
    _write_text(args.report, report(results))
    if args.csv:
        with open(args.csv, "w", newline="") as csv_file:
            write_csv(results, csv_file)
    sys.stderr.write(summary_table(results))
    print(args.report)
    if args.app == App.SHA3 and results and results[0].matched:
        for digest in results[0].detail["digests"]:
            print(digest)
    status = EXIT_OK
    for result in results:
        if result.trap is not None:
            _error(f"{args.app}: {result.trap.describe()}")
            status = EXIT_FAILURE
        elif not result.matched:
            _error(f"{args.app}: result differs from the reference")
            status = EXIT_FAILURE
    if not cycles_stable(results, args.repeat):
        _error("cycle counts differ between repeats")
        status = EXIT_FAILURE
    return status


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("image", help="program image to load")
    parser.add_argument(
        "--fabric",
        help=f"fabric config (TOML); defaults to ${FABRIC_ENV_VARIABLE} "
        "or the image's slot bindings",
    )
    parser.add_argument(
        "--stream",
        action="append",
        default=[],
        type=_stream_spec,
        metavar="SLOT:CHANNEL:FILE",
        help="push a file of little-endian 32-bit words into a slot's stream",
    )
    parser.add_argument(
        "--mem-dump",
        nargs=2,
        type=_non_negative,
        metavar=("ADDR", "LEN"),
        help="print LEN memory words from ADDR after the program halts",
    )
    parser.add_argument("--max-cycles", type=_positive)
    parser.add_argument("--stall-threshold", type=_positive)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refab",
        description="Reconfigurable VLIW fabric assembler, simulator and benchmarks",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log to standard error (-v debug, -vv per-cycle trace)",
    )
    parser.add_argument("--version", action="version", version=refab.__version__)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    asm = commands.add_parser("asm", help="assemble microcode into an image")
    asm.add_argument("input", help="microcode source")
    asm.add_argument("-o", "--output", required=True, help="image to write")
    asm.set_defaults(handler=_cmd_asm)

    disasm = commands.add_parser("disasm", help="print an image as source text")
    disasm.add_argument("input")
    disasm.set_defaults(handler=_cmd_disasm)

    validate = commands.add_parser("validate", help="statically check an image")
    validate.add_argument("input")
    validate.set_defaults(handler=_cmd_validate)

    run_parser = commands.add_parser("run", help="run an image until halt or trap")
    _add_run_arguments(run_parser)
    run_parser.set_defaults(handler=_cmd_run)

    trace = commands.add_parser("trace", help="run an image, recording every cycle")
    _add_run_arguments(trace)
    trace.add_argument(
        "--format",
        choices=[TraceFormat.JSON, TraceFormat.CSV],
        default=TraceFormat.JSON,
    )
    trace.add_argument("--output", help="trace file (default: standard output)")
    trace.set_defaults(handler=_cmd_trace)

    bench = commands.add_parser("bench", help="compare an application with its oracle")
    bench.add_argument("app", choices=App.ALL)
    bench.add_argument("--input", required=True, help="problem file")
    bench.add_argument("--fabric", help="fabric config (TOML)")
    bench.add_argument("--repeat", type=_positive, default=1)
    bench.add_argument("--jobs", type=_positive, default=1)
    bench.add_argument("--report", required=True, help="JSON report to write")
    bench.add_argument("--csv", help="also write the results as CSV")
    bench.set_defaults(handler=_cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    _configure_logging(args.verbose)
    try:
        return int(args.handler(args))
    except ValueError as exc:
        _error(str(exc))
        return EXIT_FAILURE
    except OSError as exc:
        _error(f"{exc.strerror or exc}: '{exc.filename}'")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
