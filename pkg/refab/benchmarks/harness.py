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

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import (
    IO,
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from refab.benchmarks.generators import GeneratedProgram, gen_si_program
from refab.benchmarks.oracles import (
    ref_conv_layer,
    ref_sha3,
    ref_sift_match,
    ref_swe,
)
from refab.benchmarks.problems import (
    ConvLayerProblem,
    Problem,
    RiemannProblem,
    Sha3Problem,
    SiftProblem,
)
from refab.constants import App, KernelKind
from refab.controller import ControllerConfig, reset, run
from refab.core.defaults import DEFAULT_MEMORY_WORDS, DEFAULT_SWE_RTOL
from refab.core.utils import f32_from_word, i32_from_word
from refab.fabric import Fabric, FabricConfig
from refab.results import Comparison, RunOutcome
from refab.sha3_kernels import digest_from_words, sha_buff_stream


logger = logging.getLogger(__name__)

CSV_FIELDS = (
    "app",
    "matched",
    "si_cycles",
    "stalled_cycles",
    "retired_vliws",
    "trap",
    "max_abs_rel_error",
)


def push_streams(
    fabric: Fabric, streams: Iterable[Tuple[int, int, Sequence[int]]]
) -> None:
    """Queue (slot, channel, words) payloads; SHA_BUFF messages go to its FIFO."""
    kinds = fabric.kinds
    for slot, channel, words in streams:
        sha_buff = 0 <= slot < len(kinds) and kinds[slot] == KernelKind.SHA_BUFF
        if channel == 0 and sha_buff:
            sha_buff_stream(fabric, slot, words)
        else:
            fabric.stream_push(slot, channel, words)


def run_program(
    program: GeneratedProgram,
    fabric_cfg: Optional[FabricConfig] = None,
    *,
    max_cycles: Optional[int] = None,
    trace: bool = False,
) -> Tuple[RunOutcome, Fabric]:
    """
    Load a generated program on a fresh fabric, push its streams and run it
    to completion. Returns the outcome and the fabric, for reading results.
    """

    config = fabric_cfg if fabric_cfg is not None else FabricConfig(kinds=program.kinds)
    fabric = Fabric(config)
    ordered = sorted(program.streams.items())
    push_streams(fabric, [(slot, channel, words) for (slot, channel), words in ordered])
    controller_cfg = ControllerConfig(
        stall_threshold=config.stall_threshold
    ).with_options(max_cycles=max_cycles)
    state = reset(program.image, controller_cfg, fabric)
    return run(state, trace=trace), fabric


def _relative_error(got: float, expected: float) -> float:
    if got == expected:
        return 0.0
    if np.isnan(got) or np.isnan(expected):
        return float("inf")
    if expected == 0.0:
        return abs(got)
    return abs(got - expected) / abs(expected)


def _check_sift(
    problem: SiftProblem, words: List[int], comparison: Comparison
) -> None:
    expected = ref_sift_match(problem)
    got = f32_from_word(words[0])
    comparison.matched = bool(got.view(np.uint32) == expected.view(np.uint32))
    comparison.max_abs_rel_error = _relative_error(float(got), float(expected))
    comparison.detail.update({"n": problem.n, "distance": float(got)})


def _check_swe(
    problem: RiemannProblem, words: List[int], comparison: Comparison
) -> None:
    expected = [float(value) for value in ref_swe(problem).as_tuple()]
    got = [float(f32_from_word(word)) for word in words]
    worst = max(_relative_error(g, e) for g, e in zip(got, expected))
    comparison.matched = worst <= DEFAULT_SWE_RTOL
    comparison.max_abs_rel_error = worst
    comparison.detail["net_updates"] = got


def _check_cnn(
    problem: ConvLayerProblem, words: List[int], comparison: Comparison
) -> None:
    expected = ref_conv_layer(problem).ravel().tolist()
    got = [i32_from_word(word) for word in words]
    mismatches = sum(1 for g, e in zip(got, expected) if g != e)
    comparison.matched = mismatches == 0 and len(got) == len(expected)
    comparison.detail.update(
        {"pooled_shape": list(problem.pooled_shape), "mismatches": mismatches}
    )


def _check_sha3(
    problem: Sha3Problem, words: List[int], comparison: Comparison
) -> None:
    expected = ref_sha3(problem)
    got = [digest_from_words(words[8 * i : 8 * i + 8]) for i in range(len(expected))]
    comparison.matched = got == expected
    comparison.detail["digests"] = [digest.hex() for digest in got]


_CHECKS: Dict[str, Callable[[Any, List[int], Comparison], None]] = {
    App.SIFT: _check_sift,
    App.SWE: _check_swe,
    App.CNN: _check_cnn,
    App.SHA3: _check_sha3,
}


def run_comparison(
    app: str, problem: Problem, fabric_cfg: Optional[FabricConfig] = None
) -> Comparison:
    """
    Run one problem as a Special Instruction and check it against its oracle.

    SWE outputs must agree within a relative tolerance; every other
    application must match exactly. A trapped run never matches.

    Args:
        app: one of `App.ALL`.
        problem: the problem instance.
        fabric_cfg: the fabric to run on (default: the application layout).
    """

    logger.info(f"comparing {app} Special Instruction with its oracle")
    memory_words = fabric_cfg.memory_words if fabric_cfg else DEFAULT_MEMORY_WORDS
    program = gen_si_program(
        app,
        problem,
        kinds=fabric_cfg.kinds if fabric_cfg is not None else None,
        memory_words=memory_words,
    )
    outcome, fabric = run_program(program, fabric_cfg)
    comparison = Comparison(
        app=app,
        matched=False,
        si_cycles=outcome.cycles,
        stalled_cycles=outcome.stalled_cycles,
        retired_vliws=outcome.retired_vliws,
        trap=outcome.trap,
        detail={"variant": program.variant, "vliws": program.image.vliw_count},
    )
    if outcome.trap is None:
        words = fabric.dump_memory(program.result_address, program.result_length)
        _CHECKS[app](problem, words, comparison)
    logger.info(
        f"finished comparing {app}: matched={comparison.matched}, "
        f"{comparison.si_cycles} cycles"
    )
    return comparison


def run_suite(
    app: str,
    problems: Sequence[Problem],
    fabric_cfg: Optional[FabricConfig] = None,
    *,
    repeat: int = 1,
    jobs: int = 1,
) -> List[Comparison]:
    """
    Compare every problem `repeat` times. Results come back in input order
    (repeats adjacent) whatever the number of worker threads.
    """

    if repeat < 1 or jobs < 1:
        raise ValueError(f"repeat and jobs must be positive, got {repeat}, {jobs}")
    work = [problem for problem in problems for _ in range(repeat)]
    logger.info(f"running {len(work)} {app} comparison(s) with {jobs} job(s)")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:

            def _comparator(problem: Problem) -> Comparison:
                return run_comparison(app, problem, fabric_cfg)

            results = list(executor.map(_comparator, work))
    else:
        results = [run_comparison(app, problem, fabric_cfg) for problem in work]
    logger.info(f"finished running {len(work)} {app} comparison(s)")
    return results


def cycles_stable(results: Sequence[Comparison], repeat: int) -> bool:
    """Whether every group of `repeat` adjacent results took equal cycles."""
    return all(
        len({c.si_cycles for c in results[i : i + repeat]}) == 1
        for i in range(0, len(results), repeat)
    )


def report(results: Sequence[Comparison]) -> str:
    """The JSON report: an array of comparison records (possibly empty)."""
    return json.dumps([result.as_dict() for result in results], indent=2) + "\n"


def summary_table(results: Sequence[Comparison]) -> str:
    """One text line per application: runs, matches and cycle statistics."""
    lines = [
        f"{'app':<6} {'runs':>5} {'matched':>8} {'min cyc':>9} "
        f"{'mean cyc':>10} {'max cyc':>9} {'stalled':>9}"
    ]
    for app in App.ALL:
        rows = [result for result in results if result.app == app]
        if not rows:
            continue
        cycles = [row.si_cycles for row in rows]
        lines.append(
            f"{app:<6} {len(rows):>5} {sum(row.matched for row in rows):>8} "
            f"{min(cycles):>9} {sum(cycles) / len(cycles):>10.1f} "
            f"{max(cycles):>9} {sum(row.stalled_cycles for row in rows):>9}"
        )
    return "\n".join(lines) + "\n"


def write_csv(results: Sequence[Comparison], stream: IO[str]) -> None:
    writer = csv.DictWriter(stream, fieldnames=list(CSV_FIELDS))
    writer.writeheader()
    for result in results:
        record = result.as_dict()
        trap = record["trap"]
        writer.writerow(
            {
                **{name: record[name] for name in CSV_FIELDS},
                "trap": "" if trap is None else trap["kind"],
            }
        )
