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
End-to-end tests: generated Special Instructions run on the simulated
fabric and checked against the software oracles.
"""

import hashlib
import io
import json
from typing import List

import numpy as np
import pytest

from refab.benchmarks import (
    RiemannProblem,
    Sha3Problem,
    SiftProblem,
    cycles_stable,
    gen_si_program,
    random_conv_layer,
    random_message,
    random_riemann,
    random_sift,
    report,
    run_comparison,
    run_program,
    run_suite,
    summary_table,
    write_csv,
)
from refab.benchmarks.harness import CSV_FIELDS
from refab.constants import KernelKind, StallReason
from refab.exceptions import GenerationException
from refab.fabric import FabricConfig
from refab.results import Comparison

from ..conftest import retired_pcs

ONE_MAC = (
    KernelKind.CNN_MAC,
    KernelKind.NONE,
    KernelKind.CNN_SUM,
    KernelKind.CNN_SUM,
    KernelKind.NONE,
)


def _reached_labels(app: str, problem: object) -> List[str]:
    program = gen_si_program(app, problem)  # type: ignore[arg-type]
    outcome, _ = run_program(program, trace=True)
    assert outcome.halted
    pcs = set(retired_pcs(outcome.trace))
    return sorted(name for name, pc in program.symbols.items() if pc in pcs)


class TestSift:
    @pytest.mark.describe("SIFT matches the oracle bit-exactly for many lengths")
    def test_lengths(self) -> None:
        for n in list(range(1, 65)) + [128, 1000]:
            comparison = run_comparison("sift", random_sift(n, n=n))
            assert comparison.matched, n
            assert comparison.trap is None
            assert comparison.detail["n"] == n

    @pytest.mark.describe("identical descriptors are at distance zero")
    def test_identical(self) -> None:
        values = np.linspace(0.0, 1.0, 128, dtype=np.float32)
        comparison = run_comparison("sift", SiftProblem.from_arrays(values, values))
        assert comparison.matched
        assert comparison.detail["distance"] == 0.0

    @pytest.mark.describe("only the loop bound depends on the descriptor length")
    def test_program_shape(self) -> None:
        short = gen_si_program("sift", random_sift(1, n=8))
        long = gen_si_program("sift", random_sift(1, n=16))
        assert short.image.vliw_count == long.image.vliw_count
        body = short.symbols["body"]
        differing = [
            idx
            for idx, (a, b) in enumerate(zip(short.image.words, long.image.words))
            if a != b
        ]
        assert differing == [body]

    @pytest.mark.describe("each group of four components costs one SUBSQ_ACC latency")
    def test_cycles(self) -> None:
        cycles = [run_comparison("sift", random_sift(3, n=n)).si_cycles for n in (4, 8)]
        assert cycles[1] - cycles[0] == 4


class TestSwe:
    @pytest.mark.describe("wet edges match the f-wave oracle")
    def test_wet_edges(self) -> None:
        results = run_suite("swe", [random_riemann(seed) for seed in range(1000)])
        assert all(result.matched for result in results)
        assert all(result.detail["variant"] == "fwave" for result in results)
        assert all(result.max_abs_rel_error <= 1e-6 for result in results)

    @pytest.mark.describe("a lake at rest produces no updates")
    def test_lake_at_rest(self) -> None:
        lake = RiemannProblem(h_l=3.0, h_r=3.0, hu_l=0, hu_r=0, b_l=-1.0, b_r=-1.0)
        comparison = run_comparison("swe", lake)
        assert comparison.matched
        assert comparison.detail["net_updates"][:4] == [0.0, 0.0, 0.0, 0.0]

    @pytest.mark.describe("wet and dry combinations dispatch to their paths")
    def test_dispatch(self) -> None:
        wet = _reached_labels("swe", random_riemann(5))
        assert "hlle" not in wet and "end" in wet
        dry_right = _reached_labels("swe", random_riemann(5, dry_right=True))
        assert "hlle" in dry_right and "dry_left" not in dry_right
        dry_left = _reached_labels("swe", random_riemann(5, dry_left=True))
        assert "dry_left" in dry_left and "dl_wave1_join" in dry_left
        both = _reached_labels(
            "swe", random_riemann(5, dry_left=True, dry_right=True)
        )
        assert "dry_left" in both and "dl_wave1_join" not in both

    @pytest.mark.describe("dry edges match the HLLE oracle")
    def test_dry_edges(self) -> None:
        problems = [
            random_riemann(seed, dry_left=left, dry_right=right)
            for seed in range(20)
            for left, right in ((True, False), (False, True), (True, True))
        ]
        for result in run_suite("swe", problems):
            assert result.matched
            assert result.detail["variant"] == "hlle"


class TestCnn:
    @pytest.mark.describe("quantized layers match the oracle for 1, 3 and 8 channels")
    def test_channels(self) -> None:
        for channels in (1, 3, 8):
            layer = random_conv_layer(channels, channels=channels, height=16, width=16)
            program = gen_si_program("cnn", layer)
            outcome, _ = run_program(program, trace=True)
            assert outcome.halted
            retired = retired_pcs(outcome.trace)
            assert retired.count(program.symbols["ch_top"]) == channels * 7 * 7
            comparison = run_comparison("cnn", layer)
            assert comparison.matched
            assert comparison.detail["pooled_shape"] == [7, 7]

    @pytest.mark.describe("two MAC slots beat one on the same layer")
    def test_mac_count(self) -> None:
        layer = random_conv_layer(11, channels=3, height=10, width=12)
        dual = run_comparison("cnn", layer)
        single = run_comparison("cnn", layer, FabricConfig(kinds=ONE_MAC))
        assert dual.matched and single.matched
        assert (dual.detail["variant"], single.detail["variant"]) == (
            "2-mac",
            "1-mac",
        )
        assert dual.si_cycles < single.si_cycles

    @pytest.mark.describe("requantization with a zero point and odd sizes")
    def test_zero_point(self) -> None:
        layer = random_conv_layer(
            4, channels=2, height=9, width=11, scale=0.01, zero_point=-20
        )
        assert run_comparison("cnn", layer).matched


class TestSha3:
    @pytest.mark.describe("SHA3-256 on the fabric for message lengths 0 to 300")
    def test_lengths(self) -> None:
        for length in range(301):
            problem = random_message(length, length)
            comparison = run_comparison("sha3", problem)
            assert comparison.matched, length
            expected = hashlib.sha3_256(problem.message).hexdigest()
            assert comparison.detail["digests"] == [expected]

    @pytest.mark.describe("every absorbed block retires ROUND 24 times")
    def test_rounds_per_block(self) -> None:
        for length, blocks in ((3, 1), (135, 1), (136, 2), (300, 3)):
            program = gen_si_program("sha3", Sha3Problem(bytes(length)))
            outcome, _ = run_program(program, trace=True)
            assert outcome.halted, length
            pcs = retired_pcs(outcome.trace)
            assert pcs.count(program.symbols["round"]) == 24 * blocks
            assert pcs.count(program.symbols["block"]) == blocks
            assert all(
                record.stall_reason != StallReason.STARVED
                for record in outcome.trace or []
            )

    @pytest.mark.describe("two concurrent digests equal two single runs")
    def test_dual(self) -> None:
        for first, second in ((0, 0), (10, 200), (300, 5), (136, 135)):
            one, two = random_message(first, first), random_message(second, second)
            dual = run_comparison(
                "sha3", Sha3Problem(one.message, second=two.message)
            )
            assert dual.matched
            assert dual.detail["variant"] == "dual"
            singles = [
                run_comparison("sha3", problem).detail["digests"][0]
                for problem in (one, two)
            ]
            assert dual.detail["digests"] == singles


class TestGenerationLimits:
    @pytest.mark.describe("problems that do not fit the fabric are rejected")
    def test_limits(self) -> None:
        zeros = np.zeros(16381, dtype=np.float32)
        with pytest.raises(GenerationException) as exc:
            gen_si_program("sift", SiftProblem.from_arrays(zeros, zeros))
        assert (exc.value.app, exc.value.parameter) == ("sift", "n")
        with pytest.raises(GenerationException) as exc:
            gen_si_program("sift", random_sift(1, n=64), memory_words=64)
        assert exc.value.parameter == "memory_words"
        with pytest.raises(GenerationException) as exc:
            gen_si_program(
                "cnn", random_conv_layer(1), kinds=(KernelKind.FMAV,) * 5
            )
        assert exc.value.parameter == "kinds"
        with pytest.raises(GenerationException) as exc:
            gen_si_program(
                "cnn", random_conv_layer(1, channels=2, height=4, width=1025)
            )
        assert exc.value.parameter == "width"
        with pytest.raises(GenerationException) as exc:
            gen_si_program("sift", random_message(1, 4))
        assert exc.value.parameter == "problem"


class TestSuiteReporting:
    @pytest.mark.describe("repeated runs are cycle-stable across worker threads")
    def test_determinism(self) -> None:
        problems = [random_riemann(seed) for seed in range(4)]
        results = run_suite("swe", problems, repeat=3, jobs=4)
        assert len(results) == 12
        assert cycles_stable(results, 3)
        serial = run_suite("swe", problems)
        assert [r.si_cycles for r in results[::3]] == [r.si_cycles for r in serial]
        with pytest.raises(ValueError):
            run_suite("swe", problems, repeat=0)
        with pytest.raises(ValueError):
            run_suite("swe", problems, jobs=0)

    @pytest.mark.describe("a thousand runs of one problem take identical cycles")
    def test_thousand_runs(self) -> None:
        for app, problem in (
            ("swe", random_riemann(7)),
            ("sha3", Sha3Problem(bytes(range(200)))),
        ):
            results = run_suite(app, [problem], repeat=1000, jobs=4)
            assert len(results) == 1000
            assert cycles_stable(results, 1000)
            assert len({result.si_cycles for result in results}) == 1
            assert all(result.matched for result in results)

    @pytest.mark.describe("the JSON report reads back into equal comparisons")
    def test_report(self) -> None:
        results = [
            run_comparison("sift", random_sift(2, n=12)),
            run_comparison("sha3", random_message(2, 40)),
        ]
        records = json.loads(report(results))
        assert [Comparison.from_dict(record) for record in records] == results
        assert json.loads(report([])) == []
        table = summary_table(results)
        assert table.splitlines()[1].split()[:3] == ["sift", "1", "1"]

    @pytest.mark.describe("CSV output has one row per comparison")
    def test_csv(self) -> None:
        results = run_suite("sift", [random_sift(seed, n=8) for seed in range(3)])
        stream = io.StringIO()
        write_csv(results, stream)
        lines = stream.getvalue().splitlines()
        assert lines[0].split(",") == list(CSV_FIELDS)
        assert len(lines) == 4
        assert all(line.startswith("sift,True,") for line in lines[1:])
