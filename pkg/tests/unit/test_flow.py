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
Unit tests for the flow-op evaluation of the controller.
"""

import itertools
import operator
from typing import Callable, Dict, List

import pytest
from hypothesis import given
from hypothesis import strategies as st

from refab.constants import (
    ACC_JUMP_OPCODES,
    ACC_TRAP_OPCODES,
    CNT_JUMP_OPCODES,
    FlowDecisionKind,
    FlowOpcode,
    comparator_of,
)
from refab.controller import ParamSet, eval_flow
from refab.isa import FlowOp

COMPARE: Dict[str, Callable[[int, int], bool]] = {
    "EQ": operator.eq,
    "NEQ": operator.ne,
    "LT": operator.lt,
    "GT": operator.gt,
}
BOUNDARY = (0, 1, 2, 7, 4094, 4095)
MASKS = (0b00001, 0b10100, 0b11111)


def _sets(counter: int, destination: int = 9) -> List[ParamSet]:
    sets = [ParamSet(destination=100 + idx) for idx in range(4)]
    sets[1] = ParamSet(destination=destination, counter=counter)
    return sets


class TestCounterConditions:
    @pytest.mark.describe("counter jumps agree with a brute-force comparison")
    def test_counter_boundaries(self) -> None:
        for opcode in sorted(CNT_JUMP_OPCODES):
            compare = COMPARE[comparator_of(opcode)]
            for counter, operand in itertools.product(BOUNDARY, BOUNDARY):
                decision = eval_flow(
                    FlowOp(opcode, param_set_id=1, operand=operand),
                    _sets(counter),
                    (0,) * 5,
                )
                if compare(counter, operand):
                    assert decision.kind == FlowDecisionKind.JUMP
                    assert decision.destination == 9
                else:
                    assert decision.kind == FlowDecisionKind.FALLTHROUGH
                    assert decision.destination is None

    @pytest.mark.describe("counter jumps agree with the comparison for any operands")
    @given(
        opcode=st.sampled_from(sorted(CNT_JUMP_OPCODES)),
        counter=st.integers(0, 4095),
        operand=st.integers(0, 4095),
    )
    def test_counter_property(
        self, opcode: FlowOpcode, counter: int, operand: int
    ) -> None:
        decision = eval_flow(
            FlowOp(opcode, param_set_id=1, operand=operand),
            _sets(counter),
            (0,) * 5,
        )
        expected = COMPARE[comparator_of(opcode)](counter, operand)
        assert (decision.kind == FlowDecisionKind.JUMP) is expected

    @pytest.mark.describe("unconditional flow ops ignore counters and signals")
    def test_unconditional(self) -> None:
        sets = _sets(3, destination=42)
        assert eval_flow(FlowOp(), sets, (3,) * 5).kind == FlowDecisionKind.FALLTHROUGH
        jump = eval_flow(FlowOp(FlowOpcode.ALW_JMP, param_set_id=1), sets, ())
        assert (jump.kind, jump.destination) == (FlowDecisionKind.JUMP, 42)
        trap = eval_flow(FlowOp(FlowOpcode.TRAP_ALW, trap_value=7), sets, ())
        assert (trap.kind, trap.trap_value) == (FlowDecisionKind.TRAP, 7)


class TestAcceleratorConditions:
    @pytest.mark.describe("ACC conditions hold iff every masked slot satisfies them")
    def test_acc_exhaustive(self) -> None:
        sets = _sets(0)
        for signals in itertools.product(range(4), repeat=5):
            for operand, mask in itertools.product(range(4), MASKS):
                selected = [idx for idx in range(5) if mask >> idx & 1]
                for opcode in sorted(ACC_JUMP_OPCODES):
                    compare = COMPARE[comparator_of(opcode)]
                    expected = all(compare(signals[i], operand) for i in selected)
                    decision = eval_flow(
                        FlowOp(opcode, 1, operand, mask), sets, signals
                    )
                    assert (decision.kind == FlowDecisionKind.JUMP) == expected

    @pytest.mark.describe("only the low two bits of the operand are compared")
    def test_operand_modulo_four(self) -> None:
        sets = _sets(0)
        flow = FlowOp(FlowOpcode.JMP_IF_ACC_EQ, 1, operand=4 * 37 + 2, acc_mask=0b1)
        assert eval_flow(flow, sets, (2, 0, 0, 0, 0)).kind == FlowDecisionKind.JUMP
        assert (
            eval_flow(flow, sets, (1, 0, 0, 0, 0)).kind
            == FlowDecisionKind.FALLTHROUGH
        )

    @pytest.mark.describe("an empty mask never holds")
    def test_empty_mask(self) -> None:
        for opcode in sorted(ACC_JUMP_OPCODES | ACC_TRAP_OPCODES):
            decision = eval_flow(FlowOp(opcode, 1, 0, 0), _sets(0), (0,) * 5)
            assert decision.kind == FlowDecisionKind.FALLTHROUGH

    @pytest.mark.describe("ACC traps carry their trap value")
    def test_acc_traps(self) -> None:
        flow = FlowOp(
            FlowOpcode.TRAP_IF_ACC_GT, operand=1, acc_mask=0b00110, trap_value=5
        )
        decision = eval_flow(flow, _sets(0), (0, 2, 3, 0, 0))
        assert decision == eval_flow(flow, _sets(0), (3, 3, 2, 0, 0))
        assert (decision.kind, decision.trap_value) == (FlowDecisionKind.TRAP, 5)
        missed = eval_flow(flow, _sets(0), (0, 2, 1, 0, 0))
        assert missed.kind == FlowDecisionKind.FALLTHROUGH

    @pytest.mark.describe("signals of slots the fabric lacks read as zero")
    def test_missing_signals(self) -> None:
        flow = FlowOp(FlowOpcode.JMP_IF_ACC_EQ, 1, operand=0, acc_mask=0b10000)
        assert eval_flow(flow, _sets(0), (3, 3)).kind == FlowDecisionKind.JUMP
