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
Functional models of the floating-point accelerators: FMAV (add, sub, mul
and accumulate), DIV, SQRT and UTIL (min, max, abs, compare). All arithmetic
is IEEE-754 binary32 with round-to-nearest-even, one rounding per operation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Tuple

import numpy as np

from refab.constants import DivOp, FmavOp, KernelKind, SqrtOp, UtilOp
from refab.core.kernel import Kernel, KernelResult, Streams
from refab.core.utils import f32_from_word, word_from_f32

F32_ZERO = np.float32(0.0)
F32_NAN = np.float32(np.nan)

# 2-bit UTIL compare codes
CTRL_EQUAL = 0b00
CTRL_LESS = 0b01
CTRL_GREATER = 0b10
CTRL_UNORDERED = 0b11


@dataclass(frozen=True)
class FmavState:
    """
    Attributes:
        acc: the binary32 accumulator.
        saved: the operand registers, holding the last operands consumed.
    """

    acc: np.float32 = F32_ZERO
    saved: Tuple[np.float32, np.float32] = (F32_ZERO, F32_ZERO)


@dataclass(frozen=True)
class UtilResult:
    out: np.float32
    ctrl: int

    @property
    def error(self) -> bool:
        return bool(np.isnan(self.out))


def _error(out: np.float32, *operands: np.float32) -> bool:
    if np.isnan(out):
        return True
    return bool(np.isinf(out)) and all(np.isfinite(x) for x in operands)


def fp_ctrl(out: np.float32, error: bool) -> int:
    """bit1 = error line, bit0 = result is a (signed) zero."""
    return (0b10 if error else 0) | (0b01 if out == 0 else 0)


def fmav_exec(
    op: int, a: Any, b: Any, st: FmavState
) -> Tuple[np.float32, int, FmavState]:
    """
    Execute one FMAV op. Returns (out, ctrl, new state); the accumulating ops
    round after each of the subtraction/multiplication and the addition.
    """

    a, b = np.float32(a), np.float32(b)
    acc = st.acc
    with np.errstate(all="ignore"):
        if op == FmavOp.ADD:
            out, operands = a + b, (a, b)
        elif op == FmavOp.SUB:
            out, operands = a - b, (a, b)
        elif op == FmavOp.MUL:
            out, operands = a * b, (a, b)
        elif op == FmavOp.SUBSQ_ACC:
            diff = a - b
            acc = acc + diff * diff
            out, operands = acc, (a, b, st.acc)
        elif op == FmavOp.MAC:
            acc = acc + a * b
            out, operands = acc, (a, b, st.acc)
        elif op == FmavOp.CLR_ACC:
            acc = F32_ZERO
            out, operands = acc, ()
        elif op == FmavOp.RD_ACC:
            out, operands = acc, (acc,)
        else:
            raise ValueError(f"FMAV opcode {op} undefined")
    error = _error(out, *operands)
    return out, fp_ctrl(out, error), replace(st, acc=acc, saved=(a, b))


def div_exec(a: Any, b: Any) -> Tuple[np.float32, int]:
    a, b = np.float32(a), np.float32(b)
    with np.errstate(all="ignore"):
        out = a / b
    return out, fp_ctrl(out, _error(out, a, b))


def sqrt_exec(a: Any) -> Tuple[np.float32, int]:
    a = np.float32(a)
    with np.errstate(all="ignore"):
        out = np.sqrt(a)
    return out, fp_ctrl(out, _error(out, a))


def compare_code(a: np.float32, b: np.float32) -> int:
    if np.isnan(a) or np.isnan(b):
        return CTRL_UNORDERED
    if a < b:
        return CTRL_LESS
    if a > b:
        return CTRL_GREATER
    return CTRL_EQUAL


def util_exec(op: int, a: Any, b: Any) -> UtilResult:
    """
    Every UTIL op reports compare(a, b) on ctrl. Equal zeros of opposite
    sign order as -0 < +0 for MIN/MAX.
    """

    a, b = np.float32(a), np.float32(b)
    code = compare_code(a, b)
    if op == UtilOp.MIN:
        if code == CTRL_UNORDERED:
            out = F32_NAN
        elif code == CTRL_EQUAL:
            out = a if np.signbit(a) else b
        else:
            out = a if code == CTRL_LESS else b
    elif op == UtilOp.MAX:
        if code == CTRL_UNORDERED:
            out = F32_NAN
        elif code == CTRL_EQUAL:
            out = b if np.signbit(a) else a
        else:
            out = b if code == CTRL_LESS else a
    elif op == UtilOp.ABS:
        out = np.abs(a)
    elif op == UtilOp.CMP:
        out = a
    else:
        raise ValueError(f"UTIL opcode {op} undefined")
    return UtilResult(out=np.float32(out), ctrl=code)


class FmavKernel(Kernel):
    kind = KernelKind.FMAV
    opcodes = FmavOp

    def reset(self) -> None:
        self.state = FmavState()

    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        out, ctrl, self.state = fmav_exec(
            op, f32_from_word(a), f32_from_word(b), self.state
        )
        return KernelResult(out=word_from_f32(out), ctrl=ctrl, error=bool(ctrl & 2))


class DivKernel(Kernel):
    kind = KernelKind.DIV
    opcodes = DivOp

    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        out, ctrl = div_exec(f32_from_word(a), f32_from_word(b))
        return KernelResult(out=word_from_f32(out), ctrl=ctrl, error=bool(ctrl & 2))


class SqrtKernel(Kernel):
    kind = KernelKind.SQRT
    opcodes = SqrtOp

    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        out, ctrl = sqrt_exec(f32_from_word(a))
        return KernelResult(out=word_from_f32(out), ctrl=ctrl, error=bool(ctrl & 2))


class UtilKernel(Kernel):
    kind = KernelKind.UTIL
    opcodes = UtilOp

    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        result = util_exec(op, f32_from_word(a), f32_from_word(b))
        return KernelResult(
            out=word_from_f32(result.out), ctrl=result.ctrl, error=result.error
        )
