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

from enum import IntEnum
from typing import Dict, Type


class KernelKind(IntEnum):
    """
    Identifiers of the accelerator kernels a fabric slot can host.
    The numeric value is the byte stored in the slot-binding table
    of a program image.
    """

    NONE = 0
    FMAV = 1
    DIV = 2
    SQRT = 3
    UTIL = 4
    CNN_MAC = 5
    CNN_SUM = 6
    SHA_BUFF = 7
    SHA_COMP = 8


class FlowOpcode(IntEnum):
    """
    Jump/trap sub-instruction of the controller.
    Field value 10 is reserved and does not decode.
    """

    NO_JMP = 0
    ALW_JMP = 1
    JMP_IF_CNT_EQ = 2
    JMP_IF_CNT_NEQ = 3
    JMP_IF_CNT_LT = 4
    JMP_IF_CNT_GT = 5
    JMP_IF_ACC_EQ = 6
    JMP_IF_ACC_NEQ = 7
    JMP_IF_ACC_LT = 8
    JMP_IF_ACC_GT = 9
    TRAP_ALW = 11
    TRAP_IF_ACC_EQ = 12
    TRAP_IF_ACC_NEQ = 13
    TRAP_IF_ACC_LT = 14
    TRAP_IF_ACC_GT = 15


class AuxOpcode(IntEnum):
    """Parameter-set and AGU maintenance sub-instruction. Value 7 is undefined."""

    AUX_NOP = 0
    PS_SET_DEST = 1
    PS_CNT_SET = 2
    PS_CNT_INC = 3
    PS_CNT_RESET = 4
    AGU_SET = 5
    AGU_ADD = 6


class OperandKind(IntEnum):
    NONE = 0
    MEM_AGU = 1
    SLOT_OUT = 2
    IMM = 3


class DestKind(IntEnum):
    NONE = 0
    OUT_ONLY = 1
    MEM_AGU = 2


CNT_JUMP_OPCODES = frozenset(
    {
        FlowOpcode.JMP_IF_CNT_EQ,
        FlowOpcode.JMP_IF_CNT_NEQ,
        FlowOpcode.JMP_IF_CNT_LT,
        FlowOpcode.JMP_IF_CNT_GT,
    }
)
ACC_JUMP_OPCODES = frozenset(
    {
        FlowOpcode.JMP_IF_ACC_EQ,
        FlowOpcode.JMP_IF_ACC_NEQ,
        FlowOpcode.JMP_IF_ACC_LT,
        FlowOpcode.JMP_IF_ACC_GT,
    }
)
ACC_TRAP_OPCODES = frozenset(
    {
        FlowOpcode.TRAP_IF_ACC_EQ,
        FlowOpcode.TRAP_IF_ACC_NEQ,
        FlowOpcode.TRAP_IF_ACC_LT,
        FlowOpcode.TRAP_IF_ACC_GT,
    }
)
ACC_OPCODES = ACC_JUMP_OPCODES | ACC_TRAP_OPCODES
JUMP_OPCODES = CNT_JUMP_OPCODES | ACC_JUMP_OPCODES | {FlowOpcode.ALW_JMP}
PS_AUX_OPCODES = frozenset(
    {
        AuxOpcode.PS_SET_DEST,
        AuxOpcode.PS_CNT_SET,
        AuxOpcode.PS_CNT_INC,
        AuxOpcode.PS_CNT_RESET,
    }
)
AGU_AUX_OPCODES = frozenset({AuxOpcode.AGU_SET, AuxOpcode.AGU_ADD})


class Comparator:
    """
    Comparison applied by a conditional flow op, keyed by mnemonic suffix.
    """

    def __init__(self) -> None:
        raise NotImplementedError

    EQ = "EQ"
    NEQ = "NEQ"
    LT = "LT"
    GT = "GT"


def comparator_of(opcode: FlowOpcode) -> str:
    """The comparator of a conditional flow opcode (e.g. "LT" for JMP_IF_CNT_LT)."""
    return opcode.name.rsplit("_", 1)[-1]


class NoneOp(IntEnum):
    NOP = 0


class FmavOp(IntEnum):
    NOP = 0
    ADD = 1
    SUB = 2
    MUL = 3
    SUBSQ_ACC = 4
    MAC = 5
    CLR_ACC = 6
    RD_ACC = 7


class DivOp(IntEnum):
    NOP = 0
    DIV = 1


class SqrtOp(IntEnum):
    NOP = 0
    SQRT = 1


class UtilOp(IntEnum):
    NOP = 0
    MIN = 1
    MAX = 2
    ABS = 3
    CMP = 4


class CnnMacOp(IntEnum):
    NOP = 0
    LD_W = 1
    CLR = 2
    MAC = 3
    NEXT_COL = 4
    NEXT_ROW = 5
    CFG = 6


class CnnSumOp(IntEnum):
    NOP = 0
    POOL = 1
    POOL_NEXT = 2
    ROW = 3
    EMIT = 4
    RD_POOL = 5
    SET_Q = 6


class ShaBuffOp(IntEnum):
    NOP = 0
    POP = 1


class ShaCompOp(IntEnum):
    NOP = 0
    INIT = 1
    ABSORB = 2
    ROUND = 3
    SQUEEZE = 4


SLOT_OPCODES: Dict[KernelKind, Type[IntEnum]] = {
    KernelKind.NONE: NoneOp,
    KernelKind.FMAV: FmavOp,
    KernelKind.DIV: DivOp,
    KernelKind.SQRT: SqrtOp,
    KernelKind.UTIL: UtilOp,
    KernelKind.CNN_MAC: CnnMacOp,
    KernelKind.CNN_SUM: CnnSumOp,
    KernelKind.SHA_BUFF: ShaBuffOp,
    KernelKind.SHA_COMP: ShaCompOp,
}


def slot_opcode_name(kind: KernelKind, op: int) -> str:
    """Mnemonic of a slot opcode for a kernel kind, or `op<N>` if undefined."""
    table = SLOT_OPCODES[kind]
    try:
        return table(op).name
    except ValueError:
        return f"op{op}"


def is_defined_slot_opcode(kind: KernelKind, op: int) -> bool:
    return op in {member.value for member in SLOT_OPCODES[kind]}


class TrapKind:
    """
    Admitted values for the `kind` attribute of a `Trap`.
    """

    def __init__(self) -> None:
        raise NotImplementedError

    ACCELERATOR_ERROR = "ACCELERATOR_ERROR"
    STALL_TIMEOUT = "STALL_TIMEOUT"
    INVALID_JUMP_TARGET = "INVALID_JUMP_TARGET"
    USER = "USER"


# lower index wins when several traps surface at the same cycle boundary
TRAP_PRECEDENCE = (
    TrapKind.ACCELERATOR_ERROR,
    TrapKind.STALL_TIMEOUT,
    TrapKind.INVALID_JUMP_TARGET,
    TrapKind.USER,
)


class StepEventKind:
    """
    Admitted values for the `kind` attribute of a `StepEvent`.
    """

    def __init__(self) -> None:
        raise NotImplementedError

    RETIRED = "RETIRED"
    STALLED = "STALLED"
    TRAPPED = "TRAPPED"
    HALTED = "HALTED"


class FlowDecisionKind:
    def __init__(self) -> None:
        raise NotImplementedError

    FALLTHROUGH = "FALLTHROUGH"
    JUMP = "JUMP"
    TRAP = "TRAP"


class StallReason:
    """
    Why a VLIW was held: a target slot still busy, a source operand not yet
    produced, a kernel waiting for streamed data, or in-flight work draining
    after the last VLIW retired.
    """

    def __init__(self) -> None:
        raise NotImplementedError

    BUSY = "BUSY"
    HAZARD = "HAZARD"
    STARVED = "STARVED"
    DRAIN = "DRAIN"


class TraceFormat:
    """
    Admitted values for the trace output format.
    """

    def __init__(self) -> None:
        raise NotImplementedError

    JSON = "json"
    CSV = "csv"


class App:
    """
    Admitted values for the benchmark application identifiers.
    """

    def __init__(self) -> None:
        raise NotImplementedError

    SIFT = "sift"
    SWE = "swe"
    CNN = "cnn"
    SHA3 = "sha3"

    ALL = (SIFT, SWE, CNN, SHA3)


class Severity:
    def __init__(self) -> None:
        raise NotImplementedError

    ERROR = "error"
    WARNING = "warning"
