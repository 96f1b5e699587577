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
The fabric execution controller: fetches one VLIW per cycle, dispatches its
slot sub-instructions, applies the aux op, evaluates the flow op on the
control signals latched at the end of the previous cycle, holds the VLIW
while the fabric cannot take it, and raises traps.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import IO, Dict, Iterable, List, Optional, Sequence, Tuple

from refab.constants import (
    ACC_OPCODES,
    ACC_TRAP_OPCODES,
    AuxOpcode,
    CNT_JUMP_OPCODES,
    Comparator,
    DestKind,
    FlowDecisionKind,
    FlowOpcode,
    KernelKind,
    OperandKind,
    StallReason,
    StepEventKind,
    TRAP_PRECEDENCE,
    TraceFormat,
    TrapKind,
    comparator_of,
    slot_opcode_name,
)
from refab.core.defaults import (
    AGU_COUNT,
    COUNTER_MODULUS,
    DEFAULT_MAX_CYCLES,
    DEFAULT_STALL_THRESHOLD,
    PARAM_SET_COUNT,
    SLOT_COUNT,
    WORD_MASK,
)
from refab.exceptions import (
    ConfigurationException,
    ResourceLimitException,
    SetupException,
    SimulationFault,
    UsageException,
)
from refab.fabric import Fabric
from refab.isa import FlowOp, Operand, ProgramImage, SlotInstr, Vliw, validate_program
from refab.results import (
    FlowDecision,
    RunOutcome,
    SlotSnapshot,
    StepEvent,
    TraceRecord,
    Trap,
)


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControllerConfig:
    """
    Attributes:
        stall_threshold: consecutive stalled cycles of one VLIW after which
            STALL_TIMEOUT is raised.
        max_cycles: hard bound on simulated cycles for `run`.
        trap_on_nan: whether a rising accelerator error line traps.
    """

    stall_threshold: int = DEFAULT_STALL_THRESHOLD
    max_cycles: int = DEFAULT_MAX_CYCLES
    trap_on_nan: bool = True

    def __post_init__(self) -> None:
        if self.stall_threshold < 1:
            raise ConfigurationException(
                f"stall_threshold must be at least 1, got {self.stall_threshold}"
            )
        if self.max_cycles < 1:
            raise ConfigurationException(
                f"max_cycles must be at least 1, got {self.max_cycles}"
            )

    def with_options(
        self,
        *,
        stall_threshold: Optional[int] = None,
        max_cycles: Optional[int] = None,
        trap_on_nan: Optional[bool] = None,
    ) -> ControllerConfig:
        return ControllerConfig(
            stall_threshold=(
                self.stall_threshold if stall_threshold is None else stall_threshold
            ),
            max_cycles=self.max_cycles if max_cycles is None else max_cycles,
            trap_on_nan=self.trap_on_nan if trap_on_nan is None else trap_on_nan,
        )


@dataclass
class ParamSet:
    destination: int = 0
    counter: int = 0


@dataclass
class MachineState:
    """
    The program-flow state of one running machine.

    Attributes:
        image: the loaded program.
        vliws: the decoded program words.
        config: the controller configuration.
        fabric: the fabric the program runs on.
        pc: index of the next VLIW to execute.
        param_sets: the four (destination, counter) parameter sets.
        agu: the eight address registers.
        cycle: simulated cycles so far.
        stall_count: consecutive cycles the current VLIW has been held.
        halted: set once the program fell through and drained.
        trap: the trap that stopped the machine, if any.
        retired_vliws: RETIRED events so far.
        stalled_cycles: STALLED events so far.
        trace: per-cycle records, when tracing.
    """

    image: ProgramImage
    vliws: List[Vliw]
    config: ControllerConfig
    fabric: Fabric
    pc: int = 0
    param_sets: List[ParamSet] = field(
        default_factory=lambda: [ParamSet() for _ in range(PARAM_SET_COUNT)]
    )
    agu: List[int] = field(default_factory=lambda: [0] * AGU_COUNT)
    cycle: int = 0
    stall_count: int = 0
    halted: bool = False
    trap: Optional[Trap] = None
    retired_vliws: int = 0
    stalled_cycles: int = 0
    trace: Optional[List[TraceRecord]] = None

    @property
    def counters(self) -> Tuple[int, int, int, int]:
        c = [ps.counter for ps in self.param_sets]
        return (c[0], c[1], c[2], c[3])


def reset(image: ProgramImage, cfg: ControllerConfig, fabric: Fabric) -> MachineState:
    """
    Prepare a machine to run `image` on `fabric`: check the slot bindings,
    load the image's memory segment and point the pc at the entry.

    Raises:
        SetupException: if the image does not validate or the fabric's
            slot kinds differ from the image bindings.
    """

    diagnostics = validate_program(image)
    if diagnostics:
        raise SetupException(
            "program does not validate: " + "; ".join(str(d) for d in diagnostics)
        )
    bindings = tuple(image.slot_bindings)
    fabric_kinds = fabric.kinds
    for idx in range(max(len(bindings), len(fabric_kinds))):
        wanted = bindings[idx] if idx < len(bindings) else KernelKind.NONE
        if idx >= len(fabric_kinds):
            if wanted != KernelKind.NONE:
                raise SetupException(
                    f"program binds slot {idx} to {wanted.name}, "
                    f"the fabric has {len(fabric_kinds)} slots"
                )
            continue
        if fabric_kinds[idx] != wanted:
            raise SetupException(
                f"program binds slot {idx} to {wanted.name}, "
                f"the fabric hosts {fabric_kinds[idx].name}"
            )
    if fabric.busy():
        raise SetupException("fabric still has work in flight")
    if len(image.memory) > len(fabric.memory):
        raise SetupException(
            f"memory segment of {len(image.memory)} words exceeds the "
            f"{len(fabric.memory)}-word data memory"
        )
    fabric.load_memory(list(image.memory))
    logger.debug(
        f"machine reset: {image.vliw_count} VLIWs, entry {image.entry_pc}, "
        f"{len(image.memory)} memory words"
    )
    return MachineState(
        image=image,
        vliws=image.vliws(),
        config=cfg,
        fabric=fabric,
        pc=image.entry_pc,
    )


def _compare(comparator: str, left: int, right: int) -> bool:
    if comparator == Comparator.EQ:
        return left == right
    if comparator == Comparator.NEQ:
        return left != right
    if comparator == Comparator.LT:
        return left < right
    return left > right


def eval_flow(
    f: FlowOp, sets: Sequence[ParamSet], signals: Sequence[int]
) -> FlowDecision:
    """
    Decide the control flow of a VLIW. Counter conditions compare the
    selected counter against the operand; accelerator conditions hold when
    every slot in the mask satisfies `signal OP operand mod 4` (an empty
    mask never holds). Missing signals read as 0.
    """

    opcode = f.opcode
    if opcode == FlowOpcode.NO_JMP:
        return FlowDecision(FlowDecisionKind.FALLTHROUGH)
    if opcode == FlowOpcode.TRAP_ALW:
        return FlowDecision(FlowDecisionKind.TRAP, trap_value=f.trap_value)
    jump = FlowDecision(
        FlowDecisionKind.JUMP, destination=sets[f.param_set_id].destination
    )
    if opcode == FlowOpcode.ALW_JMP:
        return jump
    comparator = comparator_of(opcode)
    if opcode in CNT_JUMP_OPCODES:
        taken = _compare(comparator, sets[f.param_set_id].counter, f.operand)
        return jump if taken else FlowDecision(FlowDecisionKind.FALLTHROUGH)

    selected = f.selected_slots()
    holds = bool(selected) and all(
        _compare(
            comparator,
            signals[idx] if idx < len(signals) else 0,
            f.operand & 0b11,
        )
        for idx in selected
    )
    if not holds:
        return FlowDecision(FlowDecisionKind.FALLTHROUGH)
    if opcode in ACC_TRAP_OPCODES:
        return FlowDecision(FlowDecisionKind.TRAP, trap_value=f.trap_value)
    return jump


def _active_slots(s: MachineState, vliw: Vliw) -> List[Tuple[int, SlotInstr]]:
    return [
        (idx, instr)
        for idx, instr in enumerate(vliw.slots)
        if idx < s.fabric.slot_count and not instr.is_nop
    ]


def _stall_reason(s: MachineState, vliw: Vliw) -> Optional[str]:
    fabric = s.fabric
    active = _active_slots(s, vliw)
    if any(fabric.is_busy(idx) for idx, _ in active):
        return StallReason.BUSY

    agu = list(s.agu)

    def address(index: int) -> int:
        value = agu[index]
        agu[index] = (value + 1) & WORD_MASK
        return value

    for _, instr in active:
        for operand in (instr.src_a, instr.src_b):
            if operand.kind == OperandKind.SLOT_OUT:
                if operand.index < fabric.slot_count and fabric.is_busy(
                    operand.index
                ):
                    return StallReason.HAZARD
            elif operand.kind == OperandKind.MEM_AGU:
                if fabric.has_pending_write(address(operand.index)):
                    return StallReason.HAZARD
        if instr.dst.kind == DestKind.MEM_AGU:
            address(instr.dst.index)
    flow = vliw.ctrl_flow
    if flow.opcode in ACC_OPCODES and any(
        idx < fabric.slot_count and fabric.is_busy(idx)
        for idx in flow.selected_slots()
    ):
        return StallReason.HAZARD
    if not all([fabric.ready(idx, instr.op) for idx, instr in active]):
        return StallReason.STARVED
    return None


def _read_operand(s: MachineState, instr: SlotInstr, operand: Operand) -> int:
    if operand.kind == OperandKind.NONE:
        return 0
    if operand.kind == OperandKind.IMM:
        return instr.immediate(operand)
    if operand.kind == OperandKind.SLOT_OUT:
        if operand.index >= s.fabric.slot_count:
            raise SimulationFault(
                f"slot {operand.index} output read on a "
                f"{s.fabric.slot_count}-slot fabric",
                slot=operand.index,
            )
        return s.fabric.slots[operand.index].out
    address = s.agu[operand.index]
    s.agu[operand.index] = (address + 1) & WORD_MASK
    return s.fabric.mem_read(address)


def _apply_aux(s: MachineState, vliw: Vliw) -> None:
    aux = vliw.ctrl_aux
    opcode = aux.opcode
    if opcode == AuxOpcode.AUX_NOP:
        return
    if opcode in (AuxOpcode.AGU_SET, AuxOpcode.AGU_ADD):
        base = s.agu[aux.target_id] if opcode == AuxOpcode.AGU_ADD else 0
        s.agu[aux.target_id] = (base + aux.operand) & WORD_MASK
        return
    if aux.target_id >= PARAM_SET_COUNT:
        raise SimulationFault(f"parameter set p{aux.target_id} does not exist")
    ps = s.param_sets[aux.target_id]
    if opcode == AuxOpcode.PS_SET_DEST:
        ps.destination = aux.operand
    elif opcode == AuxOpcode.PS_CNT_SET:
        ps.counter = aux.operand % COUNTER_MODULUS
    elif opcode == AuxOpcode.PS_CNT_INC:
        ps.counter = (ps.counter + 1) % COUNTER_MODULUS
    elif opcode == AuxOpcode.PS_CNT_RESET:
        ps.counter = 0


def _first_trap(candidates: List[Trap]) -> Optional[Trap]:
    if not candidates:
        return None
    return min(candidates, key=lambda trap: TRAP_PRECEDENCE.index(trap.kind))


def _signals(s: MachineState) -> Tuple[int, ...]:
    signals = s.fabric.signals()
    return signals + (0,) * (SLOT_COUNT - len(signals))


def _record(
    s: MachineState,
    *,
    cycle: int,
    pc: int,
    event: str,
    issued: Dict[int, int],
    decision: Optional[str] = None,
    stall_reason: Optional[str] = None,
) -> None:
    logger.trace(  # type: ignore
        f"cycle {cycle}: pc {pc} {event}"
        f"{' ' + stall_reason if stall_reason else ''}"
        f"{' ' + decision if decision else ''}, counters {list(s.counters)}"
    )
    if s.trace is None:
        return
    slots = tuple(
        SlotSnapshot(
            op=(
                slot_opcode_name(slot.kind, issued[slot.index])
                if slot.index in issued
                else "-"
            ),
            ctrl=slot.ctrl,
        )
        for slot in s.fabric.slots
    )
    s.trace.append(
        TraceRecord(
            cycle=cycle,
            pc=pc,
            event=event,
            decision=decision,
            counters=s.counters,
            stall_count=s.stall_count,
            stall_reason=stall_reason,
            slots=slots,
        )
    )


def _error_trap(s: MachineState, raised: List[int], pc: int) -> List[Trap]:
    if not raised or not s.config.trap_on_nan:
        return []
    return [
        Trap(
            kind=TrapKind.ACCELERATOR_ERROR, cycle=s.cycle, pc=pc, slot=min(raised)
        )
    ]


def _trapped(s: MachineState, trap: Trap) -> StepEvent:
    s.trap = trap
    logger.info(trap.describe())
    return StepEvent(StepEventKind.TRAPPED, trap=trap)


def _drain(s: MachineState) -> StepEvent:
    if not s.fabric.busy():
        s.halted = True
        logger.debug(f"halted at cycle {s.cycle}")
        return StepEvent(StepEventKind.HALTED)
    cycle, pc = s.cycle, s.pc
    raised = s.fabric.tick()
    s.cycle += 1
    s.stalled_cycles += 1
    _record(
        s,
        cycle=cycle,
        pc=pc,
        event=StepEventKind.STALLED,
        issued={},
        stall_reason=StallReason.DRAIN,
    )
    trap = _first_trap(_error_trap(s, raised, pc))
    if trap is not None:
        return _trapped(s, trap)
    return StepEvent(StepEventKind.STALLED, stall_reason=StallReason.DRAIN)


def step(s: MachineState) -> StepEvent:
    """
    Advance the machine by one cycle (or report HALTED once a program that
    fell through has drained, which takes no cycle).

    Raises:
        UsageException: if the machine already halted or trapped.
        SimulationFault: on host-model misuse, carrying the pc.
    """

    if s.halted or s.trap is not None:
        raise UsageException("cannot step a machine that halted or trapped")
    pc = s.pc
    try:
        if pc >= len(s.vliws):
            return _drain(s)
        return _step_vliw(s, pc)
    except SimulationFault as exc:
        raise exc.with_pc(pc)


def _step_vliw(s: MachineState, pc: int) -> StepEvent:
    vliw = s.vliws[pc]
    cycle = s.cycle
    reason = _stall_reason(s, vliw)
    if reason is not None:
        raised = s.fabric.tick()
        s.cycle += 1
        s.stall_count += 1
        s.stalled_cycles += 1
        _record(
            s,
            cycle=cycle,
            pc=pc,
            event=StepEventKind.STALLED,
            issued={},
            stall_reason=reason,
        )
        candidates = _error_trap(s, raised, pc)
        if s.stall_count >= s.config.stall_threshold:
            candidates.append(Trap(kind=TrapKind.STALL_TIMEOUT, cycle=s.cycle, pc=pc))
        trap = _first_trap(candidates)
        if trap is not None:
            return _trapped(s, trap)
        return StepEvent(StepEventKind.STALLED, stall_reason=reason)

    signals = _signals(s)
    issued: Dict[int, int] = {}
    for idx, instr in _active_slots(s, vliw):
        a = _read_operand(s, instr, instr.src_a)
        b = _read_operand(s, instr, instr.src_b)
        dest_address = None
        if instr.dst.kind == DestKind.MEM_AGU:
            dest_address = s.agu[instr.dst.index]
            s.agu[instr.dst.index] = (dest_address + 1) & WORD_MASK
        s.fabric.issue(idx, instr, a, b, dest_address)
        issued[idx] = instr.op
    _apply_aux(s, vliw)
    decision = eval_flow(vliw.ctrl_flow, s.param_sets, signals)

    candidates: List[Trap] = []
    next_pc = pc + 1
    if decision.kind == FlowDecisionKind.JUMP:
        next_pc = decision.destination or 0
    raised = s.fabric.tick()
    s.cycle += 1
    s.stall_count = 0
    candidates.extend(_error_trap(s, raised, pc))
    if decision.kind == FlowDecisionKind.JUMP and next_pc >= len(s.vliws):
        candidates.append(
            Trap(kind=TrapKind.INVALID_JUMP_TARGET, cycle=s.cycle, pc=pc)
        )
    if decision.kind == FlowDecisionKind.TRAP:
        candidates.append(
            Trap(kind=TrapKind.USER, cycle=s.cycle, pc=pc, value=decision.trap_value)
        )
    trap = _first_trap(candidates)
    event = StepEventKind.TRAPPED if trap is not None else StepEventKind.RETIRED
    _record(
        s, cycle=cycle, pc=pc, event=event, issued=issued, decision=decision.kind
    )
    if trap is not None:
        return _trapped(s, trap)
    s.pc = next_pc
    s.retired_vliws += 1
    return StepEvent(StepEventKind.RETIRED, next_pc=next_pc)


def run(
    s: MachineState, cfg: Optional[ControllerConfig] = None, trace: bool = False
) -> RunOutcome:
    """
    Step the machine until it halts or traps.

    Args:
        s: a machine obtained from `reset`.
        cfg: a configuration replacing the one given at reset.
        trace: whether to collect one TraceRecord per simulated cycle.

    Returns:
        a RunOutcome with exact cycle and retirement counts.

    Raises:
        ResourceLimitException: if `max_cycles` cycles elapse first.
    """

    if cfg is not None:
        s.config = cfg
    if trace and s.trace is None:
        s.trace = []
    logger.info(f"starting run at pc {s.pc}")
    while True:
        if s.cycle >= s.config.max_cycles:
            raise ResourceLimitException(
                f"no halt or trap within {s.config.max_cycles} cycles",
                cycles=s.cycle,
            )
        event = step(s)
        if event.kind in (StepEventKind.HALTED, StepEventKind.TRAPPED):
            break
    logger.info(
        f"finished run: {s.cycle} cycles, {s.retired_vliws} retired, "
        f"{s.stalled_cycles} stalled"
    )
    return RunOutcome(
        halted=s.halted,
        trap=s.trap,
        cycles=s.cycle,
        retired_vliws=s.retired_vliws,
        stalled_cycles=s.stalled_cycles,
        trace=s.trace,
    )


def write_trace(records: Iterable[TraceRecord], stream: IO[str], fmt: str) -> int:
    """
    Write trace records as JSON Lines or CSV. Returns the number written.
    """

    count = 0
    if fmt == TraceFormat.JSON:
        for record in records:
            stream.write(json.dumps(record.as_dict()) + "\n")
            count += 1
        return count
    if fmt != TraceFormat.CSV:
        raise ValueError(f"unknown trace format '{fmt}'")
    writer: Optional[csv.DictWriter] = None  # type: ignore[type-arg]
    for record in records:
        row = record.as_row()
        if writer is None:
            writer = csv.DictWriter(stream, fieldnames=list(row))
            writer.writeheader()
        writer.writerow(row)
        count += 1
    return count
