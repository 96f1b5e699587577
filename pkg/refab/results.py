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

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from refab.constants import TrapKind


@dataclass(frozen=True)
class Trap:
    """
    A terminal architectural exception raised by the controller.

    Attributes:
        kind: one of the `TrapKind` values.
        cycle: the cycle boundary at which the trap was taken.
        pc: index of the VLIW being executed (or held) when it was taken.
        slot: for ACCELERATOR_ERROR, the lowest slot whose error line rose.
        value: for USER traps, the 3-bit trap value.
    """

    kind: str
    cycle: int
    pc: int
    slot: Optional[int] = None
    value: Optional[int] = None

    def describe(self) -> str:
        detail = ""
        if self.kind == TrapKind.ACCELERATOR_ERROR:
            detail = f" in slot {self.slot}"
        elif self.kind == TrapKind.USER:
            detail = f" with value {self.value}"
        return f"trap {self.kind}{detail} at cycle {self.cycle}, pc {self.pc}"

    def as_dict(self) -> Dict[str, Any]:
        """Recast this object into a dictionary."""

        return {
            k: v
            for k, v in {
                "kind": self.kind,
                "cycle": self.cycle,
                "pc": self.pc,
                "slot": self.slot,
                "value": self.value,
            }.items()
            if v is not None
        }

    @staticmethod
    def from_dict(raw_dict: Optional[Dict[str, Any]]) -> Optional[Trap]:
        """
        Create an instance of Trap from a dictionary such as one found
        in a JSON report.
        """

        if raw_dict is not None:
            return Trap(
                kind=raw_dict["kind"],
                cycle=raw_dict["cycle"],
                pc=raw_dict["pc"],
                slot=raw_dict.get("slot"),
                value=raw_dict.get("value"),
            )
        else:
            return None


@dataclass(frozen=True)
class FlowDecision:
    """
    Outcome of evaluating a flow sub-instruction.

    Attributes:
        kind: one of the `FlowDecisionKind` values.
        destination: the jump destination, for JUMP.
        trap_value: the user trap value, for TRAP.
    """

    kind: str
    destination: Optional[int] = None
    trap_value: Optional[int] = None


@dataclass(frozen=True)
class StepEvent:
    """
    What a single controller step did.

    Attributes:
        kind: one of the `StepEventKind` values.
        next_pc: the pc after a RETIRED event.
        trap: the trap taken, for TRAPPED.
        stall_reason: one of the `StallReason` values, for STALLED.
    """

    kind: str
    next_pc: Optional[int] = None
    trap: Optional[Trap] = None
    stall_reason: Optional[str] = None


@dataclass(frozen=True)
class SlotSnapshot:
    op: str
    ctrl: int


@dataclass(frozen=True)
class TraceRecord:
    """
    One simulated cycle as seen at its closing boundary.

    Attributes:
        cycle: the cycle number (0-based) this record describes.
        pc: the VLIW index fetched in this cycle.
        event: the StepEvent kind.
        decision: the flow decision for retired VLIWs, else None.
        counters: the four parameter-set counters after the cycle.
        stall_count: consecutive stalled cycles of the current VLIW.
        stall_reason: the reason of a stall, if any.
        slots: per-slot opcode issued (or "-" when nothing issued) and
            the 2-bit control signal after the cycle.
    """

    cycle: int
    pc: int
    event: str
    decision: Optional[str]
    counters: Tuple[int, int, int, int]
    stall_count: int
    stall_reason: Optional[str]
    slots: Tuple[SlotSnapshot, ...]

    def as_dict(self) -> Dict[str, Any]:
        """Recast this object into a dictionary."""

        return {
            "cycle": self.cycle,
            "pc": self.pc,
            "event": self.event,
            "decision": self.decision,
            "counters": list(self.counters),
            "stall_count": self.stall_count,
            "stall_reason": self.stall_reason,
            "slots": [{"op": slot.op, "ctrl": slot.ctrl} for slot in self.slots],
        }

    def as_row(self) -> Dict[str, Any]:
        """Flatten this object into a single CSV row."""

        row: Dict[str, Any] = {
            "cycle": self.cycle,
            "pc": self.pc,
            "event": self.event,
            "decision": self.decision or "",
            "stall_count": self.stall_count,
            "stall_reason": self.stall_reason or "",
        }
        for ps_index, counter in enumerate(self.counters):
            row[f"counter{ps_index}"] = counter
        for slot_index, slot in enumerate(self.slots):
            row[f"slot{slot_index}_op"] = slot.op
            row[f"slot{slot_index}_ctrl"] = slot.ctrl
        return row


@dataclass
class RunOutcome:
    """
    The result of running a machine to completion.

    Attributes:
        halted: True if the program fell through its last VLIW.
        trap: the trap that terminated the run, if any.
        cycles: total simulated cycles.
        retired_vliws: number of RETIRED events.
        stalled_cycles: number of STALLED events.
        trace: per-cycle records, when requested.
    """

    halted: bool
    trap: Optional[Trap]
    cycles: int
    retired_vliws: int
    stalled_cycles: int
    trace: Optional[List[TraceRecord]] = None

    @property
    def trapped(self) -> bool:
        return self.trap is not None


@dataclass
class Comparison:
    """
    Outcome of running one benchmark problem both as a Special Instruction
    on the simulated fabric and through the software oracle.

    Attributes:
        app: the benchmark application (see `App`).
        matched: whether the fabric output met the application criterion.
        si_cycles: simulated cycles of the Special Instruction.
        stalled_cycles: how many of those cycles were stalls.
        retired_vliws: how many VLIWs retired.
        trap: the trap that ended the run, if any.
        max_abs_rel_error: worst relative error over all outputs for the
            floating-point applications, None otherwise.
        detail: application-specific extras (e.g. the hex digest).
    """

    app: str
    matched: bool
    si_cycles: int
    stalled_cycles: int
    retired_vliws: int
    trap: Optional[Trap] = None
    max_abs_rel_error: Optional[float] = None
    detail: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        """Recast this object into a dictionary."""

        return {
            "app": self.app,
            "matched": self.matched,
            "si_cycles": self.si_cycles,
            "stalled_cycles": self.stalled_cycles,
            "retired_vliws": self.retired_vliws,
            "trap": None if self.trap is None else self.trap.as_dict(),
            "max_abs_rel_error": self.max_abs_rel_error,
            "detail": dict(sorted(self.detail.items())),
        }

    @staticmethod
    def from_dict(raw_dict: Dict[str, Any]) -> Comparison:
        """Create an instance of Comparison from a report record."""

        return Comparison(
            app=raw_dict["app"],
            matched=raw_dict["matched"],
            si_cycles=raw_dict["si_cycles"],
            stalled_cycles=raw_dict["stalled_cycles"],
            retired_vliws=raw_dict["retired_vliws"],
            trap=Trap.from_dict(raw_dict.get("trap")),
            max_abs_rel_error=raw_dict.get("max_abs_rel_error"),
            detail=dict(raw_dict.get("detail") or {}),
        )
