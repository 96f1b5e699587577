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

import logging
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, Iterable, List, Optional, Sequence, Tuple, Type

import toml

from refab.constants import (
    App,
    DestKind,
    KernelKind,
    SLOT_OPCODES,
    is_defined_slot_opcode,
    slot_opcode_name,
)
from refab.cnn_kernels import CnnMacKernel, CnnSumKernel
from refab.core.defaults import (
    CONTROLLER_RESOURCES,
    DEFAULT_LATENCIES,
    DEFAULT_MEMORY_WORDS,
    DEFAULT_STALL_THRESHOLD,
    KERNEL_RESOURCES,
    SLOT_COUNT,
    SLOT_RESOURCE_ENVELOPE,
    STREAM_CHANNELS,
    WORD_MASK,
)
from refab.core.kernel import Kernel, KernelResult, NullKernel, new_streams
from refab.exceptions import ConfigurationException, SimulationFault, UsageException
from refab.fp_kernels import DivKernel, FmavKernel, SqrtKernel, UtilKernel
from refab.isa import ProgramImage, SlotInstr
from refab.sha3_kernels import ShaBuffKernel, ShaCompKernel


logger = logging.getLogger(__name__)


KERNEL_CLASSES: Dict[KernelKind, Type[Kernel]] = {
    KernelKind.NONE: NullKernel,
    KernelKind.FMAV: FmavKernel,
    KernelKind.DIV: DivKernel,
    KernelKind.SQRT: SqrtKernel,
    KernelKind.UTIL: UtilKernel,
    KernelKind.CNN_MAC: CnnMacKernel,
    KernelKind.CNN_SUM: CnnSumKernel,
    KernelKind.SHA_BUFF: ShaBuffKernel,
    KernelKind.SHA_COMP: ShaCompKernel,
}

APP_LAYOUTS: Dict[str, Tuple[KernelKind, ...]] = {
    App.SIFT: (
        KernelKind.FMAV,
        KernelKind.FMAV,
        KernelKind.FMAV,
        KernelKind.FMAV,
        KernelKind.NONE,
    ),
    App.SWE: (
        KernelKind.FMAV,
        KernelKind.FMAV,
        KernelKind.DIV,
        KernelKind.SQRT,
        KernelKind.UTIL,
    ),
    App.CNN: (
        KernelKind.CNN_MAC,
        KernelKind.CNN_MAC,
        KernelKind.CNN_SUM,
        KernelKind.CNN_SUM,
        KernelKind.NONE,
    ),
    App.SHA3: (
        KernelKind.SHA_BUFF,
        KernelKind.SHA_COMP,
        KernelKind.SHA_BUFF,
        KernelKind.SHA_COMP,
        KernelKind.NONE,
    ),
}


def _parse_kind(name: Any) -> KernelKind:
    if isinstance(name, KernelKind):
        return name
    try:
        return KernelKind[str(name).upper()]
    except KeyError:
        raise ConfigurationException(f"unknown kernel kind '{name}'")


@dataclass(frozen=True)
class FabricConfig:
    """
    The static shape of a fabric: the kernel kind bound to each slot, the
    data memory size, per-op latency overrides and the stall threshold.

    Attributes:
        kinds: one kernel kind per slot (1 to 5 slots).
        memory_words: size of the word-addressed data memory.
        latencies: per kind, per opcode cycle counts overriding the defaults.
        stall_threshold: consecutive stalled cycles before STALL_TIMEOUT.
    """

    kinds: Tuple[KernelKind, ...] = (KernelKind.NONE,) * SLOT_COUNT
    memory_words: int = DEFAULT_MEMORY_WORDS
    latencies: Dict[KernelKind, Dict[int, int]] = field(default_factory=dict)
    stall_threshold: int = DEFAULT_STALL_THRESHOLD

    def __post_init__(self) -> None:
        if not 1 <= len(self.kinds) <= SLOT_COUNT:
            raise ConfigurationException(
                f"a fabric has 1 to {SLOT_COUNT} slots, got {len(self.kinds)}"
            )
        if self.memory_words <= 0:
            raise ConfigurationException(
                f"memory_words must be positive, got {self.memory_words}"
            )
        if self.stall_threshold <= 0:
            raise ConfigurationException(
                f"stall_threshold must be positive, got {self.stall_threshold}"
            )
        for kind, table in self.latencies.items():
            for op, cycles in table.items():
                if not is_defined_slot_opcode(kind, op) or op == 0:
                    raise ConfigurationException(
                        f"{kind.name} has no opcode {slot_opcode_name(kind, op)}"
                    )
                if cycles < 1:
                    raise ConfigurationException(
                        f"latency of {kind.name}.{slot_opcode_name(kind, op)} "
                        f"must be at least 1, got {cycles}"
                    )

    @property
    def slot_count(self) -> int:
        return len(self.kinds)

    def latency_table(self) -> Dict[KernelKind, Dict[int, int]]:
        """Default latencies with the overrides of this config applied."""
        table = {kind: dict(ops) for kind, ops in DEFAULT_LATENCIES.items()}
        for kind, ops in self.latencies.items():
            table.setdefault(kind, {}).update(ops)
        return table

    def with_options(
        self,
        *,
        kinds: Optional[Sequence[KernelKind]] = None,
        memory_words: Optional[int] = None,
        stall_threshold: Optional[int] = None,
    ) -> FabricConfig:
        return FabricConfig(
            kinds=tuple(kinds) if kinds is not None else self.kinds,
            memory_words=self.memory_words if memory_words is None else memory_words,
            latencies=self.latencies,
            stall_threshold=(
                self.stall_threshold if stall_threshold is None else stall_threshold
            ),
        )

    @staticmethod
    def for_app(app: str) -> FabricConfig:
        try:
            return FabricConfig(kinds=APP_LAYOUTS[app])
        except KeyError:
            raise ConfigurationException(f"unknown application '{app}'")

    @staticmethod
    def for_image(image: ProgramImage) -> FabricConfig:
        return FabricConfig(kinds=tuple(image.slot_bindings))

    @staticmethod
    def from_dict(raw_dict: Dict[str, Any]) -> FabricConfig:
        """
        Build a config from a dictionary shaped like the TOML file:
        `slots`, `kinds`, `memory_words`, `stall_threshold` and a
        `latency` table of `{KIND: {OP: cycles}}`.
        """

        known = {"slots", "kinds", "memory_words", "stall_threshold", "latency"}
        unknown = set(raw_dict) - known
        if unknown:
            raise ConfigurationException(
                f"unknown fabric config keys: {', '.join(sorted(unknown))}"
            )
        kinds = [_parse_kind(name) for name in raw_dict.get("kinds", [])]
        slots = raw_dict.get("slots", len(kinds) or SLOT_COUNT)
        if not isinstance(slots, int) or not 1 <= slots <= SLOT_COUNT:
            raise ConfigurationException(f"slots must be 1..{SLOT_COUNT}, got {slots}")
        if len(kinds) > slots:
            raise ConfigurationException(
                f"{len(kinds)} kinds given for a {slots}-slot fabric"
            )
        kinds += [KernelKind.NONE] * (slots - len(kinds))
        latencies: Dict[KernelKind, Dict[int, int]] = {}
        for kind_name, ops in (raw_dict.get("latency") or {}).items():
            kind = _parse_kind(kind_name)
            table = SLOT_OPCODES[kind]
            for op_name, cycles in ops.items():
                try:
                    op = table[str(op_name).upper()]
                except KeyError:
                    raise ConfigurationException(
                        f"{kind.name} has no opcode named '{op_name}'"
                    )
                latencies.setdefault(kind, {})[int(op)] = int(cycles)
        return FabricConfig(
            kinds=tuple(kinds),
            memory_words=int(raw_dict.get("memory_words", DEFAULT_MEMORY_WORDS)),
            latencies=latencies,
            stall_threshold=int(
                raw_dict.get("stall_threshold", DEFAULT_STALL_THRESHOLD)
            ),
        )

    @staticmethod
    def from_toml(path: str) -> FabricConfig:
        logger.debug(f"loading fabric config '{path}'")
        try:
            raw_dict = toml.load(path)
        except (OSError, toml.TomlDecodeError) as exc:
            raise ConfigurationException(f"cannot read fabric config '{path}': {exc}")
        return FabricConfig.from_dict(raw_dict)

    def as_dict(self) -> Dict[str, Any]:
        """Recast this object into a dictionary (the TOML schema)."""

        return {
            "slots": self.slot_count,
            "kinds": [kind.name for kind in self.kinds],
            "memory_words": self.memory_words,
            "stall_threshold": self.stall_threshold,
            "latency": {
                kind.name: {
                    SLOT_OPCODES[kind](op).name: cycles for op, cycles in ops.items()
                }
                for kind, ops in self.latencies.items()
            },
        }


@dataclass
class PendingResult:
    result: KernelResult
    dest: DestKind
    address: Optional[int] = None


@dataclass
class SlotState:
    """
    Attributes:
        index: the slot position.
        kind: the bound kernel kind.
        kernel: the kernel instance (private state lives here).
        out: the 32-bit output register.
        ctrl: the 2-bit control signal.
        error: the error line.
        stall: whether the slot could not accept its op this cycle.
        busy_cycles_remaining: cycles until the in-flight op completes.
        pending: the result of the in-flight op.
    """

    index: int
    kind: KernelKind
    kernel: Kernel
    out: int = 0
    ctrl: int = 0
    error: bool = False
    stall: bool = False
    busy_cycles_remaining: int = 0
    pending: Optional[PendingResult] = None

    @property
    def busy(self) -> bool:
        return self.busy_cycles_remaining > 0


class Fabric:
    """
    The reconfigurable fabric: accelerator slots behind the uniform slot
    contract, a shared word-addressed data memory and per-slot input
    stream channels fed by the host.

    Results of an issued op become visible (out, ctrl, error and any memory
    store) at the end of the cycle in which its latency runs out.
    """

    def __init__(self, config: Optional[FabricConfig] = None) -> None:
        self.config = config or FabricConfig()
        self.memory: List[int] = [0] * self.config.memory_words
        self.latencies = self.config.latency_table()
        self.streams: List[List[Deque[int]]] = []
        self.slots: List[SlotState] = []
        self.pending_writes: Dict[int, int] = {}
        for idx, kind in enumerate(self.config.kinds):
            self.slots.append(SlotState(idx, kind, KERNEL_CLASSES[kind]()))
            self.streams.append(new_streams(STREAM_CHANNELS))

    def __repr__(self) -> str:
        kinds = ", ".join(slot.kind.name for slot in self.slots)
        return f"{self.__class__.__name__}(slots=[{kinds}])"

    @property
    def slot_count(self) -> int:
        return len(self.slots)

    @property
    def kinds(self) -> Tuple[KernelKind, ...]:
        return tuple(slot.kind for slot in self.slots)

    def _slot(self, idx: int) -> SlotState:
        if not 0 <= idx < len(self.slots):
            raise SimulationFault(f"slot {idx} does not exist", slot=idx)
        return self.slots[idx]

    def bind_slot(self, idx: int, kind: KernelKind) -> None:
        """Host a fresh kernel of `kind` in slot `idx`, dropping its streams."""
        slot = self._slot(idx)
        if slot.busy:
            raise UsageException(f"slot {idx} cannot be rebound while busy")
        logger.debug(f"binding slot {idx} to {kind.name}")
        self.slots[idx] = SlotState(idx, kind, KERNEL_CLASSES[kind]())
        self.streams[idx] = new_streams(STREAM_CHANNELS)

    def latency(self, kind: KernelKind, op: int) -> int:
        return self.latencies.get(kind, {}).get(op, 1)

    def can_accept(self, idx: int) -> bool:
        return not self._slot(idx).busy

    def ready(self, idx: int, op: int) -> bool:
        """Whether slot `idx` has the streamed data needed to accept `op`."""
        slot = self._slot(idx)
        ok = op == 0 or slot.kernel.ready(op, self.streams[idx])
        slot.stall = not ok
        return ok

    def is_busy(self, idx: int) -> bool:
        return self._slot(idx).busy

    def busy(self) -> bool:
        return any(slot.busy for slot in self.slots)

    def has_pending_write(self, address: int) -> bool:
        return self.pending_writes.get(address, 0) > 0

    def signals(self) -> Tuple[int, ...]:
        return tuple(slot.ctrl for slot in self.slots)

    def outputs(self) -> Tuple[int, ...]:
        return tuple(slot.out for slot in self.slots)

    def issue(
        self,
        idx: int,
        instr: SlotInstr,
        a: int,
        b: int,
        dest_address: Optional[int] = None,
    ) -> None:
        """
        Hand `instr` to the kernel of slot `idx` with operand words `a`, `b`.
        A MEM_AGU destination stores the result at `dest_address` when the
        op completes.

        Raises:
            SimulationFault: for an opcode undefined for the bound kind, or a
                destination address outside memory.
        """

        slot = self._slot(idx)
        if instr.op == 0:
            return
        if slot.busy:
            raise UsageException(f"slot {idx} is busy")
        if not is_defined_slot_opcode(slot.kind, instr.op):
            raise SimulationFault(
                f"opcode {instr.op} undefined for {slot.kind.name} in slot {idx}",
                slot=idx,
            )
        if instr.dst.kind == DestKind.MEM_AGU:
            if dest_address is None:
                raise UsageException("MEM_AGU destination without an address")
            self._check_address(dest_address)
        slot.error = False
        try:
            result = slot.kernel.execute(
                instr.op, a & WORD_MASK, b & WORD_MASK, self.streams[idx]
            )
        except SimulationFault as exc:
            raise SimulationFault(exc.text, address=exc.address, slot=idx)
        slot.busy_cycles_remaining = self.latency(slot.kind, instr.op)
        slot.pending = PendingResult(result, instr.dst.kind, dest_address)
        if dest_address is not None and instr.dst.kind == DestKind.MEM_AGU:
            self.pending_writes[dest_address] = (
                self.pending_writes.get(dest_address, 0) + 1
            )

    def stream_push(self, idx: int, channel: int, words: Iterable[int]) -> None:
        if not 0 <= channel < STREAM_CHANNELS:
            raise SimulationFault(
                f"stream channel {channel} does not exist", slot=idx
            )
        self._slot(idx)
        self.streams[idx][channel].extend(int(word) & WORD_MASK for word in words)

    def _check_address(self, address: int) -> None:
        if not 0 <= address < len(self.memory):
            raise SimulationFault(
                f"memory address {address} outside {len(self.memory)} words",
                address=address,
            )

    def mem_read(self, address: int) -> int:
        self._check_address(address)
        return self.memory[address]

    def mem_write(self, address: int, word: int) -> None:
        self._check_address(address)
        self.memory[address] = word & WORD_MASK

    def load_memory(self, words: Sequence[int], base: int = 0) -> None:
        if words:
            self._check_address(base + len(words) - 1)
        self._check_address(base)
        for offset, word in enumerate(words):
            self.memory[base + offset] = int(word) & WORD_MASK

    def dump_memory(self, address: int, length: int) -> List[int]:
        if length:
            self._check_address(address + length - 1)
        self._check_address(address)
        return self.memory[address : address + length]

    def tick(self) -> List[int]:
        """
        Close a cycle: kernels advance, in-flight ops count down and the
        completing ones publish their results. Returns the slots whose error
        line rose in this cycle.
        """

        raised: List[int] = []
        for slot in self.slots:
            slot.kernel.tick(self.streams[slot.index])
            if not slot.busy:
                continue
            slot.busy_cycles_remaining -= 1
            if slot.busy_cycles_remaining or slot.pending is None:
                continue
            pending, slot.pending = slot.pending, None
            result = pending.result
            out = slot.out if result.out is None else result.out & WORD_MASK
            if pending.dest != DestKind.NONE:
                slot.out = out
            if result.ctrl is not None:
                slot.ctrl = result.ctrl & 0b11
            if pending.dest == DestKind.MEM_AGU and pending.address is not None:
                self.memory[pending.address] = out
                remaining = self.pending_writes[pending.address] - 1
                if remaining:
                    self.pending_writes[pending.address] = remaining
                else:
                    del self.pending_writes[pending.address]
            if result.error and not slot.error:
                raised.append(slot.index)
            slot.error = result.error
        return raised

    def resource_summary(self) -> Dict[str, Any]:
        """
        Static LUT/FF/BRAM/DSP figures of the bound kernels, per slot and in
        total with the controller, checked against the per-slot envelope.
        Reported only.
        """

        names = ("luts", "ffs", "brams", "dsps")
        per_slot = []
        totals = dict(zip(names, CONTROLLER_RESOURCES))
        for slot in self.slots:
            usage = dict(zip(names, KERNEL_RESOURCES[slot.kind]))
            fits = all(usage[name] <= SLOT_RESOURCE_ENVELOPE[name] for name in names)
            per_slot.append(
                {"slot": slot.index, "kind": slot.kind.name, "fits": fits, **usage}
            )
            for name in names:
                totals[name] += usage[name]
        return {
            "slots": per_slot,
            "controller": dict(zip(names, CONTROLLER_RESOURCES)),
            "envelope": dict(SLOT_RESOURCE_ENVELOPE),
            "total": totals,
        }
