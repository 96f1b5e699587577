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
The VLIW instruction format: slot and controller sub-instructions, their
bit-exact 192-bit encoding, and the program image container.

Bit numbering is little-endian across three consecutive little-endian
64-bit lanes, i.e. the 24-byte word read as one little-endian integer.
Slot i occupies bits [28*i, 28*i + 28); the controller occupies [140, 188);
bits [188, 192) are reserved.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from refab.constants import (
    ACC_OPCODES,
    AuxOpcode,
    DestKind,
    FlowOpcode,
    KernelKind,
    OperandKind,
    PS_AUX_OPCODES,
    is_defined_slot_opcode,
)
from refab.core.defaults import (
    AGU_COUNT,
    CONTROLLER_FIELD_OFFSET,
    IMAGE_MAGIC,
    IMAGE_VERSION,
    MAX_PROGRAM_VLIWS,
    PARAM_SET_COUNT,
    SLOT_COUNT,
    SLOT_FIELD_BITS,
    VLIW_BYTES,
)
from refab.exceptions import (
    DecodeException,
    EncodingException,
    ImageFormatException,
)


logger = logging.getLogger(__name__)


# (name, offset, width) within a slot field
_SLOT_LAYOUT = (
    ("op", 0, 6),
    ("src_a.kind", 6, 2),
    ("src_a.index", 8, 4),
    ("src_b.kind", 12, 2),
    ("src_b.index", 14, 4),
    ("dst.kind", 18, 2),
    ("dst.index", 20, 3),
    ("imm_nibble", 23, 4),
    ("reserved", 27, 1),
)
_SLOT_OFFSETS = {name: (offset, width) for name, offset, width in _SLOT_LAYOUT}

# (name, offset, width) within the whole word
_CTRL_LAYOUT = (
    ("ctrl_flow.opcode", CONTROLLER_FIELD_OFFSET + 0, 4),
    ("ctrl_flow.param_set_id", CONTROLLER_FIELD_OFFSET + 4, 2),
    ("ctrl_flow.operand", CONTROLLER_FIELD_OFFSET + 6, 12),
    ("ctrl_flow.acc_mask", CONTROLLER_FIELD_OFFSET + 18, 5),
    ("ctrl_flow.trap_value", CONTROLLER_FIELD_OFFSET + 23, 3),
    ("ctrl_aux.opcode", CONTROLLER_FIELD_OFFSET + 26, 3),
    ("ctrl_aux.target_id", CONTROLLER_FIELD_OFFSET + 29, 3),
    ("ctrl_aux.operand", CONTROLLER_FIELD_OFFSET + 32, 12),
    ("ctrl.reserved", CONTROLLER_FIELD_OFFSET + 44, 4),
    ("reserved", 188, 4),
)
_CTRL_OFFSETS = {name: (offset, width) for name, offset, width in _CTRL_LAYOUT}

# magic | version | 5 bindings | entry_pc | vliw_count | mem_words
_HEADER = struct.Struct("<4sH5sHII")


@dataclass(frozen=True)
class Operand:
    """
    A source operand selector.

    Attributes:
        kind: NONE (reads 0), MEM_AGU (memory at AGU `index`, post-incremented),
            SLOT_OUT (slot `index` output register as of the previous cycle)
            or IMM (an 8-bit immediate, see `SlotInstr.immediate`).
        index: AGU register, slot number or low immediate nibble.
    """

    kind: OperandKind = OperandKind.NONE
    index: int = 0


@dataclass(frozen=True)
class Dest:
    """
    A result destination. NONE latches only ctrl/error, OUT_ONLY also
    writes the slot output register, MEM_AGU additionally stores the result
    at the address held by AGU `index` (post-incremented).
    """

    kind: DestKind = DestKind.NONE
    index: int = 0


@dataclass(frozen=True)
class SlotInstr:
    op: int = 0
    src_a: Operand = Operand()
    src_b: Operand = Operand()
    dst: Dest = Dest()
    imm_nibble: int = 0

    @property
    def is_nop(self) -> bool:
        return self.op == 0

    def immediate(self, operand: Operand) -> int:
        """Value of an IMM operand: high nibble shared, low nibble per operand."""
        return (self.imm_nibble << 4) | operand.index


@dataclass(frozen=True)
class FlowOp:
    opcode: FlowOpcode = FlowOpcode.NO_JMP
    param_set_id: int = 0
    operand: int = 0
    acc_mask: int = 0
    trap_value: int = 0

    def selected_slots(self) -> List[int]:
        return [idx for idx in range(SLOT_COUNT) if self.acc_mask >> idx & 1]


@dataclass(frozen=True)
class AuxOp:
    opcode: AuxOpcode = AuxOpcode.AUX_NOP
    target_id: int = 0
    operand: int = 0


NOP_SLOT = SlotInstr()


@dataclass(frozen=True)
class Vliw:
    """
    One very long instruction word: a sub-instruction per slot plus the
    controller's flow and aux sub-instructions. Only five-slot VLIWs can be
    encoded; narrower ones are accepted by the simulator for test fabrics.
    """

    slots: Tuple[SlotInstr, ...] = (NOP_SLOT,) * SLOT_COUNT
    ctrl_flow: FlowOp = FlowOp()
    ctrl_aux: AuxOp = AuxOp()


NOP_VLIW = Vliw()


def _put(word: int, value: int, offset: int, width: int, field_name: str) -> int:
    if not 0 <= value < (1 << width):
        raise EncodingException(
            f"field {field_name} = {value} does not fit in {width} bits",
            field=field_name,
        )
    return word | (value << offset)


def _check_slot(slot: SlotInstr, prefix: str) -> None:
    for name, operand in (("src_a", slot.src_a), ("src_b", slot.src_b)):
        if operand.kind == OperandKind.NONE and operand.index != 0:
            raise EncodingException(
                f"{prefix}.{name}: NONE operand must have index 0",
                field=f"{prefix}.{name}.index",
            )
        if operand.kind == OperandKind.MEM_AGU and operand.index >= AGU_COUNT:
            raise EncodingException(
                f"{prefix}.{name}: AGU register {operand.index} does not exist",
                field=f"{prefix}.{name}.index",
            )
        if operand.kind == OperandKind.SLOT_OUT and operand.index >= SLOT_COUNT:
            raise EncodingException(
                f"{prefix}.{name}: slot {operand.index} does not exist",
                field=f"{prefix}.{name}.index",
            )
    if slot.dst.kind != DestKind.MEM_AGU and slot.dst.index != 0:
        raise EncodingException(
            f"{prefix}.dst: only MEM_AGU destinations carry an index",
            field=f"{prefix}.dst.index",
        )
    has_imm = OperandKind.IMM in (slot.src_a.kind, slot.src_b.kind)
    if slot.imm_nibble != 0 and not has_imm:
        raise EncodingException(
            f"{prefix}.imm_nibble set without an IMM operand",
            field=f"{prefix}.imm_nibble",
        )


def encode_vliw(vliw: Vliw) -> bytes:
    """
    Encode a VLIW into its 24-byte word.

    Raises:
        EncodingException: if any field is out of range, naming the field.
    """

    if len(vliw.slots) != SLOT_COUNT:
        raise EncodingException(
            f"a VLIW must carry exactly {SLOT_COUNT} slots, got {len(vliw.slots)}",
            field="slots",
        )
    word = 0
    for idx, slot in enumerate(vliw.slots):
        prefix = f"slots[{idx}]"
        _check_slot(slot, prefix)
        base = idx * SLOT_FIELD_BITS
        values = {
            "op": slot.op,
            "src_a.kind": int(slot.src_a.kind),
            "src_a.index": slot.src_a.index,
            "src_b.kind": int(slot.src_b.kind),
            "src_b.index": slot.src_b.index,
            "dst.kind": int(slot.dst.kind),
            "dst.index": slot.dst.index,
            "imm_nibble": slot.imm_nibble,
        }
        for name, value in values.items():
            offset, width = _SLOT_OFFSETS[name]
            word = _put(word, value, base + offset, width, f"{prefix}.{name}")

    flow, aux = vliw.ctrl_flow, vliw.ctrl_aux
    values = {
        "ctrl_flow.opcode": int(flow.opcode),
        "ctrl_flow.param_set_id": flow.param_set_id,
        "ctrl_flow.operand": flow.operand,
        "ctrl_flow.acc_mask": flow.acc_mask,
        "ctrl_flow.trap_value": flow.trap_value,
        "ctrl_aux.opcode": int(aux.opcode),
        "ctrl_aux.target_id": aux.target_id,
        "ctrl_aux.operand": aux.operand,
    }
    for name, value in values.items():
        offset, width = _CTRL_OFFSETS[name]
        word = _put(word, value, offset, width, name)
    return word.to_bytes(VLIW_BYTES, "little")


def _field(word: int, offset: int, width: int) -> int:
    return (word >> offset) & ((1 << width) - 1)


def _decode_slot(word: int, idx: int) -> SlotInstr:
    base = idx * SLOT_FIELD_BITS

    def get(name: str) -> Tuple[int, int]:
        offset, width = _SLOT_OFFSETS[name]
        return _field(word, base + offset, width), base + offset

    reserved, reserved_at = get("reserved")
    if reserved:
        raise DecodeException(
            f"slot {idx}: reserved bit set", bit_offset=reserved_at
        )
    operands = []
    for name in ("src_a", "src_b"):
        kind_value, _ = get(f"{name}.kind")
        index, index_at = get(f"{name}.index")
        kind = OperandKind(kind_value)
        if kind == OperandKind.NONE and index:
            raise DecodeException(
                f"slot {idx}: {name} NONE operand with index {index}",
                bit_offset=index_at,
            )
        if kind == OperandKind.MEM_AGU and index >= AGU_COUNT:
            raise DecodeException(
                f"slot {idx}: {name} selects undefined AGU {index}",
                bit_offset=index_at,
            )
        if kind == OperandKind.SLOT_OUT and index >= SLOT_COUNT:
            raise DecodeException(
                f"slot {idx}: {name} selects undefined slot {index}",
                bit_offset=index_at,
            )
        operands.append(Operand(kind, index))

    dst_kind_value, dst_kind_at = get("dst.kind")
    try:
        dst_kind = DestKind(dst_kind_value)
    except ValueError:
        raise DecodeException(
            f"slot {idx}: undefined destination kind {dst_kind_value}",
            bit_offset=dst_kind_at,
        )
    dst_index, dst_index_at = get("dst.index")
    if dst_kind != DestKind.MEM_AGU and dst_index:
        raise DecodeException(
            f"slot {idx}: destination index {dst_index} without MEM_AGU",
            bit_offset=dst_index_at,
        )
    imm_nibble, imm_at = get("imm_nibble")
    if imm_nibble and OperandKind.IMM not in (operands[0].kind, operands[1].kind):
        raise DecodeException(
            f"slot {idx}: immediate nibble without an IMM operand",
            bit_offset=imm_at,
        )
    op, _ = get("op")
    return SlotInstr(
        op=op,
        src_a=operands[0],
        src_b=operands[1],
        dst=Dest(dst_kind, dst_index),
        imm_nibble=imm_nibble,
    )


def decode_vliw(data: bytes) -> Vliw:
    """
    Decode a 24-byte word into a VLIW.

    Raises:
        DecodeException: for undefined opcodes/selectors or nonzero reserved
            bits, carrying the bit offset of the offending field.
    """

    if len(data) != VLIW_BYTES:
        raise DecodeException(
            f"a VLIW word is {VLIW_BYTES} bytes, got {len(data)}",
            bit_offset=8 * min(len(data), VLIW_BYTES),
        )
    word = int.from_bytes(data, "little")
    slots = tuple(_decode_slot(word, idx) for idx in range(SLOT_COUNT))

    def get(name: str) -> Tuple[int, int]:
        offset, width = _CTRL_OFFSETS[name]
        return _field(word, offset, width), offset

    for name in ("ctrl.reserved", "reserved"):
        value, offset = get(name)
        if value:
            raise DecodeException("reserved controller bits set", bit_offset=offset)

    flow_value, flow_at = get("ctrl_flow.opcode")
    try:
        flow_opcode = FlowOpcode(flow_value)
    except ValueError:
        raise DecodeException(
            f"undefined flow opcode {flow_value}", bit_offset=flow_at
        )
    aux_value, aux_at = get("ctrl_aux.opcode")
    try:
        aux_opcode = AuxOpcode(aux_value)
    except ValueError:
        raise DecodeException(f"undefined aux opcode {aux_value}", bit_offset=aux_at)

    return Vliw(
        slots=slots,
        ctrl_flow=FlowOp(
            opcode=flow_opcode,
            param_set_id=get("ctrl_flow.param_set_id")[0],
            operand=get("ctrl_flow.operand")[0],
            acc_mask=get("ctrl_flow.acc_mask")[0],
            trap_value=get("ctrl_flow.trap_value")[0],
        ),
        ctrl_aux=AuxOp(
            opcode=aux_opcode,
            target_id=get("ctrl_aux.target_id")[0],
            operand=get("ctrl_aux.operand")[0],
        ),
    )


@dataclass(frozen=True)
class ProgramImage:
    """
    A program as loaded on the fabric: raw VLIW words, the kernel kind bound
    to every slot, the entry point and the initial data memory segment.

    Words are kept raw so that an image read from disk can be validated
    (and reported on) even when some of its words do not decode.
    """

    slot_bindings: Tuple[KernelKind, ...]
    entry_pc: int
    words: Tuple[bytes, ...]
    memory: Tuple[int, ...] = ()
    version: int = IMAGE_VERSION
    magic: bytes = field(default=IMAGE_MAGIC, repr=False)

    @property
    def vliw_count(self) -> int:
        return len(self.words)

    @staticmethod
    def from_vliws(
        vliws: List[Vliw],
        *,
        slot_bindings: Tuple[KernelKind, ...],
        entry_pc: int = 0,
        memory: Union[List[int], Tuple[int, ...]] = (),
    ) -> ProgramImage:
        return ProgramImage(
            slot_bindings=tuple(KernelKind(kind) for kind in slot_bindings),
            entry_pc=entry_pc,
            words=tuple(encode_vliw(vliw) for vliw in vliws),
            memory=tuple(memory),
        )

    def vliw(self, index: int) -> Vliw:
        try:
            return decode_vliw(self.words[index])
        except DecodeException as exc:
            raise exc.at_index(index)

    def vliws(self) -> List[Vliw]:
        """Decode every word, raising DecodeException naming the first bad index."""
        return [self.vliw(index) for index in range(self.vliw_count)]

    def to_bytes(self) -> bytes:
        if len(self.slot_bindings) != SLOT_COUNT:
            raise ImageFormatException(
                f"image files carry exactly {SLOT_COUNT} slot bindings"
            )
        header = _HEADER.pack(
            self.magic,
            self.version,
            bytes(int(kind) for kind in self.slot_bindings),
            self.entry_pc,
            self.vliw_count,
            len(self.memory),
        )
        body = b"".join(self.words)
        mem = struct.pack(f"<{len(self.memory)}I", *self.memory)
        return header + body + mem

    @staticmethod
    def from_bytes(data: bytes) -> ProgramImage:
        """
        Parse an image file.

        Raises:
            ImageFormatException: on a wrong magic or version, undefined
                kernel identifiers or a truncated/oversized payload.
        """

        if len(data) < _HEADER.size:
            raise ImageFormatException("image shorter than its header")
        magic, version, bindings, entry_pc, vliw_count, mem_words = _HEADER.unpack_from(
            data, 0
        )
        if magic != IMAGE_MAGIC:
            raise ImageFormatException(f"bad image magic {magic!r}")
        if version != IMAGE_VERSION:
            raise ImageFormatException(f"unsupported image version {version}")
        try:
            kinds = tuple(KernelKind(kind_id) for kind_id in bindings)
        except ValueError as exc:
            raise ImageFormatException(f"undefined kernel kind in bindings: {exc}")
        expected = _HEADER.size + vliw_count * VLIW_BYTES + mem_words * 4
        if len(data) != expected:
            raise ImageFormatException(
                f"image is {len(data)} bytes, header announces {expected}"
            )
        offset = _HEADER.size
        words = tuple(
            bytes(data[offset + i * VLIW_BYTES : offset + (i + 1) * VLIW_BYTES])
            for i in range(vliw_count)
        )
        offset += vliw_count * VLIW_BYTES
        memory = struct.unpack_from(f"<{mem_words}I", data, offset)
        return ProgramImage(
            slot_bindings=kinds,
            entry_pc=entry_pc,
            words=words,
            memory=tuple(memory),
            version=version,
        )


def read_image(path: str) -> ProgramImage:
    logger.debug(f"reading program image '{path}'")
    with open(path, "rb") as image_file:
        return ProgramImage.from_bytes(image_file.read())


def write_image(path: str, image: ProgramImage) -> None:
    logger.debug(f"writing program image '{path}' ({image.vliw_count} VLIWs)")
    with open(path, "wb") as image_file:
        image_file.write(image.to_bytes())


@dataclass(frozen=True)
class StaticDiagnostic:
    """A static problem found in a program image; `index` is the VLIW, if any."""

    index: Optional[int]
    message: str

    def __str__(self) -> str:
        if self.index is None:
            return self.message
        return f"VLIW {self.index}: {self.message}"


def validate_program(image: ProgramImage) -> List[StaticDiagnostic]:
    """
    Statically check a program image. An empty list means the image can be
    loaded and every static destination and opcode is in range.
    """

    diagnostics: List[StaticDiagnostic] = []
    count = image.vliw_count
    if count > MAX_PROGRAM_VLIWS:
        diagnostics.append(
            StaticDiagnostic(
                None, f"program has {count} VLIWs, more than {MAX_PROGRAM_VLIWS}"
            )
        )
    if image.entry_pc >= count:
        diagnostics.append(
            StaticDiagnostic(None, f"entry out of range ({image.entry_pc})")
        )
    for index in range(count):
        try:
            vliw = decode_vliw(image.words[index])
        except DecodeException as exc:
            diagnostics.append(StaticDiagnostic(index, exc.text))
            continue
        flow, aux = vliw.ctrl_flow, vliw.ctrl_aux
        if flow.opcode in ACC_OPCODES and flow.acc_mask == 0:
            diagnostics.append(
                StaticDiagnostic(index, f"{flow.opcode.name} with empty acc_mask")
            )
        for slot_index, slot in enumerate(vliw.slots):
            kind = (
                image.slot_bindings[slot_index]
                if slot_index < len(image.slot_bindings)
                else KernelKind.NONE
            )
            if not is_defined_slot_opcode(kind, slot.op):
                diagnostics.append(
                    StaticDiagnostic(
                        index,
                        f"slot {slot_index} opcode {slot.op} undefined for {kind.name}",
                    )
                )
        if aux.opcode in PS_AUX_OPCODES and aux.target_id >= PARAM_SET_COUNT:
            diagnostics.append(
                StaticDiagnostic(
                    index, f"parameter set p{aux.target_id} does not exist"
                )
            )
        if aux.opcode == AuxOpcode.PS_SET_DEST and aux.operand >= count:
            diagnostics.append(
                StaticDiagnostic(
                    index,
                    f"static jump destination out of range ({aux.operand})",
                )
            )
    return diagnostics
