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
Unit tests for the VLIW encoding and the program image container.
"""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refab.constants import (
    AuxOpcode,
    DestKind,
    FlowOpcode,
    KernelKind,
    OperandKind,
)
from refab.core.defaults import CONTROLLER_FIELD_OFFSET, VLIW_BYTES
from refab.exceptions import DecodeException, EncodingException, ImageFormatException
from refab.fabric import APP_LAYOUTS
from refab.isa import (
    NOP_SLOT,
    NOP_VLIW,
    AuxOp,
    Dest,
    FlowOp,
    Operand,
    ProgramImage,
    SlotInstr,
    Vliw,
    decode_vliw,
    encode_vliw,
    read_image,
    validate_program,
    write_image,
)

NO_BINDINGS = (KernelKind.NONE,) * 5


def _random_operand(rng: np.random.Generator) -> Operand:
    kind = OperandKind(int(rng.integers(0, 4)))
    limit = {
        OperandKind.NONE: 1,
        OperandKind.MEM_AGU: 8,
        OperandKind.SLOT_OUT: 5,
        OperandKind.IMM: 16,
    }[kind]
    return Operand(kind, int(rng.integers(0, limit)))


def _random_slot(rng: np.random.Generator) -> SlotInstr:
    src_a, src_b = _random_operand(rng), _random_operand(rng)
    dst_kind = DestKind(int(rng.integers(0, 3)))
    has_imm = OperandKind.IMM in (src_a.kind, src_b.kind)
    return SlotInstr(
        op=int(rng.integers(0, 64)),
        src_a=src_a,
        src_b=src_b,
        dst=Dest(
            dst_kind,
            int(rng.integers(0, 8)) if dst_kind == DestKind.MEM_AGU else 0,
        ),
        imm_nibble=int(rng.integers(0, 16)) if has_imm else 0,
    )


def _random_vliw(rng: np.random.Generator) -> Vliw:
    flow_codes = list(FlowOpcode)
    aux_codes = list(AuxOpcode)
    return Vliw(
        slots=tuple(_random_slot(rng) for _ in range(5)),
        ctrl_flow=FlowOp(
            opcode=flow_codes[int(rng.integers(0, len(flow_codes)))],
            param_set_id=int(rng.integers(0, 4)),
            operand=int(rng.integers(0, 4096)),
            acc_mask=int(rng.integers(0, 32)),
            trap_value=int(rng.integers(0, 8)),
        ),
        ctrl_aux=AuxOp(
            opcode=aux_codes[int(rng.integers(0, len(aux_codes)))],
            target_id=int(rng.integers(0, 8)),
            operand=int(rng.integers(0, 4096)),
        ),
    )


@st.composite
def operands(draw: st.DrawFn) -> Operand:
    kind = draw(st.sampled_from(list(OperandKind)))
    if kind == OperandKind.NONE:
        return Operand()
    limit = {OperandKind.MEM_AGU: 7, OperandKind.SLOT_OUT: 4, OperandKind.IMM: 15}
    return Operand(kind, draw(st.integers(0, limit[kind])))


@st.composite
def slot_instrs(draw: st.DrawFn) -> SlotInstr:
    src_a, src_b = draw(operands()), draw(operands())
    dst_kind = draw(st.sampled_from(list(DestKind)))
    dst_index = draw(st.integers(0, 7)) if dst_kind == DestKind.MEM_AGU else 0
    has_imm = OperandKind.IMM in (src_a.kind, src_b.kind)
    return SlotInstr(
        op=draw(st.integers(0, 63)),
        src_a=src_a,
        src_b=src_b,
        dst=Dest(dst_kind, dst_index),
        imm_nibble=draw(st.integers(0, 15)) if has_imm else 0,
    )


@st.composite
def vliws(draw: st.DrawFn) -> Vliw:
    return Vliw(
        slots=tuple(draw(slot_instrs()) for _ in range(5)),
        ctrl_flow=FlowOp(
            opcode=draw(st.sampled_from(list(FlowOpcode))),
            param_set_id=draw(st.integers(0, 3)),
            operand=draw(st.integers(0, 4095)),
            acc_mask=draw(st.integers(0, 31)),
            trap_value=draw(st.integers(0, 7)),
        ),
        ctrl_aux=AuxOp(
            opcode=draw(st.sampled_from(list(AuxOpcode))),
            target_id=draw(st.integers(0, 7)),
            operand=draw(st.integers(0, 4095)),
        ),
    )


class TestVliwEncoding:
    @pytest.mark.describe("the all-zero word is the NOP VLIW and vice versa")
    def test_zero_word_is_nop(self) -> None:
        assert decode_vliw(bytes(VLIW_BYTES)) == NOP_VLIW
        assert encode_vliw(NOP_VLIW) == bytes(VLIW_BYTES)

    @pytest.mark.describe("10,000 random valid VLIWs survive encode and decode")
    def test_random_vliw_round_trip(self, rng: np.random.Generator) -> None:
        for _ in range(10_000):
            vliw = _random_vliw(rng)
            word = encode_vliw(vliw)
            assert len(word) == VLIW_BYTES
            assert decode_vliw(word) == vliw

    @pytest.mark.describe("decode(encode(v)) == v for generated VLIWs")
    @settings(max_examples=300, deadline=None)
    @given(vliw=vliws())
    def test_vliw_round_trip_property(self, vliw: Vliw) -> None:
        assert decode_vliw(encode_vliw(vliw)) == vliw

    @pytest.mark.describe("encode(decode(w)) == w for words that decode")
    @settings(max_examples=300, deadline=None)
    @given(vliw=vliws())
    def test_word_round_trip_property(self, vliw: Vliw) -> None:
        word = encode_vliw(vliw)
        assert encode_vliw(decode_vliw(word)) == word

    @pytest.mark.describe("out-of-range fields are rejected naming the field")
    def test_encoding_errors(self) -> None:
        with pytest.raises(EncodingException) as exc:
            encode_vliw(Vliw(ctrl_flow=FlowOp(operand=4096)))
        assert exc.value.field == "ctrl_flow.operand"

        with pytest.raises(EncodingException) as exc:
            encode_vliw(Vliw(slots=(SlotInstr(op=64),) + (NOP_SLOT,) * 4))
        assert exc.value.field == "slots[0].op"

        bad_none = SlotInstr(src_a=Operand(OperandKind.NONE, 3))
        with pytest.raises(EncodingException) as exc:
            encode_vliw(Vliw(slots=(NOP_SLOT, bad_none) + (NOP_SLOT,) * 3))
        assert exc.value.field == "slots[1].src_a.index"

        stray_nibble = SlotInstr(op=1, imm_nibble=2)
        with pytest.raises(EncodingException) as exc:
            encode_vliw(Vliw(slots=(stray_nibble,) + (NOP_SLOT,) * 4))
        assert exc.value.field == "slots[0].imm_nibble"

        with pytest.raises(EncodingException) as exc:
            encode_vliw(Vliw(slots=(NOP_SLOT,) * 4))
        assert exc.value.field == "slots"

    @pytest.mark.describe("undefined and reserved fields do not decode")
    def test_decode_errors(self) -> None:
        reserved_flow = (10 << CONTROLLER_FIELD_OFFSET).to_bytes(VLIW_BYTES, "little")
        with pytest.raises(DecodeException) as exc:
            decode_vliw(reserved_flow)
        assert exc.value.bit_offset == CONTROLLER_FIELD_OFFSET

        undefined_aux = (7 << (CONTROLLER_FIELD_OFFSET + 26)).to_bytes(
            VLIW_BYTES, "little"
        )
        with pytest.raises(DecodeException) as exc:
            decode_vliw(undefined_aux)
        assert exc.value.bit_offset == CONTROLLER_FIELD_OFFSET + 26

        with pytest.raises(DecodeException) as exc:
            decode_vliw((1 << 188).to_bytes(VLIW_BYTES, "little"))
        assert exc.value.bit_offset == 188

        # slot 1 destination kind 3
        with pytest.raises(DecodeException) as exc:
            decode_vliw((3 << (28 + 18)).to_bytes(VLIW_BYTES, "little"))
        assert exc.value.bit_offset == 28 + 18

        with pytest.raises(DecodeException):
            decode_vliw(bytes(VLIW_BYTES - 1))

    @pytest.mark.describe("flow field value 15 decodes to TRAP_IF_ACC_GT")
    def test_top_flow_opcode(self) -> None:
        word = (15 << CONTROLLER_FIELD_OFFSET).to_bytes(VLIW_BYTES, "little")
        assert decode_vliw(word).ctrl_flow.opcode == FlowOpcode.TRAP_IF_ACC_GT


class TestProgramImage:
    @pytest.mark.describe("program images survive to_bytes/from_bytes and files")
    def test_image_round_trip(self, tmp_path: Path) -> None:
        image = ProgramImage.from_vliws(
            [NOP_VLIW, Vliw(ctrl_flow=FlowOp(FlowOpcode.TRAP_ALW, trap_value=5))],
            slot_bindings=APP_LAYOUTS["swe"],
            entry_pc=1,
            memory=[1, 2, 0xFFFFFFFF],
        )
        data = image.to_bytes()
        assert len(data) == 21 + 2 * VLIW_BYTES + 3 * 4
        assert ProgramImage.from_bytes(data) == image

        path = str(tmp_path / "prog.rfsi")
        write_image(path, image)
        assert read_image(path) == image

    @pytest.mark.describe("malformed image files raise ImageFormatException")
    def test_image_format_errors(self) -> None:
        data = ProgramImage.from_vliws([NOP_VLIW], slot_bindings=NO_BINDINGS).to_bytes()
        with pytest.raises(ImageFormatException):
            ProgramImage.from_bytes(b"XXXX" + data[4:])
        with pytest.raises(ImageFormatException):
            ProgramImage.from_bytes(data[:-1])
        with pytest.raises(ImageFormatException):
            ProgramImage.from_bytes(data[:10])
        # binding byte of slot 0 sits right after magic and version
        undefined_kind = data[:6] + bytes([9]) + data[7:]
        with pytest.raises(ImageFormatException):
            ProgramImage.from_bytes(undefined_kind)

    @pytest.mark.describe("undecodable words are kept and reported by validate_program")
    def test_validate_undecodable(self) -> None:
        bad = (10 << CONTROLLER_FIELD_OFFSET).to_bytes(VLIW_BYTES, "little")
        image = ProgramImage(slot_bindings=NO_BINDINGS, entry_pc=0, words=(bad,))
        parsed = ProgramImage.from_bytes(image.to_bytes())
        diagnostics = validate_program(parsed)
        assert [d.index for d in diagnostics] == [0]
        assert "undefined flow opcode 10" in str(diagnostics[0])
        with pytest.raises(DecodeException) as exc:
            parsed.vliws()
        assert exc.value.index == 0

    @pytest.mark.describe("validate_program reports static range problems")
    def test_validate_program(self) -> None:
        image = ProgramImage.from_vliws(
            [Vliw(ctrl_aux=AuxOp(AuxOpcode.PS_SET_DEST, 0, 7)), NOP_VLIW, NOP_VLIW],
            slot_bindings=NO_BINDINGS,
        )
        messages = [d.message for d in validate_program(image)]
        assert messages == ["static jump destination out of range (7)"]

        image = ProgramImage.from_vliws(
            [
                Vliw(
                    slots=(SlotInstr(op=1),) + (NOP_SLOT,) * 4,
                    ctrl_flow=FlowOp(FlowOpcode.JMP_IF_ACC_EQ),
                    ctrl_aux=AuxOp(AuxOpcode.PS_CNT_INC, 5),
                )
            ],
            slot_bindings=NO_BINDINGS,
        )
        messages = [d.message for d in validate_program(image)]
        assert "JMP_IF_ACC_EQ with empty acc_mask" in messages
        assert "slot 0 opcode 1 undefined for NONE" in messages
        assert "parameter set p5 does not exist" in messages

        empty = ProgramImage.from_vliws([], slot_bindings=NO_BINDINGS)
        assert [d.message for d in validate_program(empty)] == [
            "entry out of range (0)"
        ]
