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
Special Instruction generators.

Each benchmark problem becomes microcode text in the assembler syntax,
the image assembled from it, and the stream contents the kernels expect.
Loops are driven by parameter-set counters so that the program size does
not grow with the problem size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from refab.assembler import WORDS_PER_LINE, assemble
from refab.benchmarks.problems import (
    ConvLayerProblem,
    Problem,
    RiemannProblem,
    Sha3Problem,
    SiftProblem,
)
from refab.cnn_kernels import WEIGHT_CHANNEL, pixel_words
from refab.constants import App, KernelKind
from refab.core.defaults import (
    COUNTER_MODULUS,
    DEFAULT_LINE_BUFFER_WIDTH,
    DEFAULT_MEMORY_WORDS,
    KECCAK_ROUNDS,
    SHA3_256_RATE_BYTES,
    SLOT_COUNT,
)
from refab.core.utils import word_from_f32, word_from_i32
from refab.exceptions import GenerationException
from refab.fabric import APP_LAYOUTS
from refab.fp_kernels import CTRL_GREATER, CTRL_LESS
from refab.isa import ProgramImage
from refab.sha3_kernels import RATE_WORDS, message_words


logger = logging.getLogger(__name__)

MAX_LOOP_COUNT = COUNTER_MODULUS - 1

SIFT_LANES = 4
SIFT_DATA_BASE = 16

CNN_OUTPUT_BASE = 16
CNN_OUTPUT_AGU = 7

SHA3_DIGEST_WORDS = 8


@dataclass
class GeneratedProgram:
    """
    A Special Instruction ready to run.

    Attributes:
        app: the benchmark application.
        source: the microcode text, memory segment included.
        image: the assembled program.
        kinds: the fabric layout the program binds.
        streams: words to push, keyed by (slot, channel).
        symbols: label name to VLIW index.
        result_address: first memory word of the result.
        result_length: number of result words.
        variant: which program shape was chosen (e.g. "fwave", "1-mac").
    """

    app: str
    source: str
    image: ProgramImage
    kinds: Tuple[KernelKind, ...]
    streams: Dict[Tuple[int, int], List[int]] = field(default_factory=dict)
    symbols: Dict[str, int] = field(default_factory=dict)
    result_address: int = 0
    result_length: int = 1
    variant: str = ""


def _slotbind(kinds: Sequence[KernelKind]) -> List[str]:
    return [f".slotbind {idx} {kind.name}" for idx, kind in enumerate(kinds)]


def _word_lines(words: Sequence[int]) -> List[str]:
    return [
        ".word " + ", ".join(f"0x{w:08x}" for w in words[i : i + WORDS_PER_LINE])
        for i in range(0, len(words), WORDS_PER_LINE)
    ]


def _statement(clauses: Dict[int, str], ctrl: Optional[str] = None) -> str:
    parts = [f"slot{idx}: {clauses[idx]}" for idx in sorted(clauses)]
    if ctrl:
        parts.append(f"ctrl: {ctrl}")
    return " | ".join(parts)


def _loop_count(app: str, parameter: str, value: int) -> int:
    if not 1 <= value <= MAX_LOOP_COUNT:
        raise GenerationException(
            f"{parameter} loop of {value} iterations does not fit a "
            f"parameter-set counter (1..{MAX_LOOP_COUNT})",
            app=app,
            parameter=parameter,
        )
    return value


def _check_memory(app: str, words: int, memory_words: int) -> None:
    if words > memory_words:
        raise GenerationException(
            f"{app} program needs {words} memory words, the fabric has "
            f"{memory_words}",
            app=app,
            parameter="memory_words",
        )


def _finish(
    app: str,
    lines: List[str],
    kinds: Tuple[KernelKind, ...],
    **kwargs: object,
) -> GeneratedProgram:
    source = "\n".join(lines) + "\n"
    result = assemble(source, filename=f"<{app}>")
    return GeneratedProgram(
        app=app,
        source=source,
        image=result.image,
        kinds=kinds,
        symbols=result.symbols,
        **kwargs,  # type: ignore[arg-type]
    )


def gen_sift(
    problem: SiftProblem, *, memory_words: int = DEFAULT_MEMORY_WORDS
) -> GeneratedProgram:
    """
    Four FMAV slots each keep one partial sum of squared differences over
    interleaved (a, b) pairs; a two-level adder tree reduces them into
    memory word 0. Only the loop bound depends on the descriptor length.
    """

    kinds = APP_LAYOUTS[App.SIFT]
    padded = -(-problem.n // SIFT_LANES) * SIFT_LANES
    iterations = _loop_count(App.SIFT, "n", padded // SIFT_LANES)
    _check_memory(App.SIFT, SIFT_DATA_BASE + 2 * padded, memory_words)
    filler = (0.0,) * (padded - problem.n)
    data = [0] * SIFT_DATA_BASE
    for a, b in zip(problem.a + filler, problem.b + filler):
        data += [word_from_f32(a), word_from_f32(b)]
    lanes = range(SIFT_LANES)

    def each(text: str) -> Dict[int, str]:
        return {lane: text for lane in lanes}

    lines = _slotbind(kinds) + [
        "    " + _statement(each("CLR_ACC"), f"AGU_SET a0, {SIFT_DATA_BASE}"),
        "    ctrl: PS_SET_DEST p0, body",
        "body: "
        + _statement(
            each("SUBSQ_ACC m0, m0"),
            f"PS_CNT_INC p0 ; JMP_IF_CNT_LT p0, {iterations}",
        ),
        "    " + _statement(each("RD_ACC -> out")),
        "    " + _statement({0: "ADD s0, s1 -> out", 2: "ADD s2, s3 -> out"}),
        "    " + _statement({0: "ADD s0, s2 -> m2"}),
    ]
    lines += _word_lines(data)
    return _finish(App.SIFT, lines, kinds, result_address=0, result_length=1)


# memory layout of the SWE program: results first, then inputs, constants
SWE_RESULTS = ("upd_h_l", "upd_hu_l", "upd_h_r", "upd_hu_r", "max_speed")
SWE_INPUTS = ("h_l", "h_r", "hu_l", "hu_r", "b_l", "b_r")
SWE_CONSTANTS = ("gravity", "half", "dry_tolerance", "minus_one", "zero")

_SWE_LEFT = ("upd_h_l", "upd_hu_l")
_SWE_RIGHT = ("upd_h_r", "upd_hu_r")
_SWE_DISCARD = ("wall_h", "wall_hu")


class _FpBuilder:
    """
    Straight-line float32 microcode over named memory variables. Every op
    reads its sources through AGU 0 and 1 and writes through AGU 2; AGU_SET
    statements are only emitted when a register does not already point at
    the wanted variable.
    """

    FMAV_SLOTS = (0, 1)
    DIV_SLOT = 2
    SQRT_SLOT = 3
    UTIL_SLOT = 4

    def __init__(self) -> None:
        self.lines: List[str] = []
        self.addresses: Dict[str, int] = {}
        self.agu: Dict[int, int] = {}
        self.turn = 0

    def var(self, *names: str) -> None:
        for name in names:
            self.addresses.setdefault(name, len(self.addresses))

    def label(self, name: str) -> None:
        self.lines.append(f"{name}:")
        self.agu.clear()

    def emit(self, text: str) -> None:
        self.lines.append(f"    {text}")

    def _point(self, register: int, name: str) -> None:
        self.var(name)
        address = self.addresses[name]
        if self.agu.get(register) != address:
            self.emit(f"ctrl: AGU_SET a{register}, {address}")
            self.agu[register] = address

    def op(
        self,
        slot: int,
        mnemonic: str,
        dst: Optional[str],
        a: str,
        b: Optional[str] = None,
    ) -> None:
        used = [0]
        self._point(0, a)
        text = f"{mnemonic} m0"
        if b is not None:
            self._point(1, b)
            used.append(1)
            text += ", m1"
        if dst is not None:
            self._point(2, dst)
            used.append(2)
            text += " -> m2"
        self.emit(f"slot{slot}: {text}")
        for register in used:
            self.agu[register] += 1

    def fmav(self, mnemonic: str, dst: str, a: str, b: str) -> None:
        slot = self.FMAV_SLOTS[self.turn % len(self.FMAV_SLOTS)]
        self.turn += 1
        self.op(slot, mnemonic, dst, a, b)

    def div(self, dst: str, a: str, b: str) -> None:
        self.op(self.DIV_SLOT, "DIV", dst, a, b)

    def sqrt(self, dst: str, a: str) -> None:
        self.op(self.SQRT_SLOT, "SQRT", dst, a)

    def util(self, mnemonic: str, dst: str, a: str, b: Optional[str] = None) -> None:
        self.op(self.UTIL_SLOT, mnemonic, dst, a, b)

    def jump(self, target: str) -> None:
        self.emit(f"ctrl: PS_SET_DEST p1, {target} ; ALW_JMP p1")

    def branch_unless_above(self, value: str, bound: str, target: str) -> None:
        """Jump to `target` when `value` <= `bound` or either is NaN."""
        self.op(self.UTIL_SLOT, "CMP", None, value, bound)
        self.emit(
            f"ctrl: PS_SET_DEST p1, {target} ; "
            f"JMP_IF_ACC_NEQ p1, {CTRL_GREATER}, [{self.UTIL_SLOT}]"
        )

    def branch_on_sign(self, value: str, negative: str, positive: str) -> None:
        """Jump on value < 0 or value > 0; zero (and NaN) falls through."""
        self.op(self.UTIL_SLOT, "CMP", None, value, "zero")
        self.emit(
            f"ctrl: PS_SET_DEST p1, {negative} ; "
            f"JMP_IF_ACC_EQ p1, {CTRL_LESS}, [{self.UTIL_SLOT}]"
        )
        self.emit(
            f"ctrl: PS_SET_DEST p1, {positive} ; "
            f"JMP_IF_ACC_EQ p1, {CTRL_GREATER}, [{self.UTIL_SLOT}]"
        )


def _accumulate(
    fp: _FpBuilder, target: Tuple[str, str], wave_h: str, wave_hu: str
) -> None:
    fp.fmav("ADD", target[0], target[0], wave_h)
    fp.fmav("ADD", target[1], target[1], wave_hu)


def _assign_wave(
    fp: _FpBuilder,
    prefix: str,
    wave: Tuple[str, str, str],
    left: Tuple[str, str],
    right: Tuple[str, str],
) -> None:
    wave_h, wave_hu, speed = wave
    negative, positive, join = f"{prefix}_neg", f"{prefix}_pos", f"{prefix}_join"
    fp.branch_on_sign(speed, negative, positive)
    fp.fmav("MUL", f"{prefix}_half_h", wave_h, "half")
    fp.fmav("MUL", f"{prefix}_half_hu", wave_hu, "half")
    _accumulate(fp, left, f"{prefix}_half_h", f"{prefix}_half_hu")
    _accumulate(fp, right, f"{prefix}_half_h", f"{prefix}_half_hu")
    fp.jump(join)
    fp.label(negative)
    _accumulate(fp, left, wave_h, wave_hu)
    fp.jump(join)
    fp.label(positive)
    _accumulate(fp, right, wave_h, wave_hu)
    fp.label(join)


def _riemann_core(
    fp: _FpBuilder,
    prefix: str,
    edge: Tuple[str, str, str, str, str, str],
    *,
    einfeldt: bool,
    left: Tuple[str, str],
    right: Tuple[str, str],
) -> None:
    """Roe averages, wave speeds, f-wave decomposition and wave sorting."""

    h_l, hu_l, b_l, h_r, hu_r, b_r = edge

    def t(name: str) -> str:
        return f"{prefix}_{name}"

    fp.div(t("u_l"), hu_l, h_l)
    fp.div(t("u_r"), hu_r, h_r)
    fp.sqrt(t("sq_l"), h_l)
    fp.sqrt(t("sq_r"), h_r)
    fp.fmav("MUL", t("w_l"), t("u_l"), t("sq_l"))
    fp.fmav("MUL", t("w_r"), t("u_r"), t("sq_r"))
    fp.fmav("ADD", t("w"), t("w_l"), t("w_r"))
    fp.fmav("ADD", t("sq"), t("sq_l"), t("sq_r"))
    fp.div(t("u_roe"), t("w"), t("sq"))
    fp.fmav("ADD", t("h_sum"), h_l, h_r)
    fp.fmav("MUL", t("h_roe"), t("h_sum"), "half")
    fp.fmav("MUL", t("gh_roe"), "gravity", t("h_roe"))
    fp.sqrt(t("c_roe"), t("gh_roe"))
    if einfeldt:
        fp.fmav("SUB", t("roe_1"), t("u_roe"), t("c_roe"))
        fp.fmav("ADD", t("roe_2"), t("u_roe"), t("c_roe"))
        fp.fmav("MUL", t("gh_l"), "gravity", h_l)
        fp.fmav("MUL", t("gh_r"), "gravity", h_r)
        fp.sqrt(t("c_l"), t("gh_l"))
        fp.sqrt(t("c_r"), t("gh_r"))
        fp.fmav("SUB", t("e_1"), t("u_l"), t("c_l"))
        fp.fmav("ADD", t("e_2"), t("u_r"), t("c_r"))
        fp.util("MIN", t("s1"), t("e_1"), t("roe_1"))
        fp.util("MAX", t("s2"), t("e_2"), t("roe_2"))
    else:
        fp.fmav("SUB", t("s1"), t("u_roe"), t("c_roe"))
        fp.fmav("ADD", t("s2"), t("u_roe"), t("c_roe"))
    fp.fmav("SUB", t("df0"), hu_r, hu_l)
    fp.fmav("MUL", t("m_r"), hu_r, t("u_r"))
    fp.fmav("MUL", t("m_l"), hu_l, t("u_l"))
    fp.fmav("SUB", t("dm"), t("m_r"), t("m_l"))
    fp.fmav("SUB", t("dh"), h_r, h_l)
    fp.fmav("SUB", t("db"), b_r, b_l)
    fp.fmav("ADD", t("dhb"), t("dh"), t("db"))
    fp.fmav("MUL", t("source"), t("gh_roe"), t("dhb"))
    fp.fmav("ADD", t("df1"), t("dm"), t("source"))
    fp.fmav("SUB", t("ds"), t("s2"), t("s1"))
    fp.fmav("MUL", t("p1"), t("s2"), t("df0"))
    fp.fmav("SUB", t("n1"), t("p1"), t("df1"))
    fp.div(t("beta1"), t("n1"), t("ds"))
    fp.fmav("MUL", t("p2"), t("s1"), t("df0"))
    fp.fmav("SUB", t("n2"), t("df1"), t("p2"))
    fp.div(t("beta2"), t("n2"), t("ds"))
    fp.fmav("MUL", t("z1"), t("beta1"), t("s1"))
    fp.fmav("MUL", t("z2"), t("beta2"), t("s2"))
    _assign_wave(fp, t("wave1"), (t("beta1"), t("z1"), t("s1")), left, right)
    _assign_wave(fp, t("wave2"), (t("beta2"), t("z2"), t("s2")), left, right)
    fp.util("ABS", t("a1"), t("s1"))
    fp.util("ABS", t("a2"), t("s2"))
    fp.util("MAX", "max_speed", t("a1"), t("a2"))


@dataclass(frozen=True)
class _SweTemplate:
    lines: Tuple[str, ...]
    layout: Tuple[Tuple[str, int], ...]
    image: ProgramImage
    symbols: Tuple[Tuple[str, int], ...]


@lru_cache(maxsize=None)
def _swe_template() -> _SweTemplate:
    """
    The Riemann solver microcode. The dispatch compares min(h_l, h_r) with
    the dry tolerance: two wet cells take the f-wave path, anything else
    the HLLE path, which mirrors the wet cell into a dry one (reflecting
    wall) and drops the updates of the dry side.
    """

    kinds = APP_LAYOUTS[App.SWE]
    fp = _FpBuilder()
    fp.var(*SWE_RESULTS, *SWE_INPUTS, *SWE_CONSTANTS, *_SWE_DISCARD)
    fp.util("MIN", "h_min", "h_l", "h_r")
    fp.branch_unless_above("h_min", "dry_tolerance", "hlle")
    _riemann_core(
        fp,
        "fw",
        ("h_l", "hu_l", "b_l", "h_r", "hu_r", "b_r"),
        einfeldt=False,
        left=_SWE_LEFT,
        right=_SWE_RIGHT,
    )
    fp.jump("end")
    fp.label("hlle")
    fp.branch_unless_above("h_l", "dry_tolerance", "dry_left")
    fp.fmav("MUL", "mirror_hu_r", "hu_l", "minus_one")
    _riemann_core(
        fp,
        "dr",
        ("h_l", "hu_l", "b_l", "h_l", "mirror_hu_r", "b_l"),
        einfeldt=True,
        left=_SWE_LEFT,
        right=_SWE_DISCARD,
    )
    fp.jump("end")
    fp.label("dry_left")
    fp.branch_unless_above("h_r", "dry_tolerance", "end")
    fp.fmav("MUL", "mirror_hu_l", "hu_r", "minus_one")
    _riemann_core(
        fp,
        "dl",
        ("h_r", "mirror_hu_l", "b_r", "h_r", "hu_r", "b_r"),
        einfeldt=True,
        left=_SWE_DISCARD,
        right=_SWE_RIGHT,
    )
    fp.label("end")
    fp.emit("ctrl: NO_JMP")
    lines = _slotbind(kinds) + fp.lines
    result = assemble("\n".join(lines) + "\n", filename=f"<{App.SWE}>")
    logger.debug(
        f"SWE template: {result.image.vliw_count} VLIWs, "
        f"{len(fp.addresses)} variables"
    )
    return _SweTemplate(
        lines=tuple(lines),
        layout=tuple(fp.addresses.items()),
        image=result.image,
        symbols=tuple(result.symbols.items()),
    )


def gen_swe(
    problem: RiemannProblem, *, memory_words: int = DEFAULT_MEMORY_WORDS
) -> GeneratedProgram:
    """
    The Riemann solver for one edge. The program is shared by every edge;
    only the memory segment (inputs and constants) differs. The five result
    words are the left and right net updates and the maximum wave speed.
    """

    template = _swe_template()
    layout = dict(template.layout)
    _check_memory(App.SWE, len(layout), memory_words)
    values = {
        "h_l": problem.h_l,
        "h_r": problem.h_r,
        "hu_l": problem.hu_l,
        "hu_r": problem.hu_r,
        "b_l": problem.b_l,
        "b_r": problem.b_r,
        "gravity": problem.gravity,
        "half": 0.5,
        "dry_tolerance": problem.dry_tolerance,
        "minus_one": -1.0,
        "zero": 0.0,
    }
    memory = [0] * len(layout)
    for name, value in values.items():
        memory[layout[name]] = word_from_f32(value)
    lines = list(template.lines) + _word_lines(memory)
    return GeneratedProgram(
        app=App.SWE,
        source="\n".join(lines) + "\n",
        image=replace(template.image, memory=tuple(memory)),
        kinds=APP_LAYOUTS[App.SWE],
        symbols=dict(template.symbols),
        result_address=layout[SWE_RESULTS[0]],
        result_length=len(SWE_RESULTS),
        variant="fwave" if problem.wet else "hlle",
    )


def _cnn_pass(
    lines: List[str], suffix: str, dual: bool, channels: int, columns: int
) -> None:
    """
    One convolution row: every pooled column gets two convolution columns,
    which go to SUM slot 2 and 3 respectively.
    """

    if dual:
        lines += [
            f"    slot1: NEXT_COL #1 | ctrl: PS_SET_DEST p1, col{suffix}",
            f"col{suffix}: "
            + _statement({0: "CLR", 1: "CLR"}, f"PS_SET_DEST p2, ch{suffix}"),
            f"ch{suffix}: "
            + _statement(
                {0: "MAC", 1: "MAC"},
                f"PS_CNT_INC p2 ; JMP_IF_CNT_LT p2, {channels}",
            ),
            "    "
            + _statement(
                {
                    0: "NEXT_COL #2",
                    1: "NEXT_COL #2",
                    2: "POOL_NEXT s0",
                    3: "POOL_NEXT s1",
                },
                "PS_CNT_RESET p2",
            ),
        ]
    else:
        lines += [
            f"    ctrl: PS_SET_DEST p1, col{suffix}",
            f"col{suffix}: slot0: CLR | ctrl: PS_SET_DEST p2, cha{suffix}",
            f"cha{suffix}: slot0: MAC | ctrl: PS_CNT_INC p2 ; "
            f"JMP_IF_CNT_LT p2, {channels}",
            "    slot0: NEXT_COL #1 | slot2: POOL_NEXT s0 | ctrl: PS_CNT_RESET p2",
            f"    slot0: CLR | ctrl: PS_SET_DEST p2, chb{suffix}",
            f"chb{suffix}: slot0: MAC | ctrl: PS_CNT_INC p2 ; "
            f"JMP_IF_CNT_LT p2, {channels}",
            "    slot0: NEXT_COL #1 | slot3: POOL_NEXT s0 | ctrl: PS_CNT_RESET p2",
        ]
    macs = {0: "NEXT_ROW", 1: "NEXT_ROW"} if dual else {0: "NEXT_ROW"}
    lines += [
        f"    ctrl: PS_CNT_INC p1 ; JMP_IF_CNT_LT p1, {columns}",
        "    " + _statement({**macs, 2: "ROW", 3: "ROW"}, "PS_CNT_RESET p1"),
    ]


def gen_cnn(
    problem: ConvLayerProblem,
    *,
    kinds: Optional[Sequence[KernelKind]] = None,
    memory_words: int = DEFAULT_MEMORY_WORDS,
) -> GeneratedProgram:
    """
    One quantized conv + ReLU + max-pool layer. With two CNN_MAC slots the
    even and odd convolution columns are computed side by side; with one,
    the same MAC walks both. Results are int8 words from memory address 16,
    row-major over the pooled grid.
    """

    layout = tuple(kinds) if kinds is not None else APP_LAYOUTS[App.CNN]
    padded_layout = layout + (KernelKind.NONE,) * (SLOT_COUNT - len(layout))
    if (
        padded_layout[0] != KernelKind.CNN_MAC
        or padded_layout[1] not in (KernelKind.CNN_MAC, KernelKind.NONE)
        or padded_layout[2:4] != (KernelKind.CNN_SUM, KernelKind.CNN_SUM)
    ):
        raise GenerationException(
            "CNN needs CNN_MAC in slot 0 (and optionally 1) and CNN_SUM in "
            "slots 2 and 3",
            app=App.CNN,
            parameter="kinds",
        )
    dual = padded_layout[1] == KernelKind.CNN_MAC
    channels, height, width = problem.channels, problem.height, problem.width
    if width * channels > DEFAULT_LINE_BUFFER_WIDTH:
        raise GenerationException(
            f"{channels} channels of {width} pixels exceed the "
            f"{DEFAULT_LINE_BUFFER_WIDTH}-pixel line buffers",
            app=App.CNN,
            parameter="width",
        )
    pooled_h, pooled_w = problem.pooled_shape
    _loop_count(App.CNN, "channels", channels)
    _loop_count(App.CNN, "height", pooled_h)
    _loop_count(App.CNN, "width", pooled_w)
    _check_memory(App.CNN, CNN_OUTPUT_BASE + pooled_h * pooled_w, memory_words)

    mac_slots = [0, 1] if dual else [0]
    header: List[int] = []
    for _ in mac_slots:
        header += [width, channels]
    for _ in (2, 3):
        header += [word_from_f32(problem.scale), word_from_i32(problem.zero_point)]

    prologue = {slot: "CFG m0, m0" for slot in mac_slots}
    prologue.update({2: "SET_Q m0, m0", 3: "SET_Q m0, m0"})
    loads = {slot: "LD_W" for slot in mac_slots}
    lines = _slotbind(layout) + [
        "    "
        + _statement(prologue, f"AGU_SET a{CNN_OUTPUT_AGU}, {CNN_OUTPUT_BASE}"),
        "    ctrl: PS_SET_DEST p3, ldw",
        "ldw: "
        + _statement(loads, f"PS_CNT_INC p3 ; JMP_IF_CNT_LT p3, {channels}"),
        "    ctrl: PS_CNT_RESET p3",
        "    ctrl: PS_SET_DEST p3, emit",
        "    ctrl: PS_SET_DEST p0, row",
        "row:",
    ]
    _cnn_pass(lines, "_top", dual, channels, pooled_w)
    _cnn_pass(lines, "_bottom", dual, channels, pooled_w)
    lines += [
        "emit: slot3: RD_POOL -> out",
        "    slot2: POOL s3",
        f"    slot2: EMIT -> m{CNN_OUTPUT_AGU} | ctrl: PS_CNT_INC p3 ; "
        f"JMP_IF_CNT_LT p3, {pooled_w}",
        "    slot2: ROW | slot3: ROW | ctrl: PS_CNT_RESET p3",
        f"    ctrl: PS_CNT_INC p0 ; JMP_IF_CNT_LT p0, {pooled_h}",
    ]
    lines += _word_lines(header)

    streams: Dict[Tuple[int, int], List[int]] = {}
    pixels = problem.pixels.astype(np.int64)
    for slot in mac_slots:
        streams[(slot, 0)] = pixel_words(pixels[:, 0, :].ravel().tolist())
        streams[(slot, 1)] = pixel_words(pixels[:, 1, :].ravel().tolist())
        streams[(slot, 2)] = pixel_words(
            [int(v) for row in range(2, height) for v in pixels[:, row, :].ravel()]
        )
        streams[(slot, WEIGHT_CHANNEL)] = pixel_words(
            problem.weights.astype(np.int64).ravel().tolist()
        )
    return _finish(
        App.CNN,
        lines,
        layout,
        streams=streams,
        result_address=CNN_OUTPUT_BASE,
        result_length=pooled_h * pooled_w,
        variant="2-mac" if dual else "1-mac",
    )


def _sha3_blocks(
    lines: List[str], pairs: Sequence[Tuple[int, int]], blocks: int, suffix: str
) -> None:
    """
    Absorb `blocks` blocks on every (SHA_BUFF, SHA_COMP) slot pair in
    lockstep. Each absorb step pops the next word while the previous one
    is absorbed, so a block takes one prefetch plus RATE_WORDS steps.
    """

    pops = {buff: "POP -> out" for buff, _ in pairs}
    absorbs = {comp: f"ABSORB s{buff}" for buff, comp in pairs}
    rounds = {comp: "ROUND" for _, comp in pairs}
    lines += [
        f"    ctrl: PS_SET_DEST p0, block{suffix}",
        f"    ctrl: PS_SET_DEST p1, absorb{suffix}",
        f"    ctrl: PS_SET_DEST p2, round{suffix}",
        f"block{suffix}: " + _statement(pops),
        f"absorb{suffix}: "
        + _statement(
            {**pops, **absorbs}, f"PS_CNT_INC p1 ; JMP_IF_CNT_LT p1, {RATE_WORDS - 1}"
        ),
        "    " + _statement(absorbs, "PS_CNT_RESET p1"),
        f"round{suffix}: "
        + _statement(rounds, f"PS_CNT_INC p2 ; JMP_IF_CNT_LT p2, {KECCAK_ROUNDS}"),
        "    ctrl: PS_CNT_RESET p2",
        f"    ctrl: PS_CNT_INC p0 ; JMP_IF_CNT_LT p0, {blocks}",
        "    ctrl: PS_CNT_RESET p0",
    ]


def _sha3_block_count(message: bytes) -> int:
    return _loop_count(App.SHA3, "length", len(message) // SHA3_256_RATE_BYTES + 1)


def gen_sha3(
    problem: Sha3Problem, *, memory_words: int = DEFAULT_MEMORY_WORDS
) -> GeneratedProgram:
    """
    SHA3-256 of one message on slots 0/1, or of two messages at once with
    the second on slots 2/3. Digests land at memory 0..7 (and 8..15) as
    little-endian words.
    """

    kinds = APP_LAYOUTS[App.SHA3]
    messages = [problem.message]
    if problem.second is not None:
        messages.append(problem.second)
    pairs = [(0, 1), (2, 3)][: len(messages)]
    blocks = [_sha3_block_count(message) for message in messages]
    _check_memory(App.SHA3, SHA3_DIGEST_WORDS * len(messages), memory_words)

    lines = _slotbind(kinds) + [
        "    " + _statement({comp: "INIT" for _, comp in pairs}),
    ]
    if len(pairs) > 1:
        lines.append(f"    ctrl: AGU_SET a1, {SHA3_DIGEST_WORDS}")
    common = min(blocks)
    _sha3_blocks(lines, pairs, common, "")
    if len(pairs) > 1 and blocks[0] != blocks[1]:
        longer = 0 if blocks[0] > blocks[1] else 1
        _sha3_blocks(lines, [pairs[longer]], blocks[longer] - common, "_tail")
    squeeze = {comp: f"SQUEEZE -> m{idx}" for idx, (_, comp) in enumerate(pairs)}
    lines += ["    " + _statement(squeeze)] * SHA3_DIGEST_WORDS

    streams = {
        (buff, 0): message_words(message)
        for (buff, _), message in zip(pairs, messages)
    }
    return _finish(
        App.SHA3,
        lines,
        kinds,
        streams=streams,
        result_address=0,
        result_length=SHA3_DIGEST_WORDS * len(messages),
        variant="dual" if len(messages) > 1 else "single",
    )


def gen_si_program(
    app: str,
    problem: Problem,
    *,
    kinds: Optional[Sequence[KernelKind]] = None,
    memory_words: int = DEFAULT_MEMORY_WORDS,
) -> GeneratedProgram:
    """
    Generate the Special Instruction for one problem instance.

    Args:
        app: one of `App.ALL`.
        problem: the matching problem instance.
        kinds: an alternative fabric layout (CNN only: one or two MACs).
        memory_words: size of the target data memory.

    Raises:
        GenerationException: if the problem does not fit the fabric.
    """

    logger.info(f"generating {app} program")
    if app == App.SIFT and isinstance(problem, SiftProblem):
        program = gen_sift(problem, memory_words=memory_words)
    elif app == App.SWE and isinstance(problem, RiemannProblem):
        program = gen_swe(problem, memory_words=memory_words)
    elif app == App.CNN and isinstance(problem, ConvLayerProblem):
        program = gen_cnn(problem, kinds=kinds, memory_words=memory_words)
    elif app == App.SHA3 and isinstance(problem, Sha3Problem):
        program = gen_sha3(problem, memory_words=memory_words)
    else:
        raise GenerationException(
            f"no {app} generator for {type(problem).__name__}",
            app=app,
            parameter="problem",
        )
    logger.info(
        f"finished generating {app} program: {program.image.vliw_count} VLIWs"
    )
    return program
