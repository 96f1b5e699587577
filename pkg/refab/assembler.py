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
Two-pass assembler for the fabric microcode language, and the matching
disassembler.

One VLIW statement per line, clauses separated by `|`:

    loop:  slot0: SUBSQ_ACC m0, m0 -> out | ctrl: PS_CNT_INC p0 ; JMP_IF_CNT_LT p0, 5

Slot clauses read `slotN: OP [srcA[, srcB]] [-> out|mK]` with operands `mK`
(memory through AGU K), `sK` (slot K output), `#V` (immediate 0..255) and
`_` (none). A `ctrl:` clause holds an aux op and/or a flow op separated by
`;`. A `#` that opens a line, or is not followed by a digit, starts a comment;
elsewhere `#` followed by a digit is an immediate, so a trailing `#1 retry`
is an operand error while `# 1 retry` is a comment. Directives:
`.slotbind N KIND`, `.entry LABEL`, `.word V[, V ...]`.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from refab.constants import (
    ACC_OPCODES,
    AuxOpcode,
    CNT_JUMP_OPCODES,
    DestKind,
    FlowOpcode,
    JUMP_OPCODES,
    KernelKind,
    OperandKind,
    PS_AUX_OPCODES,
    SLOT_OPCODES,
    Severity,
)
from refab.core.defaults import (
    AGU_COUNT,
    MAX_PROGRAM_VLIWS,
    PARAM_SET_COUNT,
    SLOT_COUNT,
    WORD_MASK,
)
from refab.exceptions import (
    AssemblyException,
    EncodingException,
    ImageFormatException,
)
from refab.isa import (
    AuxOp,
    Dest,
    FlowOp,
    Operand,
    ProgramImage,
    SlotInstr,
    Vliw,
    validate_program,
)


logger = logging.getLogger(__name__)


_LABEL_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:(.*)$")
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_INT_RE = re.compile(r"^-?(0[xX][0-9a-fA-F]+|[0-9]+)$")
_COMMENT_RE = re.compile(r"^\s*#|#(?![0-9])")
_SLOT_CLAUSE_RE = re.compile(r"^slot([0-9]+)\s*:(.*)$")
_CTRL_CLAUSE_RE = re.compile(r"^ctrl\s*:(.*)$")
_RESERVED = {"ctrl", "nop"} | {f"slot{idx}" for idx in range(10)}

_FIELD_LIMITS = {"operand": 1 << 12, "trap": 1 << 3, "target": 1 << 3}

WORDS_PER_LINE = 8


@dataclass(frozen=True)
class Diagnostic:
    """
    Attributes:
        severity: `Severity.ERROR` or `Severity.WARNING`.
        line: 1-based source line the diagnostic points at.
        message: a textual description.
    """

    severity: str
    line: int
    message: str

    def format(self, filename: str = "<source>") -> str:
        return f"{filename}:{self.line}: {self.severity}: {self.message}"


@dataclass
class AssemblyResult:
    """
    Attributes:
        image: the assembled program.
        warnings: non-fatal diagnostics.
        symbols: label name to VLIW index.
    """

    image: ProgramImage
    warnings: List[Diagnostic] = field(default_factory=list)
    symbols: Dict[str, int] = field(default_factory=dict)


class _LineError(Exception):
    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


def _strip_comment(line: str) -> str:
    match = _COMMENT_RE.search(line)
    return (line[: match.start()] if match else line).strip()


def _split_args(text: str) -> List[str]:
    """Split on commas outside brackets."""
    args: List[str] = []
    depth = 0
    current = ""
    for char in text:
        if char == "[":
            depth += 1
        elif char == "]":
            depth -= 1
        if char == "," and depth == 0:
            args.append(current.strip())
            current = ""
        else:
            current += char
    if current.strip() or args:
        args.append(current.strip())
    if any(arg == "" for arg in args):
        raise _LineError(f"empty argument in '{text.strip()}'")
    return args


def parse_int(text: str) -> int:
    if not _INT_RE.match(text):
        raise _LineError(f"'{text}' is not an integer literal")
    negative = text.startswith("-")
    digits = text[1:] if negative else text
    value = int(digits, 16) if digits.lower().startswith("0x") else int(digits)
    return -value if negative else value


def _ranged(text: str, limit: int, what: str) -> int:
    value = parse_int(text)
    if not 0 <= value < limit:
        raise _LineError(f"{what} {value} outside 0..{limit - 1}")
    return value


def _register(text: str, prefix: str, limit: int, what: str) -> int:
    if len(text) < 2 or text[0] != prefix or not text[1:].isdigit():
        raise _LineError(f"expected {what} '{prefix}K', got '{text}'")
    value = int(text[1:])
    if value >= limit:
        raise _LineError(f"{what} {prefix}{value} does not exist")
    return value


def _parse_mask(text: str) -> int:
    if not (text.startswith("[") and text.endswith("]")):
        raise _LineError(f"expected a slot mask like [0,2], got '{text}'")
    inner = text[1:-1].strip()
    mask = 0
    for item in _split_args(inner) if inner else []:
        slot = _ranged(item, SLOT_COUNT, "mask slot")
        mask |= 1 << slot
    return mask


class _Assembler:
    def __init__(self, source: str, filename: str) -> None:
        self.source = source
        self.filename = filename
        self.diagnostics: List[Diagnostic] = []
        self.labels: Dict[str, int] = {}
        self.label_lines: Dict[str, int] = {}
        self.bindings: List[KernelKind] = [KernelKind.NONE] * SLOT_COUNT
        self.bound: Dict[int, int] = {}
        self.statements: List[Tuple[int, str]] = []
        self.entry: Optional[Tuple[int, str]] = None
        self.memory: List[int] = []

    def error(self, line: int, message: str) -> None:
        self.diagnostics.append(Diagnostic(Severity.ERROR, line, message))

    def warning(self, line: int, message: str) -> None:
        self.diagnostics.append(Diagnostic(Severity.WARNING, line, message))

    def first_pass(self) -> None:
        for line_no, raw in enumerate(self.source.splitlines(), start=1):
            text = _strip_comment(raw)
            while True:
                match = _LABEL_RE.match(text)
                if not match or match.group(1) in _RESERVED:
                    break
                self.define_label(match.group(1), line_no)
                text = match.group(2).strip()
            if not text:
                continue
            try:
                if text.startswith("."):
                    self.directive(text, line_no)
                else:
                    self.statements.append((line_no, text))
            except _LineError as exc:
                self.error(line_no, exc.message)

    def define_label(self, name: str, line_no: int) -> None:
        index = len(self.statements)
        if name in self.labels:
            self.error(
                line_no,
                f"duplicate label '{name}' (first defined on line "
                f"{self.label_lines[name]})",
            )
            return
        if index >= MAX_PROGRAM_VLIWS:
            self.error(
                line_no, f"label '{name}' at index {index} exceeds {MAX_PROGRAM_VLIWS}"
            )
        self.labels[name] = index
        self.label_lines[name] = line_no

    def directive(self, text: str, line_no: int) -> None:
        name, _, rest = text.partition(" ")
        rest = rest.strip()
        if name == ".slotbind":
            parts = rest.split()
            if len(parts) != 2:
                raise _LineError(".slotbind takes a slot number and a kernel kind")
            slot = _ranged(parts[0], SLOT_COUNT, "slot")
            try:
                kind = KernelKind[parts[1].upper()]
            except KeyError:
                raise _LineError(f"unknown kernel kind '{parts[1]}'")
            if slot in self.bound:
                raise _LineError(
                    f"slot {slot} already bound on line {self.bound[slot]}"
                )
            self.bound[slot] = line_no
            self.bindings[slot] = kind
        elif name == ".entry":
            if not rest:
                raise _LineError(".entry takes a label or an index")
            self.entry = (line_no, rest)
        elif name == ".word":
            for item in _split_args(rest):
                value = parse_int(item)
                if not -(1 << 31) <= value <= WORD_MASK:
                    raise _LineError(f"word {value} does not fit in 32 bits")
                self.memory.append(value & WORD_MASK)
        else:
            raise _LineError(f"unknown directive '{name}'")

    def resolve(self, text: str) -> int:
        if _IDENT_RE.match(text):
            if text not in self.labels:
                raise _LineError(f"undefined label '{text}'")
            return self.labels[text]
        return _ranged(text, MAX_PROGRAM_VLIWS, "destination")

    def statement(self, text: str) -> Vliw:
        if text.lower() == "nop":
            return Vliw()
        slots = [SlotInstr()] * SLOT_COUNT
        seen_slots = set()
        flow, aux = FlowOp(), AuxOp()
        seen_ctrl = False
        for clause in (part.strip() for part in text.split("|")):
            slot_match = _SLOT_CLAUSE_RE.match(clause)
            ctrl_match = _CTRL_CLAUSE_RE.match(clause)
            if slot_match:
                idx = int(slot_match.group(1))
                if idx >= SLOT_COUNT:
                    raise _LineError(f"slot{idx} does not exist")
                if idx in seen_slots:
                    raise _LineError(f"slot{idx} appears twice in one statement")
                seen_slots.add(idx)
                slots[idx] = self.slot_clause(idx, slot_match.group(2).strip())
            elif ctrl_match:
                if seen_ctrl:
                    raise _LineError("more than one ctrl clause in one statement")
                seen_ctrl = True
                flow, aux = self.ctrl_clause(ctrl_match.group(1).strip())
            else:
                raise _LineError(f"cannot parse clause '{clause}'")
        return Vliw(slots=tuple(slots), ctrl_flow=flow, ctrl_aux=aux)

    def slot_clause(self, idx: int, text: str) -> SlotInstr:
        body, arrow, dst_text = text.partition("->")
        parts = body.split(None, 1)
        if not parts:
            raise _LineError(f"slot{idx}: missing opcode")
        mnemonic = parts[0].upper()
        kind = self.bindings[idx]
        table = SLOT_OPCODES[kind]
        try:
            op = int(table[mnemonic])
        except KeyError:
            known = any(mnemonic in t.__members__ for t in SLOT_OPCODES.values())
            if known:
                raise _LineError(
                    f"slot{idx}: opcode {mnemonic} undefined for {kind.name}"
                )
            raise _LineError(f"slot{idx}: unknown mnemonic '{parts[0]}'")
        args = _split_args(parts[1]) if len(parts) > 1 else []
        if len(args) > 2:
            raise _LineError(f"slot{idx}: at most two source operands")
        sources = [self.operand(arg) for arg in args]
        sources += [(Operand(), None)] * (2 - len(sources))
        nibbles = {nibble for _, nibble in sources if nibble is not None}
        if len(nibbles) > 1:
            raise _LineError(f"slot{idx}: immediates must share their high nibble")
        dst = Dest()
        if arrow:
            dst = self.destination(dst_text.strip())
        return SlotInstr(
            op=op,
            src_a=sources[0][0],
            src_b=sources[1][0],
            dst=dst,
            imm_nibble=nibbles.pop() if nibbles else 0,
        )

    def operand(self, text: str) -> Tuple[Operand, Optional[int]]:
        if text == "_":
            return Operand(), None
        if text.startswith("#"):
            value = _ranged(text[1:], 256, "immediate")
            return Operand(OperandKind.IMM, value & 0xF), value >> 4
        if text.startswith("m"):
            index = _register(text, "m", AGU_COUNT, "AGU")
            return Operand(OperandKind.MEM_AGU, index), None
        if text.startswith("s"):
            index = _register(text, "s", SLOT_COUNT, "slot")
            return Operand(OperandKind.SLOT_OUT, index), None
        raise _LineError(f"cannot parse operand '{text}'")

    def destination(self, text: str) -> Dest:
        if text == "_":
            return Dest()
        if text == "out":
            return Dest(DestKind.OUT_ONLY)
        if text.startswith("m"):
            return Dest(DestKind.MEM_AGU, _register(text, "m", AGU_COUNT, "AGU"))
        raise _LineError(f"cannot parse destination '{text}'")

    def ctrl_clause(self, text: str) -> Tuple[FlowOp, AuxOp]:
        flow: Optional[FlowOp] = None
        aux: Optional[AuxOp] = None
        for part in (p.strip() for p in text.split(";")):
            if not part:
                continue
            mnemonic, _, rest = part.partition(" ")
            mnemonic = mnemonic.upper()
            positional, extras = self.arguments(rest)
            if mnemonic in FlowOpcode.__members__:
                if flow is not None:
                    raise _LineError("more than one flow op in a ctrl clause")
                flow = self.flow_op(FlowOpcode[mnemonic], positional, extras)
            elif mnemonic in AuxOpcode.__members__:
                if aux is not None:
                    raise _LineError("more than one aux op in a ctrl clause")
                aux = self.aux_op(AuxOpcode[mnemonic], positional, extras)
            else:
                raise _LineError(f"unknown mnemonic '{mnemonic}'")
        return flow or FlowOp(), aux or AuxOp()

    @staticmethod
    def arguments(text: str) -> Tuple[List[str], Dict[str, str]]:
        positional: List[str] = []
        extras: Dict[str, str] = {}
        for arg in _split_args(text.strip()) if text.strip() else []:
            key, eq, value = arg.partition("=")
            if eq:
                key = key.strip().lower()
                if key in extras:
                    raise _LineError(f"field '{key}' given twice")
                extras[key] = value.strip()
            elif extras:
                raise _LineError("positional argument after key=value")
            else:
                positional.append(arg)
        return positional, extras

    def flow_op(
        self, opcode: FlowOpcode, positional: List[str], extras: Dict[str, str]
    ) -> FlowOp:
        if opcode == FlowOpcode.NO_JMP:
            names: List[str] = []
        elif opcode == FlowOpcode.ALW_JMP:
            names = ["ps"]
        elif opcode in CNT_JUMP_OPCODES:
            names = ["ps", "operand"]
        elif opcode == FlowOpcode.TRAP_ALW:
            names = ["trap"]
        elif opcode in JUMP_OPCODES:
            names = ["ps", "operand", "mask"]
        else:
            names = ["operand", "mask", "trap"]
        if len(positional) != len(names):
            raise _LineError(
                f"{opcode.name} takes {len(names)} argument(s)"
                f"{' (' + ', '.join(names) + ')' if names else ''}"
            )
        values = dict(zip(names, positional))
        for key, value in extras.items():
            if key not in ("ps", "operand", "mask", "trap"):
                raise _LineError(f"{opcode.name} has no field '{key}'")
            if key in values:
                raise _LineError(f"{opcode.name} already sets '{key}'")
            values[key] = value
        param_set = 0
        if "ps" in values:
            param_set = _register(values["ps"], "p", PARAM_SET_COUNT, "parameter set")
        operand = mask = trap = 0
        if "operand" in values:
            operand = _ranged(values["operand"], _FIELD_LIMITS["operand"], "operand")
        if "mask" in values:
            mask = _parse_mask(values["mask"])
        if "trap" in values:
            trap = _ranged(values["trap"], _FIELD_LIMITS["trap"], "trap value")
        if opcode in ACC_OPCODES and mask == 0:
            raise _LineError(f"{opcode.name} needs a nonempty slot mask")
        return FlowOp(
            opcode=opcode,
            param_set_id=param_set,
            operand=operand,
            acc_mask=mask,
            trap_value=trap,
        )

    def aux_op(
        self, opcode: AuxOpcode, positional: List[str], extras: Dict[str, str]
    ) -> AuxOp:
        if opcode == AuxOpcode.AUX_NOP:
            names: List[str] = []
        elif opcode in (AuxOpcode.PS_CNT_INC, AuxOpcode.PS_CNT_RESET):
            names = ["target"]
        else:
            names = ["target", "operand"]
        if len(positional) != len(names):
            raise _LineError(f"{opcode.name} takes {len(names)} argument(s)")
        values = dict(zip(names, positional))
        for key, value in extras.items():
            if key not in ("target", "operand"):
                raise _LineError(f"{opcode.name} has no field '{key}'")
            if key in values:
                raise _LineError(f"{opcode.name} already sets '{key}'")
            values[key] = value
        target = 0
        if "target" in values:
            text = values["target"]
            if opcode in PS_AUX_OPCODES:
                target = _register(text, "p", PARAM_SET_COUNT, "parameter set")
            elif opcode == AuxOpcode.AUX_NOP:
                target = _ranged(text, _FIELD_LIMITS["target"], "target")
            else:
                target = _register(text, "a", AGU_COUNT, "AGU")
        operand = 0
        if "operand" in values:
            if opcode == AuxOpcode.PS_SET_DEST:
                operand = self.resolve(values["operand"])
            else:
                operand = _ranged(
                    values["operand"], _FIELD_LIMITS["operand"], "operand"
                )
        return AuxOp(opcode=opcode, target_id=target, operand=operand)

    def second_pass(self) -> List[Vliw]:
        vliws: List[Vliw] = []
        for line_no, text in self.statements:
            try:
                vliws.append(self.statement(text))
            except _LineError as exc:
                self.error(line_no, exc.message)
                vliws.append(Vliw())
        return vliws

    def check_destinations(self, vliws: List[Vliw]) -> None:
        initialized = {
            vliw.ctrl_aux.target_id
            for vliw in vliws
            if vliw.ctrl_aux.opcode == AuxOpcode.PS_SET_DEST
        }
        warned = set()
        for (line_no, _), vliw in zip(self.statements, vliws):
            flow = vliw.ctrl_flow
            if flow.opcode in JUMP_OPCODES and flow.param_set_id not in initialized:
                if flow.param_set_id not in warned:
                    warned.add(flow.param_set_id)
                    self.warning(
                        line_no,
                        f"parameter set {flow.param_set_id} destination "
                        "never initialized",
                    )

    def entry_pc(self) -> int:
        if self.entry is None:
            return 0
        line_no, text = self.entry
        try:
            return self.resolve(text)
        except _LineError as exc:
            self.error(line_no, exc.message)
            return 0

    def run(self) -> AssemblyResult:
        self.first_pass()
        if len(self.statements) > MAX_PROGRAM_VLIWS:
            self.error(
                self.statements[MAX_PROGRAM_VLIWS][0],
                f"more than {MAX_PROGRAM_VLIWS} statements",
            )
        vliws = self.second_pass()
        entry = self.entry_pc()
        self.check_destinations(vliws)
        last_line = max(1, len(self.source.splitlines()))
        image: Optional[ProgramImage] = None
        if not self.errors():
            try:
                image = ProgramImage.from_vliws(
                    vliws,
                    slot_bindings=tuple(self.bindings),
                    entry_pc=entry,
                    memory=self.memory,
                )
            except EncodingException as exc:
                self.error(last_line, exc.text)
        if image is not None:
            for diagnostic in validate_program(image):
                line_no = last_line
                index = diagnostic.index
                if index is not None and index < len(self.statements):
                    line_no = self.statements[index][0]
                elif self.entry is not None:
                    line_no = self.entry[0]
                self.error(line_no, diagnostic.message)
        errors = self.errors()
        if errors or image is None:
            raise AssemblyException(
                errors[0].format(self.filename) if errors else "assembly failed",
                diagnostics=sorted(self.diagnostics, key=lambda d: d.line),
            )
        return AssemblyResult(
            image=image,
            warnings=[d for d in self.diagnostics if d.severity == Severity.WARNING],
            symbols=dict(self.labels),
        )

    def errors(self) -> List[Diagnostic]:
        return sorted(
            (d for d in self.diagnostics if d.severity == Severity.ERROR),
            key=lambda d: d.line,
        )


def assemble(source: str, filename: str = "<source>") -> AssemblyResult:
    """
    Assemble microcode text into a program image.

    Args:
        source: the program text (LF or CRLF line endings).
        filename: the name used in diagnostics.

    Returns:
        an AssemblyResult with the image, the warnings and the label table.

    Raises:
        AssemblyException: carrying every diagnostic, if any error was found.
    """

    logger.info(f"assembling {filename}")
    result = _Assembler(source, filename).run()
    logger.info(
        f"finished assembling {filename}: {result.image.vliw_count} VLIWs, "
        f"{len(result.warnings)} warning(s)"
    )
    return result


def _format_operand(instr: SlotInstr, operand: Operand) -> str:
    if operand.kind == OperandKind.MEM_AGU:
        return f"m{operand.index}"
    if operand.kind == OperandKind.SLOT_OUT:
        return f"s{operand.index}"
    if operand.kind == OperandKind.IMM:
        return f"#{instr.immediate(operand)}"
    return "_"


def _format_slot(idx: int, kind: KernelKind, instr: SlotInstr) -> Optional[str]:
    if instr == SlotInstr():
        return None
    text = f"slot{idx}: {SLOT_OPCODES[kind](instr.op).name}"
    if instr.src_b.kind != OperandKind.NONE:
        src_a = _format_operand(instr, instr.src_a)
        text += f" {src_a}, {_format_operand(instr, instr.src_b)}"
    elif instr.src_a.kind != OperandKind.NONE:
        text += f" {_format_operand(instr, instr.src_a)}"
    if instr.dst.kind == DestKind.OUT_ONLY:
        text += " -> out"
    elif instr.dst.kind == DestKind.MEM_AGU:
        text += f" -> m{instr.dst.index}"
    return text


def _format_mask(mask: int) -> str:
    return "[" + ",".join(str(i) for i in range(SLOT_COUNT) if mask >> i & 1) + "]"


def _format_flow(flow: FlowOp) -> Optional[str]:
    opcode = flow.opcode
    fields = {
        "ps": f"p{flow.param_set_id}" if flow.param_set_id else None,
        "operand": str(flow.operand) if flow.operand else None,
        "mask": _format_mask(flow.acc_mask) if flow.acc_mask else None,
        "trap": str(flow.trap_value) if flow.trap_value else None,
    }
    full = {
        "ps": f"p{flow.param_set_id}",
        "operand": str(flow.operand),
        "mask": _format_mask(flow.acc_mask),
        "trap": str(flow.trap_value),
    }
    if opcode == FlowOpcode.NO_JMP:
        names: List[str] = []
    elif opcode == FlowOpcode.ALW_JMP:
        names = ["ps"]
    elif opcode in CNT_JUMP_OPCODES:
        names = ["ps", "operand"]
    elif opcode == FlowOpcode.TRAP_ALW:
        names = ["trap"]
    elif opcode in JUMP_OPCODES:
        names = ["ps", "operand", "mask"]
    else:
        names = ["operand", "mask", "trap"]
    args = [full[name] for name in names]
    args += [
        f"{k}={v}" for k, v in fields.items() if k not in names and v is not None
    ]
    if opcode == FlowOpcode.NO_JMP and not args:
        return None
    return opcode.name + (" " + ", ".join(args) if args else "")


def _format_aux(aux: AuxOp) -> Optional[str]:
    opcode = aux.opcode
    if opcode == AuxOpcode.AUX_NOP:
        extras = []
        if aux.target_id:
            extras.append(f"target={aux.target_id}")
        if aux.operand:
            extras.append(f"operand={aux.operand}")
        return "AUX_NOP " + ", ".join(extras) if extras else None
    prefix = "p" if opcode in PS_AUX_OPCODES else "a"
    args = [f"{prefix}{aux.target_id}"]
    if opcode == AuxOpcode.PS_SET_DEST:
        args.append(f"L{aux.operand}")
    elif opcode in (AuxOpcode.PS_CNT_INC, AuxOpcode.PS_CNT_RESET):
        if aux.operand:
            args.append(f"operand={aux.operand}")
    else:
        args.append(str(aux.operand))
    return f"{opcode.name} " + ", ".join(args)


def disassemble(image: ProgramImage) -> str:
    """
    Render an image as canonical source text; assembling the text yields a
    bit-identical image.

    Raises:
        DecodeException: if a word does not decode, naming its VLIW index.
        ImageFormatException: if the image does not validate.
    """

    vliws = image.vliws()
    diagnostics = validate_program(image)
    if diagnostics:
        raise ImageFormatException(f"cannot disassemble: {diagnostics[0]}")
    logger.debug(f"disassembling {image.vliw_count} VLIWs")
    targets = {
        vliw.ctrl_aux.operand
        for vliw in vliws
        if vliw.ctrl_aux.opcode == AuxOpcode.PS_SET_DEST
    }
    targets.add(image.entry_pc)
    lines = [
        f".slotbind {idx} {kind.name}" for idx, kind in enumerate(image.slot_bindings)
    ]
    lines.append(f".entry L{image.entry_pc}")
    for index, vliw in enumerate(vliws):
        if index in targets:
            lines.append(f"L{index}:")
        clauses = [
            text
            for idx, instr in enumerate(vliw.slots)
            for text in [_format_slot(idx, image.slot_bindings[idx], instr)]
            if text is not None
        ]
        ctrl = [
            text
            for text in (_format_aux(vliw.ctrl_aux), _format_flow(vliw.ctrl_flow))
            if text
        ]
        if ctrl:
            clauses.append("ctrl: " + " ; ".join(ctrl))
        if not clauses:
            clauses.append("ctrl: NO_JMP")
        lines.append("    " + " | ".join(clauses))
    for start in range(0, len(image.memory), WORDS_PER_LINE):
        chunk = image.memory[start : start + WORDS_PER_LINE]
        lines.append(".word " + ", ".join(f"0x{word:08x}" for word in chunk))
    return "\n".join(lines) + "\n"

