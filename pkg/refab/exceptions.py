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

from dataclasses import dataclass
from typing import List, Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from refab.assembler import Diagnostic


class RefabException(ValueError):
    """
    Any exception raised by the simulator tool chain proper, as opposed to
    architectural traps, which are ordinary results of a run.
    """

    pass


@dataclass
class EncodingException(RefabException):
    """
    A value could not be encoded into a VLIW because a field is out of range.

    Attributes:
        text: a textual description of the error.
        field: dotted name of the offending field, e.g. "slots[2].src_a.index".
    """

    text: str
    field: str

    def __init__(self, text: str, *, field: str) -> None:
        super().__init__(text)
        self.text = text
        self.field = field


@dataclass
class DecodeException(RefabException):
    """
    A 24-byte word does not decode to a valid VLIW.

    Attributes:
        text: a textual description of the error.
        bit_offset: the first bit of the offending field within the word.
        index: the VLIW index inside a program image, when known.
    """

    text: str
    bit_offset: int
    index: Optional[int]

    def __init__(
        self, text: str, *, bit_offset: int, index: Optional[int] = None
    ) -> None:
        super().__init__(text)
        self.text = text
        self.bit_offset = bit_offset
        self.index = index

    def at_index(self, index: int) -> DecodeException:
        return DecodeException(
            f"VLIW {index}: {self.text}", bit_offset=self.bit_offset, index=index
        )


class ImageFormatException(RefabException):
    """A program image file is truncated or carries a wrong magic/version."""

    pass


class AssemblyException(RefabException):
    """
    Assembly failed with one or more error diagnostics.

    Attributes:
        text: a textual description of the error (the first diagnostic).
        diagnostics: all diagnostics produced, warnings included.
    """

    text: str
    diagnostics: List[Diagnostic]

    def __init__(self, text: str, *, diagnostics: List[Diagnostic]) -> None:
        super().__init__(text)
        self.text = text
        self.diagnostics = diagnostics


class SetupException(RefabException):
    """A program cannot be loaded on a fabric (e.g. slot bindings differ)."""

    pass


class UsageException(RefabException):
    """An API was used out of sequence, such as stepping a halted machine."""

    pass


@dataclass
class SimulationFault(RefabException):
    """
    Host-model misuse detected while simulating: out-of-range memory access,
    an opcode undefined for the bound kernel, or a line buffer overrun.
    Unlike traps, faults are not architectural events.

    Attributes:
        text: a textual description of the error.
        address: the memory address involved, if any.
        pc: the VLIW index being executed, if known.
        slot: the slot involved, if any.
    """

    text: str
    address: Optional[int]
    pc: Optional[int]
    slot: Optional[int]

    def __init__(
        self,
        text: str,
        *,
        address: Optional[int] = None,
        pc: Optional[int] = None,
        slot: Optional[int] = None,
    ) -> None:
        super().__init__(text)
        self.text = text
        self.address = address
        self.pc = pc
        self.slot = slot

    def with_pc(self, pc: int) -> SimulationFault:
        if self.pc is not None:
            return self
        return SimulationFault(
            f"{self.text} (pc={pc})", address=self.address, pc=pc, slot=self.slot
        )


@dataclass
class ResourceLimitException(RefabException):
    """
    A run reached its `max_cycles` limit without halting or trapping.

    Attributes:
        text: a textual description of the error.
        cycles: the cycle count reached.
    """

    text: str
    cycles: int

    def __init__(self, text: str, *, cycles: int) -> None:
        super().__init__(text)
        self.text = text
        self.cycles = cycles


@dataclass
class GenerationException(RefabException):
    """
    A benchmark program cannot be generated for the requested parameters.

    Attributes:
        text: a textual description of the error.
        app: the benchmark application.
        parameter: the name of the offending parameter.
    """

    text: str
    app: str
    parameter: str

    def __init__(self, text: str, *, app: str, parameter: str) -> None:
        super().__init__(text)
        self.text = text
        self.app = app
        self.parameter = parameter


class OracleDomainException(RefabException):
    """A reference oracle was asked to solve outside its domain."""

    pass


class ConfigurationException(RefabException):
    """A fabric or controller configuration is malformed."""

    pass
