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

from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Deque, List, Optional, Sequence, Type

from refab.constants import KernelKind, NoneOp

Streams = Sequence[Deque[int]]


@dataclass(frozen=True)
class KernelResult:
    """
    What a kernel produces for one issued op, made visible when the op
    completes. A None `out` or `ctrl` leaves that register as it was.
    """

    out: Optional[int] = None
    ctrl: Optional[int] = None
    error: bool = False


class Kernel(ABC):
    """
    The uniform slot contract. A kernel executes an op functionally when it
    is issued; the fabric delays the visibility of the result by the op's
    latency. Private state is only reachable through the slot's out/ctrl.
    """

    kind: KernelKind = KernelKind.NONE
    opcodes: Type[IntEnum] = NoneOp

    def __init__(self) -> None:
        self.reset()

    def reset(self) -> None:
        """Return the kernel to its freshly-bound state."""

    def ready(self, op: int, streams: Streams) -> bool:
        """Whether `op` can be accepted this cycle (False asserts stall)."""
        return True

    @abstractmethod
    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        """Run `op` on 32-bit operand words `a` and `b`."""
        ...

    def tick(self, streams: Streams) -> None:
        """Advance internal pipeline state at the end of a cycle."""


class NullKernel(Kernel):
    """An empty slot: only SLOT_NOP is defined."""

    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        return KernelResult()


def new_streams(channels: int) -> List[Deque[int]]:
    return [deque() for _ in range(channels)]
