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
SHA-3 on the fabric: a streaming block buffer (SHA_BUFF) feeding a Keccak
round datapath (SHA_COMP). The round is split the way the datapath is:
theta, then rho through the shift-register buffer fused with pi, then the
nonlinear chi step ("gamma") into the gamma memory, and iota into the
result memory.

Lanes are 64-bit integers; lane (x, y) lives at index x + 5 * y.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, List, Sequence, Tuple

from refab.constants import KernelKind, ShaBuffOp, ShaCompOp
from refab.core.defaults import (
    KECCAK_ROUNDS,
    SHA3_256_DIGEST_BYTES,
    SHA3_256_RATE_BYTES,
)
from refab.core.kernel import Kernel, KernelResult, Streams
from refab.exceptions import SimulationFault

if TYPE_CHECKING:
    from refab.fabric import Fabric

logger = logging.getLogger(__name__)

LANE_MASK = (1 << 64) - 1
LANES = 25
RATE_WORDS = SHA3_256_RATE_BYTES // 4
STATE_WORDS = 2 * LANES
RHO_GROUP = 4

KeccakState = Tuple[int, ...]

ZERO_STATE: KeccakState = (0,) * LANES


def _rc_bit(t: int) -> int:
    if t % 255 == 0:
        return 1
    register = 1 << 7
    for _ in range(1, t % 255 + 1):
        register &= 0xFF
        register ^= (register & 1) * 0b100011100
        register >>= 1
    return register >> 7


def _round_constant(round_index: int) -> int:
    constant = 0
    for j in range(7):
        constant |= _rc_bit(j + 7 * round_index) << ((1 << j) - 1)
    return constant


def _rho_offsets() -> Tuple[int, ...]:
    offsets = [0] * LANES
    x, y = 1, 0
    for t in range(24):
        offsets[x + 5 * y] = ((t + 1) * (t + 2) // 2) % 64
        x, y = y, (2 * x + 3 * y) % 5
    return tuple(offsets)


ROUND_CONSTANTS: Tuple[int, ...] = tuple(
    _round_constant(r) for r in range(KECCAK_ROUNDS)
)
RHO_OFFSETS: Tuple[int, ...] = _rho_offsets()


def rotl64(value: int, amount: int) -> int:
    amount %= 64
    return ((value << amount) | (value >> (64 - amount))) & LANE_MASK


def rotr64(value: int, amount: int) -> int:
    return rotl64(value, 64 - amount % 64)


class RhoBuffer:
    """
    Splitter, seven shift registers and combiner. The first register passes
    a lane through unchanged, the other six rotate by 1, 2, 4, 8, 16 and 32
    bits; the selector routes a lane through the registers whose amounts
    sum to its rho offset.
    """

    REGISTERS: Tuple[int, ...] = (0, 1, 2, 4, 8, 16, 32)

    def select(self, offset: int) -> List[int]:
        """Register indices a lane with this offset passes through."""
        if offset == 0:
            return [0]
        return [
            idx
            for idx, amount in enumerate(self.REGISTERS)
            if amount and offset & amount
        ]

    def apply(self, lanes: Sequence[int], indices: Sequence[int]) -> Tuple[int, ...]:
        if len(lanes) != len(indices) or len(lanes) > RHO_GROUP:
            raise ValueError(
                f"the rho buffer takes up to {RHO_GROUP} lanes with their indices"
            )
        combined = []
        for lane, index in zip(lanes, indices):
            if not 0 <= index < LANES:
                raise ValueError(f"lane index {index} out of range")
            value = lane & LANE_MASK
            for register in self.select(RHO_OFFSETS[index]):
                value = rotl64(value, self.REGISTERS[register])
            combined.append(value)
        return tuple(combined)


_RHO_BUFFER = RhoBuffer()


def rho_buffer_apply(lanes: Sequence[int], indices: Sequence[int]) -> Tuple[int, ...]:
    return _RHO_BUFFER.apply(lanes, indices)


def theta(st: KeccakState) -> KeccakState:
    parity = [
        st[x] ^ st[x + 5] ^ st[x + 10] ^ st[x + 15] ^ st[x + 20] for x in range(5)
    ]
    delta = [parity[(x - 1) % 5] ^ rotl64(parity[(x + 1) % 5], 1) for x in range(5)]
    return tuple(st[i] ^ delta[i % 5] for i in range(LANES))


def rho_pi(st: KeccakState) -> KeccakState:
    """Rotate every lane in groups of four through the rho buffer, then permute."""
    rotated: List[int] = []
    for start in range(0, LANES, RHO_GROUP):
        indices = list(range(start, min(start + RHO_GROUP, LANES)))
        rotated.extend(rho_buffer_apply([st[i] for i in indices], indices))
    moved = [0] * LANES
    for x in range(5):
        for y in range(5):
            moved[y + 5 * ((2 * x + 3 * y) % 5)] = rotated[x + 5 * y]
    return tuple(moved)


def chi(st: KeccakState) -> KeccakState:
    return tuple(
        st[x + 5 * y]
        ^ ((~st[(x + 1) % 5 + 5 * y] & LANE_MASK) & st[(x + 2) % 5 + 5 * y])
        for y in range(5)
        for x in range(5)
    )


def iota(st: KeccakState, round_index: int) -> KeccakState:
    return (st[0] ^ ROUND_CONSTANTS[round_index],) + tuple(st[1:])


def keccak_round(st: KeccakState, round_index: int) -> KeccakState:
    if not 0 <= round_index < KECCAK_ROUNDS:
        raise ValueError(f"round index {round_index} outside 0..{KECCAK_ROUNDS - 1}")
    return iota(chi(rho_pi(theta(st))), round_index)


def keccak_f1600(st: KeccakState) -> KeccakState:
    for round_index in range(KECCAK_ROUNDS):
        st = keccak_round(st, round_index)
    return st


def state_to_bytes(st: KeccakState) -> bytes:
    return b"".join(lane.to_bytes(8, "little") for lane in st)


def pad10x1(msg: bytes, rate_bytes: int = SHA3_256_RATE_BYTES) -> List[bytes]:
    """
    SHA-3 domain separation (01) followed by pad10*1. A message one byte
    short of a block gets the single padding byte 0x86.
    """

    padding = bytearray(rate_bytes - len(msg) % rate_bytes)
    padding[0] ^= 0x06
    padding[-1] ^= 0x80
    padded = bytes(msg) + bytes(padding)
    return [padded[i : i + rate_bytes] for i in range(0, len(padded), rate_bytes)]


def sha3_256(msg: bytes) -> bytes:
    st = ZERO_STATE
    lanes_per_block = SHA3_256_RATE_BYTES // 8
    for block in pad10x1(msg):
        absorbed = list(st)
        for i in range(lanes_per_block):
            absorbed[i] ^= int.from_bytes(block[8 * i : 8 * i + 8], "little")
        st = keccak_f1600(tuple(absorbed))
    return state_to_bytes(st)[:SHA3_256_DIGEST_BYTES]


def message_words(msg: bytes) -> List[int]:
    """The padded message as little-endian 32-bit words, block after block."""
    padded = b"".join(pad10x1(msg))
    return [
        int.from_bytes(padded[i : i + 4], "little") for i in range(0, len(padded), 4)
    ]


def digest_from_words(words: Iterable[int]) -> bytes:
    return b"".join((word & 0xFFFFFFFF).to_bytes(4, "little") for word in words)


def sha_buff_stream(fabric: Fabric, slot: int, words: Sequence[int]) -> None:
    """Queue message words on the input FIFO of a SHA_BUFF slot."""
    kinds = fabric.kinds
    if not 0 <= slot < len(kinds) or kinds[slot] != KernelKind.SHA_BUFF:
        raise SimulationFault(f"slot {slot} is not a SHA_BUFF", slot=slot)
    fabric.stream_push(slot, 0, words)
    logger.debug(f"queued {len(words)} message word(s) on SHA_BUFF slot {slot}")


class ShaBuffKernel(Kernel):
    """POP hands out the next streamed word; ctrl bit0 tells the FIFO ran dry."""

    kind = KernelKind.SHA_BUFF
    opcodes = ShaBuffOp

    def ready(self, op: int, streams: Streams) -> bool:
        if op == ShaBuffOp.POP:
            return bool(streams[0])
        return True

    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        if op == ShaBuffOp.POP:
            word = streams[0].popleft()
            return KernelResult(out=word, ctrl=0 if streams[0] else 0b01)
        return KernelResult()


@dataclass(frozen=True)
class ShaCompState:
    """
    Attributes:
        gam_memory: the state after the nonlinear step of the last round.
        res_memory: the state after the last complete round (and absorbs).
        round_index: the round the next ROUND executes.
    """

    gam_memory: KeccakState = ZERO_STATE
    res_memory: KeccakState = ZERO_STATE
    round_index: int = 0


class ShaCompKernel(Kernel):
    kind = KernelKind.SHA_COMP
    opcodes = ShaCompOp

    def reset(self) -> None:
        self.state = ShaCompState()
        self.absorb_cursor = 0
        self.squeeze_cursor = 0

    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        if op == ShaCompOp.INIT:
            self.reset()
            return KernelResult(ctrl=0)
        if op == ShaCompOp.ABSORB:
            k = self.absorb_cursor
            if k >= RATE_WORDS:
                raise SimulationFault(
                    f"ABSORB past the {RATE_WORDS}-word rate of a block"
                )
            lanes = list(self.state.res_memory)
            lanes[k // 2] ^= (a & 0xFFFFFFFF) << (32 * (k % 2))
            self.state = ShaCompState(
                gam_memory=self.state.gam_memory,
                res_memory=tuple(lanes),
                round_index=self.state.round_index,
            )
            self.absorb_cursor += 1
            return KernelResult()
        if op == ShaCompOp.ROUND:
            round_index = self.state.round_index
            gam = chi(rho_pi(theta(self.state.res_memory)))
            following = (round_index + 1) % KECCAK_ROUNDS
            self.state = ShaCompState(
                gam_memory=gam,
                res_memory=iota(gam, round_index),
                round_index=following,
            )
            self.absorb_cursor = 0
            self.squeeze_cursor = 0
            return KernelResult(ctrl=0b01 if following == 0 else 0)
        if op == ShaCompOp.SQUEEZE:
            k = self.squeeze_cursor
            if k >= STATE_WORDS:
                raise SimulationFault("SQUEEZE past the end of the state")
            lane = self.state.res_memory[k // 2]
            self.squeeze_cursor += 1
            return KernelResult(out=(lane >> (32 * (k % 2))) & 0xFFFFFFFF)
        return KernelResult()
