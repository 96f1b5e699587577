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
Unit tests for the SHA-3 kernels and the Keccak permutation they implement.
"""

import hashlib
from typing import List, Tuple

import pytest
from hypothesis import given
from hypothesis import strategies as st

from refab.constants import (
    KernelKind,
    ShaBuffOp,
    ShaCompOp,
    StallReason,
    StepEventKind,
    TrapKind,
)
from refab.controller import run, step
from refab.core.kernel import new_streams
from refab.exceptions import SimulationFault
from refab.fabric import Fabric, FabricConfig
from refab.sha3_kernels import (
    RATE_WORDS,
    RHO_OFFSETS,
    ROUND_CONSTANTS,
    ZERO_STATE,
    RhoBuffer,
    ShaBuffKernel,
    ShaCompKernel,
    digest_from_words,
    keccak_f1600,
    keccak_round,
    message_words,
    pad10x1,
    rho_buffer_apply,
    rotl64,
    rotr64,
    sha3_256,
    sha_buff_stream,
    theta,
)

from ..conftest import machine_for

FOUR_POPS = """
.slotbind 0 SHA_BUFF
    slot0: POP -> out
    slot0: POP -> out
    slot0: POP -> out
    slot0: POP -> out
"""


def _absorb_and_hash(kernel: ShaCompKernel, message: bytes) -> bytes:
    words = message_words(message)
    streams = new_streams(4)
    kernel.execute(ShaCompOp.INIT, 0, 0, streams)
    for start in range(0, len(words), RATE_WORDS):
        for word in words[start : start + RATE_WORDS]:
            kernel.execute(ShaCompOp.ABSORB, word, 0, streams)
        ctrls = [kernel.execute(ShaCompOp.ROUND, 0, 0, streams).ctrl for _ in range(24)]
        assert ctrls == [0] * 23 + [1]
    out = [kernel.execute(ShaCompOp.SQUEEZE, 0, 0, streams).out for _ in range(8)]
    return digest_from_words(word or 0 for word in out)


class TestSha3Reference:
    @pytest.mark.describe("well-known digests of the empty string and 'abc'")
    def test_known_digests(self) -> None:
        assert sha3_256(b"").hex().startswith("a7ffc6f8")
        assert sha3_256(b"abc").hex() == (
            "3a985da74fe225b2045c172d6bd390bd855f086e3e9d525b46bfe24511431532"
        )

    @pytest.mark.describe("sha3_256 matches hashlib for lengths 0 to 300")
    def test_against_hashlib(self) -> None:
        for length in range(301):
            message = bytes((7 * i + length) & 0xFF for i in range(length))
            assert sha3_256(message) == hashlib.sha3_256(message).digest()

    @pytest.mark.describe("padding fills whole blocks, 0x86 when one byte is left")
    def test_padding(self) -> None:
        (block,) = pad10x1(b"\x00" * 135)
        assert block[-1] == 0x86
        blocks = pad10x1(b"\x00" * 136)
        assert len(blocks) == 2
        assert blocks[1][0] == 0x06 and blocks[1][-1] == 0x80
        assert len(message_words(b"")) == RATE_WORDS

    @pytest.mark.describe("theta folds the neighbouring column parities into a lane")
    def test_theta_single_bit(self) -> None:
        lanes = list(ZERO_STATE)
        lanes[0] = 1
        out = theta(tuple(lanes))
        for y in range(5):
            row = out[5 * y : 5 * y + 5]
            assert row == ((1 if y == 0 else 0), 1, 0, 0, 2)

    @pytest.mark.describe("theta leaves a state with even column parities alone")
    @given(
        column=st.integers(0, 4),
        rows=st.tuples(st.integers(0, 4), st.integers(0, 4)).filter(
            lambda pair: pair[0] != pair[1]
        ),
        lane=st.integers(0, (1 << 64) - 1),
    )
    def test_theta_even_parity(
        self, column: int, rows: Tuple[int, int], lane: int
    ) -> None:
        lanes = list(ZERO_STATE)
        for y in rows:
            lanes[column + 5 * y] = lane
        assert theta(tuple(lanes)) == tuple(lanes)

    @pytest.mark.describe("round 0 of the zero state leaves only the first constant")
    def test_zero_state_round(self) -> None:
        out = keccak_round(ZERO_STATE, 0)
        assert out == (ROUND_CONSTANTS[0],) + (0,) * 24
        assert ROUND_CONSTANTS[0] == 1
        with pytest.raises(ValueError):
            keccak_round(ZERO_STATE, 24)

    @pytest.mark.describe("the permutation of the zero state starts with F1258F79")
    def test_zero_state_permutation(self) -> None:
        assert keccak_f1600(ZERO_STATE)[0] == 0xF1258F7940E1DDE7
        assert ROUND_CONSTANTS[0] == 1
        assert ROUND_CONSTANTS[23] == 0x8000000080008008

    @pytest.mark.describe("rotations and the rho register selection")
    def test_rho_buffer(self) -> None:
        assert rotl64(1, 63) == 1 << 63
        assert rotr64(rotl64(0x123456789ABCDEF, 21), 21) == 0x123456789ABCDEF
        rho = RhoBuffer()
        assert rho.select(0) == [0]
        assert rho.select(1) == [1]
        assert rho.select(44) == [3, 4, 6]
        assert rho.apply([1], [1]) == (2,)
        with pytest.raises(ValueError):
            rho.apply([1, 2, 3, 4, 5], [0, 1, 2, 3, 4])
        with pytest.raises(ValueError):
            rho.apply([1], [25])

    @pytest.mark.describe("the rho buffer rotates every lane by its offset")
    @given(
        lanes=st.lists(
            st.tuples(st.integers(0, (1 << 64) - 1), st.integers(0, 24)),
            min_size=1,
            max_size=4,
        )
    )
    def test_rho_buffer_property(self, lanes: List[Tuple[int, int]]) -> None:
        values = [value for value, _ in lanes]
        indices = [index for _, index in lanes]
        assert rho_buffer_apply(values, indices) == tuple(
            rotl64(value, RHO_OFFSETS[index]) for value, index in lanes
        )


class TestShaKernels:
    @pytest.mark.describe("SHA_COMP absorbs, permutes and squeezes a digest")
    @pytest.mark.parametrize("length", [0, 1, 135, 136, 300])
    def test_comp_digest(self, length: int) -> None:
        message = bytes(range(256)) * 2
        message = message[:length]
        digest = _absorb_and_hash(ShaCompKernel(), message)
        assert digest == hashlib.sha3_256(message).digest()

    @pytest.mark.describe("ABSORB past the rate of a block faults")
    def test_absorb_past_rate(self) -> None:
        kernel = ShaCompKernel()
        streams = new_streams(4)
        for _ in range(RATE_WORDS):
            kernel.execute(ShaCompOp.ABSORB, 0, 0, streams)
        with pytest.raises(SimulationFault):
            kernel.execute(ShaCompOp.ABSORB, 0, 0, streams)

    @pytest.mark.describe("SHA_BUFF pops words and is not ready when empty")
    def test_buff(self) -> None:
        kernel = ShaBuffKernel()
        streams = new_streams(4)
        assert not kernel.ready(ShaBuffOp.POP, streams)
        streams[0].extend([5, 6])
        assert kernel.ready(ShaBuffOp.POP, streams)
        first = kernel.execute(ShaBuffOp.POP, 0, 0, streams)
        second = kernel.execute(ShaBuffOp.POP, 0, 0, streams)
        assert (first.out, first.ctrl) == (5, 0)
        assert (second.out, second.ctrl) == (6, 1)
        assert kernel.ready(ShaBuffOp.NOP, streams)


class TestShaBuffStream:
    @pytest.mark.describe("a prefilled SHA_BUFF FIFO runs without stalls")
    def test_prefilled(self) -> None:
        state = machine_for(FOUR_POPS)
        sha_buff_stream(state.fabric, 0, [1, 2, 3, 4])
        assert list(state.fabric.streams[0][0]) == [1, 2, 3, 4]
        outcome = run(state)
        assert outcome.halted
        assert (outcome.retired_vliws, outcome.stalled_cycles) == (4, 0)
        assert state.fabric.slots[0].out == 4

    @pytest.mark.describe("a FIFO that runs dry mid-block stalls until refilled")
    def test_starved_then_resumed(self) -> None:
        state = machine_for(FOUR_POPS)
        sha_buff_stream(state.fabric, 0, [1, 2])
        assert [step(state).kind for _ in range(2)] == [StepEventKind.RETIRED] * 2
        for _ in range(3):
            event = step(state)
            assert event.kind == StepEventKind.STALLED
            assert event.stall_reason == StallReason.STARVED
        assert state.pc == 2
        sha_buff_stream(state.fabric, 0, [3, 4])
        outcome = run(state)
        assert outcome.halted and outcome.trap is None
        assert (outcome.retired_vliws, outcome.stalled_cycles) == (4, 3)
        assert state.fabric.slots[0].out == 4

    @pytest.mark.describe("a FIFO that stays dry traps STALL_TIMEOUT")
    def test_permanently_starved(self) -> None:
        state = machine_for(FOUR_POPS, stall_threshold=16)
        sha_buff_stream(state.fabric, 0, [1, 2])
        outcome = run(state)
        assert outcome.trap is not None
        assert outcome.trap.kind == TrapKind.STALL_TIMEOUT
        assert (outcome.trap.pc, outcome.trap.cycle) == (2, 18)
        assert (outcome.retired_vliws, outcome.stalled_cycles) == (2, 16)

    @pytest.mark.describe("only SHA_BUFF slots take message words")
    def test_wrong_slot(self) -> None:
        fabric = Fabric(FabricConfig(kinds=(KernelKind.FMAV, KernelKind.SHA_BUFF)))
        with pytest.raises(SimulationFault):
            sha_buff_stream(fabric, 0, [1])
        with pytest.raises(SimulationFault):
            sha_buff_stream(fabric, 2, [1])
        sha_buff_stream(fabric, 1, [1])
        assert list(fabric.streams[1][0]) == [1]
