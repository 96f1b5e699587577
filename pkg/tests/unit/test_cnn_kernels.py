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
Unit tests for the CNN kernel models and the RFNN tensor codec.
"""

from pathlib import Path
from typing import List

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from refab.benchmarks.oracles import ref_quantize
from refab.cnn_kernels import (
    WEIGHT_CHANNEL,
    CnnMacKernel,
    CnnSumKernel,
    LineBufferBank,
    MacState,
    QuantParams,
    decode_rfnn,
    encode_rfnn,
    i8_from_word,
    lb_push_pixel,
    mac_window,
    pixel_words,
    quantize,
    read_rfnn,
    sum_step,
    write_rfnn,
)
from refab.constants import CnnMacOp, CnnSumOp
from refab.core.kernel import new_streams
from refab.core.utils import i32_from_word, word_from_f32, word_from_i32
from refab.exceptions import SimulationFault


class TestQuantization:
    @pytest.mark.describe("quantization rounds half to even in binary32")
    def test_round_half_even(self) -> None:
        q = QuantParams(scale=0.5)
        assert quantize(5, q) == (2, False)
        assert quantize(7, q) == (4, False)
        assert quantize(-5, q) == (-2, False)
        assert quantize(3, QuantParams(scale=0.5, zero_point=-10)) == (-8, False)

    @pytest.mark.describe("quantization clamps to int8 and says so")
    def test_clamp(self) -> None:
        assert quantize(1000, QuantParams()) == (127, True)
        assert quantize(-1000, QuantParams()) == (-128, True)
        assert quantize(120, QuantParams(zero_point=20)) == (127, True)

    @pytest.mark.describe("quantization parameters are validated")
    def test_bad_params(self) -> None:
        with pytest.raises(ValueError):
            QuantParams(scale=0.0)
        with pytest.raises(ValueError):
            QuantParams(zero_point=128)

    @pytest.mark.describe("sum_step applies ReLU, max pooling and quantization")
    def test_sum_step(self) -> None:
        assert sum_step([-4, -9, -1, -7], QuantParams()) == 0
        assert sum_step([3, 17, -2, 9], QuantParams()) == 17
        assert sum_step([3, 17, -2, 9], QuantParams(scale=0.25)) == 4

    @pytest.mark.describe("a product overflowing binary32 clamps instead of failing")
    def test_overflowing_product(self) -> None:
        huge = QuantParams(scale=3e38)
        assert quantize(10, huge) == (127, True)
        assert quantize(-10, huge) == (-128, True)
        assert quantize(0, huge) == (0, False)
        assert quantize(10, QuantParams(scale=3e38, zero_point=-128)) == (127, True)
        assert sum_step([0, 10, 3, 7], QuantParams(scale=1e38)) == 127
        for value in (-(1 << 31), -10, -1, 0, 1, 10, (1 << 31) - 1):
            for scale in (1e-3, 0.5, 1e30, 3e38):
                expected = ref_quantize(value, scale, 3)
                assert quantize(value, QuantParams(scale, 3))[0] == expected

    @pytest.mark.describe("infinite and NaN scales are rejected")
    def test_non_finite_scale(self) -> None:
        for scale in (float("inf"), float("nan"), 1e39, -float("inf")):
            with pytest.raises(ValueError):
                QuantParams(scale=scale)


class TestLineBuffers:
    @pytest.mark.describe("line buffers fill per row and reject overflow")
    def test_push_and_overflow(self) -> None:
        bank = LineBufferBank(width=2, channels=1)
        lb_push_pixel(bank, 0, 5)
        lb_push_pixel(bank, 0, -5)
        assert bank.rows[0] == [5, -5]
        with pytest.raises(SimulationFault):
            lb_push_pixel(bank, 0, 1)
        with pytest.raises(SimulationFault):
            lb_push_pixel(bank, 3, 1)

    @pytest.mark.describe("refill feeds channel r into row r")
    def test_refill_and_shift(self) -> None:
        bank = LineBufferBank(width=3, channels=1)
        streams = new_streams(4)
        for channel in range(3):
            streams[channel].extend(pixel_words([channel, -channel, 7, 8]))
        bank.refill(streams)
        assert bank.rows == [[0, 0, 7], [1, -1, 7], [2, -2, 7]]
        assert bank.window_ready(0)
        assert [len(channel) for channel in streams[:3]] == [1, 1, 1]
        bank.shift()
        assert bank.rows == [[1, -1, 7], [2, -2, 7], []]
        assert not bank.window_ready(0)


def _filled_bank(rows: List[List[int]]) -> LineBufferBank:
    bank = LineBufferBank(width=len(rows[0]), channels=1)
    for index, row in enumerate(rows):
        for px in row:
            lb_push_pixel(bank, index, px)
    return bank


class TestMacWindow:
    @pytest.mark.describe("all-ones weights over all-ones pixels give 9")
    def test_all_ones(self) -> None:
        ones = MacState(weights=((1, 1, 1),) * 3)
        bank = _filled_bank([[1, 1, 1]] * 3)
        assert mac_window(ones, bank, 0) == 9
        assert mac_window(MacState(weights=ones.weights, acc=-4), bank, 0) == 5

    @pytest.mark.describe("a lone center weight picks the middle pixel")
    def test_center_weight(self) -> None:
        center = MacState(weights=((0, 0, 0), (0, 1, 0), (0, 0, 0)))
        rows = [[1, 2, 3, 4, 5], [-6, 7, -8, 9, -10], [11, 12, 13, 14, 15]]
        bank = _filled_bank(rows)
        assert [mac_window(center, bank, x) for x in range(3)] == [7, -8, 9]

    @pytest.mark.describe("a window past the filled columns faults")
    def test_window_not_ready(self) -> None:
        bank = _filled_bank([[1, 1, 1]] * 3)
        with pytest.raises(SimulationFault):
            mac_window(MacState(weights=((1, 1, 1),) * 3), bank, 1)

    @pytest.mark.describe("mac_window equals the nine-term sum")
    @given(
        weights=st.lists(st.integers(-128, 127), min_size=9, max_size=9),
        pixels=st.lists(st.integers(-128, 127), min_size=9, max_size=9),
        acc=st.integers(-(1 << 31), (1 << 31) - 1),
    )
    def test_nine_term_sum(
        self, weights: List[int], pixels: List[int], acc: int
    ) -> None:
        kernel_weights = tuple(
            (weights[3 * i], weights[3 * i + 1], weights[3 * i + 2]) for i in range(3)
        )
        bank = _filled_bank([pixels[0:3], pixels[3:6], pixels[6:9]])
        expected = acc + sum(w * p for w, p in zip(weights, pixels))
        state = MacState(weights=kernel_weights, acc=acc)  # type: ignore[arg-type]
        assert mac_window(state, bank, 0) == expected


class TestCnnMac:
    @pytest.mark.describe("a MAC sums one 3x3 window with its channel's weights")
    def test_window_sum(self) -> None:
        kernel = CnnMacKernel()
        streams = new_streams(4)
        kernel.execute(CnnMacOp.CFG, 3, 1, streams)
        streams[WEIGHT_CHANNEL].extend(pixel_words([1] * 9))
        assert kernel.ready(CnnMacOp.LD_W, streams)
        kernel.execute(CnnMacOp.LD_W, 0, 0, streams)
        assert not kernel.ready(CnnMacOp.MAC, streams)
        for row in range(3):
            streams[row].extend(pixel_words([3 * row + 1, 3 * row + 2, 3 * row + 3]))
        assert kernel.ready(CnnMacOp.MAC, streams)
        result = kernel.execute(CnnMacOp.MAC, 0, 0, streams)
        assert result.out == 45
        assert result.ctrl == 0
        assert kernel.execute(CnnMacOp.CLR, 0, 0, streams).ctrl == 0b01

    @pytest.mark.describe("negative weights and pixels accumulate as signed")
    def test_signed_accumulate(self) -> None:
        kernel = CnnMacKernel()
        streams = new_streams(4)
        kernel.execute(CnnMacOp.CFG, 3, 1, streams)
        streams[WEIGHT_CHANNEL].extend(pixel_words([-2] + [0] * 8))
        kernel.execute(CnnMacOp.LD_W, 0, 0, streams)
        for row in range(3):
            streams[row].extend(pixel_words([100, 0, 0]))
        kernel.ready(CnnMacOp.MAC, streams)
        result = kernel.execute(CnnMacOp.MAC, 0, 0, streams)
        assert result.out is not None
        assert i32_from_word(result.out) == -200

    @pytest.mark.describe("CFG beyond the line buffer width faults")
    def test_cfg_overflow(self) -> None:
        with pytest.raises(SimulationFault):
            CnnMacKernel().execute(CnnMacOp.CFG, 1024, 3, new_streams(4))
        with pytest.raises(SimulationFault):
            CnnMacKernel().execute(CnnMacOp.CFG, 0, 1, new_streams(4))

    @pytest.mark.describe("a MAC without loaded weights faults")
    def test_mac_without_weights(self) -> None:
        kernel = CnnMacKernel()
        streams = new_streams(4)
        kernel.execute(CnnMacOp.CFG, 3, 1, streams)
        for row in range(3):
            streams[row].extend([0, 0, 0])
        kernel.ready(CnnMacOp.MAC, streams)
        with pytest.raises(SimulationFault):
            kernel.execute(CnnMacOp.MAC, 0, 0, streams)


class TestCnnSum:
    @pytest.mark.describe("POOL_NEXT and EMIT pool one window per column")
    def test_pool_and_emit(self) -> None:
        kernel = CnnSumKernel()
        streams = new_streams(4)
        kernel.execute(
            CnnSumOp.SET_Q, word_from_f32(0.5), word_from_i32(1), streams
        )
        for value in (10, -3):
            kernel.execute(CnnSumOp.POOL_NEXT, word_from_i32(value), 0, streams)
        kernel.execute(CnnSumOp.ROW, 0, 0, streams)
        for value in (7, -8):
            kernel.execute(CnnSumOp.POOL_NEXT, word_from_i32(value), 0, streams)
        kernel.execute(CnnSumOp.ROW, 0, 0, streams)
        first = kernel.execute(CnnSumOp.EMIT, 0, 0, streams)
        second = kernel.execute(CnnSumOp.EMIT, 0, 0, streams)
        assert (first.out, first.ctrl) == (6, 0)
        assert second.out is not None
        assert i32_from_word(second.out) == 1

    @pytest.mark.describe("SET_Q rejects a non-positive or infinite scale")
    def test_bad_set_q(self) -> None:
        with pytest.raises(SimulationFault):
            CnnSumKernel().execute(
                CnnSumOp.SET_Q, word_from_f32(-1.0), 0, new_streams(4)
            )
        with pytest.raises(SimulationFault):
            CnnSumKernel().execute(
                CnnSumOp.SET_Q, word_from_f32(float("inf")), 0, new_streams(4)
            )

    @pytest.mark.describe("EMIT on an empty window faults")
    def test_empty_emit(self) -> None:
        with pytest.raises(SimulationFault):
            CnnSumKernel().execute(CnnSumOp.EMIT, 0, 0, new_streams(4))


class TestRfnn:
    @pytest.mark.describe("RFNN tensors survive files and keep their layout")
    def test_rfnn_file(self, tmp_path: Path, rng: np.random.Generator) -> None:
        tensor = rng.integers(-128, 128, size=(3, 4, 5), dtype=np.int8)
        path = str(tmp_path / "t.rfnn")
        write_rfnn(path, tensor)
        loaded = read_rfnn(path)
        assert loaded.shape == (3, 4, 5)
        assert np.array_equal(loaded, tensor)
        data = encode_rfnn(tensor[0])
        assert data[:4] == b"RFNN"
        assert len(data) == 16 + 20
        assert decode_rfnn(data).shape == (1, 4, 5)

    @pytest.mark.describe("malformed RFNN data is rejected")
    def test_rfnn_errors(self) -> None:
        data = encode_rfnn(np.zeros((1, 2, 2), dtype=np.int8))
        with pytest.raises(ValueError):
            decode_rfnn(b"XXXX" + data[4:])
        with pytest.raises(ValueError):
            decode_rfnn(data[:-1])
        with pytest.raises(ValueError):
            decode_rfnn(data[:8])
        with pytest.raises(ValueError):
            encode_rfnn(np.zeros(4, dtype=np.int8))

    @pytest.mark.describe("pixel words carry signed bytes")
    def test_pixel_words(self) -> None:
        assert pixel_words([-1, 127, -128]) == [0xFF, 0x7F, 0x80]
        assert [i8_from_word(w) for w in (0xFF, 0x7F, 0x180)] == [-1, 127, -128]
