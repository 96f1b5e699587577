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
Functional models of the CNN accelerators: CNN_MAC (3x3 window
multiply-accumulate fed by three streamed line buffers) and CNN_SUM
(ReLU activation, 2x2 max pooling and int8 quantization), plus the RFNN
tensor file codec used to feed them.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from refab.constants import CnnMacOp, CnnSumOp, KernelKind
from refab.core.defaults import DEFAULT_LINE_BUFFER_WIDTH, RFNN_MAGIC
from refab.core.kernel import Kernel, KernelResult, Streams
from refab.core.utils import (
    f32_from_word,
    i32_from_word,
    word_from_i32,
)
from refab.exceptions import SimulationFault

logger = logging.getLogger(__name__)

I8_MIN, I8_MAX = -128, 127
I32_MIN, I32_MAX = -(1 << 31), (1 << 31) - 1
WINDOW = 3
WEIGHT_CHANNEL = 3

# magic | H | W | C
_RFNN_HEADER = struct.Struct("<4sIII")

Weights = Tuple[Tuple[int, int, int], ...]


def i8_from_word(word: int) -> int:
    """Low byte of a stream word as a signed pixel."""
    low = word & 0xFF
    return low - 0x100 if low & 0x80 else low


@dataclass
class LineBufferBank:
    """
    Three row buffers. Each row holds the same image row of every input
    channel back to back, so channel c of column x sits at c * width + x.

    Attributes:
        width: pixels per channel row.
        channels: number of channel rows held per buffer row.
        rows: the three buffers, top row first.
    """

    width: int = 0
    channels: int = 1
    rows: List[List[int]] = field(default_factory=lambda: [[], [], []])

    @property
    def capacity(self) -> int:
        return self.width * self.channels

    def window_ready(self, column: int) -> bool:
        return all(len(row) >= column + WINDOW for row in self.rows)

    def refill(self, streams: Streams) -> None:
        """Channel r feeds row r until the row is full."""
        for row_index in range(WINDOW):
            channel = streams[row_index]
            row = self.rows[row_index]
            while channel and len(row) < self.capacity:
                row.append(i8_from_word(channel.popleft()))

    def shift(self) -> None:
        """Move every row up one position, leaving the bottom row empty."""
        self.rows = [self.rows[1], self.rows[2], []]


def lb_push_pixel(bank: LineBufferBank, row: int, px: int) -> None:
    if not 0 <= row < WINDOW:
        raise SimulationFault(f"line buffer row {row} does not exist")
    if len(bank.rows[row]) >= bank.capacity:
        raise SimulationFault(
            f"line buffer row {row} overflow past {bank.capacity} pixels"
        )
    bank.rows[row].append(int(px))


@dataclass(frozen=True)
class MacState:
    weights: Weights
    acc: int = 0


def mac_window(st: MacState, bank: LineBufferBank, x: int) -> int:
    """acc + sum of weight[i][j] * pixel[i][x + j], in exact integers."""
    if not bank.window_ready(x):
        raise SimulationFault(f"window at column {x} is not filled yet")
    total = st.acc
    for i in range(WINDOW):
        row = bank.rows[i]
        for j in range(WINDOW):
            total += st.weights[i][j] * row[x + j]
    return total


@dataclass(frozen=True)
class QuantParams:
    """
    Attributes:
        scale: positive binary32 multiplier.
        zero_point: signed 8-bit offset added after rounding.
    """

    scale: float = 1.0
    zero_point: int = 0

    def __post_init__(self) -> None:
        with np.errstate(all="ignore"):
            scale = np.float32(self.scale)
        if not (np.isfinite(scale) and scale > 0):
            raise ValueError(
                f"quantization scale must be positive and finite: {self.scale}"
            )
        if not I8_MIN <= self.zero_point <= I8_MAX:
            raise ValueError(f"zero point {self.zero_point} outside int8")


def quantize(value: int, q: QuantParams) -> Tuple[int, bool]:
    """
    Round-to-nearest-even of value * scale in binary32, plus the zero point,
    clamped to int8. Returns the result and whether it was clamped.
    """

    with np.errstate(all="ignore"):
        scaled = np.rint(np.float32(value) * np.float32(q.scale))
    # clamp before int(): the product may overflow binary32 to +-inf
    shifted = np.float64(scaled) + q.zero_point
    clamped = int(np.clip(shifted, I8_MIN, I8_MAX))
    return clamped, not I8_MIN <= shifted <= I8_MAX


def sum_step(pool_window: Sequence[int], q: QuantParams) -> int:
    """ReLU each accumulator of the pooling window, max-pool, quantize."""
    return quantize(max(max(acc, 0) for acc in pool_window), q)[0]


class CnnMacKernel(Kernel):
    """
    CNN_MAC: CFG sizes the line buffers, LD_W pops one channel's 3x3
    weights from channel 3, MAC accumulates the current channel's window
    at the column cursor and moves to the next channel.
    """

    kind = KernelKind.CNN_MAC
    opcodes = CnnMacOp

    def reset(self) -> None:
        self.bank = LineBufferBank()
        self.weights: List[Weights] = []
        self.acc = 0
        self.x = 0
        self.channel = 0

    def _column(self) -> int:
        return self.channel * self.bank.width + self.x

    def ready(self, op: int, streams: Streams) -> bool:
        if op == CnnMacOp.LD_W:
            return len(streams[WEIGHT_CHANNEL]) >= WINDOW * WINDOW
        if op == CnnMacOp.MAC:
            self.bank.refill(streams)
            return self.bank.window_ready(self._column())
        return True

    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        if op == CnnMacOp.LD_W:
            taps = [
                i8_from_word(streams[WEIGHT_CHANNEL].popleft())
                for _ in range(WINDOW * WINDOW)
            ]
            self.weights.append(
                (
                    (taps[0], taps[1], taps[2]),
                    (taps[3], taps[4], taps[5]),
                    (taps[6], taps[7], taps[8]),
                )
            )
            return KernelResult()
        if op == CnnMacOp.CLR:
            self.acc = 0
            self.channel = 0
            return KernelResult(out=0, ctrl=0b01)
        if op == CnnMacOp.MAC:
            return self._mac()
        if op == CnnMacOp.NEXT_COL:
            self.x += a
            self.channel = 0
            return KernelResult()
        if op == CnnMacOp.NEXT_ROW:
            self.bank.shift()
            self.x = 0
            self.channel = 0
            return KernelResult()
        if op == CnnMacOp.CFG:
            width, channels = a, b
            if not 0 < width * channels <= DEFAULT_LINE_BUFFER_WIDTH:
                raise SimulationFault(
                    f"line buffers cannot hold {channels} rows of {width} pixels"
                )
            logger.debug(f"CNN_MAC line buffers: width {width}, channels {channels}")
            self.bank = LineBufferBank(width=width, channels=channels)
            self.x = 0
            self.channel = 0
            return KernelResult()
        return KernelResult()

    def _mac(self) -> KernelResult:
        if self.channel >= len(self.weights):
            raise SimulationFault(f"no weights loaded for channel {self.channel}")
        if self.x + WINDOW > self.bank.width:
            raise SimulationFault(
                f"window at column {self.x} crosses a {self.bank.width}-pixel row"
            )
        state = MacState(weights=self.weights[self.channel], acc=self.acc)
        total = mac_window(state, self.bank, self._column())
        overflow = not I32_MIN <= total <= I32_MAX
        self.acc = i32_from_word(word_from_i32(total))
        self.channel += 1
        ctrl = (0b10 if overflow else 0) | (0b01 if self.acc == 0 else 0)
        return KernelResult(out=word_from_i32(self.acc), ctrl=ctrl, error=overflow)

    def tick(self, streams: Streams) -> None:
        self.bank.refill(streams)


class CnnSumKernel(Kernel):
    """
    CNN_SUM: gathers accumulators into one pooling window per pooled
    column. POOL adds to the window under the cursor, POOL_NEXT adds and
    advances, ROW rewinds the cursor for the next convolution row, EMIT
    runs `sum_step` on the window and RD_POOL hands its raw maximum to a
    partner slot.
    """

    kind = KernelKind.CNN_SUM
    opcodes = CnnSumOp

    def reset(self) -> None:
        self.windows: List[List[int]] = []
        self.cursor = 0
        self.quant = QuantParams()

    def _window(self) -> List[int]:
        while len(self.windows) <= self.cursor:
            self.windows.append([])
        return self.windows[self.cursor]

    def execute(self, op: int, a: int, b: int, streams: Streams) -> KernelResult:
        if op in (CnnSumOp.POOL, CnnSumOp.POOL_NEXT):
            self._window().append(i32_from_word(a))
            if op == CnnSumOp.POOL_NEXT:
                self.cursor += 1
            return KernelResult()
        if op == CnnSumOp.ROW:
            self.cursor = 0
            return KernelResult()
        if op == CnnSumOp.EMIT:
            window = self._window()
            if not window:
                raise SimulationFault(f"empty pooling window at column {self.cursor}")
            value, clamped = quantize(max(max(acc, 0) for acc in window), self.quant)
            window.clear()
            self.cursor += 1
            return KernelResult(out=word_from_i32(value), ctrl=int(clamped))
        if op == CnnSumOp.RD_POOL:
            window = self._window()
            value = max(window) if window else 0
            window.clear()
            self.cursor += 1
            return KernelResult(out=word_from_i32(value))
        if op == CnnSumOp.SET_Q:
            try:
                self.quant = QuantParams(
                    scale=float(f32_from_word(a)), zero_point=i32_from_word(b)
                )
            except ValueError as exc:
                raise SimulationFault(f"SET_Q rejected: {exc}")
            return KernelResult()
        return KernelResult()


def encode_rfnn(tensor: np.ndarray) -> bytes:  # type: ignore[type-arg]
    """Serialise a (C, H, W) int8 tensor; 2-D arrays are taken as C = 1."""
    array = np.asarray(tensor, dtype=np.int8)
    if array.ndim == 2:
        array = array[np.newaxis, :, :]
    if array.ndim != 3:
        raise ValueError(f"RFNN tensors are (C, H, W), got shape {array.shape}")
    channels, height, width = array.shape
    header = _RFNN_HEADER.pack(RFNN_MAGIC, height, width, channels)
    return header + np.ascontiguousarray(array).tobytes()


def decode_rfnn(data: bytes) -> np.ndarray:  # type: ignore[type-arg]
    if len(data) < _RFNN_HEADER.size:
        raise ValueError("RFNN data shorter than its header")
    magic, height, width, channels = _RFNN_HEADER.unpack_from(data, 0)
    if magic != RFNN_MAGIC:
        raise ValueError(f"bad RFNN magic {magic!r}")
    expected = _RFNN_HEADER.size + height * width * channels
    if len(data) != expected:
        raise ValueError(f"RFNN data is {len(data)} bytes, header announces {expected}")
    payload = np.frombuffer(data, dtype=np.int8, offset=_RFNN_HEADER.size)
    return payload.reshape(channels, height, width).copy()


def read_rfnn(path: str) -> np.ndarray:  # type: ignore[type-arg]
    logger.debug(f"reading RFNN tensor '{path}'")
    with open(path, "rb") as rfnn_file:
        return decode_rfnn(rfnn_file.read())


def write_rfnn(path: str, tensor: np.ndarray) -> None:  # type: ignore[type-arg]
    logger.debug(f"writing RFNN tensor '{path}'")
    with open(path, "wb") as rfnn_file:
        rfnn_file.write(encode_rfnn(tensor))


def pixel_words(values: Sequence[int]) -> List[int]:
    """Stream words carrying signed 8-bit values in their low byte."""
    return [int(value) & 0xFF for value in values]
