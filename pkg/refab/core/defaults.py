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

from typing import Dict, Tuple

from refab.constants import (
    CnnMacOp,
    CnnSumOp,
    DivOp,
    FmavOp,
    KernelKind,
    ShaBuffOp,
    ShaCompOp,
    SqrtOp,
    UtilOp,
)

SLOT_COUNT = 5
VLIW_BYTES = 24
SLOT_FIELD_BITS = 28
CONTROLLER_FIELD_OFFSET = 140

PARAM_SET_COUNT = 4
AGU_COUNT = 8
STREAM_CHANNELS = 4
COUNTER_MODULUS = 4096
MAX_PROGRAM_VLIWS = 4096
WORD_MASK = 0xFFFFFFFF

IMAGE_MAGIC = b"RFSI"
IMAGE_VERSION = 1
RFNN_MAGIC = b"RFNN"

DEFAULT_STALL_THRESHOLD = 512
DEFAULT_MAX_CYCLES = 10_000_000
DEFAULT_MEMORY_WORDS = 65536
DEFAULT_LINE_BUFFER_WIDTH = 2048

DEFAULT_GRAVITY = 9.81
DEFAULT_DRY_TOLERANCE = 1e-4
DEFAULT_SWE_RTOL = 1e-6

SHA3_256_RATE_BYTES = 136
SHA3_256_DIGEST_BYTES = 32
KECCAK_ROUNDS = 24

FABRIC_ENV_VARIABLE = "REFAB_FABRIC"

# cycles from issue until out/ctrl become visible; opcodes absent here take 1
DEFAULT_LATENCIES: Dict[KernelKind, Dict[int, int]] = {
    KernelKind.FMAV: {
        FmavOp.ADD: 3,
        FmavOp.SUB: 3,
        FmavOp.MUL: 3,
        FmavOp.SUBSQ_ACC: 4,
        FmavOp.MAC: 4,
    },
    KernelKind.DIV: {DivOp.DIV: 16},
    KernelKind.SQRT: {SqrtOp.SQRT: 16},
    KernelKind.UTIL: {
        UtilOp.MIN: 1,
        UtilOp.MAX: 1,
        UtilOp.ABS: 1,
        UtilOp.CMP: 1,
    },
    KernelKind.CNN_MAC: {CnnMacOp.MAC: 2},
    KernelKind.CNN_SUM: {
        CnnSumOp.POOL: 2,
        CnnSumOp.POOL_NEXT: 2,
        CnnSumOp.EMIT: 2,
        CnnSumOp.RD_POOL: 2,
    },
    KernelKind.SHA_BUFF: {ShaBuffOp.POP: 1},
    KernelKind.SHA_COMP: {ShaCompOp.ROUND: 2},
}

# static per-slot resource envelope of the reference FPGA build
SLOT_RESOURCE_ENVELOPE: Dict[str, int] = {
    "luts": 1600,
    "ffs": 3200,
    "brams": 10,
    "dsps": 20,
}

# (luts, ffs, brams, dsps) per kernel instance, reported only
KERNEL_RESOURCES: Dict[KernelKind, Tuple[int, int, int, int]] = {
    KernelKind.NONE: (0, 0, 0, 0),
    KernelKind.FMAV: (627, 277, 0, 4),
    KernelKind.DIV: (857, 258, 0, 0),
    KernelKind.SQRT: (526, 85, 0, 0),
    KernelKind.UTIL: (179, 206, 0, 0),
    KernelKind.CNN_MAC: (1600, 3200, 10, 9),
    KernelKind.CNN_SUM: (1333, 249, 8, 5),
    KernelKind.SHA_BUFF: (0, 0, 4, 0),
    KernelKind.SHA_COMP: (1205, 628, 2, 0),
}

# the dynamic-execution controller extension itself
CONTROLLER_RESOURCES: Tuple[int, int, int, int] = (2100, 682, 0, 0)
