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

import logging
from typing import Any

import numpy as np

from refab.core.defaults import WORD_MASK


class CustomLogger(logging.Logger):
    def trace(self, msg: str, *args: Any, **kwargs: Any) -> None:
        if self.isEnabledFor(TRACE):
            self._log(TRACE, msg, args, **kwargs)


TRACE = 5

# Add a new TRACE logging level
logging.addLevelName(TRACE, "TRACE")

# Tell the logging system to use your custom logger
logging.setLoggerClass(CustomLogger)


logger = logging.getLogger(__name__)


def f32_from_word(word: int) -> np.float32:
    """Reinterpret the bits of a 32-bit word as an IEEE-754 binary32 value."""
    return np.uint32(word & WORD_MASK).view(np.float32)


def word_from_f32(value: Any) -> int:
    """Raw 32-bit pattern of a value once rounded to binary32."""
    return int(np.float32(value).view(np.uint32))


def i32_from_word(word: int) -> int:
    word &= WORD_MASK
    return word - (1 << 32) if word & 0x80000000 else word


def word_from_i32(value: int) -> int:
    return value & WORD_MASK
