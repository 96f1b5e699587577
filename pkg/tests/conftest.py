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

"""Shared helpers and fixtures: assembling small programs and running them."""

from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pytest

from refab.assembler import assemble
from refab.constants import KernelKind
from refab.controller import ControllerConfig, MachineState, reset, run
from refab.core.defaults import DEFAULT_MAX_CYCLES, DEFAULT_STALL_THRESHOLD
from refab.fabric import Fabric, FabricConfig
from refab.results import RunOutcome, TraceRecord

Streams = Dict[Tuple[int, int], Sequence[int]]


def machine_for(
    source: str,
    *,
    streams: Optional[Streams] = None,
    kinds: Optional[Sequence[KernelKind]] = None,
    stall_threshold: int = DEFAULT_STALL_THRESHOLD,
    max_cycles: int = DEFAULT_MAX_CYCLES,
) -> MachineState:
    """Assemble `source` and load it on a fabric matching its bindings."""
    image = assemble(source).image
    fabric = Fabric(
        FabricConfig(kinds=tuple(kinds) if kinds else image.slot_bindings)
    )
    for (slot, channel), words in (streams or {}).items():
        fabric.stream_push(slot, channel, words)
    return reset(
        image,
        ControllerConfig(stall_threshold=stall_threshold, max_cycles=max_cycles),
        fabric,
    )


def run_source(
    source: str, *, trace: bool = False, **kwargs: object
) -> Tuple[RunOutcome, MachineState]:
    state = machine_for(source, **kwargs)  # type: ignore[arg-type]
    return run(state, trace=trace), state


def retired_pcs(records: Optional[Iterable[TraceRecord]]) -> List[int]:
    return [record.pc for record in records or [] if record.event == "RETIRED"]


@pytest.fixture(scope="function")
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
