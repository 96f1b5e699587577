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

import importlib.metadata
import os

import toml


def get_version() -> str:
    try:
        return importlib.metadata.version(__package__ or "refab")

    # not installed: read the version off pyproject.toml next to the package
    except importlib.metadata.PackageNotFoundError:
        dir_path = os.path.dirname(os.path.realpath(__file__))
        pyproject_path = os.path.join(dir_path, "..", "pyproject.toml")

        try:
            with open(pyproject_path, encoding="utf-8") as pyproject:
                pyproject_data = toml.loads(pyproject.read())
                return str(pyproject_data["tool"]["poetry"]["version"])

        except (FileNotFoundError, KeyError):
            return "unknown"


__version__: str = get_version()


# installs the TRACE-capable logger class before the other modules log
import refab.core.utils  # noqa: F401, E402

from refab.isa import (  # noqa: E402
    ProgramImage,
    Vliw,
    decode_vliw,
    encode_vliw,
    read_image,
    validate_program,
    write_image,
)
from refab.assembler import (  # noqa: E402
    AssemblyResult,
    assemble,
    disassemble,
)
from refab.fabric import (  # noqa: E402
    Fabric,
    FabricConfig,
)
from refab.controller import (  # noqa: E402
    ControllerConfig,
    MachineState,
    eval_flow,
    reset,
    run,
    step,
)
from refab.results import (  # noqa: E402
    Comparison,
    RunOutcome,
    Trap,
)

import refab.constants  # noqa: F401, E402
import refab.exceptions  # noqa: F401, E402


__all__ = [
    "AssemblyResult",
    "Comparison",
    "ControllerConfig",
    "Fabric",
    "FabricConfig",
    "MachineState",
    "ProgramImage",
    "RunOutcome",
    "Trap",
    "Vliw",
    "__version__",
    "assemble",
    "decode_vliw",
    "disassemble",
    "encode_vliw",
    "eval_flow",
    "read_image",
    "reset",
    "run",
    "step",
    "validate_program",
    "write_image",
]
