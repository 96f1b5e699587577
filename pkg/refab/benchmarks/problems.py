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
Benchmark problem instances, their JSON/RFNN/raw-bytes loaders and seeded
random factories.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from refab.constants import App
from refab.core.defaults import DEFAULT_DRY_TOLERANCE, DEFAULT_GRAVITY


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SiftProblem:
    """
    Two descriptor vectors whose squared Euclidean distance is wanted.
    Components are float32 values (kept as Python floats).
    """

    a: Tuple[float, ...]
    b: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.a or len(self.a) != len(self.b):
            raise ValueError(
                f"descriptors must be nonempty and of equal length, "
                f"got {len(self.a)} and {len(self.b)}"
            )

    @property
    def n(self) -> int:
        return len(self.a)

    @staticmethod
    def from_arrays(a: Any, b: Any) -> SiftProblem:
        return SiftProblem(
            a=tuple(float(v) for v in np.asarray(a, dtype=np.float32)),
            b=tuple(float(v) for v in np.asarray(b, dtype=np.float32)),
        )


@dataclass(frozen=True)
class RiemannProblem:
    """
    One edge between two shallow-water cells: water heights, momenta and
    bathymetry on the left and right.
    """

    h_l: float
    h_r: float
    hu_l: float
    hu_r: float
    b_l: float
    b_r: float
    gravity: float = DEFAULT_GRAVITY
    dry_tolerance: float = DEFAULT_DRY_TOLERANCE

    def __post_init__(self) -> None:
        # NaN heights pass, they are how accelerator errors get exercised
        if self.h_l < 0 or self.h_r < 0:
            raise ValueError(
                f"water heights must be non-negative, got {self.h_l}, {self.h_r}"
            )

    @property
    def dry_l(self) -> bool:
        return bool(np.float32(self.h_l) <= np.float32(self.dry_tolerance))

    @property
    def dry_r(self) -> bool:
        return bool(np.float32(self.h_r) <= np.float32(self.dry_tolerance))

    @property
    def wet(self) -> bool:
        return not (self.dry_l or self.dry_r)


@dataclass(frozen=True, eq=False)
class ConvLayerProblem:
    """
    A quantized CNN layer: int8 pixels of shape (C, H, W), int8 3x3 weights
    of shape (C, 3, 3), followed by ReLU, 2x2 max pooling and requantization.
    """

    pixels: np.ndarray  # type: ignore[type-arg]
    weights: np.ndarray  # type: ignore[type-arg]
    scale: float = 1.0
    zero_point: int = 0

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3:
            raise ValueError(f"pixels must be (C, H, W), got {self.pixels.shape}")
        channels, height, width = self.pixels.shape
        if channels < 1 or height < 3 or width < 3:
            raise ValueError(f"image too small: {self.pixels.shape}")
        if self.weights.shape != (channels, 3, 3):
            raise ValueError(
                f"weights must be ({channels}, 3, 3), got {self.weights.shape}"
            )
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if not -128 <= self.zero_point <= 127:
            raise ValueError(f"zero point {self.zero_point} outside int8")

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[2])

    @property
    def pooled_shape(self) -> Tuple[int, int]:
        return ((self.height - 2) // 2, (self.width - 2) // 2)


@dataclass(frozen=True)
class Sha3Problem:
    """A message to hash; `second` asks for a second, concurrent digest."""

    message: bytes
    second: Optional[bytes] = None

    @property
    def dual(self) -> bool:
        return self.second is not None


Problem = Union[SiftProblem, RiemannProblem, ConvLayerProblem, Sha3Problem]


def _sift_from_dict(raw_dict: Dict[str, Any]) -> SiftProblem:
    return SiftProblem.from_arrays(raw_dict["a"], raw_dict["b"])


def _riemann_from_dict(raw_dict: Dict[str, Any]) -> RiemannProblem:
    return RiemannProblem(
        h_l=float(raw_dict["h_l"]),
        h_r=float(raw_dict["h_r"]),
        hu_l=float(raw_dict.get("hu_l", 0.0)),
        hu_r=float(raw_dict.get("hu_r", 0.0)),
        b_l=float(raw_dict.get("b_l", 0.0)),
        b_r=float(raw_dict.get("b_r", 0.0)),
        gravity=float(raw_dict.get("gravity", DEFAULT_GRAVITY)),
        dry_tolerance=float(raw_dict.get("dry_tolerance", DEFAULT_DRY_TOLERANCE)),
    )


def _conv_from_dict(raw_dict: Dict[str, Any], base_dir: str) -> ConvLayerProblem:
    from refab.cnn_kernels import read_rfnn

    def tensor(key: str) -> np.ndarray:  # type: ignore[type-arg]
        value = raw_dict[key]
        if isinstance(value, str):
            return read_rfnn(os.path.join(base_dir, value))
        return np.asarray(value, dtype=np.int8)

    return ConvLayerProblem(
        pixels=tensor("pixels"),
        weights=tensor("weights"),
        scale=float(raw_dict.get("scale", 1.0)),
        zero_point=int(raw_dict.get("zero_point", 0)),
    )


def load_problems(app: str, path: str) -> List[Problem]:
    """
    Read benchmark inputs from a file.

    SHA3 takes the raw file bytes as one message. The other applications
    take a JSON document holding either one problem object or a list of
    them; CNN tensors may be given inline or as paths to RFNN files,
    relative to the JSON file.

    Raises:
        ValueError: for an unknown application or malformed content.
    """

    logger.debug(f"loading {app} problems from '{path}'")
    if app == App.SHA3:
        with open(path, "rb") as message_file:
            return [Sha3Problem(message=message_file.read())]
    if app not in App.ALL:
        raise ValueError(f"unknown application '{app}'")
    with open(path) as problem_file:
        document = json.load(problem_file)
    entries = document if isinstance(document, list) else [document]
    base_dir = os.path.dirname(os.path.abspath(path))
    problems: List[Problem] = []
    for entry in entries:
        try:
            if app == App.SIFT:
                problems.append(_sift_from_dict(entry))
            elif app == App.SWE:
                problems.append(_riemann_from_dict(entry))
            else:
                problems.append(_conv_from_dict(entry, base_dir))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed {app} problem in '{path}': {exc!r}")
    logger.debug(f"loaded {len(problems)} {app} problem(s)")
    return problems


def random_sift(seed: int, n: int = 128) -> SiftProblem:
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 1.0, size=n).astype(np.float32)
    b = rng.uniform(0.0, 1.0, size=n).astype(np.float32)
    return SiftProblem.from_arrays(a, b)


def random_riemann(
    seed: int, *, dry_left: bool = False, dry_right: bool = False
) -> RiemannProblem:
    """Random edge with wet heights in [0.5, 10] unless a side is asked dry."""
    rng = np.random.default_rng(seed)

    def f32(value: float) -> float:
        return float(np.float32(value))

    h_l, h_r = (f32(h) for h in rng.uniform(0.5, 10.0, size=2))
    hu_l, hu_r = (f32(hu) for hu in rng.uniform(-5.0, 5.0, size=2))
    b_l, b_r = (f32(b) for b in rng.uniform(-2.0, 0.0, size=2))
    if dry_left:
        h_l, hu_l = 0.0, 0.0
    if dry_right:
        h_r, hu_r = 0.0, 0.0
    return RiemannProblem(h_l=h_l, h_r=h_r, hu_l=hu_l, hu_r=hu_r, b_l=b_l, b_r=b_r)


def random_conv_layer(
    seed: int,
    *,
    channels: int = 3,
    height: int = 8,
    width: int = 8,
    scale: float = 0.0625,
    zero_point: int = 0,
) -> ConvLayerProblem:
    rng = np.random.default_rng(seed)
    pixels = rng.integers(-128, 128, size=(channels, height, width), dtype=np.int8)
    weights = rng.integers(-128, 128, size=(channels, 3, 3), dtype=np.int8)
    return ConvLayerProblem(
        pixels=pixels, weights=weights, scale=scale, zero_point=zero_point
    )


def random_message(seed: int, length: int) -> Sha3Problem:
    rng = np.random.default_rng(seed)
    data = rng.integers(0, 256, size=length, dtype=np.uint8)
    return Sha3Problem(message=data.tobytes())
