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
Software reference implementations the fabric results are checked against.

These never touch the simulator: they work on the problem descriptions
with numpy scalars (float32 unless told otherwise) and hashlib, evaluating
the same sequence of roundings the microcode performs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Callable, List, Tuple

import numpy as np

from refab.benchmarks.problems import (
    ConvLayerProblem,
    RiemannProblem,
    Sha3Problem,
    SiftProblem,
)
from refab.exceptions import OracleDomainException


SIFT_LANES = 4


@dataclass(frozen=True)
class NetUpdates:
    """
    Net updates of one Riemann solve: what flows into the left and the right
    cell, and the fastest wave speed.
    """

    h_left: Any
    hu_left: Any
    h_right: Any
    hu_right: Any
    max_speed: Any

    def as_tuple(self) -> Tuple[Any, Any, Any, Any, Any]:
        return (self.h_left, self.hu_left, self.h_right, self.hu_right, self.max_speed)


def ref_sift_match(problem: SiftProblem) -> np.float32:
    """
    Squared distance with four interleaved float32 partial sums, each step
    rounded after the subtraction, the square and the addition, then reduced
    as (acc0 + acc1) + (acc2 + acc3).
    """

    with np.errstate(all="ignore"):
        acc = [np.float32(0.0)] * SIFT_LANES
        for i, (a, b) in enumerate(zip(problem.a, problem.b)):
            diff = np.float32(a) - np.float32(b)
            acc[i % SIFT_LANES] = acc[i % SIFT_LANES] + diff * diff
        return np.float32((acc[0] + acc[1]) + (acc[2] + acc[3]))


def _minimum(a: Any, b: Any) -> Any:
    if a < b:
        return a
    if b < a:
        return b
    if np.isnan(a) or np.isnan(b):
        return a + b
    return a if np.signbit(a) else b


def _maximum(a: Any, b: Any) -> Any:
    if a > b:
        return a
    if b > a:
        return b
    if np.isnan(a) or np.isnan(b):
        return a + b
    return b if np.signbit(a) else a


class _Edge:
    """Edge states converted to the working precision."""

    def __init__(self, problem: RiemannProblem, dtype: Any) -> None:
        self.t: Callable[[Any], Any] = np.dtype(dtype).type
        t = self.t
        self.h_l, self.h_r = t(problem.h_l), t(problem.h_r)
        self.hu_l, self.hu_r = t(problem.hu_l), t(problem.hu_r)
        self.b_l, self.b_r = t(problem.b_l), t(problem.b_r)
        self.g = t(problem.gravity)
        self.half = t(0.5)
        self.zero = t(0.0)


def _roe(e: _Edge) -> Tuple[Any, Any, Any, Any, Any, Any]:
    u_l = e.hu_l / e.h_l
    u_r = e.hu_r / e.h_r
    sq_l = np.sqrt(e.h_l)
    sq_r = np.sqrt(e.h_r)
    u_roe = (u_l * sq_l + u_r * sq_r) / (sq_l + sq_r)
    h_roe = (e.h_l + e.h_r) * e.half
    gh_roe = e.g * h_roe
    c_roe = np.sqrt(gh_roe)
    return u_l, u_r, u_roe, c_roe, gh_roe, h_roe


def _decompose(
    e: _Edge, u_l: Any, u_r: Any, gh_roe: Any, s1: Any, s2: Any
) -> List[Any]:
    """Split the flux jump into two f-waves and sort them by speed sign."""
    df0 = e.hu_r - e.hu_l
    dm = e.hu_r * u_r - e.hu_l * u_l
    dhb = (e.h_r - e.h_l) + (e.b_r - e.b_l)
    df1 = dm + gh_roe * dhb
    ds = s2 - s1
    beta1 = (s2 * df0 - df1) / ds
    beta2 = (df1 - s1 * df0) / ds
    left = [e.zero, e.zero]
    right = [e.zero, e.zero]
    waves = ((beta1, beta1 * s1, s1), (beta2, beta2 * s2, s2))
    for wave_h, wave_hu, speed in waves:
        if speed < 0:
            left = [left[0] + wave_h, left[1] + wave_hu]
        elif speed > 0:
            right = [right[0] + wave_h, right[1] + wave_hu]
        else:
            half_h, half_hu = wave_h * e.half, wave_hu * e.half
            left = [left[0] + half_h, left[1] + half_hu]
            right = [right[0] + half_h, right[1] + half_hu]
    max_speed = _maximum(np.abs(s1), np.abs(s2))
    return [left[0], left[1], right[0], right[1], max_speed]


def ref_swe_fwave(problem: RiemannProblem, dtype: Any = np.float32) -> NetUpdates:
    """
    F-wave solve with Roe speeds for an edge where both cells are wet.

    Raises:
        OracleDomainException: if either cell is dry.
    """

    if not problem.wet:
        raise OracleDomainException(
            f"f-wave needs two wet cells, got h_l={problem.h_l}, h_r={problem.h_r}"
        )
    with np.errstate(all="ignore"):
        e = _Edge(problem, dtype)
        u_l, u_r, u_roe, c_roe, gh_roe, _ = _roe(e)
        s1 = u_roe - c_roe
        s2 = u_roe + c_roe
        return NetUpdates(*_decompose(e, u_l, u_r, gh_roe, s1, s2))


def ref_swe_hlle(problem: RiemannProblem, dtype: Any = np.float32) -> NetUpdates:
    """
    HLLE-type solve with Einfeldt speeds. A dry cell next to a wet one is
    treated as a reflecting wall and receives no update; two dry cells
    exchange nothing.
    """

    with np.errstate(all="ignore"):
        e = _Edge(problem, dtype)
        if problem.dry_l and problem.dry_r:
            return NetUpdates(e.zero, e.zero, e.zero, e.zero, e.zero)
        if problem.dry_r:
            e.h_r, e.hu_r, e.b_r = e.h_l, -e.hu_l, e.b_l
        elif problem.dry_l:
            e.h_l, e.hu_l, e.b_l = e.h_r, -e.hu_r, e.b_r
        u_l, u_r, u_roe, c_roe, gh_roe, _ = _roe(e)
        c_l = np.sqrt(e.g * e.h_l)
        c_r = np.sqrt(e.g * e.h_r)
        s1 = _minimum(u_l - c_l, u_roe - c_roe)
        s2 = _maximum(u_r + c_r, u_roe + c_roe)
        updates = _decompose(e, u_l, u_r, gh_roe, s1, s2)
        if problem.dry_l:
            updates[0] = updates[1] = e.zero
        if problem.dry_r:
            updates[2] = updates[3] = e.zero
        return NetUpdates(*updates)


def ref_swe(problem: RiemannProblem, dtype: Any = np.float32) -> NetUpdates:
    """The solver the fabric dispatches to: f-wave when wet, HLLE otherwise."""
    if problem.wet:
        return ref_swe_fwave(problem, dtype)
    return ref_swe_hlle(problem, dtype)


def ref_quantize(value: int, scale: float, zero_point: int) -> int:
    with np.errstate(over="ignore"):
        scaled = np.rint(np.float32(value) * np.float32(scale))
    return int(np.clip(np.float64(scaled) + zero_point, -128, 127))


def ref_conv_layer(problem: ConvLayerProblem) -> np.ndarray:  # type: ignore[type-arg]
    """
    Valid 3x3 convolution summed over channels, ReLU, 2x2 max pooling with
    the odd trailing row/column dropped, then requantization to int8.
    Returns an int8 array of the pooled shape.
    """

    pixels = problem.pixels.astype(np.int64)
    weights = problem.weights.astype(np.int64)
    _, height, width = pixels.shape
    conv = np.zeros((height - 2, width - 2), dtype=np.int64)
    for i in range(3):
        for j in range(3):
            window = pixels[:, i : i + height - 2, j : j + width - 2]
            conv += np.tensordot(weights[:, i, j], window, axes=1)
    relu = np.maximum(conv, 0)
    pooled_h, pooled_w = problem.pooled_shape
    out = np.zeros((pooled_h, pooled_w), dtype=np.int8)
    for y in range(pooled_h):
        for x in range(pooled_w):
            best = int(relu[2 * y : 2 * y + 2, 2 * x : 2 * x + 2].max())
            out[y, x] = ref_quantize(best, problem.scale, problem.zero_point)
    return out


def ref_sha3_256(message: bytes) -> bytes:
    return hashlib.sha3_256(message).digest()


def ref_sha3(problem: Sha3Problem) -> List[bytes]:
    digests = [ref_sha3_256(problem.message)]
    if problem.second is not None:
        digests.append(ref_sha3_256(problem.second))
    return digests
