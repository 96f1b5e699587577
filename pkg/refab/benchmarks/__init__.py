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

from refab.benchmarks.generators import GeneratedProgram, gen_si_program
from refab.benchmarks.harness import (
    cycles_stable,
    report,
    run_comparison,
    run_program,
    run_suite,
    summary_table,
    write_csv,
)
from refab.benchmarks.oracles import (
    NetUpdates,
    ref_conv_layer,
    ref_sha3_256,
    ref_sift_match,
    ref_swe,
    ref_swe_fwave,
    ref_swe_hlle,
)
from refab.benchmarks.problems import (
    ConvLayerProblem,
    Problem,
    RiemannProblem,
    Sha3Problem,
    SiftProblem,
    load_problems,
    random_conv_layer,
    random_message,
    random_riemann,
    random_sift,
)


__all__ = [
    "ConvLayerProblem",
    "GeneratedProgram",
    "NetUpdates",
    "Problem",
    "RiemannProblem",
    "Sha3Problem",
    "SiftProblem",
    "cycles_stable",
    "gen_si_program",
    "load_problems",
    "random_conv_layer",
    "random_message",
    "random_riemann",
    "random_sift",
    "ref_conv_layer",
    "ref_sha3_256",
    "ref_sift_match",
    "ref_swe",
    "ref_swe_fwave",
    "ref_swe_hlle",
    "report",
    "run_comparison",
    "run_program",
    "run_suite",
    "summary_table",
    "write_csv",
]
