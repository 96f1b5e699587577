import logging
import os
import sys

from dotenv import load_dotenv

from refab.benchmarks import (
    random_conv_layer,
    random_message,
    random_riemann,
    random_sift,
    run_suite,
    summary_table,
)
from refab.constants import App
from refab.fabric import FabricConfig


sys.path.append("../")

load_dotenv()

logging.basicConfig(level=logging.INFO)


# Grab the seed and the repeat count from the environment, if given
seed = int(os.environ.get("REFAB_SEED", "0"))
repeat = int(os.environ.get("REFAB_REPEAT", "3"))

# One handful of problems per application
problems = {
    App.SIFT: [random_sift(seed + i, n=128) for i in range(4)],
    App.SWE: [
        random_riemann(seed),
        random_riemann(seed + 1, dry_left=True),
        random_riemann(seed + 2, dry_right=True),
    ],
    App.CNN: [random_conv_layer(seed, channels=3, height=16, width=16)],
    App.SHA3: [random_message(seed, 0), random_message(seed + 1, 300)],
}

results = []
for app, app_problems in problems.items():
    # Each application runs on its default slot layout
    fabric_cfg = FabricConfig.for_app(app)
    results += run_suite(app, app_problems, fabric_cfg, repeat=repeat, jobs=2)

print(summary_table(results))

# Every result must agree with its software reference
mismatched = [result for result in results if not result.matched]
if mismatched:
    print(f"{len(mismatched)} result(s) differ from the reference")
    sys.exit(1)
