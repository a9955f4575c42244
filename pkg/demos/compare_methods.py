"""Race a few optimizers on a four-buoy farm and tabulate the results.

Run with ``python demos/compare_methods.py [out_dir]``. The budget is kept
small so the script finishes in seconds; the CLI equivalent is::

    wecfarm compare --n 4 --budget 600 --runs 4 \\
        --methods de,cmaes-nm,ls-nm-16,sls-nm-b2 --out demo_results
"""

import sys

from wecfarm.harness import ExperimentConfig, run_experiment

out = sys.argv[1] if len(sys.argv) > 1 else "demo_results"
config = ExperimentConfig(
    scenario="perth_like.scn",
    n=4,
    methods=("de", "cmaes-nm", "ls-nm-16", "sls-nm-b2"),
    runs=4,
    budget=600,
    out=out,
)


def progress(record):
    print(f"  {record.method:>10} seed {record.seed}: {record.best_fitness:10.1f} W "
          f"after {record.evaluations} evaluations")


print(f"{len(config.methods)} methods x {config.runs} seeds, budget {config.budget}")
result = run_experiment(config, progress)
table = result.table

print("\nmethod       median W     max W      std")
for m in table.methods:
    s = table.stats[m]
    print(f"{m:>10}  {s.median:9.1f}  {s.max:9.1f}  {s.std:7.1f}")

# With four runs per method the p-values can only flag large gaps.
print("\nrank-sum p-values against sls-nm-b2")
for m in table.methods:
    if m != "sls-nm-b2":
        print(f"{m:>10}  p = {table.pvalues[(m, 'sls-nm-b2')]:.3f}")

print(f"\nper-run traces, layouts and tables are in {out}/")
