"""Run an experiment spec and print a passes-to-target table per run label.

    python scripts/compare_runs.py scripts/specs/synthetic_rbb_vs_fixed.ini
    python scripts/compare_runs.py scripts/specs/a8a_rbb_vs_fixed.ini --sweep

With --sweep the spec's [sweep] grid (fixed-step MB-SARAH) is run as well and
the best swept configuration is printed next to the RBB runs.
"""
import argparse
import math
from collections import defaultdict

import numpy as np

from mbsarah.harness import load_spec, passes_to_target, run_experiment, run_sweep


def table(result, target, include_stepsize):
    rows = defaultdict(list)
    for (label, _), trace in result.traces.items():
        last = trace.records[-1].objective_value - result.reference_value
        rows[label].append((passes_to_target(trace, result.reference_value, target, include_stepsize), last))
    return rows


def show(rows, target):
    print(f"{'label':<28} {'passes to ' + format(target, 'g'):>18} {'final subopt':>14}")
    for label, vals in rows.items():
        passes = [p for p, _ in vals]
        mean = np.mean(passes) if all(math.isfinite(p) for p in passes) else math.inf
        print(f"{label:<28} {mean:>18.2f} {np.mean([s for _, s in vals]):>14.3e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("spec")
    ap.add_argument("--sweep", action="store_true", help="also run the [sweep] grid")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    spec = load_spec(args.spec)
    result = run_experiment(spec, jobs=args.jobs)
    print(f"P(w*) = {result.reference_value!r}   outputs: {result.output_dir}")
    show(table(result, spec.target, spec.passes_include_stepsize), spec.target)
    for label, seed, err in result.failed:
        print(f"diverged: {label} seed={seed} ({err})")
    if args.sweep:
        sweep_result, best = run_sweep(spec, jobs=args.jobs)
        rows = table(sweep_result, spec.target, spec.passes_include_stepsize)
        print(f"\nbest fixed step from sweep: {best}")
        show({best: rows[best]}, spec.target)


if __name__ == "__main__":
    main()
