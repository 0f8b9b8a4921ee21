"""Final suboptimality of MB-SARAH-RBB for several eta_0 values.

    python scripts/eta0_sensitivity.py                      # synthetic problem
    python scripts/eta0_sensitivity.py --spec scripts/specs/a8a_eta0.ini

Prints the spread (max/min) of final suboptimalities per seed; values within
a factor of 10 mean the first step does not matter at this tolerance.
"""
import argparse
from collections import defaultdict
from pathlib import Path

from mbsarah.harness import load_spec, run_experiment

DEFAULT_SPEC = Path(__file__).parent / "specs" / "synthetic_eta0.ini"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--spec", default=str(DEFAULT_SPEC))
    args = ap.parse_args()

    spec = load_spec(args.spec)
    result = run_experiment(spec)
    by_seed = defaultdict(dict)
    for (label, seed), trace in result.traces.items():
        by_seed[seed][label] = trace.records[-1].objective_value - result.reference_value
    for seed, finals in sorted(by_seed.items()):
        vals = list(finals.values())
        cells = "  ".join(f"{k}={v:.3e}" for k, v in finals.items())
        print(f"seed {seed}: {cells}  spread={max(vals) / min(vals):.2f}")


if __name__ == "__main__":
    main()
