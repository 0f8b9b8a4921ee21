"""Command-line front end: ``mbsarah {fetch,run,reference,theory,sweep}``."""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import data as datamod
from .harness import (SpecError, compute_reference, load_spec, run_experiment, run_sweep)
from .objective import make_objective
from .theory import TheoryInputs, report


def _spec_from_args(args):
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seeds=(args.seed,))
    if args.output is not None:
        spec = replace(spec, output_dir=args.output)
    if args.normalize:
        spec.dataset.normalize = True
    if args.passes_include_stepsize:
        spec = replace(spec, passes_include_stepsize=True)
    return spec


def cmd_fetch(args):
    sources = datamod.load_source_config(args.sources)
    ds, hit = datamod.fetch_dataset(args.name, args.cache_dir, sources)
    state = "cache hit, no download" if hit else "downloaded"
    print(f"{args.name}: {state}; n={ds.n} dim={ds.dim} -> {datamod.cache_path(args.name, args.cache_dir)}")
    return 0


def cmd_run(args):
    spec = _spec_from_args(args)
    result = run_experiment(spec, jobs=args.jobs)
    print(f"P(w*) = {result.reference_value!r}")
    for (label, seed), trace in result.traces.items():
        last = trace.records[-1]
        print(f"{label} seed={seed} passes={last.effective_passes:.3f} "
              f"subopt={last.objective_value - result.reference_value:.3e}")
    for label, seed, err in result.failed:
        print(f"DIVERGED: {label} seed={seed}: {err}", file=sys.stderr)
    print(f"outputs written to {result.output_dir}")
    return 0 if result.ok else 3


def cmd_reference(args):
    spec = _spec_from_args(args)
    obj = make_objective(spec.objective, spec.dataset.load(), spec.lam)
    w, value = compute_reference(obj, spec.reference, cache_dir=Path(spec.output_dir) / "reference_cache")
    g = obj.full_gradient(w)
    print(f"P(w*) = {value!r}")
    print(f"||grad P(w*)||^2 = {float(g @ g):.3e}")
    return 0


def cmd_sweep(args):
    spec = _spec_from_args(args)
    if spec.sweep is None:
        raise SpecError("spec file has no [sweep] section")
    result, best = run_sweep(spec, jobs=args.jobs)
    print(f"best by passes to target {spec.target:g}: {best}")
    print(f"outputs written to {Path(spec.output_dir) / 'sweep'}")
    return 0 if result.ok else 3


def cmd_theory(args):
    t = TheoryInputs(args.L, args.mu, args.n, args.b, args.bH, args.gamma, args.m, args.epsilon)
    rep = report(t)
    holds = "true" if rep.condition_13_holds else "false"
    print(f"step-size condition: LHS = {rep.condition_13_lhs:.6g}, holds={holds}")
    print(f"rho_m = {rep.rho_m:.6g}, linear_rate_valid={'true' if rep.linear_rate_valid else 'false'}")
    print(rep.to_text(), end="")
    return 0


def _add_run_flags(p):
    p.add_argument("spec", help="experiment spec file (INI sections, see README)")
    p.add_argument("--seed", type=int, default=None, help="run a single seed instead of the spec's seed list")
    p.add_argument("--output", default=None, help="output directory (overrides output_dir in the spec)")
    p.add_argument("--normalize", action="store_true", help="scale every feature row to unit norm")
    p.add_argument("--passes-include-stepsize", action="store_true",
                   help="count step-size gradient evaluations in the effective-pass axis of summaries")
    p.add_argument("--jobs", type=int, default=1, help="parallel (run x seed) executions")


def build_parser():
    parser = argparse.ArgumentParser(prog="mbsarah", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download a LIBSVM dataset into the cache")
    p.add_argument("name", choices=sorted(datamod.DEFAULT_SOURCES))
    p.add_argument("--cache-dir", default="data_cache", help="cache directory (default: data_cache)")
    p.add_argument("--sources", default=None, help="key = value file overriding download urls/checksums")
    p.set_defaults(func=cmd_fetch)

    for name, func, helptext in [
        ("run", cmd_run, "run every configured solver over every seed and write CSV traces"),
        ("reference", cmd_reference, "compute (or load) the reference minimizer"),
        ("sweep", cmd_sweep, "grid over b, b_H, gamma, eta from the [sweep] section"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_run_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("theory", help="evaluate the step-size condition, rho_m and complexity estimates")
    p.add_argument("--L", type=float, required=True, help="smoothness constant")
    p.add_argument("--mu", type=float, required=True, help="strong convexity constant")
    p.add_argument("--n", type=int, required=True, help="number of components")
    p.add_argument("--b", type=int, required=True, help="gradient mini-batch size")
    p.add_argument("--bH", type=int, required=True, help="step-size mini-batch size")
    p.add_argument("--gamma", type=float, required=True, help="step scaling parameter")
    p.add_argument("--m", type=int, required=True, help="inner loop length")
    p.add_argument("--epsilon", type=float, default=1e-8, help="target accuracy on ||grad P||^2")
    p.set_defaults(func=cmd_theory)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SpecError, datamod.ParseError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except datamod.FetchError as exc:
        kind = "retriable" if exc.retriable else "fatal"
        print(f"error ({kind}): {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
