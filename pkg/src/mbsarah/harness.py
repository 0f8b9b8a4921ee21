"""Experiment specs, reference minimizers, and CSV reporting.

An experiment spec is an INI-style file: one ``[experiment]`` section, an
optional ``[reference]`` section, one ``[run <label>]`` section per solver
configuration and an optional ``[sweep]`` section. See README.md.
"""
import configparser
import csv
import hashlib
import io
import itertools
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import data as datamod
from .objective import make_objective
from .solvers import CSV_COLUMNS, DivergenceError, Method, SolverConfig, fmt, run
from .stepsize import DEFAULT_ETA0, EpochBBRule, FixedRule, RBBRule
from .theory import TheoryInputs, report as theory_report

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DEFAULT_ETA_GRID = tuple(float(x) for x in np.logspace(-3, 0, 7))
TRACE_COLUMNS = ["label", "seed"] + CSV_COLUMNS + ["suboptimality"]


class SpecError(ValueError):
    pass


class BudgetExhaustedError(RuntimeError):
    def __init__(self, message, w, value, grad_norm_sq):
        super().__init__(message)
        self.w, self.value, self.grad_norm_sq = w, value, grad_norm_sq


@dataclass
class DatasetSource:
    kind: str  # "named", "synthetic" or "file"
    name: str = ""
    path: Optional[str] = None
    synthetic: Optional[datamod.SyntheticSpec] = None
    normalize: bool = False
    dim: Optional[int] = None
    task: str = datamod.CLASSIFICATION
    cache_dir: str = "data_cache"
    sources_file: Optional[str] = None

    def load(self):
        if self.kind == "synthetic":
            ds = datamod.generate_synthetic(self.synthetic)
        elif self.kind == "named":
            sources = datamod.load_source_config(self.sources_file)
            ds, _ = datamod.fetch_dataset(self.name, self.cache_dir, sources, self.task, self.dim)
        else:
            with open(self.path, "rb") as fh:
                ds = datamod.parse_libsvm(fh, self.task, self.dim, Path(self.path).stem)
        return datamod.normalize_rows(ds) if self.normalize else ds


@dataclass
class ReferencePolicy:
    """Long-horizon solve used for w*; ``method.step_rule=None`` means eta = 1/(2L)."""

    method: SolverConfig
    tolerance: float = 1e-16
    max_passes: float = 2000.0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("reference tolerance must be positive")


def default_reference_policy(n, tolerance=1e-16, max_passes=2000.0):
    cfg = SolverConfig(Method.MB_SARAH_FIXED, m=2 * n, b=1, step_rule=None, outer_count=1, seed=12345)
    return ReferencePolicy(cfg, tolerance, max_passes)


@dataclass
class RunSpec:
    label: str
    config: SolverConfig


@dataclass
class ExperimentSpec:
    dataset: DatasetSource
    objective: str
    lam: float
    runs: list
    reference: ReferencePolicy = None
    output_dir: str = "results"
    seeds: tuple = DEFAULT_SEEDS
    theory_epsilon: float = 1e-8
    target: float = 1e-6
    passes_include_stepsize: bool = False
    sweep: Optional[dict] = None

    def __post_init__(self):
        if not self.runs and self.sweep is None:
            raise SpecError("experiment needs at least one run")
        labels = [r.label for r in self.runs]
        if len(set(labels)) != len(labels):
            raise SpecError(f"run labels must be unique: {labels}")


# ---------------------------------------------------------------- parsing

_M_EXPR = re.compile(r"^\s*(\d*\.?\d*)\s*\*?\s*n\s*(?:/\s*b)?\s*$")


def parse_m(text, n, b):
    """Inner length: an integer, or ``n``, ``2n``, ``2n/b``, ``2*n/b``."""
    text = str(text).strip()
    if text.isdigit():
        return int(text)
    mt = _M_EXPR.match(text)
    if not mt:
        raise SpecError(f"cannot parse inner length {text!r}")
    k = float(mt.group(1)) if mt.group(1) else 1.0
    value = k * n / b if "/" in text else k * n
    return max(1, int(round(value)))


def _floats(text):
    return [float(x) for x in re.split(r"[,\s]+", text.strip()) if x]


def _ints(text):
    return [int(x) for x in re.split(r"[,\s]+", text.strip()) if x]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise SpecError(f"not a boolean: {text!r}")


def build_config(sec, n, label="run"):
    """SolverConfig from a mapping of spec keys (method, m, b, b_H, gamma, eta, eta_0, ...)."""
    try:
        method = Method(sec.get("method", "MB_SARAH_RBB").strip().upper())
    except ValueError:
        raise SpecError(f"[{label}] unknown method {sec.get('method')!r}") from None
    b = int(sec.get("b", 1))
    m = parse_m(sec.get("m", "2n/b"), n, b)
    eta_0 = float(sec.get("eta_0", DEFAULT_ETA0))
    if method in (Method.MB_SARAH_RBB, Method.MS2GD_RBB) and "eta" not in sec:
        if "b_H" not in sec:
            raise SpecError(f"[{label}] RBB methods need b_H")
        gamma = float(sec["gamma"]) if "gamma" in sec else None
        rule = RBBRule(int(sec["b_H"]), gamma, eta_0)
    elif method == Method.SVRG_BB:
        rule = EpochBBRule(eta_0)
    else:
        if "eta" not in sec:
            raise SpecError(f"[{label}] {method.value} needs a fixed step 'eta'")
        rule = FixedRule(float(sec["eta"]))
    return SolverConfig(
        method=method, m=m, b=b, step_rule=rule,
        outer_count=int(sec.get("outer_count", 10)),
        seed=int(sec.get("seed", 0)),
        sgd_decay=float(sec.get("sgd_decay", 0.0)),
    )


def _read_parser(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"spec file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep b_H case
    cp.read(path)
    if "experiment" not in cp:
        raise SpecError(f"{path}: missing [experiment] section")
    return cp


def _dataset_source(ex, base_dir):
    name = ex.get("dataset", "synthetic").strip()
    common = dict(
        normalize=_bool(ex.get("normalize", "false")),
        dim=int(ex["dim"]) if "dim" in ex else None,
        task=ex.get("task", datamod.CLASSIFICATION),
        cache_dir=str(base_dir / ex.get("cache_dir", "data_cache")),
        sources_file=str(base_dir / ex["sources"]) if "sources" in ex else None,
    )
    if name == "synthetic":
        syn = datamod.SyntheticSpec(
            n=int(ex.get("n", 1000)), d=int(ex.get("d", 20)),
            seed=int(ex.get("data_seed", 0)),
            condition_hint=float(ex.get("condition_hint", 10.0)),
            task=common["task"],
        )
        return DatasetSource("synthetic", name=name, synthetic=syn, **common)
    if name in datamod.DEFAULT_SOURCES or name.startswith("libsvm:"):
        return DatasetSource("named", name=name.removeprefix("libsvm:"), **common)
    return DatasetSource("file", name=name, path=str(base_dir / name), **common)


def dataset_size(source):
    if source.kind == "synthetic":
        return source.synthetic.n
    return source.load().n


def load_spec(path, n=None) -> ExperimentSpec:
    """Parse a spec file. ``n`` (dataset size) is needed to resolve ``m = 2n/b``;
    it is obtained by loading the dataset when not given."""
    cp = _read_parser(path)
    base_dir = Path(path).resolve().parent
    ex = cp["experiment"]
    source = _dataset_source(ex, base_dir)
    if n is None:
        n = dataset_size(source)
    runs = []
    for name in cp.sections():
        if name.startswith("run "):
            label = name[4:].strip()
            runs.append(RunSpec(label, build_config(cp[name], n, label)))
    ref = default_reference_policy(n)
    if "reference" in cp:
        r = cp["reference"]
        if "method" in r:
            cfg = build_config(r, n, "reference")
            cfg.outer_count = 1
            cfg.seed = int(r.get("seed", 12345))
        else:
            cfg = ref.method
        ref = ReferencePolicy(cfg, float(r.get("tolerance", 1e-16)), float(r.get("max_passes", 2000)))
    sweep = None
    if "sweep" in cp:
        sw = cp["sweep"]
        sweep = {
            "base": sw.get("base", "").strip(),
            "method": sw.get("method", "MB_SARAH_FIXED").strip().upper(),
            "b": _ints(sw["b"]) if "b" in sw else None,
            "b_H": _ints(sw["b_H"]) if "b_H" in sw else None,
            "gamma": _floats(sw["gamma"]) if "gamma" in sw else None,
            "eta": _floats(sw["eta"]) if "eta" in sw else list(DEFAULT_ETA_GRID),
            "eta_0": _floats(sw["eta_0"]) if "eta_0" in sw else None,
            "m": sw.get("m", "2n/b"),
            "outer_count": int(sw.get("outer_count", 10)),
        }
    out = ex.get("output_dir", "results")
    return ExperimentSpec(
        dataset=source,
        objective=ex.get("objective", "logistic").strip(),
        lam=float(ex.get("lambda", 0.01)),
        runs=runs,
        reference=ref,
        output_dir=str((base_dir / out).resolve()),
        seeds=tuple(_ints(ex["seeds"])) if "seeds" in ex else DEFAULT_SEEDS,
        theory_epsilon=float(ex.get("theory_epsilon", 1e-8)),
        target=float(ex.get("target", 1e-6)),
        passes_include_stepsize=_bool(ex.get("passes_include_stepsize", "false")),
        sweep=sweep,
    )


# ---------------------------------------------------------------- reference

def _reference_key(obj, tolerance):
    h = hashlib.sha256()
    h.update(obj.dataset.content_hash().encode())
    h.update(f"|{obj.kind}|{obj.lam!r}|{tolerance!r}".encode())
    return h.hexdigest()[:32]


def compute_reference(obj, policy: ReferencePolicy, cache_dir=None):
    """Return ``(w*, P(w*))`` with ``||grad P(w*)||^2 <= policy.tolerance``.

    Runs the policy's solver one outer loop at a time from the current
    iterate. Results are cached in ``cache_dir`` keyed by dataset content,
    objective kind, lambda and tolerance.
    """
    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"reference-{_reference_key(obj, policy.tolerance)}.json"
        if cache_file.exists():
            payload = json.loads(cache_file.read_text())
            return np.array(payload["w"], dtype=np.float64), float(payload["value"])

    cfg = policy.method
    if cfg.step_rule is None:
        cfg = replace(cfg, step_rule=FixedRule(0.5 / obj.constants().L))
    w = np.zeros(obj.dim) if cfg.w0 is None else np.asarray(cfg.w0, dtype=np.float64)
    g = obj.full_gradient(w)
    best = (float(g @ g), w)
    passes = 0.0
    chunk = 0
    while best[0] > policy.tolerance:
        if passes >= policy.max_passes:
            gn, wb = best
            raise BudgetExhaustedError(
                f"reference tolerance {policy.tolerance:g} not reached in {policy.max_passes:g} passes "
                f"(best ||grad||^2 = {gn:.3e})", wb, obj.value(wb), gn)
        trace = run(obj, replace(cfg, w0=w, outer_count=1, seed=cfg.seed + chunk))
        chunk += 1
        passes += trace.records[-1].effective_passes
        w = trace.final_w
        gn = trace.records[-1].grad_norm_sq
        if gn < best[0]:
            best = (gn, w)
    w_star = best[1]
    value = obj.value(w_star)
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache_file.with_suffix(".tmp")
        tmp.write_text(json.dumps({"w": [float(x) for x in w_star], "value": value,
                                   "grad_norm_sq": best[0]}))
        tmp.replace(cache_file)
    return w_star, value


# ---------------------------------------------------------------- running

def theory_for(obj, cfg, epsilon):
    rule = cfg.step_rule
    if not isinstance(rule, RBBRule):
        return None
    c = obj.constants()
    t = TheoryInputs(c.L, c.mu, obj.n, cfg.b, rule.b_H, rule.gamma, cfg.m, epsilon)
    if obj.n < 2:
        return None
    return theory_report(t)


@dataclass
class ExperimentResult:
    output_dir: Path
    reference_value: float
    traces: dict = field(default_factory=dict)  # (label, seed) -> RunTrace
    failed: list = field(default_factory=list)  # (label, seed, message)

    @property
    def ok(self):
        return not self.failed


def _trace_rows(label, seed, trace, p_star):
    for row in trace.rows():
        yield [label, seed] + row + [row[3] - p_star]


def _write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([x if isinstance(x, str) else fmt(x) for x in row])
    path.write_text(buf.getvalue())


def passes_to_target(trace, p_star, target, include_stepsize=False):
    for r in trace.records:
        if r.objective_value - p_star <= target:
            return r.passes_incl_stepsize if include_stepsize else r.effective_passes
    return math.inf


def _execute(obj, jobs, tasks):
    def one(task):
        label, seed, cfg = task
        try:
            return label, seed, run(obj, replace(cfg, seed=seed)), None
        except DivergenceError as exc:
            return label, seed, exc.trace, str(exc)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, tasks))
    return [one(t) for t in tasks]


def run_experiment(spec: ExperimentSpec, jobs=1, obj=None) -> ExperimentResult:
    """Run every (run x seed) pair and write CSV traces, theory reports and a summary."""
    out = Path(spec.output_dir)
    if obj is None:
        obj = make_objective(spec.objective, spec.dataset.load(), spec.lam)
    _, p_star = compute_reference(obj, spec.reference, cache_dir=out / "reference_cache")
    result = ExperimentResult(out, p_star)

    tasks = [(r.label, seed, r.config) for r in spec.runs for seed in spec.seeds]
    outcomes = _execute(obj, jobs, tasks)

    combined = []
    summary = []
    for label, seed, trace, err in outcomes:
        result.traces[(label, seed)] = trace
        rows = list(_trace_rows(label, seed, trace, p_star))
        combined += rows
        _write_csv(out / "traces" / f"{label}__seed{seed}.csv", TRACE_COLUMNS, rows)
        if err:
            result.failed.append((label, seed, err))
        last = trace.records[-1] if trace.records else None
        summary.append([
            label, seed, "diverged" if err else "ok",
            last.objective_value if last else math.nan,
            (last.objective_value - p_star) if last else math.nan,
            last.effective_passes if last else 0.0,
            passes_to_target(trace, p_star, spec.target, spec.passes_include_stepsize),
            trace.fallback_total,
        ])
    _write_csv(out / "combined.csv", TRACE_COLUMNS, combined)
    _write_csv(out / "summary.csv",
               ["label", "seed", "status", "final_value", "final_suboptimality", "passes",
                "passes_to_target", "fallbacks"], summary)

    for r in spec.runs:
        _write_mean_trace(out / "mean" / f"{r.label}.csv", r.label,
                          [result.traces[(r.label, s)] for s in spec.seeds], p_star,
                          spec.passes_include_stepsize)
        rep = theory_for(obj, r.config, spec.theory_epsilon)
        text = rep.to_text() if rep is not None else "applicable = false\n"
        (out / "theory").mkdir(parents=True, exist_ok=True)
        (out / "theory" / f"{r.label}.txt").write_text(text)
    (out / "reference.txt").write_text(f"objective = {spec.objective}\nlambda = {spec.lam!r}\n"
                                       f"p_star = {p_star!r}\n")
    for label, seed, err in result.failed:
        log.error("run %s seed %s failed: %s", label, seed, err)
    return result


def _write_mean_trace(path, label, traces, p_star, include_stepsize):
    n_rec = min(len(t.records) for t in traces)
    rows = []
    for k in range(n_rec):
        recs = [t.records[k] for t in traces]
        passes = np.mean([r.passes_incl_stepsize if include_stepsize else r.effective_passes for r in recs])
        vals = np.array([r.objective_value for r in recs])
        gns = np.array([r.grad_norm_sq for r in recs])
        rows.append([label, recs[0].outer_index, passes, vals.mean(), gns.mean(), vals.mean() - p_star])
    _write_csv(path, ["label", "outer", "passes", "value", "grad_norm_sq", "suboptimality"], rows)


# ---------------------------------------------------------------- sweep

def sweep_runs(spec: ExperimentSpec, n):
    """Expand the [sweep] grid into labelled RunSpecs."""
    sw = spec.sweep
    base = {"method": sw["method"], "m": sw["m"], "outer_count": str(sw["outer_count"])}
    if sw.get("base"):
        match = [r for r in spec.runs if r.label == sw["base"]]
        if not match:
            raise SpecError(f"sweep base {sw['base']!r} is not a run label")
        c = match[0].config
        base["method"] = c.method.value
        base["b"] = str(c.b)
        if c.b_H is not None:
            base["b_H"] = str(c.b_H)
    axes = {k: sw[k] for k in ("b", "b_H", "gamma", "eta", "eta_0") if sw.get(k)}
    method = Method(base["method"])
    if method in (Method.MB_SARAH_RBB, Method.MS2GD_RBB):
        axes.pop("eta", None)
    names = list(axes)
    runs = []
    for combo in itertools.product(*(axes[k] for k in names)):
        sec = dict(base)
        sec.update({k: str(v) for k, v in zip(names, combo)})
        label = "sweep_" + "_".join(f"{k}{v:g}" if isinstance(v, float) else f"{k}{v}" for k, v in zip(names, combo))
        runs.append(RunSpec(label, build_config(sec, n, label)))
    return runs


def run_sweep(spec: ExperimentSpec, jobs=1):
    """Run the sweep grid; returns the ExperimentResult and the best label by mean passes to target."""
    obj = make_objective(spec.objective, spec.dataset.load(), spec.lam)
    runs = sweep_runs(spec, obj.n)
    sub = replace(spec, runs=runs, sweep=None, output_dir=str(Path(spec.output_dir) / "sweep"))
    result = run_experiment(sub, jobs=jobs, obj=obj)
    scores = []
    for r in runs:
        ptt = [passes_to_target(result.traces[(r.label, s)], result.reference_value, spec.target,
                                spec.passes_include_stepsize) for s in spec.seeds]
        final = np.mean([result.traces[(r.label, s)].records[-1].objective_value for s in spec.seeds])
        scores.append((float(np.mean(ptt)), float(final) if np.isfinite(final) else math.inf, r.label))
    scores.sort()
    _write_csv(Path(sub.output_dir) / "ranking.csv", ["mean_passes_to_target", "mean_final_value", "label"],
               [[a, b, c] for a, b, c in scores])
    return result, scores[0][2] if scores else None
