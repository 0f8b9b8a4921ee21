"""Outer/inner-loop stochastic solvers and their convergence traces.

Every run owns its RNG streams, evaluation counters and step rule, so runs
over a shared objective are independent. Mini-batch index sets are drawn
without replacement; the gradient batch and the step-size batch come from
two separate streams spawned from the run seed.
"""
import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .objective import EvalCounter
from .stepsize import DegenerateStepError, EpochBBRule, FixedRule, RBBRule, Step


class Method(str, enum.Enum):
    MB_SARAH_RBB = "MB_SARAH_RBB"
    MB_SARAH_FIXED = "MB_SARAH_FIXED"
    MS2GD_RBB = "MS2GD_RBB"
    MS2GD_FIXED = "MS2GD_FIXED"
    SVRG = "SVRG"
    SVRG_BB = "SVRG_BB"
    SGD = "SGD"


_ALLOWED_RULES = {
    Method.MB_SARAH_RBB: (RBBRule, FixedRule),
    Method.MB_SARAH_FIXED: (FixedRule,),
    Method.MS2GD_RBB: (RBBRule, FixedRule),
    Method.MS2GD_FIXED: (FixedRule,),
    Method.SVRG: (FixedRule,),
    Method.SVRG_BB: (EpochBBRule,),
    Method.SGD: (FixedRule,),
}


class DivergenceError(ArithmeticError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class SolverConfig:
    method: Method
    m: int
    step_rule: object
    outer_count: int = 10
    b: int = 1
    seed: int = 0
    w0: Optional[np.ndarray] = None
    sgd_decay: float = 0.0
    dense_trace: bool = False
    # called as callback(outer, k, w_k, v_k, eta_k) on every inner iteration
    callback: Optional[Callable] = None

    def __post_init__(self):
        self.method = Method(self.method)

    @property
    def b_H(self):
        return getattr(self.step_rule, "b_H", None)

    def validate(self, n):
        if not 1 <= self.b <= n:
            raise ValueError(f"need 1 <= b <= n, got b={self.b}, n={n}")
        if self.m < 1 or self.outer_count < 1:
            raise ValueError("need m >= 1 and outer_count >= 1")
        if not isinstance(self.step_rule, _ALLOWED_RULES[self.method]):
            raise ValueError(f"{self.method.value} cannot use {type(self.step_rule).__name__}")
        if self.b_H is not None and not 1 <= self.b_H <= n:
            raise ValueError(f"need 1 <= b_H <= n, got b_H={self.b_H}, n={n}")
        if self.sgd_decay < 0:
            raise ValueError("sgd_decay must be non-negative")


@dataclass
class TraceRecord:
    outer_index: int
    effective_passes: float
    passes_incl_stepsize: float
    objective_value: float
    grad_norm_sq: float
    step_min: float
    step_mean: float
    step_max: float
    fallback_count: int


@dataclass
class InnerStep:
    outer_index: int
    k: int
    eta: float
    fallback: bool
    dw_sq: float = float("nan")
    curvature: float = float("nan")


CSV_COLUMNS = ["outer", "passes", "passes_incl_stepsize", "value", "grad_norm_sq",
               "step_min", "step_mean", "step_max", "fallbacks"]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class RunTrace:
    method: Method
    seed: int
    n: int
    initial_value: float
    initial_grad_norm_sq: float
    records: list = field(default_factory=list)
    final_w: Optional[np.ndarray] = None
    total_component_grad_evals: int = 0
    total_stepsize_grad_evals: int = 0
    inner: list = field(default_factory=list)

    def rows(self):
        for r in self.records:
            yield [r.outer_index, r.effective_passes, r.passes_incl_stepsize, r.objective_value,
                   r.grad_norm_sq, r.step_min, r.step_mean, r.step_max, r.fallback_count]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows():
            w.writerow([fmt(x) for x in row])
        return buf.getvalue()

    @property
    def fallback_total(self):
        return sum(r.fallback_count for r in self.records)

    @property
    def values(self):
        return np.array([r.objective_value for r in self.records])

    @property
    def grad_norms_sq(self):
        return np.array([r.grad_norm_sq for r in self.records])


def sample_without_replacement(n, k, rng) -> np.ndarray:
    """Uniform random k-subset of range(n) drawn from ``rng`` (a numpy Generator)."""
    if not 1 <= k <= n:
        raise ValueError(f"cannot draw {k} of {n} without replacement")
    return rng.choice(n, k, replace=False)


def sarah_estimator_update(v_prev, obj, S, w_k, w_prev, counter=None) -> np.ndarray:
    """Recursive estimator grad P_S(w_k) - grad P_S(w_prev) + v_prev."""
    return obj.minibatch_gradient_diff(S, w_k, w_prev, counter) + v_prev


def svrg_estimator(obj, S, w_k, snapshot, fullgrad_snapshot, counter=None) -> np.ndarray:
    """Snapshot-corrected estimator grad P_S(w_k) - grad P_S(snapshot) + grad P(snapshot)."""
    return obj.minibatch_gradient_diff(S, w_k, snapshot, counter) + fullgrad_snapshot


class _Run:
    """Shared bookkeeping for one solver run."""

    def __init__(self, obj, cfg):
        cfg.validate(obj.n)
        self.obj, self.cfg = obj, cfg
        self.n = obj.n
        ss = np.random.SeedSequence(cfg.seed)
        batch_seq, step_seq = ss.spawn(2)
        self.rng_batch = np.random.default_rng(batch_seq)
        self.rng_step = np.random.default_rng(step_seq)
        self.counter = EvalCounter()
        self.step_counter = EvalCounter()
        self.rule = cfg.step_rule.fresh()
        w0 = np.zeros(obj.dim) if cfg.w0 is None else np.array(cfg.w0, dtype=np.float64)
        self.w_tilde = w0
        g0 = obj.full_gradient(w0)
        self.trace = RunTrace(cfg.method, cfg.seed, obj.n, obj.value(w0), float(g0 @ g0))
        self.steps = []
        self.fallbacks = 0

    def sample(self, k, rng):
        return sample_without_replacement(self.n, k, rng)

    def inner_hook(self, outer, k, w, v, eta, step=None, dw_sq=np.nan, curvature=np.nan):
        self.steps.append(eta)
        if step is not None and step.fallback:
            self.fallbacks += 1
        if self.cfg.dense_trace:
            fb = bool(step.fallback) if step is not None else False
            self.trace.inner.append(InnerStep(outer, k, eta, fb, dw_sq, curvature))
        if self.cfg.callback is not None:
            self.cfg.callback(outer, k, w, v, eta)

    def end_outer(self, s, w):
        self.w_tilde = w
        obj = self.obj
        with np.errstate(all="ignore"):
            val = obj.value(w)
            g = obj.full_gradient(w)
        steps = np.array(self.steps) if self.steps else np.array([np.nan])
        self.trace.records.append(TraceRecord(
            outer_index=s,
            effective_passes=self.counter.count / self.n,
            passes_incl_stepsize=(self.counter.count + self.step_counter.count) / self.n,
            objective_value=val,
            grad_norm_sq=float(g @ g),
            step_min=float(steps.min()),
            step_mean=float(steps.mean()),
            step_max=float(steps.max()),
            fallback_count=self.fallbacks,
        ))
        self.steps = []
        self.fallbacks = 0
        self.sync()
        if not (np.isfinite(val) and np.all(np.isfinite(w))):
            raise DivergenceError(f"{self.cfg.method.value} diverged at outer loop {s}", self.trace)

    def sync(self):
        self.trace.final_w = self.w_tilde
        self.trace.total_component_grad_evals = self.counter.count
        self.trace.total_stepsize_grad_evals = self.step_counter.count

    def rbb_step(self, w, w_prev, b_H):
        S_H = self.sample(b_H, self.rng_step)
        dw = w - w_prev
        dg = self.obj.minibatch_gradient_diff(S_H, w, w_prev, self.step_counter)
        dw_sq, curv = float(dw @ dw), float(dw @ dg)
        try:
            step = self.rule.update(dw_sq, curv)
        except DegenerateStepError:
            step = Step(self.rule.last, True)
        return step, dw_sq, curv


def _run_recursive_or_snapshot(obj, cfg, recursive):
    """Loop shared by MB-SARAH(-RBB) and mS2GD(-RBB).

    Per outer loop: v_0 = full gradient at the snapshot, w_1 = w_0 - eta_0 v_0,
    then m - 1 stochastic steps; the new snapshot is the last iterate w_m.
    """
    run = _Run(obj, cfg)
    use_rbb = isinstance(run.rule, RBBRule)
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(1, cfg.outer_count + 1):
            w_prev = run.w_tilde
            v = obj.full_gradient(w_prev, run.counter)
            fullgrad = v
            eta = run.rule.initial()
            run.inner_hook(s, 0, w_prev, v, eta)
            w = w_prev - eta * v
            for k in range(1, cfg.m):
                S = run.sample(cfg.b, run.rng_batch)
                if recursive:
                    v = sarah_estimator_update(v, obj, S, w, w_prev, run.counter)
                else:
                    v = svrg_estimator(obj, S, w, run.w_tilde, fullgrad, run.counter)
                if use_rbb:
                    step, dw_sq, curv = run.rbb_step(w, w_prev, cfg.b_H)
                    eta = step.eta
                    run.inner_hook(s, k, w, v, eta, step, dw_sq, curv)
                else:
                    run.inner_hook(s, k, w, v, eta)
                w_prev, w = w, w - eta * v
            run.end_outer(s, w)
    return run.trace


def run_mb_sarah_rbb(obj, cfg) -> RunTrace:
    return _run_recursive_or_snapshot(obj, cfg, recursive=True)


def run_mb_sarah_fixed(obj, cfg) -> RunTrace:
    return _run_recursive_or_snapshot(obj, cfg, recursive=True)


def run_ms2gd_rbb(obj, cfg) -> RunTrace:
    """mS2GD with the unscaled random BB step (gamma forced to 1)."""
    rule = cfg.step_rule
    if isinstance(rule, RBBRule) and rule.gamma != 1.0:
        cfg = _replace_rule(cfg, RBBRule(rule.b_H, 1.0, rule.eta_0, rule.policy))
    return _run_recursive_or_snapshot(obj, cfg, recursive=False)


def run_ms2gd_fixed(obj, cfg) -> RunTrace:
    return _run_recursive_or_snapshot(obj, cfg, recursive=False)


def _replace_rule(cfg, rule):
    from dataclasses import replace
    return replace(cfg, step_rule=rule)


def _run_svrg_loop(obj, cfg, bb):
    # Johnson-Zhang form: m stochastic steps per epoch, all sampled
    run = _Run(obj, cfg)
    prev_snapshot = prev_fullgrad = None
    eta = run.rule.initial() if bb else run.rule.eta
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(1, cfg.outer_count + 1):
            snapshot = run.w_tilde
            fullgrad = obj.full_gradient(snapshot, run.counter)
            step = None
            if bb and prev_snapshot is not None:
                ds = snapshot - prev_snapshot
                dg = fullgrad - prev_fullgrad
                try:
                    step = run.rule.update(float(ds @ ds), float(ds @ dg), cfg.m)
                except DegenerateStepError:
                    step = Step(run.rule.last, True)
                eta = step.eta
            w = snapshot
            for k in range(cfg.m):
                S = run.sample(cfg.b, run.rng_batch)
                v = svrg_estimator(obj, S, w, snapshot, fullgrad, run.counter)
                run.inner_hook(s, k, w, v, eta, step if k == 0 else None)
                w = w - eta * v
            prev_snapshot, prev_fullgrad = snapshot, fullgrad
            run.end_outer(s, w)
    return run.trace


def run_svrg(obj, cfg) -> RunTrace:
    return _run_svrg_loop(obj, cfg, bb=False)


def run_svrg_bb(obj, cfg) -> RunTrace:
    """SVRG whose step is recomputed once per epoch from consecutive snapshots."""
    return _run_svrg_loop(obj, cfg, bb=True)


def run_sgd(obj, cfg) -> RunTrace:
    """Mini-batch SGD; step eta / (1 + decay t). One outer loop = m iterations."""
    run = _Run(obj, cfg)
    t = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(1, cfg.outer_count + 1):
            w = run.w_tilde
            for k in range(cfg.m):
                S = run.sample(cfg.b, run.rng_batch)
                v = obj.minibatch_gradient(S, w, run.counter)
                eta = run.rule.eta / (1.0 + cfg.sgd_decay * t)
                run.inner_hook(s, k, w, v, eta)
                w = w - eta * v
                t += 1
            run.end_outer(s, w)
    return run.trace


RUNNERS = {
    Method.MB_SARAH_RBB: run_mb_sarah_rbb,
    Method.MB_SARAH_FIXED: run_mb_sarah_fixed,
    Method.MS2GD_RBB: run_ms2gd_rbb,
    Method.MS2GD_FIXED: run_ms2gd_fixed,
    Method.SVRG: run_svrg,
    Method.SVRG_BB: run_svrg_bb,
    Method.SGD: run_sgd,
}


def run(obj, cfg) -> RunTrace:
    return RUNNERS[Method(cfg.method)](obj, cfg)
