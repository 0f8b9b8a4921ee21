"""Step-size rules: fixed, random Barzilai-Borwein (scaled), per-epoch BB."""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

DEFAULT_ETA0 = 0.1
SMALL_BH_LIMIT = 50


class DegenerateStepError(ArithmeticError):
    """The two iterates (or snapshots) coincide, so no curvature pair exists."""


def default_gamma(b_H: int) -> float:
    return 0.1 if b_H < SMALL_BH_LIMIT else 1.0


@dataclass(frozen=True)
class SafeguardPolicy:
    eps_denominator: float = 1e-12
    eta_max: float = 1e3
    eta_min: float = 1e-12

    def __post_init__(self):
        if not (0 < self.eta_min <= self.eta_max):
            raise ValueError("need 0 < eta_min <= eta_max")
        if self.eps_denominator <= 0:
            raise ValueError("eps_denominator must be positive")

    def clamp(self, eta):
        return min(max(eta, self.eta_min), self.eta_max)


DEFAULT_POLICY = SafeguardPolicy()


class Step(NamedTuple):
    eta: float
    fallback: bool


def _bb_quotient(dw_sq, curvature, policy):
    """||dw||^2 / (dw^T dg), or None when the curvature is below the floor."""
    if dw_sq == 0.0:
        raise DegenerateStepError("iterates coincide")
    if not curvature >= policy.eps_denominator * dw_sq:
        return None
    return dw_sq / curvature


def rbb_step(w_k, w_prev, g_k, g_prev, b_H, gamma, policy=DEFAULT_POLICY, previous=None) -> float:
    """Scaled random BB step  (gamma / b_H) ||dw||^2 / (dw^T dg).

    ``g_k`` and ``g_prev`` must be mean gradients over one shared subsample.
    When the curvature is too small the ``previous`` step is returned.
    """
    return rbb_step_flagged(w_k, w_prev, g_k, g_prev, b_H, gamma, policy, previous).eta


def rbb_step_flagged(w_k, w_prev, g_k, g_prev, b_H, gamma, policy=DEFAULT_POLICY, previous=None) -> Step:
    dw = np.asarray(w_k, dtype=np.float64) - np.asarray(w_prev, dtype=np.float64)
    dg = np.asarray(g_k, dtype=np.float64) - np.asarray(g_prev, dtype=np.float64)
    return _scaled_step(float(dw @ dw), float(dw @ dg), gamma / b_H, policy, previous)


def _scaled_step(dw_sq, curvature, scale, policy, previous):
    q = _bb_quotient(dw_sq, curvature, policy)
    if q is None:
        if previous is None:
            raise ArithmeticError("non-positive curvature and no previous step to fall back on")
        return Step(previous, True)
    return Step(policy.clamp(scale * q), False)


def upper_bound(mu, gamma, b_H) -> float:
    """Ceiling gamma / (mu b_H) on every RBB step for mu-strongly convex components."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    return gamma / (mu * b_H)


def epoch_bb_step(snapshot_k, snapshot_prev, fullgrad_k, fullgrad_prev, m, policy=DEFAULT_POLICY, previous=None) -> float:
    """BB step from consecutive outer snapshots, divided by the inner length m."""
    ds = np.asarray(snapshot_k, dtype=np.float64) - np.asarray(snapshot_prev, dtype=np.float64)
    dg = np.asarray(fullgrad_k, dtype=np.float64) - np.asarray(fullgrad_prev, dtype=np.float64)
    return _scaled_step(float(ds @ ds), float(ds @ dg), 1.0 / m, policy, previous).eta


# Stateful rules, one instance per solver run.

@dataclass
class FixedRule:
    eta: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("step size must be positive")

    @property
    def eta_0(self):
        return self.eta

    def initial(self):
        return self.eta

    def fresh(self):
        return FixedRule(self.eta)


@dataclass
class RBBRule:
    """Per-iteration random BB step; ``gamma=None`` picks the default for ``b_H``."""

    b_H: int
    gamma: float = None
    eta_0: float = DEFAULT_ETA0
    policy: SafeguardPolicy = field(default_factory=SafeguardPolicy)

    def __post_init__(self):
        if self.gamma is None:
            self.gamma = default_gamma(self.b_H)
        if self.b_H < 1 or self.gamma <= 0 or self.eta_0 <= 0:
            raise ValueError("RBB rule needs b_H >= 1, gamma > 0, eta_0 > 0")
        self.last = self.eta_0

    def initial(self):
        return self.eta_0

    def update(self, dw_sq, curvature) -> Step:
        """Step from ``||dw||^2`` and ``dw^T dg`` on the step-size subsample."""
        step = _scaled_step(dw_sq, curvature, self.gamma / self.b_H, self.policy, self.last)
        self.last = step.eta
        return step

    def fresh(self):
        return RBBRule(self.b_H, self.gamma, self.eta_0, self.policy)


@dataclass
class EpochBBRule:
    eta_0: float = DEFAULT_ETA0
    policy: SafeguardPolicy = field(default_factory=SafeguardPolicy)

    def __post_init__(self):
        if self.eta_0 <= 0:
            raise ValueError("eta_0 must be positive")
        self.last = self.eta_0

    def initial(self):
        return self.eta_0

    def update(self, ds_sq, curvature, m) -> Step:
        step = _scaled_step(ds_sq, curvature, 1.0 / m, self.policy, self.last)
        self.last = step.eta
        return step

    def fresh(self):
        return EpochBBRule(self.eta_0, self.policy)
