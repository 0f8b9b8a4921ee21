"""Convergence condition, contraction factor and complexity estimates for MB-SARAH-RBB.

The complexity functions return order-level estimates (counts of component
gradient evaluations with the constants as written), not guarantees.
"""
import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class TheoryInputs:
    L: float
    mu: float
    n: int
    b: int
    b_H: int
    gamma: float
    m: int
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.L >= self.mu > 0:
            raise ValueError("need L >= mu > 0")
        if not 1 <= self.b <= self.n:
            raise ValueError("need 1 <= b <= n")
        if self.b_H < 1 or self.gamma <= 0 or self.m < 0 or self.epsilon <= 0:
            raise ValueError("need b_H >= 1, gamma > 0, m >= 0, epsilon > 0")


def check_condition_13(t: TheoryInputs):
    """Left-hand side of the one-outer-loop condition and whether it is <= 0.

        L^2 gamma^2 / (mu^2 b b_H^2) * (n - b)/(n - 1) * m - (1 - L gamma / (mu b_H))
    """
    if t.n < 2:
        raise ValueError("condition needs n >= 2")
    variance = (t.L ** 2 * t.gamma ** 2) / (t.mu ** 2 * t.b * t.b_H ** 2) * ((t.n - t.b) / (t.n - 1))
    lhs = variance * t.m - (1.0 - t.L * t.gamma / (t.mu * t.b_H))
    return lhs, lhs <= 0


def rho_m(t: TheoryInputs) -> float:
    return t.b_H / (t.gamma * (t.m + 1))


def complexity_single_loop(t: TheoryInputs, gap=None) -> float:
    """n + 2 m with m = ceil(mu b_H / (gamma eps)), or ceil(2 mu b_H gap / (gamma eps)) given the gap P(w_0) - P(w*)."""
    scale = t.mu * t.b_H / (t.gamma * t.epsilon)
    m = math.ceil(scale if gap is None else 2.0 * gap * scale)
    return float(t.n + 2 * m)


def complexity_multi_loop(t: TheoryInputs) -> float:
    """(n + mu b_H / (gamma eps)) log(1/eps)."""
    if not 0 < t.epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1) for log(1/epsilon)")
    return (t.n + t.mu * t.b_H / (t.gamma * t.epsilon)) * math.log(1.0 / t.epsilon)


def feasible_gamma(L, mu, n, b, b_H, m=1, tol=1e-12, max_iter=200):
    """Largest gamma (to ``tol``) found by bisection for which the condition holds."""
    hi = mu * b_H / L  # at or beyond this the condition fails whenever b < n
    lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= 0:
            break
        if check_condition_13(TheoryInputs(L, mu, n, b, b_H, mid, m))[1]:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    if lo <= 0:
        raise ArithmeticError("no feasible gamma found")
    return lo


@dataclass(frozen=True)
class TheoryReport:
    condition_13_lhs: float
    condition_13_holds: bool
    rho_m: float
    linear_rate_valid: bool
    single_loop_complexity: float
    multi_loop_complexity: float
    gamma_exceeds_epsilon: bool
    inputs: TheoryInputs

    def to_text(self) -> str:
        items = {f"input.{k}": v for k, v in asdict(self.inputs).items()}
        for k, v in asdict(self).items():
            if k != "inputs":
                items[k] = v
        lines = []
        for k, v in items.items():
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def report(t: TheoryInputs) -> TheoryReport:
    lhs, holds = check_condition_13(t)
    rho = rho_m(t)
    multi = complexity_multi_loop(t) if t.epsilon < 1 else math.nan
    return TheoryReport(
        condition_13_lhs=lhs,
        condition_13_holds=holds,
        rho_m=rho,
        linear_rate_valid=rho < 1,
        single_loop_complexity=complexity_single_loop(t),
        multi_loop_complexity=multi,
        gamma_exceeds_epsilon=t.gamma > t.epsilon,
        inputs=t,
    )
