"""L2-regularized finite-sum objectives P(w) = (1/n) sum_i f_i(w).

Both objectives are linear models, so every mini-batch gradient has the
form ``X_S^T c / |S| + lam * w`` with ``c`` the derivative of the loss at the
margins ``X_S w``.
"""
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import expit

from .data import Dataset
from .linalg import DimensionError


class EvalCounter:
    """Monotone tally of component-gradient evaluations; one per solver run."""

    def __init__(self):
        self.count = 0

    def add(self, k):
        self.count += int(k)

    def __repr__(self):
        return f"EvalCounter({self.count})"


@dataclass(frozen=True)
class ObjectiveConstants:
    L: float
    mu: float
    n: int

    def __post_init__(self):
        if not (self.L >= self.mu > 0):
            raise ValueError(f"need L >= mu > 0, got L={self.L}, mu={self.mu}")

    @property
    def condition_number(self):
        return self.L / self.mu


def softplus_neg(t):
    """log(1 + exp(-t)) without overflow."""
    t = np.asarray(t, dtype=np.float64)
    return np.maximum(-t, 0.0) + np.log1p(np.exp(-np.abs(t)))


class _LinearModelObjective:
    kind = None

    def __init__(self, dataset: Dataset, lam: float):
        self.dataset = dataset
        self.lam = float(lam)
        self.X = dataset.matrix
        self.y = dataset.labels
        self.n = dataset.n
        self.dim = dataset.dim

    # loss of the margin t = x^T w (without the regularizer) and its derivative
    def _loss(self, t, y):
        raise NotImplementedError

    def _dloss(self, t, y):
        raise NotImplementedError

    def _check_w(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.dim,):
            raise DimensionError(f"w has shape {w.shape}, expected ({self.dim},)")
        return w

    def _rows(self, S):
        S = np.asarray(S, dtype=np.int64)
        if S.ndim != 1 or S.size == 0:
            raise ValueError("index set must be a non-empty 1-d collection")
        if S.min() < 0 or S.max() >= self.n:
            raise IndexError(f"index out of range for n={self.n}")
        return S, self.X[S]

    @staticmethod
    def _xt(Xs, c):
        if sparse.issparse(Xs):
            return Xs.T @ c
        return c @ Xs

    def value(self, w) -> float:
        w = self._check_w(w)
        t = self.X @ w
        return float(np.mean(self._loss(t, self.y)) + 0.5 * self.lam * (w @ w))

    def component_value(self, i, w) -> float:
        w = self._check_w(w)
        S, Xs = self._rows([i])
        t = Xs @ w
        return float(self._loss(t, self.y[S])[0] + 0.5 * self.lam * (w @ w))

    def minibatch_gradient(self, S, w, counter=None) -> np.ndarray:
        w = self._check_w(w)
        S, Xs = self._rows(S)
        c = self._dloss(Xs @ w, self.y[S])
        if counter is not None:
            counter.add(S.size)
        return self._xt(Xs, c) / S.size + self.lam * w

    def component_gradient(self, i, w, counter=None) -> np.ndarray:
        if not 0 <= i < self.n:
            raise IndexError(f"component {i} out of range for n={self.n}")
        return self.minibatch_gradient([i], w, counter)

    def full_gradient(self, w, counter=None) -> np.ndarray:
        w = self._check_w(w)
        c = self._dloss(self.X @ w, self.y)
        if counter is not None:
            counter.add(self.n)
        return self._xt(self.X, c) / self.n + self.lam * w

    def minibatch_gradient_diff(self, S, w, w_prev, counter=None) -> np.ndarray:
        """grad P_S(w) - grad P_S(w_prev); costs 2|S| component evaluations."""
        w = self._check_w(w)
        w_prev = self._check_w(w_prev)
        S, Xs = self._rows(S)
        ys = self.y[S]
        c = self._dloss(Xs @ w, ys) - self._dloss(Xs @ w_prev, ys)
        if counter is not None:
            counter.add(2 * S.size)
        return self._xt(Xs, c) / S.size + self.lam * (w - w_prev)

    def constants(self) -> ObjectiveConstants:
        raise NotImplementedError


class LogisticL2(_LinearModelObjective):
    """f_i(w) = log(1 + exp(-y_i x_i^T w)) + lam/2 ||w||^2."""

    kind = "logistic"

    def __init__(self, dataset, lam):
        if lam <= 0:
            raise ValueError("logistic objective needs lam > 0 for strong convexity")
        super().__init__(dataset, lam)

    def _loss(self, t, y):
        return softplus_neg(y * t)

    def _dloss(self, t, y):
        # d/dt log(1+exp(-y t)) = -y / (1 + exp(y t))
        return -y * expit(-y * t)

    def constants(self):
        return ObjectiveConstants(0.25 * float(self.dataset.row_norms_sq.max()) + self.lam, self.lam, self.n)


class RidgeL2(_LinearModelObjective):
    """f_i(w) = 1/2 (x_i^T w - y_i)^2 + lam/2 ||w||^2.

    ``mu`` includes the smallest eigenvalue of X^T X / n when ``dim`` is at
    most ``eig_dim_limit``; otherwise it falls back to ``lam``.
    """

    kind = "ridge"

    def __init__(self, dataset, lam, eig_dim_limit=500):
        if lam < 0:
            raise ValueError("lam must be non-negative")
        super().__init__(dataset, lam)
        self.eig_dim_limit = eig_dim_limit

    def _loss(self, t, y):
        return 0.5 * (t - y) ** 2

    def _dloss(self, t, y):
        return t - y

    def constants(self):
        L = float(self.dataset.row_norms_sq.max()) + self.lam
        mu = self.lam
        if self.dim <= self.eig_dim_limit:
            X = self.X.toarray() if sparse.issparse(self.X) else np.asarray(self.X)
            H = X.T @ X / self.n
            mu += max(float(np.linalg.eigvalsh(H)[0]), 0.0)
        return ObjectiveConstants(L, mu, self.n)


OBJECTIVES = {"logistic": LogisticL2, "ridge": RidgeL2}


def make_objective(kind, dataset, lam):
    try:
        return OBJECTIVES[kind](dataset, lam)
    except KeyError:
        raise ValueError(f"unknown objective {kind!r}") from None
