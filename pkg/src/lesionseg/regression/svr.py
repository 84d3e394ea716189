"""Epsilon-SVR with an RBF kernel, trained by SMO on the dual.

The dual is solved in the usual 2n-variable form: ``a[:n]`` are the
alpha multipliers (sign +1) and ``a[n:]`` the alpha* multipliers
(sign -1). Each step updates the maximal KKT-violating pair.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import NoSamples

C_DEFAULT = 100.0
GAMMA_DEFAULT = 0.5
EPSILON_DEFAULT = 0.2
TOL_DEFAULT = 1e-3
TAU = 1e-12


@dataclass(frozen=True, eq=False)
class SvrModel:
    support: np.ndarray = field(repr=False)
    coef: np.ndarray = field(repr=False)
    bias: float
    C: float = C_DEFAULT
    gamma: float = GAMMA_DEFAULT
    epsilon: float = EPSILON_DEFAULT

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if len(self.coef) == 0:
            return np.full(len(X), self.bias)
        return rbf_kernel(X, self.support, self.gamma) @ self.coef + self.bias

    def to_dict(self) -> dict:
        return {
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
            "bias": self.bias,
            "C": self.C,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        coef = np.asarray(d["coef"], dtype=np.float64)
        support = np.asarray(d["support"], dtype=np.float64).reshape(len(coef), -1)
        return cls(support, coef, float(d["bias"]), float(d["C"]), float(d["gamma"]),
                   float(d["epsilon"]))


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * |a - b|**2) for every row pair."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=2)
    return np.exp(-gamma * sq)


@njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    n = K.shape[0]
    m = 2 * n
    sign = np.empty(m)
    a = np.zeros(m)
    G = np.empty(m)
    for t in range(n):
        sign[t] = 1.0
        sign[t + n] = -1.0
        G[t] = eps - y[t]
        G[t + n] = eps + y[t]

    it = 0
    gap = np.inf
    while it < max_iter:
        gmax = -np.inf
        gmin = np.inf
        i = -1
        j = -1
        for t in range(m):
            v = -sign[t] * G[t]
            if (sign[t] > 0 and a[t] < C) or (sign[t] < 0 and a[t] > 0):
                if v > gmax:
                    gmax = v
                    i = t
            if (sign[t] > 0 and a[t] > 0) or (sign[t] < 0 and a[t] < C):
                if v < gmin:
                    gmin = v
                    j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            break
        it += 1

        ki = i % n
        kj = j % n
        qii = K[ki, ki]
        qjj = K[kj, kj]
        qij = sign[i] * sign[j] * K[ki, kj]
        old_i = a[i]
        old_j = a[j]
        if sign[i] != sign[j]:
            quad = qii + qjj + 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            quad = qii + qjj - 2.0 * qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = total

        di = a[i] - old_i
        dj = a[j] - old_j
        for t in range(m):
            kt = t % n
            G[t] += sign[t] * (sign[i] * K[ki, kt] * di + sign[j] * K[kj, kt] * dj)

    # offset: mean over free multipliers, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    free_sum = 0.0
    n_free = 0
    for t in range(m):
        yg = sign[t] * G[t]
        if a[t] >= C:
            if sign[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[t] <= 0:
            if sign[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            free_sum += yg
    if n_free > 0:
        rho = free_sum / n_free
    else:
        rho = 0.5 * (ub + lb)
    return a, rho, it, gap


def fit_dual(X, y, C: float = C_DEFAULT, gamma: float = GAMMA_DEFAULT,
             epsilon: float = EPSILON_DEFAULT, tol: float = TOL_DEFAULT,
             max_iter: int = 10_000_000) -> tuple[np.ndarray, float, int, float]:
    """Solve the dual; return ``(beta, bias, iterations, final_gap)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(y) == 0:
        raise NoSamples("cannot train an SVR on zero samples")
    n = len(y)
    K = rbf_kernel(X, X, gamma)
    a, rho, iters, gap = _smo(K, y, float(C), float(epsilon), float(tol), int(max_iter))
    return a[:n] - a[n:], float(-rho), int(iters), float(gap)


def train_svr(X, y, C: float = C_DEFAULT, gamma: float = GAMMA_DEFAULT,
              epsilon: float = EPSILON_DEFAULT, tol: float = TOL_DEFAULT) -> SvrModel:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    beta, bias, _, _ = fit_dual(X, y, C, gamma, epsilon, tol)
    keep = beta != 0
    return SvrModel(X[keep].copy(), beta[keep].copy(), bias, float(C), float(gamma),
                    float(epsilon))


def predict_svr(model: SvrModel, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = model.predict(x)
    return float(out[0]) if x.ndim == 1 else out


def dual_objective(beta: np.ndarray, X, y, gamma: float, epsilon: float) -> float:
    """-1/2 b'Kb - eps*sum|b| + y'b (to be maximized)."""
    K = rbf_kernel(X, X, gamma)
    return float(-0.5 * beta @ K @ beta - epsilon * np.abs(beta).sum() + np.asarray(y) @ beta)
