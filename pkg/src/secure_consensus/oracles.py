"""Plaintext reference dynamics used as oracles for the encrypted pipeline.

Nothing here touches ciphertexts: the discrete-time oracle iterates the Perron
matrix ``P = I - eps * L`` directly and the continuous-time oracle integrates
``dx/dt = -L(t) x`` with explicit Euler steps.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np


class OracleError(ValueError):
    pass


def disagreement(states: Sequence[float]) -> float:
    if len(states) == 0:
        raise ValueError("disagreement of an empty state vector")
    return float(max(states) - min(states))


def laplacian(weights: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
        raise OracleError("weight matrix must be square")
    if not np.array_equal(weights, weights.T):
        raise OracleError("weight matrix must be symmetric")
    if np.any(np.diag(weights) != 0):
        raise OracleError("weight matrix must have a zero diagonal")
    return np.diag(weights.sum(axis=1)) - weights


def perron(weights: np.ndarray, epsilon: float) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return np.eye(w.shape[0]) - epsilon * laplacian(w)


def weight_matrix(num_nodes: int, edge_weights: dict[tuple[int, int], float]) -> np.ndarray:
    w = np.zeros((num_nodes, num_nodes))
    for (i, j), a in edge_weights.items():
        w[i, j] = w[j, i] = a
    return w


def plaintext_oracle_dt(
    x0: Sequence[float], weight_schedule: Sequence[np.ndarray], epsilon: float
) -> np.ndarray:
    """Iterate ``x[k+1] = P(k) x[k]``; returns an array of shape (K+1, M)."""
    x = np.asarray(x0, dtype=float)
    out = [x.copy()]
    for w in weight_schedule:
        x = perron(w, epsilon) @ x
        out.append(x.copy())
    return np.array(out)


def plaintext_oracle_ct(
    x0: Sequence[float],
    weight_fn: Callable[[float], np.ndarray],
    dt: float,
    horizon: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Euler-integrate ``dx/dt = -L(t) x`` up to ``horizon``.

    Returns ``(times, states)``. Raises if a step would be unstable, i.e. if
    ``dt`` times the largest weighted degree reaches 1.
    """
    if dt <= 0 or horizon < 0:
        raise OracleError("dt must be positive and horizon non-negative")
    x = np.asarray(x0, dtype=float)
    steps = int(round(horizon / dt))
    times = [0.0]
    out = [x.copy()]
    for s in range(steps):
        t = s * dt
        lap = laplacian(weight_fn(t))
        if dt * np.max(np.diag(lap), initial=0.0) >= 1:
            raise OracleError(f"unstable Euler step at t={t}: dt * max degree >= 1")
        x = x - dt * (lap @ x)
        times.append((s + 1) * dt)
        out.append(x.copy())
    return np.array(times), np.array(out)
