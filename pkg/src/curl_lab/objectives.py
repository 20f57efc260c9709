"""Separable convex objectives F(mu) = sum_{n=1}^N f_n(mu_n).

Objectives accept either an :class:`OccupancyMeasure` or a raw array of
shape (N + 1, X, A); raw arrays let the finite-difference oracle step
off the simplex. The n = 0 slice is fixed by mu_0 and never enters F.
"""
from __future__ import annotations

import abc

import numpy as np

from .mdp import DimensionError, MdpShape, OccupancyMeasure

ENTROPY_CLAMP = 1e-12


def _steps(mu) -> np.ndarray:
    arr = mu.probs if isinstance(mu, OccupancyMeasure) else np.asarray(mu, dtype=np.float64)
    return arr[1:]


class CurlObjective(abc.ABC):
    """Convex F with analytic gradient and a per-step Lipschitz constant ``lipschitz_l``."""

    shape: MdpShape
    lipschitz_l: float

    @abc.abstractmethod
    def step_values(self, mu) -> np.ndarray:
        """f_n(mu_n) for n = 1..N, shape (N,)."""

    @abc.abstractmethod
    def gradient(self, mu) -> np.ndarray:
        """grad f_n(mu_n)(x, a), shape (N, X, A)."""

    def value(self, mu) -> float:
        return float(self.step_values(mu).sum())

    @property
    def big_l(self) -> float:
        """Aggregate constant L = l * N."""
        return self.lipschitz_l * self.shape.horizon

    def _check(self, steps: np.ndarray) -> None:
        expected = (self.shape.horizon, self.shape.num_states, self.shape.num_actions)
        if steps.shape != expected:
            raise DimensionError(f"objective expects steps of shape {expected}, got {steps.shape}")


class EntropyObjective(CurlObjective):
    """f_n = <rho_n, log rho_n>; minimizing F maximizes state entropy."""

    name = "entropy"

    def __init__(self, shape: MdpShape, clamp: float = ENTROPY_CLAMP):
        self.shape = shape
        self.clamp = clamp
        self.lipschitz_l = float(abs(np.log(clamp))) + 1.0

    def step_values(self, mu) -> np.ndarray:
        steps = _steps(mu)
        self._check(steps)
        rho = steps.sum(axis=-1)
        live = rho > 0
        safe = np.where(live, rho, 1.0)
        return np.where(live, rho * np.log(safe), 0.0).sum(axis=-1)

    def gradient(self, mu) -> np.ndarray:
        steps = _steps(mu)
        self._check(steps)
        rho = steps.sum(axis=-1)
        g = np.log(np.maximum(rho, self.clamp)) + 1.0
        return np.repeat(g[..., None], steps.shape[-1], axis=-1)


class MultiObjective(CurlObjective):
    """f_n = sum_k (1 - rho_n(x_k))^2: squared shortfall of the mass on each target state."""

    name = "multi"

    def __init__(self, shape: MdpShape, targets):
        targets = [int(t) for t in targets]
        if not targets:
            raise ValueError("target set must be nonempty")
        for t in targets:
            if not 0 <= t < shape.num_states:
                raise ValueError(f"target state {t} out of range [0, {shape.num_states})")
        self.shape = shape
        self.targets = np.array(targets)
        self.lipschitz_l = 2.0

    def step_values(self, mu) -> np.ndarray:
        steps = _steps(mu)
        self._check(steps)
        rho = steps.sum(axis=-1)
        return ((1.0 - rho[:, self.targets]) ** 2).sum(axis=-1)

    def gradient(self, mu) -> np.ndarray:
        steps = _steps(mu)
        self._check(steps)
        rho = steps.sum(axis=-1)
        g = np.zeros_like(rho)
        # np.add.at so a repeated target counts twice, like the value
        np.add.at(g, (slice(None), self.targets), -2.0 * (1.0 - rho[:, self.targets]))
        return np.repeat(g[..., None], steps.shape[-1], axis=-1)


class LinearObjective(CurlObjective):
    """F(mu) = -<mu, r> for a reward array r of shape (N, X, A)."""

    name = "linear"

    def __init__(self, reward):
        reward = np.array(reward, dtype=np.float64)
        if reward.ndim != 3:
            raise DimensionError(f"reward must have shape (N, X, A), got {reward.shape}")
        if not np.all(np.isfinite(reward)):
            raise ValueError("reward entries must be finite")
        reward.setflags(write=False)
        n, x, a = reward.shape
        self.shape = MdpShape(x, a, n)
        self.reward = reward
        self.lipschitz_l = float(np.abs(reward).max())

    def step_values(self, mu) -> np.ndarray:
        steps = _steps(mu)
        self._check(steps)
        return -(steps * self.reward).sum(axis=(1, 2))

    def gradient(self, mu) -> np.ndarray:
        self._check(_steps(mu))
        return -self.reward


class SumObjective(CurlObjective):
    """Weighted sum sum_i w_i F_i; used for the averaged comparator problem."""

    def __init__(self, parts, weights=None):
        parts = list(parts)
        if not parts:
            raise ValueError("need at least one objective")
        weights = np.ones(len(parts)) if weights is None else np.asarray(weights, dtype=float)
        self.shape = parts[0].shape
        self.parts = parts
        self.weights = weights
        self.lipschitz_l = float(sum(w * p.lipschitz_l for w, p in zip(weights, parts)))

    def step_values(self, mu) -> np.ndarray:
        return sum(w * p.step_values(mu) for w, p in zip(self.weights, self.parts))

    def gradient(self, mu) -> np.ndarray:
        return sum(w * p.gradient(mu) for w, p in zip(self.weights, self.parts))


def entropy_objective(shape: MdpShape) -> EntropyObjective:
    return EntropyObjective(shape)


def multi_objective(shape: MdpShape, targets) -> MultiObjective:
    return MultiObjective(shape, targets)


def linear_objective(reward) -> LinearObjective:
    return LinearObjective(reward)


def finite_difference_gradient(obj: CurlObjective, mu, h: float = 1e-6) -> np.ndarray:
    """Central differences of ``obj.value`` in the ambient space, no re-projection."""
    if not 1e-8 <= h <= 1e-4:
        raise ValueError(f"step h={h} outside [1e-8, 1e-4]")
    base = mu.probs if isinstance(mu, OccupancyMeasure) else np.asarray(mu, dtype=np.float64)
    base = np.array(base)
    grad = np.empty(base[1:].shape)
    for idx in np.ndindex(grad.shape):
        full = (idx[0] + 1,) + idx[1:]
        orig = base[full]
        base[full] = orig + h
        up = obj.value(base)
        base[full] = orig - h
        down = obj.value(base)
        base[full] = orig
        grad[idx] = (up - down) / (2 * h)
    return grad
