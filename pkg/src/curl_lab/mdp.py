"""Finite-horizon tabular MDP primitives.

Array layout used throughout the package (0-based storage):

* kernel ``probs[n - 1, x, a, x']`` holds p_n(x'|x, a) for n = 1..N
* policy ``probs[n - 1, x, a]`` holds pi_n(a|x) for n = 1..N
* occupancy ``probs[n, x, a]`` holds mu_n(x, a) for n = 0..N

so the step-n transition moves mass from ``occupancy[n - 1]`` to
``occupancy[n]`` through ``kernel[n - 1]`` and ``policy[n - 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-9
DRIFT_TOL = 1e-12
TINY = 1e-300


class DimensionError(ValueError):
    """Array shapes do not agree with each other or with an MdpShape."""


class DomainError(ValueError):
    """A value lies outside the domain an operation is defined on."""


@dataclass(frozen=True)
class MdpShape:
    num_states: int
    num_actions: int
    horizon: int

    def __post_init__(self):
        for name in ("num_states", "num_actions", "horizon"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def _check_entries(probs: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(probs)):
        raise DomainError(f"{what}: non-finite entries")
    if probs.size and (probs.min() < -SIMPLEX_TOL or probs.max() > 1 + SIMPLEX_TOL):
        raise DomainError(f"{what}: entries outside [0, 1]")


def _check_rows(sums: np.ndarray, what: str) -> None:
    bad = np.abs(sums - 1.0) > SIMPLEX_TOL
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DomainError(f"{what}: slice {idx} sums to {sums[idx]!r}, not 1")


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """p_n(x'|x, a) stored as an array of shape (N, X, A, X)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 4 or probs.shape[1] != probs.shape[3]:
            raise DimensionError(f"kernel must have shape (N, X, A, X), got {probs.shape}")
        _check_entries(probs, "kernel")
        _check_rows(probs.sum(axis=-1), "kernel")
        object.__setattr__(self, "probs", probs)

    @property
    def shape(self) -> MdpShape:
        n, x, a, _ = self.probs.shape
        return MdpShape(x, a, n)


@dataclass(frozen=True, eq=False)
class Policy:
    """pi_n(a|x) stored as an array of shape (N, X, A)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 3:
            raise DimensionError(f"policy must have shape (N, X, A), got {probs.shape}")
        _check_entries(probs, "policy")
        _check_rows(probs.sum(axis=-1), "policy")
        object.__setattr__(self, "probs", probs)

    @property
    def shape(self) -> MdpShape:
        n, x, a = self.probs.shape
        return MdpShape(x, a, n)

    @classmethod
    def uniform(cls, shape: MdpShape) -> "Policy":
        a = shape.num_actions
        return cls(np.full((shape.horizon, shape.num_states, a), 1.0 / a))


@dataclass(frozen=True, eq=False)
class InitialDistribution:
    """The fixed law mu_0 of the first state-action couple, shape (X, A)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 2:
            raise DimensionError(f"initial distribution must have shape (X, A), got {probs.shape}")
        _check_entries(probs, "initial distribution")
        _check_rows(np.array(probs.sum()), "initial distribution")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def dirac(cls, num_states: int, num_actions: int, state: int, action: int = 0):
        probs = np.zeros((num_states, num_actions))
        probs[state, action] = 1.0
        return cls(probs)


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """mu_n(x, a) for n = 0..N, shape (N + 1, X, A)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 3 or probs.shape[0] < 2:
            raise DimensionError(f"occupancy must have shape (N + 1, X, A), got {probs.shape}")
        _check_entries(probs, "occupancy")
        _check_rows(probs.sum(axis=(1, 2)), "occupancy")
        object.__setattr__(self, "probs", probs)

    @property
    def shape(self) -> MdpShape:
        n1, x, a = self.probs.shape
        return MdpShape(x, a, n1 - 1)

    @property
    def rho(self) -> np.ndarray:
        """State marginals rho_n(x), shape (N + 1, X)."""
        return self.probs.sum(axis=-1)

    @property
    def mu0(self) -> InitialDistribution:
        return InitialDistribution(self.probs[0])


def _require_same(*shapes: MdpShape) -> None:
    first = shapes[0]
    for other in shapes[1:]:
        if other != first:
            raise DimensionError(f"shape mismatch: {first} vs {other}")


def occupancy_from_policy(policy: Policy, kernel: TransitionKernel,
                          mu0: InitialDistribution) -> OccupancyMeasure:
    """Forward Bellman flow: push mu_{n-1} through p_n, then act with pi_n."""
    _require_same(policy.shape, kernel.shape)
    if mu0.probs.shape != policy.probs.shape[1:]:
        raise DimensionError(f"mu0 shape {mu0.probs.shape} does not match policy {policy.probs.shape}")
    horizon = policy.shape.horizon
    out = np.empty((horizon + 1,) + mu0.probs.shape)
    out[0] = mu0.probs
    num_states = mu0.probs.shape[0]
    flat_kernel = kernel.probs.reshape(horizon, -1, num_states)
    for n in range(1, horizon + 1):
        rho = out[n - 1].ravel() @ flat_kernel[n - 1]
        out[n] = rho[:, None] * policy.probs[n - 1]
        total = out[n].sum()
        if abs(total - 1.0) > DRIFT_TOL:
            out[n] /= total
    return OccupancyMeasure(out)


def policy_from_occupancy(mu: OccupancyMeasure) -> Policy:
    """Invert the flow: pi_n(a|x) = mu_n(x,a)/rho_n(x), uniform where rho_n(x) = 0."""
    steps = mu.probs[1:]
    rho = steps.sum(axis=-1, keepdims=True)
    num_actions = steps.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        pi = np.where(rho > 0, steps / np.where(rho > 0, rho, 1.0), 1.0 / num_actions)
    # positive-mass rows can drift a few ulps off the simplex after division
    pi /= pi.sum(axis=-1, keepdims=True)
    return Policy(pi)


def check_bellman_flow(mu: OccupancyMeasure, kernel: TransitionKernel,
                       mu0: InitialDistribution, tol: float = SIMPLEX_TOL) -> bool:
    _require_same(mu.shape, kernel.shape)
    if np.max(np.abs(mu.probs[0] - mu0.probs)) > tol:
        return False
    pushed = np.einsum("nxa,nxay->ny", mu.probs[:-1], kernel.probs)
    return bool(np.max(np.abs(mu.rho[1:] - pushed)) <= tol)


def _xlogy_ratio(weights: np.ndarray, num: np.ndarray, den: np.ndarray) -> np.ndarray:
    live = weights > TINY
    out = np.zeros_like(weights)
    out[live] = weights[live] * (np.log(num[live]) - np.log(den[live]))
    return out


def gamma_divergence(mu: OccupancyMeasure, mu_ref: OccupancyMeasure) -> float:
    """Policy relative entropy sum_n E_{mu_n}[log pi_n(a|x)/pi'_n(a|x)].

    Policies are recovered from the occupancy measures; the reference
    policy must be positive wherever ``mu`` puts mass.
    """
    _require_same(mu.shape, mu_ref.shape)
    pi = policy_from_occupancy(mu).probs
    pi_ref = policy_from_occupancy(mu_ref).probs
    weights = mu.probs[1:]
    bad = (weights > TINY) & (pi_ref <= 0)
    if np.any(bad):
        n, x, a = (int(i) for i in np.argwhere(bad)[0])
        raise DomainError(f"reference policy is zero at step n={n + 1}, state {x}, action {a}")
    return float(max(_xlogy_ratio(weights, pi, pi_ref).sum(), 0.0))


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    return float(_xlogy_ratio(p, p, q).sum())


def bregman_gamma(mu: OccupancyMeasure, mu_ref: OccupancyMeasure) -> float:
    """The same divergence written as sum_n KL(mu_n||mu'_n) - KL(rho_n||rho'_n)."""
    _require_same(mu.shape, mu_ref.shape)
    total = 0.0
    for n in range(1, mu.shape.horizon + 1):
        total += _kl(mu.probs[n], mu_ref.probs[n]) - _kl(mu.rho[n], mu_ref.rho[n])
    return total


def norm_inf_1(a: OccupancyMeasure, b: OccupancyMeasure) -> float:
    """max_n ||a_n - b_n||_1 over the slices n = 0..N."""
    pa = a.probs if isinstance(a, OccupancyMeasure) else np.asarray(a)
    pb = b.probs if isinstance(b, OccupancyMeasure) else np.asarray(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"shape mismatch: {pa.shape} vs {pb.shape}")
    return float(np.abs(pa - pb).sum(axis=(1, 2)).max())
