"""Offline MD-CURL: mirror descent over occupancy measures solved in closed form.

Each iteration runs one forward flow (occupancy of the current policy),
one gradient evaluation, one backward regularized-Q pass and one
exponential twist of the policy. No projection is ever performed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .mdp import (
    TINY,
    DimensionError,
    DomainError,
    InitialDistribution,
    MdpShape,
    OccupancyMeasure,
    Policy,
    TransitionKernel,
    gamma_divergence,
    occupancy_from_policy,
    policy_from_occupancy,
)
from .objectives import CurlObjective


def regularized_q_backup(grad: np.ndarray, kernel: TransitionKernel, prev_policy: Policy,
                         tau: float) -> np.ndarray:
    """Backward recursion for Q~, shape (N, X, A).

    The inner maximum over pi_{n+1} is evaluated in closed form,
    max_pi <pi, q> - KL(pi||pi_k)/tau = log sum_a pi_k(a) exp(tau q(a)) / tau.
    """
    if tau <= 0:
        raise ValueError(f"learning rate must be positive, got {tau}")
    pi = prev_policy.probs
    if np.any(pi <= 0):
        n, x, a = (int(i) for i in np.argwhere(pi <= 0)[0])
        raise DomainError(f"reference policy is zero at step n={n + 1}, state {x}, action {a}")
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != pi.shape or kernel.probs.shape[:3] != pi.shape:
        raise DimensionError("gradient, kernel and policy shapes disagree")
    log_pi = np.log(pi)
    horizon = pi.shape[0]
    q = np.empty_like(grad)
    q[-1] = -grad[-1]
    for i in range(horizon - 2, -1, -1):
        z = log_pi[i + 1] + tau * q[i + 1]
        top = z.max(axis=-1)
        soft_v = (top + np.log(np.exp(z - top[:, None]).sum(axis=-1))) / tau
        q[i] = -grad[i] + kernel.probs[i + 1] @ soft_v
    return q


def exponential_twist_update(prev_policy: Policy, q: np.ndarray, tau: float) -> Policy:
    """pi_new(a|x) proportional to pi(a|x) exp(tau Q~(x, a)), computed in log space."""
    if tau < 0:
        raise ValueError(f"learning rate must be nonnegative, got {tau}")
    pi = prev_policy.probs
    logits = tau * np.asarray(q, dtype=np.float64)
    logits = logits - logits.max(axis=-1, keepdims=True)
    flat = np.all(logits == 0.0, axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        weights = np.exp(np.log(pi) + logits)
    new = weights / weights.sum(axis=-1, keepdims=True)
    # entries that underflow would break positivity of the next reference policy
    starved = (new < TINY) & (pi > 0)
    if np.any(starved):
        new = np.where(starved, TINY, new)
        new /= new.sum(axis=-1, keepdims=True)
    return Policy(np.where(flat, pi, new))


def default_learning_rate(iterations: int, big_l: float, shape: MdpShape) -> float:
    """Constant step (1/L) sqrt(2 N log|A| / K), using N log|A| as the divergence bound."""
    if iterations < 1 or big_l <= 0:
        raise ValueError("need K >= 1 and L > 0")
    return math.sqrt(2.0 * shape.horizon * math.log(shape.num_actions) / iterations) / big_l


def auto_learning_rate(iterations: int, big_l: float, shape: MdpShape) -> float:
    """default_learning_rate, or 1 for a constant objective (L = 0) where every step is a no-op."""
    if big_l == 0:
        return 1.0
    return default_learning_rate(iterations, big_l, shape)


@dataclass(frozen=True)
class SolverConfig:
    iterations: int
    learning_rate: Union[float, Callable[[int], float], None] = None
    initial_policy: Optional[Policy] = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        lr = self.learning_rate
        if lr is not None and not callable(lr) and not lr > 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if self.initial_policy is not None and np.any(self.initial_policy.probs <= 0):
            raise DomainError("initial policy must be strictly positive")


@dataclass
class SolveReport:
    objective_values: np.ndarray
    best_index: int
    final_policy: Policy
    best_policy: Policy
    best_occupancy: OccupancyMeasure
    final_occupancy: OccupancyMeasure
    learning_rate: float
    forward_passes: int = 0
    backward_passes: int = 0
    policies: list = field(default_factory=list, repr=False)

    @property
    def best_value(self) -> float:
        return float(self.objective_values[self.best_index])


def md_curl_step(policy: Policy, obj_grad: np.ndarray, kernel: TransitionKernel,
                 tau: float) -> Policy:
    """One closed-form mirror-descent iterate given the gradient at the current point."""
    q = regularized_q_backup(obj_grad, kernel, policy, tau)
    return exponential_twist_update(policy, q, tau)


def md_curl_solve(obj: CurlObjective, kernel: TransitionKernel, mu0: InitialDistribution,
                  cfg: SolverConfig, keep_policies: bool = False) -> SolveReport:
    shape = kernel.shape
    policy = cfg.initial_policy if cfg.initial_policy is not None else Policy.uniform(shape)
    lr = cfg.learning_rate
    if lr is None:
        lr = auto_learning_rate(cfg.iterations, obj.big_l, shape)
    schedule = lr if callable(lr) else (lambda k, _lr=float(lr): _lr)

    values = np.empty(cfg.iterations + 1)
    best_index, best_policy, best_mu = 0, policy, None
    kept = []
    forward = backward = 0
    for k in range(cfg.iterations + 1):
        mu = occupancy_from_policy(policy, kernel, mu0)
        forward += 1
        values[k] = obj.value(mu)
        if keep_policies:
            kept.append(policy)
        if best_mu is None or values[k] < values[best_index]:
            best_index, best_policy, best_mu = k, policy, mu
        if k == cfg.iterations:
            break
        policy = md_curl_step(policy, obj.gradient(mu), kernel, schedule(k))
        backward += 1
    return SolveReport(
        objective_values=values,
        best_index=best_index,
        final_policy=policy,
        best_policy=best_policy,
        best_occupancy=best_mu,
        final_occupancy=mu,
        learning_rate=float(schedule(0)),
        forward_passes=forward,
        backward_passes=backward,
        policies=kept,
    )


# ---------------------------------------------------------------------------
# brute-force verifier of the auxiliary problem

MAX_ORACLE_STATE_ACTIONS = 6
MAX_ORACLE_HORIZON = 3
MAX_ORACLE_DIMENSION = 6


def auxiliary_objective(obj_grad: np.ndarray, mu: OccupancyMeasure, ref_mu: OccupancyMeasure,
                        tau: float) -> float:
    """tau <grad, mu> + Gamma(mu, ref_mu), the problem one MD-CURL step minimizes."""
    linear = float((np.asarray(obj_grad) * mu.probs[1:]).sum())
    return tau * linear + gamma_divergence(mu, ref_mu)


def _batch_aux_values(pi: np.ndarray, grad: np.ndarray, kernel: np.ndarray, mu0: np.ndarray,
                      log_ref: np.ndarray, tau: float) -> np.ndarray:
    """Auxiliary objective for a batch of policies pi of shape (B, N, X, A)."""
    batch = pi.shape[0]
    mu_prev = np.broadcast_to(mu0, (batch,) + mu0.shape)
    total = np.zeros(batch)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pi = np.where(pi > 0, np.log(np.where(pi > 0, pi, 1.0)), 0.0)
    for i in range(pi.shape[1]):
        rho = np.einsum("bxa,xay->by", mu_prev, kernel[i])
        mu_n = rho[:, :, None] * pi[:, i]
        total += (mu_n * (tau * grad[i] + log_pi[:, i] - log_ref[i])).sum(axis=(1, 2))
        mu_prev = mu_n
    return total


def _simplex_axis(center: float, half_width: float, step: float) -> np.ndarray:
    lo = max(0.0, center - half_width)
    hi = min(1.0, center + half_width)
    count = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, max(count, 2))


def auxiliary_problem_oracle(obj_grad: np.ndarray, kernel: TransitionKernel,
                             mu0: InitialDistribution, ref_mu: OccupancyMeasure, tau: float,
                             resolution: float = 2e-3, coarse_points: int = 21,
                             max_batch: int = 200_000) -> OccupancyMeasure:
    """Minimize tau<grad, mu> + Gamma(mu, ref_mu) over the flow polytope by grid search.

    The search runs jointly over all per-(n, x) action simplices (free
    coordinates pi_n(a|x) for a < |A| - 1), starting from a coarse grid and
    zooming in around the incumbent until the grid step is at most
    ``resolution``. Only forward flows are evaluated.
    """
    shape = kernel.shape
    if (shape.num_states * shape.num_actions > MAX_ORACLE_STATE_ACTIONS
            or shape.horizon > MAX_ORACLE_HORIZON):
        raise ValueError(f"instance {shape} too large for the grid oracle")
    free = shape.num_actions - 1
    dim = shape.horizon * shape.num_states * free
    if dim > MAX_ORACLE_DIMENSION:
        raise ValueError(f"instance {shape} has {dim} free policy coordinates; too large")
    grad = np.asarray(obj_grad, dtype=np.float64)
    log_ref = np.log(policy_from_occupancy(ref_mu).probs)
    if dim == 0:
        return occupancy_from_policy(Policy.uniform(shape), kernel, mu0)

    def to_policies(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c = coords.reshape(-1, shape.horizon, shape.num_states, free)
        last = 1.0 - c.sum(axis=-1, keepdims=True)
        ok = np.all(last >= -1e-12, axis=(1, 2, 3))
        pi = np.concatenate([c, np.clip(last, 0.0, None)], axis=-1)
        return pi, ok

    def evaluate(axes: list[np.ndarray]) -> tuple[float, np.ndarray]:
        best_val, best_pt = math.inf, None
        sizes = [len(a) for a in axes]
        total = int(np.prod(sizes))
        for start in range(0, total, max_batch):
            flat = np.arange(start, min(start + max_batch, total))
            idx = np.unravel_index(flat, sizes)
            coords = np.stack([axes[d][idx[d]] for d in range(dim)], axis=-1)
            pi, ok = to_policies(coords)
            vals = _batch_aux_values(pi, grad, kernel.probs, mu0.probs, log_ref, tau)
            vals[~ok] = math.inf
            j = int(np.argmin(vals))
            if vals[j] < best_val:
                best_val, best_pt = float(vals[j]), coords[j]
        return best_val, best_pt

    per_axis = coarse_points
    while per_axis ** dim > 20 * max_batch and per_axis > 3:
        per_axis -= 2
    step = 1.0 / (per_axis - 1)
    axes = [np.linspace(0.0, 1.0, per_axis) for _ in range(dim)]
    _, best = evaluate(axes)
    window = 5
    while step > resolution:
        step = max(resolution, step / window)
        axes = [_simplex_axis(best[d], window * step, step) for d in range(dim)]
        _, best = evaluate(axes)
    pi, _ = to_policies(best[None, :])
    return occupancy_from_policy(Policy(pi[0]), kernel, mu0)


__all__ = [
    "SolverConfig",
    "SolveReport",
    "auxiliary_objective",
    "auxiliary_problem_oracle",
    "default_learning_rate",
    "exponential_twist_update",
    "md_curl_solve",
    "md_curl_step",
    "regularized_q_backup",
]

