"""Greedy MD-CURL: one mirror-descent step per episode against an estimated kernel."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .env import (
    NoiseDynamics,
    TrajectoryBatch,
    kernel_from_dynamics,
    pushforward_kernel,
    simulate_trajectories,
)
from .mdp import (
    InitialDistribution,
    MdpShape,
    OccupancyMeasure,
    Policy,
    TransitionKernel,
    norm_inf_1,
    occupancy_from_policy,
)
from .objectives import CurlObjective, SumObjective
from .solver import SolverConfig, md_curl_solve, md_curl_step

ESTIMATOR_MODES = ("noise", "counts", "never_learn", "known")


class UsageError(ValueError):
    """An operation was called on an estimate of the wrong mode."""


class KernelEstimate:
    """The learner's kernel p-hat^t plus the statistics it was built from.

    ``episodes`` counts the episodes already absorbed, so this object is
    p-hat^{episodes + 1}. For the noise-based mode the kernel is built from
    the noise counts on first access and cached.
    """

    def __init__(self, mode: str, kernel: Optional[TransitionKernel] = None, episodes: int = 0,
                 step_map: Optional[np.ndarray] = None, noise_counts: Optional[np.ndarray] = None,
                 visit_counts: Optional[np.ndarray] = None,
                 transition_counts: Optional[np.ndarray] = None):
        if kernel is None and (step_map is None or noise_counts is None):
            raise UsageError("an estimate needs a kernel or noise counts to build one from")
        self.mode = mode
        self.episodes = episodes
        self.step_map = step_map
        self.noise_counts = noise_counts
        self.visit_counts = visit_counts
        self.transition_counts = transition_counts
        self._kernel = kernel

    @property
    def kernel(self) -> TransitionKernel:
        if self._kernel is None:
            dist = self.noise_counts / self.noise_counts.sum(axis=-1, keepdims=True)
            self._kernel = TransitionKernel(pushforward_kernel(self.step_map, dist))
        return self._kernel

    @property
    def observations(self) -> int:
        """M_n^t for the noise-based estimator (same for every step n)."""
        if self.noise_counts is None:
            return 0
        return int(self.noise_counts[0].sum())


def _uniform_kernel(shape: MdpShape) -> TransitionKernel:
    x = shape.num_states
    return TransitionKernel(np.full((shape.horizon, x, shape.num_actions, x), 1.0 / x))


def initial_estimate(mode: str, dyn: NoiseDynamics,
                     true_kernel: Optional[TransitionKernel] = None) -> KernelEstimate:
    """p-hat^1 for the given estimator mode.

    ``noise`` and ``counts`` start from the uniform kernel; ``never_learn``
    freezes the noise-free kernel delta_{g_n(x, a, eps_0)}; ``known`` uses
    the true kernel throughout.
    """
    shape = dyn.shape
    if mode == "noise":
        return KernelEstimate(mode, _uniform_kernel(shape), step_map=dyn.step_map,
                              noise_counts=np.zeros((shape.horizon, len(dyn.noise_support)),
                                                    dtype=np.int64))
    if mode == "counts":
        x, a, n = shape.num_states, shape.num_actions, shape.horizon
        return KernelEstimate(mode, _uniform_kernel(shape),
                              visit_counts=np.zeros((n, x, a), dtype=np.int64),
                              transition_counts=np.zeros((n, x, a, x), dtype=np.int64))
    if mode == "never_learn":
        silent = np.zeros(len(dyn.noise_support))
        silent[0] = 1.0
        dist = np.broadcast_to(silent, (shape.horizon, len(silent)))
        return KernelEstimate(mode, TransitionKernel(pushforward_kernel(dyn.step_map, dist)))
    if mode == "known":
        if true_kernel is None:
            raise UsageError("mode 'known' needs the true kernel")
        return KernelEstimate(mode, true_kernel)
    raise UsageError(f"unknown estimator mode {mode!r}; expected one of {ESTIMATOR_MODES}")


def update_noise_estimate(est: KernelEstimate, batch: TrajectoryBatch, t: int) -> KernelEstimate:
    """Absorb episode t's noises; rows become the empirical pushforward through g_n."""
    if est.mode != "noise":
        raise UsageError(f"noise update called on a {est.mode!r} estimate")
    if t != est.episodes + 1:
        raise UsageError(f"estimate holds {est.episodes} episodes, cannot absorb episode {t}")
    horizon, num_noise = est.noise_counts.shape
    counts = est.noise_counts.copy()
    for n in range(horizon):
        counts[n] += np.bincount(batch.noises[:, n], minlength=num_noise)
    return KernelEstimate("noise", None, t, step_map=est.step_map, noise_counts=counts)


def update_count_estimate(est: KernelEstimate, batch: TrajectoryBatch) -> KernelEstimate:
    """Visit-count ratio estimator; unvisited (n, x, a) rows keep the uniform prior."""
    if est.mode != "counts":
        raise UsageError(f"count update called on a {est.mode!r} estimate")
    visits = est.visit_counts.copy()
    trans = est.transition_counts.copy()
    horizon = visits.shape[0]
    for i in range(horizon):
        x, a, nxt = batch.states[:, i], batch.actions[:, i], batch.states[:, i + 1]
        np.add.at(visits[i], (x, a), 1)
        np.add.at(trans[i], (x, a, nxt), 1)
    num_states = trans.shape[-1]
    seen = visits[..., None] > 0
    probs = np.where(seen, trans / np.maximum(visits, 1)[..., None], 1.0 / num_states)
    return KernelEstimate("counts", TransitionKernel(probs), est.episodes + 1,
                          visit_counts=visits, transition_counts=trans)


def update_estimate(est: KernelEstimate, batch: TrajectoryBatch, t: int) -> KernelEstimate:
    if est.mode == "noise":
        return update_noise_estimate(est, batch, t)
    if est.mode == "counts":
        return update_count_estimate(est, batch)
    return KernelEstimate(est.mode, est.kernel, est.episodes + 1)


def explore_mix(policy: Policy, alpha: float) -> Policy:
    """(1 - alpha) pi + alpha / |A|."""
    if not 0.0 <= alpha < 0.5:
        raise ValueError(f"exploration parameter must lie in [0, 1/2), got {alpha}")
    if alpha == 0.0:
        return policy
    num_actions = policy.probs.shape[-1]
    return Policy((1.0 - alpha) * policy.probs + alpha / num_actions)


def greedy_step(prev_policy: Policy, prev_alpha: float, objective: CurlObjective,
                kernel_prev: TransitionKernel, kernel_next: TransitionKernel,
                mu0: InitialDistribution, tau: float,
                mu_t: Optional[OccupancyMeasure] = None) -> Policy:
    """pi^{t+1} from pi^t.

    The gradient is taken at mu^t = mu^{pi^t, p-hat^t}; the backup and the
    twist use the mixed policy and the refreshed kernel p-hat^{t+1}.
    """
    if mu_t is None:
        mu_t = occupancy_from_policy(prev_policy, kernel_prev, mu0)
    mixed = explore_mix(prev_policy, prev_alpha)
    return md_curl_step(mixed, objective.gradient(mu_t), kernel_next, tau)


AlphaSchedule = Union[str, float, Callable[[int], float]]


@dataclass(frozen=True)
class OnlineConfig:
    episodes: int
    agents: int = 10
    tau: Optional[float] = None
    alpha: AlphaSchedule = "decay"
    estimator: str = "noise"
    mixing: bool = True

    def __post_init__(self):
        if self.episodes < 1 or self.agents < 1:
            raise ValueError("episodes and agents must be >= 1")
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"learning rate must be positive, got {self.tau}")
        if self.estimator not in ESTIMATOR_MODES:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if isinstance(self.alpha, str) and self.alpha not in ("decay", "inverse_T"):
            raise ValueError(f"unknown exploration schedule {self.alpha!r}")
        for t in range(1, self.episodes + 1):
            a = self.scheduled_alpha(t)
            if not 0.0 < a < 0.5:
                raise ValueError(
                    f"exploration parameter alpha_{t} = {a} must lie in the open interval (0, 1/2)")

    def alpha_at(self, t: int) -> float:
        """Mixing weight used at episode t (0 when mixing is switched off)."""
        return self.scheduled_alpha(t) if self.mixing else 0.0

    def scheduled_alpha(self, t: int) -> float:
        if self.alpha == "decay":
            return min(0.4, 1.0 / t)
        if self.alpha == "inverse_T":
            return 1.0 / self.episodes
        if callable(self.alpha):
            return float(self.alpha(t))
        return float(self.alpha)


def step_size_constant(alphas: Sequence[float], shape: MdpShape) -> float:
    """b^2 = sum_t 2[N a_t + (N^2/t) log(|A|/a_t) + N^2 (1/t + a_t)^2] + N log|A|, t = 1, 2, ..."""
    n, a = shape.horizon, shape.num_actions
    total = n * math.log(a)
    for t, alpha in enumerate(alphas, start=1):
        total += 2.0 * (n * alpha + n * n / t * math.log(a / alpha) + n * n * (1.0 / t + alpha) ** 2)
    return math.sqrt(total)


def online_b(cfg: OnlineConfig, shape: MdpShape) -> float:
    """The constant b summed directly over the configured alpha schedule."""
    return step_size_constant([cfg.scheduled_alpha(t) for t in range(1, cfg.episodes + 1)], shape)


def default_online_tau(cfg: OnlineConfig, big_l: float, shape: MdpShape) -> float:
    """tau = b / (L sqrt(T)); a constant objective (L = 0) gets tau = 1."""
    if big_l == 0:
        return 1.0
    return online_b(cfg, shape) / (big_l * math.sqrt(cfg.episodes))


def best_stationary_policy(objectives: Sequence[CurlObjective], kernel: TransitionKernel,
                           mu0: InitialDistribution, iterations: int = 2000,
                           tau: Optional[float] = None) -> Policy:
    """Regret comparator: best MD-CURL iterate on the averaged loss (1/T) sum_t F^t.

    Averaging leaves the minimizer of the summed loss unchanged and keeps
    the step size on the scale of a single objective.
    """
    objectives = list(objectives)
    first = objectives[0]
    if all(o is first for o in objectives):
        target = first
    else:
        target = SumObjective(objectives, np.full(len(objectives), 1.0 / len(objectives)))
    report = md_curl_solve(target, kernel, mu0, SolverConfig(iterations, learning_rate=tau))
    return report.best_policy


@dataclass
class RegretReport:
    realized: np.ndarray
    comparator: np.ndarray
    model_losses: np.ndarray
    r_mdp_pi: Optional[np.ndarray] = None
    r_policy: Optional[np.ndarray] = None
    r_mdp_star: Optional[np.ndarray] = None
    model_shift: Optional[np.ndarray] = None
    alphas: Optional[np.ndarray] = None
    min_mixed_entry: Optional[np.ndarray] = None
    min_policy_entry: Optional[np.ndarray] = None
    tau: float = float("nan")
    policies: list = field(default_factory=list, repr=False)
    comparator_policy: Optional[Policy] = field(default=None, repr=False)

    @property
    def episodes(self) -> int:
        return len(self.realized)

    @property
    def cum_regret(self) -> np.ndarray:
        return np.cumsum(self.realized - self.comparator)

    @property
    def regret(self) -> float:
        return float(self.realized.sum() - self.comparator.sum())

    def decomposition(self) -> tuple[float, float, float]:
        """(R^MDP(pi^t), R^policy, R^MDP(pi*)) summed over all episodes."""
        if self.r_policy is None:
            raise ValueError("report was produced without the decomposition")
        return float(self.r_mdp_pi.sum()), float(self.r_policy.sum()), float(self.r_mdp_star.sum())

    def model_shift_bound(self, horizon: int) -> np.ndarray:
        t = np.arange(1, self.episodes + 1)
        return 2.0 * horizon / t

    def csv_lines(self) -> list[str]:
        fmt = "%.17g"
        header = ["t", "realized_loss", "comparator_loss", "cum_regret"]
        cols = [self.realized, self.comparator, self.cum_regret]
        if self.r_policy is not None:
            header += ["r_mdp_pi", "r_policy", "r_mdp_star"]
            cols += [self.r_mdp_pi, self.r_policy, self.r_mdp_star]
        lines = [",".join(header)]
        for t in range(self.episodes):
            lines.append(",".join([str(t + 1)] + [fmt % c[t] for c in cols]))
        return lines


ObjectiveSource = Union[CurlObjective, Callable[[int, TrajectoryBatch], CurlObjective]]


def run_online(dyn: NoiseDynamics, obj: ObjectiveSource, cfg: OnlineConfig, seed: int,
               mu0: InitialDistribution, comparator: Union[str, Policy, None] = "auto",
               comparator_iterations: int = 2000, comparator_tau: Optional[float] = None,
               initial_policy: Optional[Policy] = None, keep_policies: bool = False,
               on_episode: Optional[Callable[[int, KernelEstimate], None]] = None) -> RegretReport:
    """Play ``cfg.episodes`` episodes of Greedy MD-CURL against the true dynamics.

    ``obj`` is a fixed objective or a callback ``(t, batch) -> F^t`` revealed
    after episode t's trajectories. Losses are exact flows under the true
    kernel. With ``comparator="auto"`` the best stationary policy is
    computed after the run and the three-term regret split is filled in by
    replaying the estimator from the recorded batches.
    """
    shape = dyn.shape
    true_kernel = kernel_from_dynamics(dyn)
    big_t = cfg.episodes
    policy = initial_policy if initial_policy is not None else Policy.uniform(shape)
    est = initial_estimate(cfg.estimator, dyn, true_kernel)

    objectives: list[CurlObjective] = []
    batches: list[TrajectoryBatch] = []
    realized = np.empty(big_t)
    model = np.empty(big_t)
    deviation = np.empty(big_t)
    alphas = np.empty(big_t)
    min_mixed = np.empty(big_t)
    min_entry = np.empty(big_t)
    kept = []
    tau = cfg.tau
    seeds = np.random.SeedSequence(seed).spawn(big_t)

    for t in range(1, big_t + 1):
        if keep_policies:
            kept.append(policy)
        batch = simulate_trajectories(policy, dyn, mu0, cfg.agents, seeds[t - 1])
        batches.append(batch)
        prev_kernel = est.kernel
        est = update_estimate(est, batch, t)
        if on_episode is not None:
            on_episode(t, est)
        f_t = obj if isinstance(obj, CurlObjective) else obj(t, batch)
        objectives.append(f_t)
        if tau is None:
            tau = default_online_tau(cfg, f_t.big_l, shape)

        realized[t - 1] = f_t.value(occupancy_from_policy(policy, true_kernel, mu0))
        mu_t = occupancy_from_policy(policy, prev_kernel, mu0)
        model[t - 1] = f_t.value(mu_t)
        deviation[t - 1] = norm_inf_1(occupancy_from_policy(policy, est.kernel, mu0), mu_t)

        alpha = cfg.alpha_at(t)
        alphas[t - 1] = alpha
        min_mixed[t - 1] = explore_mix(policy, alpha).probs.min()
        policy = greedy_step(policy, alpha, f_t, prev_kernel, est.kernel, mu0, tau, mu_t=mu_t)
        min_entry[t - 1] = policy.probs.min()

    report = RegretReport(realized, np.full(big_t, np.nan), model, model_shift=deviation,
                          alphas=alphas, min_mixed_entry=min_mixed, min_policy_entry=min_entry,
                          tau=float(tau), policies=kept)
    if comparator is None:
        return report
    if isinstance(comparator, str):
        if comparator != "auto":
            raise ValueError(f"unknown comparator option {comparator!r}")
        comparator = best_stationary_policy(objectives, true_kernel, mu0,
                                            comparator_iterations, comparator_tau)
    report.comparator_policy = comparator
    mu_star_true = occupancy_from_policy(comparator, true_kernel, mu0)
    report.comparator = np.array([f.value(mu_star_true) for f in objectives])

    # F^t(mu^{pi*, p-hat^{t+1}}) needs the estimate sequence again
    replay = initial_estimate(cfg.estimator, dyn, true_kernel)
    star_next = np.empty(big_t)
    for t, (batch, f_t) in enumerate(zip(batches, objectives), start=1):
        replay = update_estimate(replay, batch, t)
        star_next[t - 1] = f_t.value(occupancy_from_policy(comparator, replay.kernel, mu0))
    report.r_mdp_pi = realized - model
    report.r_policy = model - star_next
    report.r_mdp_star = star_next - report.comparator
    return report


def concentration_radius(gamma: float, observations: int, shape: MdpShape, episodes: int,
                         delta: float) -> float:
    """sqrt(gamma / (2 M) log(N |X| |A| T / delta)), the Hoeffding-union radius."""
    log_term = math.log(shape.horizon * shape.num_states * shape.num_actions * episodes / delta)
    return math.sqrt(gamma / (2.0 * observations) * log_term)


def kernel_test_deviation(true_kernel: TransitionKernel, est_kernel: TransitionKernel,
                          test_fn: np.ndarray) -> np.ndarray:
    """(p_n - p-hat_n)(Lambda)(x, a) for every (n, x, a)."""
    return (true_kernel.probs - est_kernel.probs) @ np.asarray(test_fn, dtype=np.float64)
