"""Noise-driven dynamics x_{n+1} = g_n(x_n, a_n, eps_n) and the four-room gridworld."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import InitialDistribution, MdpShape, Policy, TransitionKernel

# (d_row, d_col); "up" decreases the row index
ACTIONS = {
    "stay": (0, 0),
    "right": (0, 1),
    "down": (1, 0),
    "up": (-1, 0),
    "left": (0, -1),
}
ACTION_NAMES = tuple(ACTIONS)
NOISE_SYMBOLS = ("none", "up", "down", "left", "right")


@dataclass(frozen=True, eq=False)
class NoiseDynamics:
    """Known step map g and noise law h.

    ``step_map[n - 1, x, a, e]`` is the state reached from (x, a) at step
    n when noise symbol ``noise_support[e]`` fires; ``noise_dist[n - 1, e]``
    is h_n(e).
    """

    shape: MdpShape
    noise_support: tuple
    step_map: np.ndarray
    noise_dist: np.ndarray

    def __post_init__(self):
        s = self.shape
        e = len(self.noise_support)
        g = np.array(self.step_map, dtype=np.int64)
        h = np.array(self.noise_dist, dtype=np.float64)
        if g.shape != (s.horizon, s.num_states, s.num_actions, e):
            raise ValueError(f"step map shape {g.shape} does not match {s} with {e} noise symbols")
        if g.min() < 0 or g.max() >= s.num_states:
            raise ValueError("step map sends some (n, x, a, eps) outside the state space")
        if h.shape != (s.horizon, e):
            raise ValueError(f"noise distribution shape {h.shape}, expected {(s.horizon, e)}")
        if h.min() < 0 or np.any(np.abs(h.sum(axis=-1) - 1.0) > 1e-12):
            raise ValueError("each h_n must be a probability vector")
        g.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "step_map", g)
        object.__setattr__(self, "noise_dist", h)

    def with_noise(self, noise_dist) -> "NoiseDynamics":
        return NoiseDynamics(self.shape, self.noise_support, self.step_map,
                             np.broadcast_to(np.asarray(noise_dist, float), self.noise_dist.shape))


def pushforward_kernel(step_map: np.ndarray, noise_dist: np.ndarray) -> np.ndarray:
    """probs[n, x, a, x'] = sum over eps with g(n, x, a, eps) = x' of h_n(eps)."""
    horizon, num_states, num_actions, num_noise = step_map.shape
    probs = np.zeros((horizon, num_states, num_actions, num_states))
    n_idx, x_idx, a_idx = np.indices((horizon, num_states, num_actions))
    # for a fixed symbol every (n, x, a) hits exactly one x', so += is safe
    for e in range(num_noise):
        probs[n_idx, x_idx, a_idx, step_map[..., e]] += \
            np.broadcast_to(noise_dist[:, e, None, None], n_idx.shape)
    return probs


def kernel_from_dynamics(dyn: NoiseDynamics) -> TransitionKernel:
    return TransitionKernel(pushforward_kernel(dyn.step_map, dyn.noise_dist))


@dataclass(frozen=True)
class GridGeometry:
    """Square four-room layout: a wall row and column through the middle with four doors."""

    side: int
    walls: frozenset
    doors: frozenset

    def index(self, row: int, col: int) -> int:
        return row * self.side + col

    def coords(self, x: int) -> tuple[int, int]:
        return divmod(x, self.side)

    @property
    def num_cells(self) -> int:
        return self.side * self.side

    def is_open(self, row: int, col: int) -> bool:
        return 0 <= row < self.side and 0 <= col < self.side and (row, col) not in self.walls

    def rooms(self) -> list[list[int]]:
        """Flat indices of the open, non-door cells of each room (TL, TR, BL, BR)."""
        mid = self.side // 2
        spans = [(0, mid), (mid + 1, self.side)]
        return [[self.index(r, c) for r in range(*rs) for c in range(*cs)]
                for rs in spans for cs in spans]


def four_room_geometry(side: int = 11) -> GridGeometry:
    if side < 5 or side % 2 == 0:
        raise ValueError(f"grid side must be odd and >= 5, got {side}")
    mid = side // 2
    near, far = mid // 2, mid + 1 + mid // 2
    doors = {(mid, near), (mid, far), (near, mid), (far, mid)}
    line = {(mid, c) for c in range(side)} | {(r, mid) for r in range(side)}
    return GridGeometry(side, frozenset(line - doors), frozenset(doors))


def _move(geom: GridGeometry, row: int, col: int, delta) -> tuple[int, int]:
    r, c = row + delta[0], col + delta[1]
    return (r, c) if geom.is_open(r, c) else (row, col)


def gridworld_dynamics(geom: GridGeometry, noise_probs: dict, horizon: int) -> NoiseDynamics:
    """Stationary grid dynamics with a categorical noise over ``NOISE_SYMBOLS``.

    The action displacement is applied first and cancelled if blocked; the
    noise displacement is then applied from the intermediate cell, again
    cancelled if blocked. Wall cells are absorbing.
    """
    unknown = set(noise_probs) - set(NOISE_SYMBOLS)
    if unknown:
        raise ValueError(f"unknown noise symbols {sorted(unknown)}")
    probs = np.array([float(noise_probs.get(sym, 0.0)) for sym in NOISE_SYMBOLS])
    if probs.min() < 0 or abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError(f"noise probabilities must form a distribution, got {noise_probs}")
    noise_delta = {"none": (0, 0), "up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
    num_states = geom.num_cells
    g = np.empty((num_states, len(ACTIONS), len(NOISE_SYMBOLS)), dtype=np.int64)
    for x in range(num_states):
        row, col = geom.coords(x)
        for ai, name in enumerate(ACTION_NAMES):
            for ei, sym in enumerate(NOISE_SYMBOLS):
                if (row, col) in geom.walls:
                    g[x, ai, ei] = x
                    continue
                r1, c1 = _move(geom, row, col, ACTIONS[name])
                r2, c2 = _move(geom, r1, c1, noise_delta[sym])
                g[x, ai, ei] = geom.index(r2, c2)
    shape = MdpShape(num_states, len(ACTIONS), horizon)
    return NoiseDynamics(shape, NOISE_SYMBOLS, np.broadcast_to(g, (horizon,) + g.shape),
                         np.broadcast_to(probs, (horizon, len(probs))))


def noisy_four_room(side: int, noise_probs: dict, horizon: int) -> NoiseDynamics:
    """Four-room grid with a categorical noise on {up, down, left, right}.

    ``noise_probs`` maps direction symbols to probabilities; "none" gets the
    remaining mass. Only "none" and the symbols with positive probability
    are kept in the support.
    """
    probs = {sym: float(p) for sym, p in noise_probs.items() if sym != "none"}
    if any(p < 0 for p in probs.values()) or sum(probs.values()) >= 1.0:
        raise ValueError(f"noise probabilities must be >= 0 and sum below 1, got {noise_probs}")
    probs["none"] = 1.0 - sum(probs.values())
    full = gridworld_dynamics(four_room_geometry(side), probs, horizon)
    keep = [i for i, sym in enumerate(NOISE_SYMBOLS) if sym == "none" or probs.get(sym, 0.0) > 0]
    return NoiseDynamics(full.shape, tuple(NOISE_SYMBOLS[i] for i in keep),
                         full.step_map[..., keep], full.noise_dist[:, keep])


def four_room_gridworld(side: int = 11, up_noise_prob: float = 0.0,
                        horizon: int = 40) -> NoiseDynamics:
    """Four-room grid where the exogenous noise pushes the agent up with ``up_noise_prob``."""
    if not 0.0 <= up_noise_prob < 1.0:
        raise ValueError(f"up-noise probability must lie in [0, 1), got {up_noise_prob}")
    dyn = noisy_four_room(side, {"up": up_noise_prob}, horizon)
    if len(dyn.noise_support) == 2:
        return dyn
    # keep the two-symbol support even when the up-noise never fires
    full = gridworld_dynamics(four_room_geometry(side), {"none": 1.0}, horizon)
    keep = [NOISE_SYMBOLS.index("none"), NOISE_SYMBOLS.index("up")]
    return NoiseDynamics(full.shape, ("none", "up"), full.step_map[..., keep],
                         full.noise_dist[:, keep])


def corner_start(side: int = 11) -> InitialDistribution:
    """Dirac at the upper-left cell, paired with the 'stay' action."""
    return InitialDistribution.dirac(side * side, len(ACTIONS), 0, ACTION_NAMES.index("stay"))


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """M trajectories: ``states``/``actions`` of shape (M, N + 1), ``noises`` of shape (M, N).

    ``noises[j, n - 1]`` is the symbol index that fired on the move into step n.
    """

    states: np.ndarray
    actions: np.ndarray
    noises: np.ndarray

    @property
    def num_agents(self) -> int:
        return self.states.shape[0]

    def to_lines(self) -> list[str]:
        """One ``j,n,x,a,eps`` line per (agent, step); eps is -1 at n = 0."""
        out = ["j,n,x,a,eps"]
        m, n1 = self.states.shape
        for j in range(m):
            for n in range(n1):
                eps = -1 if n == 0 else int(self.noises[j, n - 1])
                out.append(f"{j},{n},{int(self.states[j, n])},{int(self.actions[j, n])},{eps}")
        return out


def _sample_rows(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw of one index per row of ``probs``."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    idx = (u[:, None] >= cdf).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def simulate_trajectories(policy: Policy, dyn: NoiseDynamics, mu0: InitialDistribution,
                          m: int, seed) -> TrajectoryBatch:
    """Draw ``m`` independent episodes; ``seed`` is an int or a numpy SeedSequence."""
    if m < 1:
        raise ValueError("need at least one agent")
    rng = np.random.default_rng(seed)
    s = dyn.shape
    horizon = s.horizon
    states = np.empty((m, horizon + 1), dtype=np.int64)
    actions = np.empty((m, horizon + 1), dtype=np.int64)
    noises = np.empty((m, horizon), dtype=np.int64)
    first = _sample_rows(rng, np.broadcast_to(mu0.probs.ravel(), (m, mu0.probs.size)))
    states[:, 0], actions[:, 0] = np.divmod(first, s.num_actions)
    for n in range(1, horizon + 1):
        eps = _sample_rows(rng, np.broadcast_to(dyn.noise_dist[n - 1], (m, len(dyn.noise_support))))
        noises[:, n - 1] = eps
        states[:, n] = dyn.step_map[n - 1, states[:, n - 1], actions[:, n - 1], eps]
        actions[:, n] = _sample_rows(rng, policy.probs[n - 1, states[:, n]])
    return TrajectoryBatch(states, actions, noises)
