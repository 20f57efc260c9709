"""Learning the noise while acting: Greedy MD-CURL against two baselines.

An up-push fires with probability 0.2 on every move. Ten agents play each
episode; the learner estimates the push distribution from what it sees
and takes one mirror-descent step per episode. The baselines run plain
MD-CURL on the true kernel, and on a model that ignores the push.

    python demos/online_comparison.py [episodes]

This takes about a minute at 200 episodes. The same job is available as
``curl-lab online demos/configs/entropy_online.cfg``.
"""
import sys

from curl_lab import (
    OnlineConfig,
    corner_start,
    entropy_objective,
    four_room_gridworld,
    kernel_from_dynamics,
    run_online,
)
from curl_lab.online import best_stationary_policy


def main(episodes=200):
    dyn = four_room_gridworld(11, 0.2, 40)
    kernel, mu0 = kernel_from_dynamics(dyn), corner_start(11)
    obj = entropy_objective(dyn.shape)
    print("computing the comparator policy (4000 MD-CURL steps on the true kernel) ...")
    best = best_stationary_policy([obj], kernel, mu0, iterations=4000, tau=0.05)
    variants = {"greedy": ("noise", True), "known": ("known", False),
                "never_learn": ("never_learn", False)}
    reports = {}
    for name, (estimator, mixing) in variants.items():
        cfg = OnlineConfig(episodes, agents=10, estimator=estimator, mixing=mixing)
        reports[name] = run_online(dyn, obj, cfg, 7, mu0, comparator=best)
    comp = reports["greedy"].comparator[0]
    print(f"comparator loss {comp:.4f}\n")
    print(f"{'t':>5} " + " ".join(f"{n:>24s}" for n in reports))
    for t in sorted({1, 5, 10, 20, 50, 100, episodes}):
        if t > episodes:
            continue
        cells = [f"{r.realized[t - 1]:10.4f} / {r.cum_regret[t - 1]:10.2f}" for r in reports.values()]
        print(f"{t:5d} " + " ".join(f"{c:>24s}" for c in cells))
    print("\n(loss / cumulative regret)")
    g = reports["greedy"]
    split = g.decomposition()
    print(f"greedy regret {g.regret:.3f} = model error {split[0]:.3f} + policy {split[1]:.3f}"
          f" + comparator model error {split[2]:.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 200)
