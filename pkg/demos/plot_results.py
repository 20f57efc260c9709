"""Plot CLI outputs: marginal grids and regret curves (needs matplotlib).

    curl-lab solve demos/configs/entropy_offline.cfg
    curl-lab online demos/configs/entropy_online.cfg
    python demos/plot_results.py runs/entropy_offline runs/entropy_online

For every directory, ``rho_nNN.txt`` grids become heat maps and
``comparison.csv`` becomes a log-scale plot of average regret R_t / t.
Figures are written next to the data as PNG files.
"""
import sys
from pathlib import Path

import numpy as np

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:  # pragma: no cover
    sys.exit("matplotlib is not installed; pip install curl-lab[plot]")


def plot_grid(path: Path) -> Path:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    side = int(data[:, 0].max()) + 1
    grid = np.zeros((side, side))
    grid[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(grid, cmap="viridis")
    ax.set_title(path.stem)
    ax.set_xticks([])
    ax.set_yticks([])
    out = path.with_suffix(".png")
    fig.savefig(out, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return out


def plot_comparison(path: Path) -> Path:
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    t = data[:, 0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, name in enumerate(header):
        if name.endswith("_cum_regret"):
            ax.plot(t, np.maximum(data[:, i] / t, 1e-12), label=name[: -len("_cum_regret")])
    ax.set_yscale("log")
    ax.set_xlabel("episode t")
    ax.set_ylabel("R_t / t")
    ax.legend()
    out = path.with_name("regret.png")
    fig.savefig(out, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return out


def main(dirs):
    for d in map(Path, dirs):
        for grid in sorted(d.glob("rho_n*.txt")):
            print(plot_grid(grid))
        if (d / "comparison.csv").exists():
            print(plot_comparison(d / "comparison.csv"))


if __name__ == "__main__":
    main(sys.argv[1:] or ["runs/entropy_offline", "runs/entropy_online"])
