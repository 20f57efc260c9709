"""Plain-text dumps of policies, occupancy measures and kernels.

Records are tab separated, one per line, values printed with 17
significant digits so that a dump parses back to the identical float::

    # shape <X> <A> <N>
    n<TAB>x<TAB>a<TAB>value

Policies carry n = 1..N, occupancy measures n = 0..N. Kernels use the
header ``# kernel <X> <A> <N>`` and records ``n x a x' value`` for the
nonzero entries only (missing entries are zeros).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .mdp import OccupancyMeasure, Policy, TransitionKernel


class FormatError(ValueError):
    pass


def _fmt(value: float) -> str:
    return "%.17g" % value


def _read_header(lines: list[str], tag: str, path) -> tuple[int, int, int]:
    if not lines or not lines[0].startswith("#"):
        raise FormatError(f"{path}: missing header line")
    parts = lines[0][1:].split()
    if len(parts) != 4 or parts[0] != tag:
        raise FormatError(f"{path}: expected '# {tag} |X| |A| N', got {lines[0]!r}")
    return int(parts[1]), int(parts[2]), int(parts[3])


def _write_table(path, header: str, arr: np.ndarray, offset: int, sparse: bool = False) -> None:
    out = [header]
    keep = arr != 0.0 if sparse else np.ones(arr.shape, dtype=bool)
    coords = np.argwhere(keep)
    coords[:, 0] += offset
    for row, value in zip(coords.tolist(), arr[keep].tolist()):
        out.append("\t".join(map(str, row)) + "\t" + _fmt(value))
    Path(path).write_text("\n".join(out) + "\n")


def _read_table(path, lines: list[str], shape: tuple[int, ...], offset: int) -> np.ndarray:
    arr = np.zeros(shape)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(shape) + 1:
            raise FormatError(f"{path}:{lineno}: expected {len(shape) + 1} fields")
        try:
            idx = (int(parts[0]) - offset,) + tuple(int(p) for p in parts[1:-1])
            arr[idx] = float(parts[-1])
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    return arr


def write_policy(path, policy: Policy) -> None:
    s = policy.shape
    _write_table(path, f"# shape {s.num_states} {s.num_actions} {s.horizon}", policy.probs, 1)


def read_policy(path) -> Policy:
    lines = Path(path).read_text().splitlines()
    x, a, n = _read_header(lines, "shape", path)
    return Policy(_read_table(path, lines, (n, x, a), 1))


def write_occupancy(path, mu: OccupancyMeasure) -> None:
    s = mu.shape
    _write_table(path, f"# shape {s.num_states} {s.num_actions} {s.horizon}", mu.probs, 0)


def read_occupancy(path) -> OccupancyMeasure:
    lines = Path(path).read_text().splitlines()
    x, a, n = _read_header(lines, "shape", path)
    return OccupancyMeasure(_read_table(path, lines, (n + 1, x, a), 0))


def read_step_array(path) -> np.ndarray:
    """Read an (N, X, A) array in the policy layout without simplex checks (reward files)."""
    lines = Path(path).read_text().splitlines()
    x, a, n = _read_header(lines, "shape", path)
    return _read_table(path, lines, (n, x, a), 1)


def write_kernel(path, kernel: TransitionKernel) -> None:
    s = kernel.shape
    _write_table(path, f"# kernel {s.num_states} {s.num_actions} {s.horizon}",
                 kernel.probs, 1, sparse=True)


def read_kernel(path) -> TransitionKernel:
    lines = Path(path).read_text().splitlines()
    x, a, n = _read_header(lines, "kernel", path)
    return TransitionKernel(_read_table(path, lines, (n, x, a, x), 1))


def write_grid(path, values: np.ndarray, side: int) -> None:
    """Per-cell values of a square grid as ``row,col,value`` lines."""
    grid = np.asarray(values).reshape(side, side)
    out = ["row,col,value"]
    for r in range(side):
        for c in range(side):
            out.append(f"{r},{c},{_fmt(grid[r, c])}")
    Path(path).write_text("\n".join(out) + "\n")
