"""``curl-lab``: run offline solves and online learning jobs from config files."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, ExperimentConfig, load_config
from .env import corner_start, kernel_from_dynamics, noisy_four_room
from .mdp import DimensionError
from .objectives import entropy_objective, linear_objective, multi_objective
from .online import (
    OnlineConfig,
    RegretReport,
    best_stationary_policy,
    default_online_tau,
    online_b,
    run_online,
)
from .solver import SolverConfig, auto_learning_rate, md_curl_solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


@dataclass
class Problem:
    dyn: object
    kernel: object
    mu0: object
    objective: object


def build_problem(cfg: ExperimentConfig) -> Problem:
    """Environment, true kernel, start distribution and objective; raises ConfigError."""
    dyn = noisy_four_room(cfg.grid_side, cfg.noise, cfg.horizon)
    shape = dyn.shape
    if cfg.objective == "entropy":
        obj = entropy_objective(shape)
    elif cfg.objective == "multi":
        obj = multi_objective(shape, cfg.targets)
    else:
        try:
            obj = linear_objective(io.read_step_array(cfg.reward_file))
        except (OSError, io.FormatError) as exc:
            raise ConfigError(f"{cfg.source}: cannot load reward_file: {exc}") from None
        if obj.shape != shape:
            raise ConfigError(f"{cfg.source}: reward_file has shape {obj.shape}, "
                              f"environment needs {shape}")
    return Problem(dyn, kernel_from_dynamics(dyn), corner_start(cfg.grid_side), obj)


def _online_config(cfg: ExperimentConfig, variant: str, tau=None) -> OnlineConfig:
    estimator = {"greedy": cfg.estimator, "known": "known", "never_learn": "never_learn"}[variant]
    return OnlineConfig(episodes=cfg.episodes, agents=cfg.agents, tau=tau, alpha=cfg.alpha,
                        estimator=estimator, mixing=(variant == "greedy"))


def resolved_parameters(cfg: ExperimentConfig, problem: Problem) -> list[tuple[str, object]]:
    shape = problem.dyn.shape
    obj = problem.objective
    out = [
        ("mode", cfg.mode),
        ("seed", cfg.seed),
        ("grid_side", cfg.grid_side),
        ("num_states", shape.num_states),
        ("num_actions", shape.num_actions),
        ("horizon", shape.horizon),
        ("noise", ", ".join(f"{s}={p:g}" for s, p in
                            zip(problem.dyn.noise_support, problem.dyn.noise_dist[0]))),
        ("objective", cfg.objective),
    ]
    if cfg.objective == "multi":
        out.append(("targets", list(cfg.targets)))
    if cfg.objective == "linear":
        out.append(("reward_file", str(cfg.reward_file)))
    out += [("lipschitz_l", obj.lipschitz_l), ("big_l", obj.big_l)]
    if cfg.mode == "offline":
        tau = (auto_learning_rate(cfg.iterations, obj.big_l, shape)
               if cfg.tau == "auto" else cfg.tau)
        out += [("iterations", cfg.iterations),
                ("tau", f"{tau!r}" + (" (auto)" if cfg.tau == "auto" else "")),
                ("rho_steps", list(cfg.resolved_rho_steps))]
    else:
        ocfg = _online_config(cfg, "greedy")
        b = online_b(ocfg, shape)
        tau = default_online_tau(ocfg, obj.big_l, shape) if cfg.tau == "auto" else cfg.tau
        out += [("episodes", cfg.episodes), ("agents", cfg.agents),
                ("alpha", cfg.alpha), ("estimator", cfg.estimator),
                ("variants", list(cfg.variants)), ("b", b),
                ("tau", f"{tau!r}" + (" (auto)" if cfg.tau == "auto" else "")),
                ("comparator_iterations", cfg.comparator_iterations),
                ("comparator_tau", cfg.comparator_tau),
                ("snapshot_every", cfg.snapshot_every)]
    out.append(("out_dir", str(cfg.out_dir)))
    return out


def _format_params(params) -> str:
    return "".join(f"{k} = {v}\n" for k, v in params)


def _online_tau(cfg: ExperimentConfig, problem: Problem) -> float:
    if cfg.tau != "auto":
        return float(cfg.tau)
    return default_online_tau(_online_config(cfg, "greedy"), problem.objective.big_l,
                              problem.dyn.shape)


def cmd_solve(cfg: ExperimentConfig, problem: Problem, log=print) -> None:
    tau = None if cfg.tau == "auto" else cfg.tau
    report = md_curl_solve(problem.objective, problem.kernel, problem.mu0,
                           SolverConfig(cfg.iterations, tau))
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    lines = ["k,objective"] + [f"{k},{v:.17g}" for k, v in enumerate(report.objective_values)]
    (out / "objective.csv").write_text("\n".join(lines) + "\n")
    io.write_policy(out / "policy_final.txt", report.final_policy)
    io.write_policy(out / "policy_best.txt", report.best_policy)
    io.write_occupancy(out / "occupancy_final.txt", report.final_occupancy)
    rho = report.final_occupancy.rho
    for n in cfg.resolved_rho_steps:
        io.write_grid(out / f"rho_n{n:02d}.txt", rho[n], cfg.grid_side)
    (out / "resolved.txt").write_text(_format_params(resolved_parameters(cfg, problem)))
    log(f"solve: K={cfg.iterations} tau={report.learning_rate:.6g} "
        f"final={report.objective_values[-1]:.6f} best={report.best_value:.6f} "
        f"(k={report.best_index}) -> {out}")


def comparison_lines(reports: dict[str, RegretReport]) -> list[str]:
    names = list(reports)
    first = reports[names[0]]
    header = ["t", "comparator_loss"]
    for v in names:
        header += [f"{v}_realized_loss", f"{v}_cum_regret"]
    lines = [",".join(header)]
    for t in range(first.episodes):
        row = [str(t + 1), "%.17g" % first.comparator[t]]
        for v in names:
            rep = reports[v]
            row += ["%.17g" % rep.realized[t], "%.17g" % rep.cum_regret[t]]
        lines.append(",".join(row))
    return lines


def _snapshot_hook(out: Path, variant: str, every: int):
    def hook(t, est):
        if t % every == 0:
            io.write_kernel(out / f"kernel_{variant}_t{t:04d}.txt", est.kernel)
    return hook


def cmd_online(cfg: ExperimentConfig, problem: Problem, log=print) -> None:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    tau = _online_tau(cfg, problem)
    comparator = None
    if cfg.comparator_iterations > 0:
        ctau = None if cfg.comparator_tau == "auto" else cfg.comparator_tau
        comparator = best_stationary_policy([problem.objective], problem.kernel, problem.mu0,
                                            cfg.comparator_iterations, ctau)
        io.write_policy(out / "policy_comparator.txt", comparator)
    reports = {}
    for variant in cfg.variants:
        ocfg = _online_config(cfg, variant, tau)
        hook = None
        if cfg.snapshot_every > 0 and variant == "greedy":
            hook = _snapshot_hook(out, variant, cfg.snapshot_every)
        rep = run_online(problem.dyn, problem.objective, ocfg, cfg.seed, problem.mu0,
                         comparator=comparator, on_episode=hook)
        if comparator is None:
            rep.comparator = np.full(rep.episodes, np.nan)
        reports[variant] = rep
        (out / f"regret_{variant}.csv").write_text("\n".join(rep.csv_lines()) + "\n")
        log(f"online[{variant}]: T={cfg.episodes} final loss={rep.realized[-1]:.6f} "
            f"regret={rep.regret:.6f}")
    (out / "comparison.csv").write_text("\n".join(comparison_lines(reports)) + "\n")
    (out / "resolved.txt").write_text(_format_params(resolved_parameters(cfg, problem)))
    log(f"online: wrote {len(reports)} variant(s) -> {out}")


def cmd_validate(cfg: ExperimentConfig, problem: Problem, log=print) -> None:
    log(f"{cfg.source}: ok")
    log(_format_params(resolved_parameters(cfg, problem)).rstrip("\n"))


COMMANDS = {"solve": cmd_solve, "online": cmd_online, "validate": cmd_validate}
MODE_OF = {"solve": "offline", "online": "online"}


def run_job(command: str, path, out_dir=None, seed=None) -> tuple[int, list[str]]:
    """Run one config file; returns (exit code, messages) instead of printing."""
    messages: list[str] = []
    try:
        cfg = load_config(path).with_overrides(out_dir=out_dir, seed=seed)
        want = MODE_OF.get(command)
        if want is not None and cfg.mode != want:
            raise ConfigError(f"{path}: config declares mode = {cfg.mode}; "
                              f"use 'curl-lab {'solve' if cfg.mode == 'offline' else 'online'}'")
        problem = build_problem(cfg)
    except (ConfigError, ValueError) as exc:
        return EXIT_CONFIG, [f"config error: {line}" for line in str(exc).splitlines()]
    try:
        COMMANDS[command](cfg, problem, log=messages.append)
    except (OSError, ValueError, DimensionError) as exc:
        messages.append(f"runtime error: {exc}")
        return EXIT_RUNTIME, messages
    return EXIT_OK, messages


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curl-lab", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("configs", nargs="+", type=Path, metavar="config")
    p.add_argument("--out", type=Path, default=None,
                   help="output directory (one subdirectory per config when several are given)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
    p.add_argument("--jobs", type=int, default=1, help="run independent configs on N threads")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    many = len(args.configs) > 1

    def out_for(path: Path):
        if args.out is None:
            return None
        return args.out / path.stem if many else args.out

    jobs = [(args.command, path, out_for(path), args.seed) for path in args.configs]
    if args.jobs == 1 or not many:
        results = [run_job(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(lambda job: run_job(*job), jobs))
    code = EXIT_OK
    for status, messages in results:
        for line in messages:
            failed = line.startswith(("config error", "runtime error"))
            print(line, file=sys.stderr if failed else sys.stdout)
        code = max(code, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
