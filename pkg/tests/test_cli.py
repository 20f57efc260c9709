import numpy as np
import pytest

from curl_lab import (
    Policy,
    check_bellman_flow,
    corner_start,
    four_room_geometry,
    four_room_gridworld,
    kernel_from_dynamics,
    occupancy_from_policy,
)
from curl_lab import io
from curl_lab.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from curl_lab.config import ConfigError, build_config, load_config, parse_config_text

SMALL_ONLINE = """
[run]
mode = online
seed = 3
[environment]
grid_side = 5
horizon = 6
noise_up_prob = 0.2
[objective]
objective = entropy
[solver]
episodes = 6
agents = 3
variants = ["greedy", "known", "never_learn"]
comparator_iterations = 60
comparator_tau = 0.3
snapshot_every = 3
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return header, np.array([[float(v) for v in line.split(",")] for line in lines[1:]])


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# ----------------------------------------------------------------------------- config parsing


def test_minimal_config_uses_defaults(tmp_path, capsys):
    path = write(tmp_path, "min.cfg", "[objective]\nobjective = entropy\n")
    assert main(["validate", str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert f"{path}: ok" in out
    for line in ("mode = offline", "grid_side = 11", "horizon = 40", "iterations = 500",
                 "rho_steps = [40]", "num_states = 121"):
        assert line in out
    assert "(auto)" in out


def test_online_validate_reports_tau_and_b(tmp_path, capsys):
    path = write(tmp_path, "on.cfg", "[run]\nmode = online\n[objective]\nobjective = entropy\n")
    assert main(["validate", str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "\nb = " in out and "tau = " in out and "alpha = decay" in out


def test_alpha_outside_the_mixing_range(tmp_path, capsys):
    path = write(tmp_path, "a.cfg", "[run]\nmode = online\n[objective]\nobjective = entropy\n"
                                    "[solver]\nalpha = 0.6\n")
    assert main(["validate", str(path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert f"{path}:6:" in err and "(0, 1/2)" in err and "(1 - alpha) pi + alpha / |A|" in err


def test_missing_objective_section(tmp_path, capsys):
    path = write(tmp_path, "m.cfg", "[run]\nmode = offline\n")
    assert main(["validate", str(path)]) == EXIT_CONFIG
    assert "missing [objective]" in capsys.readouterr().err


def test_every_problem_is_listed_with_its_line():
    text = ("[run]\nmode = offline\nspeed = 3\n[objective]\nobjective = entropy\n"
            "objective = multi\n[solver]\niterations = 0\nepisodes = 4\n[plots]\n")
    with pytest.raises(ConfigError) as info:
        errors = []
        build_config(parse_config_text(text, "t.cfg", errors), "t.cfg", errors=errors)
    msgs = info.value.errors
    assert any(m.startswith("t.cfg:3:") and "unknown key 'speed'" in m for m in msgs)
    assert any(m.startswith("t.cfg:6:") and "first set on line 5" in m for m in msgs)
    assert any(m.startswith("t.cfg:8:") and "iterations" in m for m in msgs)
    assert any(m.startswith("t.cfg:9:") and "not used in offline mode" in m for m in msgs)
    assert any(m.startswith("t.cfg:10:") and "unknown section" in m for m in msgs)


def test_value_checks():
    bad = {
        "[environment]\ngrid_side = 8\n": "odd",
        "[environment]\nnoise_up_prob = 0.7\nnoise_down_prob = 0.5\n": "sum",
        "[objective]\nobjective = multi\ntargets = [500]\n": "targets",
        "[objective]\nobjective = linear\n": "reward_file",
        "[run]\nseed = -1\n": "seed",
        "[solver]\ntau = -2\n": "tau",
        "[run]\nmode = online\n[solver]\nvariants = [\"greedy\", \"greedy\"]\n": "variants",
        "[run]\nmode = online\n[solver]\nestimator = known\n": "estimator",
    }
    for body, word in bad.items():
        text = body if "[objective]" in body else body + "[objective]\nobjective = entropy\n"
        errors = []
        with pytest.raises(ConfigError, match=word):
            build_config(parse_config_text(text, "v.cfg", errors), "v.cfg", errors=errors)


def test_inline_comments_and_quotes(tmp_path):
    path = write(tmp_path, "c.cfg", "; leading\n[objective]\nobjective = entropy  # trailing\n"
                                    "[output]\ndir = \"out#1\"\n")
    cfg = load_config(path)
    assert cfg.objective == "entropy" and str(cfg.out_dir) == "out#1"


def test_unknown_command_and_bad_jobs(tmp_path, capsys):
    path = write(tmp_path, "min.cfg", "[objective]\nobjective = entropy\n")
    with pytest.raises(SystemExit):
        main(["train", str(path)])
    assert main(["validate", str(path), "--jobs", "0"]) == EXIT_CONFIG
    assert main(["validate", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG
    capsys.readouterr()


def test_mode_mismatch_is_a_config_error(tmp_path, capsys):
    path = write(tmp_path, "on.cfg", "[run]\nmode = online\n[objective]\nobjective = entropy\n")
    assert main(["solve", str(path)]) == EXIT_CONFIG
    assert "curl-lab online" in capsys.readouterr().err


def test_unwritable_output_is_a_runtime_error(tmp_path, capsys):
    path = write(tmp_path, "s.cfg", "[environment]\ngrid_side = 5\nhorizon = 2\n"
                                    "[objective]\nobjective = entropy\n[solver]\niterations = 1\n")
    blocker = write(tmp_path, "blocker", "")
    assert main(["solve", str(path), "--out", str(blocker)]) == EXIT_RUNTIME
    assert "runtime error" in capsys.readouterr().err


# ----------------------------------------------------------------------------- offline jobs


def test_one_step_on_zero_reward_is_the_uniform_rollout(tmp_path, capsys):
    side, horizon = 5, 4
    reward = tmp_path / "zero.txt"
    reward.write_text(f"# shape {side * side} 5 {horizon}\n")
    path = write(tmp_path, "lin.cfg", f"[environment]\ngrid_side = {side}\nhorizon = {horizon}\n"
                                      "noise_up_prob = 0.1\n[objective]\nobjective = linear\n"
                                      "reward_file = \"zero.txt\"\n[solver]\niterations = 1\n")
    out = tmp_path / "out"
    assert main(["solve", str(path), "--out", str(out)]) == EXIT_OK
    shape_dyn = four_room_gridworld(side, 0.1, horizon)
    uniform = Policy.uniform(shape_dyn.shape)
    expected = occupancy_from_policy(uniform, kernel_from_dynamics(shape_dyn), corner_start(side))
    assert io.read_occupancy(out / "occupancy_final.txt").probs.tobytes() == expected.probs.tobytes()
    assert io.read_policy(out / "policy_final.txt").probs.tobytes() == uniform.probs.tobytes()
    assert (out / "objective.csv").read_text() == "k,objective\n0,0\n1,0\n"
    capsys.readouterr()


def test_reward_file_shape_mismatch(tmp_path, capsys):
    (tmp_path / "r.txt").write_text("# shape 4 5 2\n")
    path = write(tmp_path, "lin.cfg", "[objective]\nobjective = linear\nreward_file = \"r.txt\"\n")
    assert main(["validate", str(path)]) == EXIT_CONFIG
    assert "shape" in capsys.readouterr().err


def test_solve_dumps_reload_consistently(tmp_path, capsys):
    path = write(tmp_path, "e.cfg", "[environment]\ngrid_side = 7\nhorizon = 8\nnoise_up_prob = 0.2\n"
                                    "[objective]\nobjective = entropy\n[solver]\niterations = 20\n"
                                    "tau = 0.3\nrho_steps = [0, 4, 8]\n")
    out = tmp_path / "o"
    assert main(["solve", str(path), "--out", str(out)]) == EXIT_OK
    dyn = four_room_gridworld(7, 0.2, 8)
    kernel, mu0 = kernel_from_dynamics(dyn), corner_start(7)
    mu = io.read_occupancy(out / "occupancy_final.txt")
    assert check_bellman_flow(mu, kernel, mu0, 1e-9)
    again = occupancy_from_policy(io.read_policy(out / "policy_final.txt"), kernel, mu0)
    assert np.max(np.abs(again.probs - mu.probs)) <= 1e-12
    io.read_policy(out / "policy_best.txt")
    for n in (0, 4, 8):
        _, grid = read_csv(out / f"rho_n{n:02d}.txt")
        assert np.allclose(grid[:, 2], mu.rho[n], atol=1e-15)
    header, obj = read_csv(out / "objective.csv")
    assert header == ["k", "objective"] and obj.shape == (21, 2)
    assert "tau = 0.3\n" in (out / "resolved.txt").read_text()
    capsys.readouterr()


@pytest.mark.slow
def test_entropy_solve_spreads_over_the_rooms(tmp_path, capsys):
    path = write(tmp_path, "e.cfg", "[environment]\ngrid_side = 11\nhorizon = 40\n"
                                    "[objective]\nobjective = entropy\n[solver]\niterations = 500\n")
    out = tmp_path / "o"
    assert main(["solve", str(path), "--out", str(out)]) == EXIT_OK
    _, obj = read_csv(out / "objective.csv")
    vals = obj[:, 1]
    assert vals[-1] < vals[0]
    # trend: every block of 50 iterations ends lower than the previous one
    assert np.all(np.diff(vals[::50]) < 0)
    _, grid = read_csv(out / "rho_n40.txt")
    rho = grid[:, 2]
    for room in four_room_geometry(11).rooms():
        assert rho[room].sum() >= 0.05
    capsys.readouterr()


@pytest.mark.slow
def test_multi_solve_concentrates_near_targets(tmp_path, capsys):
    targets = [(0, 10), (10, 0), (10, 10)]
    path = write(tmp_path, "m.cfg", "[environment]\ngrid_side = 11\nhorizon = 40\n"
                                    "[objective]\nobjective = multi\n"
                                    f"targets = {[11 * r + c for r, c in targets]}\n"
                                    "[solver]\niterations = 500\n")
    out = tmp_path / "o"
    assert main(["solve", str(path), "--out", str(out)]) == EXIT_OK
    _, grid = read_csv(out / "rho_n40.txt")
    rho = grid[:, 2].reshape(11, 11)
    near = np.zeros((11, 11), dtype=bool)
    for r, c in targets:
        near[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2] = True
    assert rho[near].sum() >= 0.5
    capsys.readouterr()


# ----------------------------------------------------------------------------- online jobs


@pytest.fixture(scope="module")
def online_out(tmp_path_factory):
    root = tmp_path_factory.mktemp("online")
    path = write(root, "small.cfg", SMALL_ONLINE)
    assert main(["online", str(path), "--out", str(root / "a")]) == EXIT_OK
    first = tree_bytes(root / "a")
    assert main(["online", str(path), "--out", str(root / "a")]) == EXIT_OK
    return root, path, first


def test_online_outputs_are_byte_identical(online_out):
    root, _, a = online_out
    b = tree_bytes(root / "a")
    assert set(a) == {"comparison.csv", "policy_comparator.txt", "resolved.txt",
                      "regret_greedy.csv", "regret_known.csv", "regret_never_learn.csv",
                      "kernel_greedy_t0003.txt", "kernel_greedy_t0006.txt"}
    assert a == b


def test_seed_override_changes_the_run(online_out, tmp_path, capsys):
    root, path, _ = online_out
    assert main(["online", str(path), "--out", str(tmp_path / "c"), "--seed", "4"]) == EXIT_OK
    assert (tmp_path / "c" / "regret_greedy.csv").read_bytes() != \
        (root / "a" / "regret_greedy.csv").read_bytes()
    assert main(["online", str(path), "--seed", str(2 ** 64)]) == EXIT_CONFIG
    capsys.readouterr()


def test_comparison_reconciles_with_variant_files(online_out):
    root, _, _ = online_out
    header, comp = read_csv(root / "a" / "comparison.csv")
    assert header[:2] == ["t", "comparator_loss"]
    for variant in ("greedy", "known", "never_learn"):
        vh, rows = read_csv(root / "a" / f"regret_{variant}.csv")
        assert vh == ["t", "realized_loss", "comparator_loss", "cum_regret",
                      "r_mdp_pi", "r_policy", "r_mdp_star"]
        realized = comp[:, header.index(f"{variant}_realized_loss")]
        assert realized.sum() == rows[:, 1].sum()
        assert np.array_equal(comp[:, header.index(f"{variant}_cum_regret")], rows[:, 3])
        assert np.array_equal(comp[:, 1], rows[:, 2])
        assert abs(rows[:, 4:].sum() - rows[-1, 3]) <= 1e-9


def test_kernel_snapshots_reload(online_out):
    root, _, _ = online_out
    kernel = io.read_kernel(root / "a" / "kernel_greedy_t0006.txt")
    assert kernel.shape.num_states == 25 and kernel.shape.horizon == 6
    assert np.allclose(kernel.probs.sum(axis=-1), 1.0)


def test_jobs_fan_out_matches_sequential(tmp_path, capsys):
    cfgs = []
    for name, side in (("one", 5), ("two", 7)):
        cfgs.append(str(write(tmp_path, f"{name}.cfg",
                              f"[environment]\ngrid_side = {side}\nhorizon = 5\n"
                              "[objective]\nobjective = entropy\n[solver]\niterations = 5\n")))
    assert main(["solve", *cfgs, "--out", str(tmp_path / "par"), "--jobs", "2"]) == EXIT_OK
    assert main(["solve", *cfgs, "--out", str(tmp_path / "seq")]) == EXIT_OK
    for stem in ("one", "two"):
        par = tree_bytes(tmp_path / "par" / stem)
        seq = tree_bytes(tmp_path / "seq" / stem)
        assert par.keys() == seq.keys()
        for name in par:
            if name != "resolved.txt":  # carries out_dir
                assert par[name] == seq[name]
    capsys.readouterr()


def test_count_estimator_job(tmp_path, capsys):
    text = SMALL_ONLINE.replace('variants = ["greedy", "known", "never_learn"]',
                                'variants = ["greedy"]\nestimator = counts')
    path = write(tmp_path, "counts.cfg", text)
    assert main(["online", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
    header, comp = read_csv(tmp_path / "o" / "comparison.csv")
    assert header == ["t", "comparator_loss", "greedy_realized_loss", "greedy_cum_regret"]
    assert comp.shape == (6, 4)
    assert "estimator = counts" in (tmp_path / "o" / "resolved.txt").read_text()
    capsys.readouterr()
