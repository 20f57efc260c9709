import numpy as np
import pytest
from conftest import random_instance
from hypothesis import given, settings
from hypothesis import strategies as st

from curl_lab import MdpShape, occupancy_from_policy
from curl_lab import io
from curl_lab.env import four_room_gridworld, kernel_from_dynamics


def test_policy_roundtrip_is_bit_exact(tmp_path):
    _, policy, _ = random_instance(0, MdpShape(4, 3, 5))
    io.write_policy(tmp_path / "p.txt", policy)
    assert io.read_policy(tmp_path / "p.txt").probs.tobytes() == policy.probs.tobytes()


def test_occupancy_roundtrip_is_bit_exact(tmp_path):
    kernel, policy, mu0 = random_instance(1, MdpShape(4, 3, 5))
    mu = occupancy_from_policy(policy, kernel, mu0)
    io.write_occupancy(tmp_path / "mu.txt", mu)
    assert io.read_occupancy(tmp_path / "mu.txt").probs.tobytes() == mu.probs.tobytes()


def test_policy_file_layout(tmp_path):
    _, policy, _ = random_instance(2, MdpShape(2, 2, 1))
    io.write_policy(tmp_path / "p.txt", policy)
    lines = (tmp_path / "p.txt").read_text().splitlines()
    assert lines[0] == "# shape 2 2 1"
    assert [line.split("\t")[:3] for line in lines[1:]] == \
        [["1", "0", "0"], ["1", "0", "1"], ["1", "1", "0"], ["1", "1", "1"]]


def test_sparse_kernel_roundtrip(tmp_path):
    kernel = kernel_from_dynamics(four_room_gridworld(5, 0.2, 3))
    io.write_kernel(tmp_path / "k.txt", kernel)
    lines = (tmp_path / "k.txt").read_text().splitlines()
    assert lines[0] == "# kernel 25 5 3"
    assert len(lines) - 1 == np.count_nonzero(kernel.probs)
    assert io.read_kernel(tmp_path / "k.txt").probs.tobytes() == kernel.probs.tobytes()


def test_grid_dump(tmp_path):
    io.write_grid(tmp_path / "g.txt", np.arange(9) / 10, 3)
    lines = (tmp_path / "g.txt").read_text().splitlines()
    assert lines[0] == "row,col,value" and lines[4] == "1,0,0.29999999999999999"


def test_malformed_files_are_rejected(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1\t0\t0\t1.0\n")
    with pytest.raises(io.FormatError, match="header"):
        io.read_policy(bad)
    bad.write_text("# kernel 1 1 1\n1\t0\t0\t0\t1.0\n")
    with pytest.raises(io.FormatError):
        io.read_policy(bad)
    bad.write_text("# shape 1 1 1\n1\t0\t1.0\n")
    with pytest.raises(io.FormatError, match=":2:"):
        io.read_policy(bad)
    bad.write_text("# shape 1 1 1\n1\t5\t0\t1.0\n")
    with pytest.raises(io.FormatError, match=":2:"):
        io.read_policy(bad)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_roundtrip_property(seed):
    import tempfile
    from pathlib import Path
    kernel, policy, mu0 = random_instance(seed, MdpShape(3, 2, 3))
    mu = occupancy_from_policy(policy, kernel, mu0)
    with tempfile.TemporaryDirectory() as d:
        io.write_policy(Path(d) / "p", policy)
        io.write_occupancy(Path(d) / "m", mu)
        assert np.array_equal(io.read_policy(Path(d) / "p").probs, policy.probs)
        assert np.array_equal(io.read_occupancy(Path(d) / "m").probs, mu.probs)
