import csv
import logging
import subprocess
import sys

import numpy as np
import pytest

from weightedcs import __version__
from weightedcs.cli import ConfigError, load_config, main, parse_grid

SMALL = """
[experiment]
seed = 5

[distribution]
{dist}

[weights]
source = {source}

[volumes]
n_supports = 40
n_points = 20

[phase]
m_grid = {grid}
trials = 8

[descend]
n_grad_samples = 1000
n_eval_samples = 1000
max_iters = 2

[histogram]
n_supports = 12
n_points = 20
"""

BLOCKS = "kind = bernoulli_blocks\nd = 8\nn_blocks = 2\nparams = 0.5, 0.25"


def write_config(tmp_path, dist=BLOCKS, source="theorem", grid="2-8:2", name="exp.ini"):
    path = tmp_path / name
    path.write_text(SMALL.format(dist=dist, source=source, grid=grid))
    return path


def read_rows(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


COMMANDS = {
    "weights": ["weights.csv"],
    "volumes": ["volumes.csv"],
    "phase": ["phase.csv", "predicted.csv"],
    "descend": ["trajectory.csv", "weights.csv"],
    "histogram": ["deltahist.csv"],
}


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_command_writes_csv_with_header(tmp_path, command, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main([command, "--config", str(cfg), "--out", str(out)]) == 0
    for name in COMMANDS[command]:
        header, rows = read_rows(out / name)
        assert header.startswith(f"# weightedcs {__version__} command={command} seed=5 config_sha256=")
        assert rows


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_reruns_are_byte_identical(tmp_path, command):
    cfg = write_config(tmp_path)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main([command, "--config", str(cfg), "--out", str(out), "--workers", "2"]) == 0
        outs.append({name: (out / name).read_bytes() for name in COMMANDS[command]})
    assert outs[0] == outs[1]


def test_worker_count_does_not_change_output(tmp_path):
    cfg = write_config(tmp_path)
    for workers in ("1", "3"):
        main(["volumes", "--config", str(cfg), "--out", str(tmp_path / workers), "--workers", workers])
    assert (tmp_path / "1" / "volumes.csv").read_bytes() == (tmp_path / "3" / "volumes.csv").read_bytes()


def test_seed_override_changes_header_and_counts(tmp_path):
    cfg = write_config(tmp_path)
    main(["volumes", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["volumes", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "6"])
    ha, ra = read_rows(tmp_path / "a" / "volumes.csv")
    hb, rb = read_rows(tmp_path / "b" / "volumes.csv")
    assert "seed=6" in hb and ha != hb
    assert [r["count"] for r in ra] != [r["count"] for r in rb]


def test_weights_csv_contents(tmp_path):
    cfg = write_config(tmp_path)
    main(["weights", "--config", str(cfg), "--out", str(tmp_path)])
    _, rows = read_rows(tmp_path / "weights.csv")
    assert [int(r["index"]) for r in rows] == list(range(8))
    lam = np.array([float(r["lambda"]) for r in rows])
    assert np.all(lam[:4] == lam[0]) and lam[4] > lam[0]


def test_volumes_csv_schema(tmp_path):
    cfg = write_config(tmp_path)
    main(["volumes", "--config", str(cfg), "--out", str(tmp_path)])
    _, rows = read_rows(tmp_path / "volumes.csv")
    assert list(rows[0]) == ["k", "count", "nu_bar", "t_bar", "h_bar", "ci"]
    assert sum(int(r["count"]) for r in rows) == 40 * 20
    assert len(rows) == 9


def test_wedge_phase_and_prediction(tmp_path):
    cfg = write_config(tmp_path, dist="kind = point\nd = 2\nsupport = 0", source="unit", grid="1,2")
    main(["phase", "--config", str(cfg), "--out", str(tmp_path)])
    _, phase = read_rows(tmp_path / "phase.csv")
    _, pred = read_rows(tmp_path / "predicted.csv")
    assert [int(r["m"]) for r in phase] == [1, 2]
    assert phase[1]["frequency"] == "1"
    assert float(pred[1]["predicted"]) == 1.0
    assert 0.2 < float(pred[0]["predicted"]) < 0.8


def test_descend_trajectory(tmp_path):
    cfg = write_config(tmp_path)
    main(["descend", "--config", str(cfg), "--out", str(tmp_path)])
    _, rows = read_rows(tmp_path / "trajectory.csv")
    assert rows[0]["status"] == "start"
    assert rows[-1]["status"].startswith("stop: ")
    deltas = [float(r["delta_bar"]) for r in rows[:-1]]
    assert all(b < a for a, b in zip(deltas, deltas[1:]))


def test_descend_from_designed_weights_barely_moves(tmp_path):
    text = SMALL.format(dist=BLOCKS, source="theorem", grid="2-8:2").replace("max_iters = 2", "max_iters = 6\ninit = theorem")
    (tmp_path / "t.ini").write_text(text)
    assert main(["descend", "--config", str(tmp_path / "t.ini"), "--out", str(tmp_path)]) == 0
    _, rows = read_rows(tmp_path / "trajectory.csv")
    assert sum(r["status"] == "accepted" for r in rows) <= 2
    _, final = read_rows(tmp_path / "weights.csv")
    _, start = read_rows(tmp_path / "trajectory.csv")
    w_end = np.array([float(r["lambda"]) for r in final])
    w_start = np.array([float(start[0][f"w{i}"]) for i in range(8)])
    c = w_end @ w_start / (w_end @ w_end)
    assert np.max(np.abs(c * w_end - w_start) / w_start) < 0.2


def test_histogram_supports(tmp_path):
    cfg = write_config(tmp_path, dist="kind = mixture\nd = 6\nsupports = 0-1; 2-5", grid="1-6")
    main(["histogram", "--config", str(cfg), "--out", str(tmp_path)])
    _, rows = read_rows(tmp_path / "deltahist.csv")
    assert {r["support"] for r in rows} <= {"0 1", "2 3 4 5"}
    assert all(int(r["k"]) == len(r["support"].split()) for r in rows)


def test_beta_file_with_zero_is_clipped(tmp_path, caplog):
    (tmp_path / "beta.txt").write_text("0.5\n0.0\n0.25 0.75\n")
    cfg = write_config(tmp_path, dist="kind = beta_file\npath = beta.txt", grid="1-4")
    with caplog.at_level(logging.WARNING):
        assert main(["weights", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert "clipped" in caplog.text
    _, rows = read_rows(tmp_path / "weights.csv")
    assert float(rows[1]["beta"]) == 1e-6
    assert np.isfinite(float(rows[1]["lambda"]))


def test_mask_file_distribution(tmp_path):
    (tmp_path / "m.txt").write_text("1100\n0011\n1010\n")
    cfg = write_config(tmp_path, dist="kind = masks\npath = m.txt", grid="1-4")
    assert main(["weights", "--config", str(cfg), "--out", str(tmp_path)]) == 0


def test_weight_file_source(tmp_path):
    cfg = write_config(tmp_path)
    main(["weights", "--config", str(cfg), "--out", str(tmp_path / "w")])
    text = SMALL.format(dist=BLOCKS, source="file\npath = w/weights.csv", grid="2-8:2")
    (tmp_path / "f.ini").write_text(text)
    assert main(["volumes", "--config", str(tmp_path / "f.ini"), "--out", str(tmp_path / "v")]) == 0


@pytest.mark.parametrize("dist, grid", [
    ("kind = bernoulli_blocks\nd = 8\nn_blocks = 3\nparams = 0.5,0.5,0.5", "1-8"),
    ("kind = nonsense", "1-8"),
    ("kind = masks\npath = missing.txt", "1-8"),
    (BLOCKS, "0-8"),
    (BLOCKS, "2-9"),
])
def test_config_errors_exit_2(tmp_path, dist, grid, capsys):
    cfg = write_config(tmp_path, dist=dist, grid=grid)
    assert main(["weights", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["weights", "--config", str(tmp_path / "nope.ini")]) == 2


def test_unknown_weight_source(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, source="magic"))


def test_parse_grid():
    assert parse_grid("10-30:10", 128) == [10, 20, 30]
    assert parse_grid("1, 3,5", 5) == [1, 3, 5]


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "weightedcs", "weights", "--config", str(cfg), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "weights.csv").exists()
