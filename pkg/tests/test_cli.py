"""drn-lab CLI subcommands exercised in-process."""

import csv

import numpy as np
import pytest

from drnlab.cli import main
from drnlab.model import load_netlist
from drnlab.relu import save_relu_net
from drnlab.universal import abs_relu_net

from conftest import random_relu_net, write_synthetic_dataset


@pytest.fixture
def weight_file(tmp_path):
    path = tmp_path / "net.rnn"
    save_relu_net(abs_relu_net(), path)
    return path


def test_compile_and_stats(tmp_path, weight_file, capsys):
    netlist = tmp_path / "abs.netlist"
    assert main(["compile", "--nn", str(weight_file), "--gamma", "0.01",
                 "--out", str(netlist)]) == 0
    params = load_netlist(netlist)
    assert params.widths == (4, 6, 1)

    stats_csv = tmp_path / "stats.csv"
    assert main(["stats", "--netlist", str(netlist), "--out", str(stats_csv)]) == 0
    rows = list(csv.reader(stats_csv.open()))
    assert rows[0] == ["layer", "mean", "std", "max"]
    assert len(rows) == 3


def test_solve_roundtrip(tmp_path, weight_file):
    netlist = tmp_path / "abs.netlist"
    main(["compile", "--nn", str(weight_file), "--gamma", "0.001", "--out", str(netlist)])
    inputs = tmp_path / "x.csv"
    xs = np.array([[-0.8], [0.0], [0.5]])
    np.savetxt(inputs, xs, delimiter=",")
    out = tmp_path / "v.csv"
    assert main(["solve", "--netlist", str(netlist), "--input", str(inputs),
                 "--iters", "200", "--cert", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0][:1] == ["v_out_0"]
    assert "kcl_residual_max" in rows[0]
    got = np.array([float(r[0]) for r in rows[1:]])
    np.testing.assert_allclose(got, np.abs(xs[:, 0]), atol=0.05)


def test_solve_rejects_wrong_width(tmp_path, weight_file, capsys):
    netlist = tmp_path / "abs.netlist"
    main(["compile", "--nn", str(weight_file), "--gamma", "0.01", "--out", str(netlist)])
    inputs = tmp_path / "x.csv"
    np.savetxt(inputs, np.ones((2, 3)), delimiter=",")
    assert main(["solve", "--netlist", str(netlist), "--input", str(inputs),
                 "--out", str(tmp_path / "v.csv")]) == 2
    assert "expects 1" in capsys.readouterr().err


def test_verify_report(tmp_path):
    weight_path = tmp_path / "rand.rnn"
    save_relu_net(random_relu_net((2, 3, 2), 1), weight_path)
    report = tmp_path / "verify.csv"
    assert main(["verify", "--nn", str(weight_path), "--gamma", "1e-1,1e-2",
                 "--samples", "4", "--out", str(report)]) == 0
    rows = list(csv.reader(report.open()))
    assert rows[0] == ["gamma", "layer", "max_dev", "antisym_defect"]
    assert len(rows) == 1 + 2 * 2  # per gamma: one hidden layer + output row
    gammas = {float(r[0]) for r in rows[1:]}
    assert gammas == {1e-1, 1e-2}


def test_demo_universal(tmp_path, capsys):
    assert main(["demo-universal", "--out", str(tmp_path / "demo"), "--grid", "11"]) == 0
    out = capsys.readouterr().out
    assert "gamma" in out
    table = (tmp_path / "demo" / "universal_abs_sweep.csv").read_text().splitlines()
    assert table[1] == "gamma,max_output_dev,antisym_defect,dev_at_zero"
    assert len(table) == 5


def test_train_on_synthetic_dataset(tmp_path, capsys):
    dataset = write_synthetic_dataset(tmp_path / "ds", n_train=48, n_test=24, seed=9)
    out = tmp_path / "run"
    code = main(["train", "--dataset", str(dataset), "--arch", "drn-1h",
                 "--epochs", "1", "--seed", "5", "--out", str(out),
                 "--a0", "10", "--lr", "0.01,0.01", "--iters", "4",
                 "--batch-size", "16"])
    assert code == 0
    assert (out / "metrics.csv").exists()
    assert (out / "checkpoint.netlist").exists()
    assert "test_err" in capsys.readouterr().out


def test_drn_error_reported(tmp_path, capsys):
    bad = tmp_path / "bad.netlist"
    bad.write_text("NOT A NETLIST\n")
    assert main(["stats", "--netlist", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err
