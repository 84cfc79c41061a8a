import numpy as np
import pytest

from uwnetloc import fileio
from uwnetloc.channel_model import ChannelModel, GainSample
from uwnetloc.cli import main
from uwnetloc.network import reference_scenario


def data_rows(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def test_fit_channel_noiseless(tmp_path, capsys):
    samples = [GainSample(d, -8.5 * d - 54.85) for d in np.linspace(0.5, 6, 12)]
    csv_path = tmp_path / "g.csv"
    fileio.write_gain_samples(csv_path, samples)
    out = tmp_path / "model.txt"
    assert main(["fit-channel", str(csv_path), "--out", str(out)]) == 0
    printed = dict(l.split(" = ") for l in capsys.readouterr().out.splitlines())
    assert float(printed["slope_a_db_per_m"]) == pytest.approx(-8.5, abs=1e-9)
    assert float(printed["intercept_b_db"]) == pytest.approx(-54.85, abs=1e-9)
    m = fileio.load_channel_model(out)
    assert m.slope_a == pytest.approx(-8.5, abs=1e-9)


def test_fit_channel_malformed_row(tmp_path, capsys):
    p = tmp_path / "g.csv"
    p.write_text("distance_m,gain_db\n1,-63\n2,oops\n")
    assert main(["fit-channel", str(p)]) == 3
    assert "row 3" in capsys.readouterr().err


def test_fit_channel_degenerate_is_numerical(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("distance_m,gain_db\n2,-63\n2,-64\n")
    assert main(["fit-channel", str(p)]) == 4


def test_fit_channel_defaults(tmp_path, capsys):
    out = tmp_path / "m.txt"
    assert main(["fit-channel", "--defaults", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "noise_var_db2 = 1.15" in text
    assert "slope_a_db_per_m = -8.5" in text


def test_model_file_round_trip(tmp_path):
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    m = ChannelModel(-8.123456789012345, -54.85000000000001, 1.1500000000000001)
    fileio.save_channel_model(p1, m)
    loaded = fileio.load_channel_model(p1)
    assert loaded == m
    fileio.save_channel_model(p2, loaded)
    assert p1.read_bytes() == p2.read_bytes()


def test_gen_scenario(tmp_path):
    out = tmp_path / "sc.csv"
    assert main(["gen-scenario", "--out", str(out)]) == 0
    rows = data_rows(out)
    assert rows[0] == "id,x_m,y_m,is_anchor"
    assert len(rows) == 28
    assert sum(r.endswith(",1") for r in rows[1:]) == 4
    assert fileio.read_scenario(out) == reference_scenario()


def test_gen_scenario_invalid_anchor(tmp_path):
    assert main(["gen-scenario", "--anchors", "0,27", "--out", str(tmp_path / "x.csv")]) == 3


def test_unknown_flag_is_usage_error(tmp_path):
    assert main(["selfloc", "--out", str(tmp_path), "--frobnicate"]) == 2


def test_selfloc_outputs(tmp_path):
    sc = tmp_path / "sc.csv"
    main(["gen-scenario", "--out", str(sc)])
    out = tmp_path / "run"
    assert main(["selfloc", "--scenario", str(sc), "--out", str(out), "--seed", "3"]) == 0
    summary = data_rows(out / "summary.csv")
    assert summary[0] == "iteration,mae_m,objective"
    assert len(summary) == 52  # header + iterations 0..50
    trace = data_rows(out / "trace.csv")
    assert trace[0] == "iteration,node_id,x_est_m,y_est_m"
    assert len(trace) == 1 + 51 * 27
    head = (out / "summary.csv").read_text().splitlines()[0]
    assert head.startswith("# uwnetloc ")


def test_selfloc_loss_flag_in_header(tmp_path):
    out = tmp_path / "run"
    assert main(["selfloc", "--out", str(out), "--loss", "0.05", "--max-iters", "3"]) == 0
    text = (out / "summary.csv").read_text()
    assert "# packet_loss_prob = 0.05" in text
    assert "# max_iters = 3" in text


def test_selfloc_config_file(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("max_iters = 4\npacket_loss_prob = 0.1\nsigma_d = 0.2\n")
    out = tmp_path / "run"
    assert main(["selfloc", "--config", str(cfg), "--max-iters", "2", "--out", str(out)]) == 0
    text = (out / "summary.csv").read_text()
    assert "# max_iters = 2" in text
    assert "# packet_loss_prob = 0.1" in text
    assert "# sigma_d = 0.2" in text
    bad = tmp_path / "bad.txt"
    bad.write_text("warp_factor = 9\n")
    assert main(["selfloc", "--config", str(bad), "--out", str(out)]) == 2


def test_selfloc_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["selfloc", "--out", str(tmp_path / name), "--seed", "9", "--loss", "0.1", "--max-iters", "10"]) == 0
    for f in ("trace.csv", "summary.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sweep_outputs(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--out", str(out), "--levels", "0,0.2", "--n-seeds", "2", "--max-iters", "3"]) == 0
    rows = data_rows(out / "selfloc_curves.csv")
    assert rows[0] == "loss_prob,iteration,mae_m"
    assert len(rows) == 1 + 2 * 4


def test_track_zero_noise(tmp_path, capsys):
    out = tmp_path / "tr.csv"
    assert main(["track", "--sigma-d", "0", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    mae = float(text.split("mae_m = ")[1].split()[0])
    assert mae <= 1e-6
    rows = data_rows(out)
    assert rows[0] == "sample,true_x,true_y,est_x,est_y,n_inrange,flagged"


def test_track_all_out_of_range(tmp_path, capsys):
    traj = tmp_path / "far.csv"
    fileio.write_points(traj, [(200, 200), (210, 200)])
    assert main(["track", "--trajectory", str(traj), "--out", str(tmp_path / "t.csv")]) == 0
    text = capsys.readouterr().out
    assert "mae_m = absent" in text
    assert "flagged = 21/21" in text


def test_track_db_mode_with_channel_file(tmp_path, capsys):
    model = tmp_path / "m.txt"
    fileio.save_channel_model(model, ChannelModel(noise_var=0.0))
    assert main(["track", "--mode", "db", "--channel", str(model), "--out", str(tmp_path / "t.csv")]) == 0
    mae = float(capsys.readouterr().out.split("mae_m = ")[1].split()[0])
    assert mae <= 1e-6


def test_track_byte_identical(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert main(["track", "--seed", "5", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_srls_command(tmp_path, capsys):
    inst = tmp_path / "i.csv"
    u = np.array([3.0, 4.0])
    anchors = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]
    fileio.write_table(inst, ["x_m", "y_m", "range_m"], [(a[0], a[1], float(np.hypot(*(np.array(a) - u)))) for a in anchors])
    assert main(["srls", str(inst)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "x_est_m,y_est_m,lambda_star,phi_residual"
    x, y, lam, res = map(float, lines[1].split(","))
    assert (x, y) == pytest.approx((3.0, 4.0), abs=1e-6)


def test_srls_collinear_is_numerical(tmp_path):
    inst = tmp_path / "i.csv"
    inst.write_text("x_m,y_m,range_m\n0,0,1\n1,0,1\n2,0,1\n")
    assert main(["srls", str(inst)]) == 4


def test_bad_scenario_file(tmp_path):
    sc = tmp_path / "sc.csv"
    sc.write_text("id,x_m,y_m,is_anchor\n0,0,0,1\n1,5,0,maybe\n")
    (tmp_path / "sc.radii").write_text("comm_radius_m = 10\nsense_radius_m = 8\n")
    assert main(["selfloc", "--scenario", str(sc), "--out", str(tmp_path / "o")]) == 3
