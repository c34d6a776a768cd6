import csv
import io

import numpy as np
import pytest

from ddpm_lowdim import schedules
from ddpm_lowdim.experiments import config as cfgmod
from ddpm_lowdim.experiments.cli import main
from ddpm_lowdim.experiments.config import ConfigError, parse_config_text
from ddpm_lowdim.experiments.csvio import fmt, read_points_csv, rows_to_csv
from ddpm_lowdim.experiments.sweeps import (
    SWEEP_COLUMNS,
    loglog_slope,
    run_covering,
    run_figure1_sweep,
    run_perturbation_sweep,
    run_rate_sweep,
    run_theorem2_grid,
)
from ddpm_lowdim.experiments.validation import run_validate


def cfg(defaults, text=""):
    return parse_config_text(text, defaults)


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestConfig:
    def test_defaults_copied(self):
        c = cfg(cfgmod.FIGURE1)
        c["d"].append(7)
        assert 7 not in cfgmod.FIGURE1["d"]

    def test_types_and_lists(self):
        c = cfg(cfgmod.FIGURE1, "d = 10, 20  # small\nT=100\ntiming = off\nbeta_max = 0.03\n")
        assert c["d"] == [10, 20] and c["T"] == [100] and c["timing"] is False and c["beta_max"] == 0.03

    @pytest.mark.parametrize("text", ["nope = 1", "d = ten", "T 100", "timing = maybe"])
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            cfg(cfgmod.FIGURE1, text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            cfgmod.load_config(tmp_path / "absent.cfg", cfgmod.RATE)


class TestCsv:
    def test_seventeen_digits(self):
        assert fmt(0.1) == "0.10000000000000001"
        assert float(fmt(1 / 3)) == 1 / 3
        assert fmt(float("nan")) == "" and fmt(None) == ""
        assert fmt(True) == "1" and fmt(np.int64(7)) == "7"

    def test_rows_keep_column_order(self):
        text = rows_to_csv(["b", "a"], [{"a": 1, "b": 2.5}])
        assert text == "b,a\n2.5,1\n"

    def test_read_points(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("x,y\n# skip\n1,2\n\n3,4.5\n")
        np.testing.assert_array_equal(read_points_csv(path), [[1, 2], [3, 4.5]])


SMALL_FIG1 = "d = 10, 100, 1000\nT = 100\ntv_samples = 2000\ntiming = false\n"


class TestSweeps:
    def test_figure1_shape(self):
        cols, rows = run_figure1_sweep(cfg(cfgmod.FIGURE1, SMALL_FIG1), master_seed=1)
        assert cols == SWEEP_COLUMNS
        star = [r["kl_exact"] for r in rows if r["design_name"] == "star"]
        simple = [r["kl_exact"] for r in rows if r["design_name"] == "simple"]
        assert max(star) / min(star) < 1.1
        assert simple[-1] >= 10 * simple[0] and simple == sorted(simple)
        assert all(r["error"] in ("", None) for r in rows)

    def test_figure1_bytes_deterministic(self):
        c = cfg(cfgmod.FIGURE1, SMALL_FIG1)
        a = rows_to_csv(*run_figure1_sweep(c, master_seed=5))
        b = rows_to_csv(*run_figure1_sweep(c, master_seed=5, threads=3))
        assert a == b

    def test_figure1_seed_independent_of_order(self):
        fwd = run_figure1_sweep(cfg(cfgmod.FIGURE1, SMALL_FIG1), master_seed=2)[1]
        rev = run_figure1_sweep(cfg(cfgmod.FIGURE1, SMALL_FIG1.replace("10, 100, 1000", "1000, 100, 10")), 2)[1]
        key = lambda r: (r["design_name"], r["d"])
        assert sorted(map(lambda r: tuple(sorted(r.items())), fwd)) == sorted(
            map(lambda r: tuple(sorted(r.items())), rev)
        )
        assert {key(r): r["seed"] for r in fwd} == {key(r): r["seed"] for r in rev}

    def test_rate_sweep(self):
        _, rows, slope = run_rate_sweep(cfg(cfgmod.RATE, "timing = false"))
        kl = [r["kl_exact"] for r in rows]
        assert all(b < a for a, b in zip(kl, kl[1:]))
        assert np.isfinite(slope)
        _, doubled, _ = run_rate_sweep(cfg(cfgmod.RATE, "timing = false\nd = 128"))
        for r1, r2 in zip(rows, doubled):
            assert abs(r2["kl_exact"] / r1["kl_exact"] - 1) < 0.1

    def test_loglog_slope(self):
        x = np.array([1.0, 2.0, 4.0])
        assert loglog_slope(x, 3 * x**-1.5) == pytest.approx(-1.5)

    def test_theorem2_grid(self):
        c = cfg(cfgmod.THEOREM2, "eta_shift_points = 5\nsigma_scale_points = 5\nT = 200")
        cols, rows = run_theorem2_grid(c)
        assert len(rows) == 3 * 25
        assert min(r["difference"] for r in rows) >= -1e-12
        star_rows = [r for r in rows if r["eta_shift"] == 0 and r["sigma_scale"] == 1]
        assert len(star_rows) == 3
        for r in star_rows:
            assert abs(r["lower_bound"]) <= 1e-12 and abs(r["step_kl_off"]) <= 1e-12

    def test_theorem2_rejects_wide_support(self):
        with pytest.raises(ConfigError):
            run_theorem2_grid(cfg(cfgmod.THEOREM2, "k = 40\nd = 64"))

    def test_perturbation_small(self):
        c = cfg(cfgmod.PERTURB, "eps = 0, 0.1\nn = 3000\ntv_samples = 5000\ntiming = false\nT = 50")
        cols, rows, traj = run_perturbation_sweep(c, master_seed=3, trajectory_n=2)
        assert [r["eps"] for r in rows] == [0.0, 0.1]
        assert rows[0]["eps_score_mc"] == 0.0
        assert rows[1]["eps_score_mc"] == pytest.approx(0.1, rel=1e-9)
        assert traj.trajectory.shape == (50, 2, 32)

    def test_covering_from_csv(self, tmp_path):
        pts = np.zeros((300, 10))
        pts[:, 0] = np.linspace(0, 1, 300)
        path = tmp_path / "pts.csv"
        np.savetxt(path, pts, delimiter=",", fmt="%.17g")
        c = cfg(cfgmod.COVERING, f"points = {path}\nT = 20")
        cols, rows, net = run_covering(c)
        assert rows[0]["covers"] and rows[0]["n"] == 300
        assert 0.5 <= rows[0]["k_estimate"] <= 2


class TestCli:
    def run(self, capsys, *argv):
        code = main(list(argv))
        return code, capsys.readouterr()

    def test_dump_schedule(self, capsys, tmp_path):
        code, out = self.run(capsys, "dump-schedule")
        rows = read_csv(out.out)
        assert code == 0 and len(rows) == 1000
        assert float(rows[1]["beta"]) == pytest.approx(2.8394494443837434e-08, rel=1e-15)
        path = tmp_path / "lin.csv"
        cfg_path = tmp_path / "s.cfg"
        cfg_path.write_text("schedule = linear\nT = 10\ndesign = simple\n")
        assert main(["dump-schedule", "--config", str(cfg_path), "--out", str(path)]) == 0
        rows = read_csv(path.read_text())
        assert rows[0]["eta"] == rows[0]["sigma2"] == rows[0]["beta"]

    def test_bad_config_exit_two(self, capsys, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("bogus = 1\n")
        code, out = self.run(capsys, "rate", "--config", str(bad))
        assert code == 2 and "bogus" in out.err
        code, _ = self.run(capsys, "dump-schedule", "--seed", "-1")
        assert code == 2
        bad.write_text("design = fancy\n")
        code, _ = self.run(capsys, "dump-schedule", "--config", str(bad))
        assert code == 2
        bad.write_text("schedule = linear\nbeta_max = 2\n")
        code, _ = self.run(capsys, "dump-schedule", "--config", str(bad))
        assert code == 2

    def test_rate_reports_slope(self, capsys):
        code, out = self.run(capsys, "rate")
        assert code == 0 and "slope" in out.err
        assert len(read_csv(out.out)) == 5

    def test_covering_writes_net(self, capsys, tmp_path):
        conf = tmp_path / "c.cfg"
        conf.write_text("grid_r = 1\ngrid_per_side = 50\ngrid_d = 3\n")
        net = tmp_path / "net.csv"
        code, out = self.run(capsys, "covering", "--config", str(conf), "--net-out", str(net))
        assert code == 0
        assert int(read_csv(out.out)[0]["net_size"]) == len(read_csv(net.read_text()))

    def test_perturb_trajectory_dump(self, capsys, tmp_path):
        conf = tmp_path / "p.cfg"
        conf.write_text("eps = 0.05\nn = 500\ntv_samples = 1000\nT = 20\nd = 4\nk = 2\n")
        traj = tmp_path / "traj.csv"
        code, out = self.run(capsys, "perturb", "--config", str(conf), "--trajectory-out", str(traj), "--trajectory-n", "3")
        assert code == 0
        rows = read_csv(traj.read_text())
        assert list(rows[0]) == ["trajectory_id", "t", "coord_0", "coord_1", "coord_2", "coord_3"]
        assert len(rows) == 3 * 20


class TestValidate:
    def test_all_pass_and_repeatable(self):
        a, b = run_validate(), run_validate()
        assert all(c.passed for c in a), [c.line() for c in a if not c.passed]
        assert [c.line() for c in a] == [c.line() for c in b]

    def test_cli_exit_codes(self, capsys, monkeypatch):
        assert main(["validate"]) == 0
        capsys.readouterr()
        real = schedules._star_sigma2
        monkeypatch.setattr(schedules, "_star_sigma2", lambda s: 1.5 * real(s))
        assert main(["validate"]) == 1
        report = capsys.readouterr().out
        failed = [line for line in report.splitlines() if line.startswith("FAIL")]
        assert any("lower bound" in line for line in failed)
