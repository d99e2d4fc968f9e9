import json

import numpy as np
import pytest

from rabi_lab import cli, floquet, io
from rabi_lab.errors import ValidationError


class TestTableIO:
    def test_round_trip_exact(self, tmp_path):
        path = str(tmp_path / "t.csv")
        cols = {
            "x": np.array([0.1, 1e-300, -0.0, 2.0 / 3.0, 1e17]),
            "n": np.array([1, -2, 3, 4, 5]),
            "tag": np.array(["a", "b", "c", "d", "e"], dtype=object),
        }
        io.write_table(path, cols, {"alpha": 0.25, "note": "hello"})
        meta, back = io.read_table(path)
        assert meta["alpha"] == 0.25
        assert meta["note"] == "hello"
        assert np.array_equal(back["x"], cols["x"])  # bit-exact floats
        assert np.array_equal(back["n"], cols["n"])
        assert list(back["tag"]) == list(cols["tag"])

    def test_rejects_ragged(self, tmp_path):
        with pytest.raises(ValidationError):
            io.write_table(str(tmp_path / "t.csv"), {"a": [1], "b": [1, 2]}, {})

    def test_rejects_comma_cells(self, tmp_path):
        with pytest.raises(ValidationError):
            io.write_table(str(tmp_path / "t.csv"), {"a": np.array(["x,y"], dtype=object)}, {})

    def test_sidecar(self, tmp_path):
        path = str(tmp_path / "t.csv")
        io.write_sidecar(path, {"value": 1.5})
        data = io.read_sidecar(path)
        assert data["value"] == 1.5
        assert data["tool"].startswith("rabi-lab")


class TestParsing:
    def test_flags(self):
        cfg = cli.parse_args(["resonances", "--mu", "0.1", "--out", "x.csv"])
        assert cfg.command == "resonances"
        assert cfg.parameters["mu"] == 0.1
        assert cfg.output_path == "x.csv"

    def test_missing_required(self):
        with pytest.raises(ValidationError):
            cli.parse_args(["resonances"])

    def test_unknown_flag(self):
        with pytest.raises(ValidationError):
            cli.parse_args(["resonances", "--mu", "0.1", "--bogus", "1"])

    def test_config_file_and_override(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"mu": 0.1, "delta": 0.0}))
        cfg = cli.parse_args(["floquet", "--config", str(path), "--mu", "0.2"])
        assert cfg.parameters["mu"] == 0.2  # flag wins
        assert cfg.parameters["delta"] == 0.0

    def test_config_unknown_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"mu": 0.1, "delta": 0.0, "bogus": 1}))
        with pytest.raises(ValidationError):
            cli.parse_args(["floquet", "--config", str(path)])

    def test_config_command_mismatch(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"command": "oracle", "mu": 0.1}))
        with pytest.raises(ValidationError):
            cli.parse_args(["resonances", "--config", str(path)])

    def test_mu_grid_forms(self):
        assert cli._parse_mu_grid("0.1,0.2") == [0.1, 0.2]
        assert cli._parse_mu_grid("0.1:0.3:3") == pytest.approx([0.1, 0.2, 0.3])
        with pytest.raises(ValidationError):
            cli._parse_mu_grid("a,b")

    def test_kinds(self):
        kinds = cli._parse_kinds("bs,ws")
        assert [k.value for k in kinds] == ["BS", "WS"]
        with pytest.raises(ValidationError):
            cli._parse_kinds("XX")


class TestCommands:
    def test_floquet_omega_column(self, tmp_path, capsys):
        out = str(tmp_path / "fl.csv")
        assert cli.main(["floquet", "--mu", "0", "--delta", "0.1", "--out", out]) == 0
        _, cols = io.read_table(out)
        assert cols["Omega"][0] == pytest.approx(0.1, abs=1e-12)
        side = io.read_sidecar(out)
        _, table = io.read_table(side["fourier_table"])
        assert set(table) == {"k", "n", "a", "re_rt", "im_rt"}

    def test_resonances_rows(self, tmp_path):
        out = str(tmp_path / "res.csv")
        assert cli.main(["resonances", "--mu", "0.1", "--out", out]) == 0
        _, cols = io.read_table(out)
        assert len(cols["kind"]) == 7
        bs = cols["delta_res"][list(cols["kind"]).index("BS")]
        assert abs(bs / (-2.5e-3) - 1.0) < 0.15

    def test_curves(self, tmp_path):
        out = str(tmp_path / "cv.csv")
        assert cli.main(["curves", "--kinds", "BS", "--mu-grid", "0.1,0.2", "--out", out]) == 0
        _, cols = io.read_table(out)
        assert list(cols["status"]) == ["ok", "ok"]

    def test_dynamics(self, tmp_path):
        out = str(tmp_path / "dyn.csv")
        rc = cli.main(
            ["dynamics", "--mu", "0.1", "--delta", "0", "--epsilon", "0.01",
             "--t-end", "50", "--dt", "0.5", "--out", out]
        )
        assert rc == 0
        _, cols = io.read_table(out)
        assert cols["s3"][0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.abs(cols["purity"] - 0.5 * (1 + cols["s1"]**2 + cols["s2"]**2 + cols["s3"]**2)) < 1e-15)
        side = io.read_sidecar(out)
        assert side["weights"][0] + side["weights"][1] == 1.0
        assert side["observed_drift_factor"] == 0.25

    def test_oracle_run(self, tmp_path):
        out = str(tmp_path / "orc.csv")
        rc = cli.main(
            ["oracle", "--mu", "0.1", "--delta", "0", "--nbar", "25",
             "--t-end", "30", "--dt", "0.5", "--out", out]
        )
        assert rc == 0
        meta, cols = io.read_table(out)
        assert meta["g"] == pytest.approx(0.01)
        assert cols["sigma3"][0] == pytest.approx(1.0, abs=1e-12)
        side = io.read_sidecar(out)
        assert side["fragments"]["status"] == "PeaksUnresolved"  # far too early

    def test_compare_run(self, tmp_path):
        out = str(tmp_path / "cmp.csv")
        rc = cli.main(["compare", "--mu", "0.1", "--delta", "0", "--nbar", "25", "--out", out])
        assert rc == 0
        _, cols = io.read_table(out)
        side = io.read_sidecar(out)
        assert side["max_dev_s3"] == pytest.approx(np.max(cols["dev_s3"]))
        assert side["envelope_time_ratio"] == pytest.approx(1.165, abs=0.1)

    def test_determinism_byte_identical(self, tmp_path):
        a = str(tmp_path / "a.csv")
        b = str(tmp_path / "b.csv")
        assert cli.main(["resonances", "--mu", "0.07", "--out", a]) == 0
        floquet.clear_solution_cache()
        assert cli.main(["resonances", "--mu", "0.07", "--out", b]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()
        assert open(io.sidecar_path(a), "rb").read() == open(io.sidecar_path(b), "rb").read()


class TestExitCodes:
    def test_validation_failure_is_one(self, tmp_path, capsys):
        rc = cli.main(["resonances", "--mu", "0.9", "--out", str(tmp_path / "x.csv")])
        err = capsys.readouterr().err
        assert rc == 1
        assert err.startswith("error: ValidationError:")
        assert len(err.strip().splitlines()) == 1

    def test_numerical_failure_is_two(self, tmp_path, capsys):
        rc = cli.main(
            ["dynamics", "--mu", "0", "--delta", "0.1", "--epsilon", "0.01",
             "--out", str(tmp_path / "x.csv")]
        )
        err = capsys.readouterr().err
        assert rc == 2
        assert err.startswith("error: DegenerateCollapse:")

    def test_bad_flag_is_one(self, capsys):
        assert cli.main(["resonances", "--mu", "abc"]) == 1
        assert capsys.readouterr().err.startswith("error: ValidationError:")
