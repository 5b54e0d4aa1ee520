import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fndrelax import fileio
from fndrelax.cli import main

POP_HEADER = "particle_id,core_nm,dense_nm,porous_nm,nv_offset_nm,t1_before_us,t1_after_us,dgamma_per_s"


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestSimulateT1:
    def test_header_and_rows(self, tmp_path, capsys):
        code, out, _ = run(capsys, "simulate-t1", "--seed", 3, "--n", 200, "--out", tmp_path)
        assert code == 0
        lines = [ln for ln in (tmp_path / "population.csv").read_text().splitlines() if not ln.startswith("#")]
        assert lines[0] == POP_HEADER
        assert len(lines) == 201
        assert "particles=200" in out
        assert (tmp_path / "manifest.json").exists()

    def test_missing_seed(self, tmp_path, capsys):
        code, _, err = run(capsys, "simulate-t1", "--n", 5, "--out", tmp_path)
        assert code == 2 and "seed" in err
        assert not any(tmp_path.iterdir())

    @pytest.mark.parametrize("seed", ["-1", str(2 ** 64)])
    def test_seed_outside_u64(self, tmp_path, capsys, seed):
        assert run(capsys, "simulate-t1", "--seed", seed, "--n", 2, "--out", tmp_path)[0] == 2

    def test_same_seed_same_digest(self, tmp_path, capsys):
        for d in ("a", "b"):
            assert run(capsys, "simulate-t1", "--seed", 17, "--n", 30, "--out", tmp_path / d)[0] == 0
        assert digest(tmp_path / "a" / "population.csv") == digest(tmp_path / "b" / "population.csv")
        assert digest(tmp_path / "a" / "manifest.json") == digest(tmp_path / "b" / "manifest.json")


class TestFit:
    def test_sample_fixture(self, data_dir, capsys):
        code, out, _ = run(capsys, "fit", data_dir / "sample_trace.csv")
        assert code == 0
        res = json.loads(out)
        assert set(res) == {"i0", "c", "t1_us", "cov", "residual_norm", "converged"}
        assert abs(res["t1_us"] / 255.2 - 1) <= 0.02

    def test_fixture_provenance(self, data_dir):
        trace = fileio.read_trace_csv(data_dir / "sample_trace.csv")
        assert trace.metadata["seed"] == "2552" and float(trace.metadata["t1_us"]) == 255.2

    def test_two_identical_traces(self, data_dir, tmp_path, capsys):
        f = data_dir / "sample_trace.csv"
        code, out, _ = run(capsys, "fit", f, f, "--out", tmp_path)
        assert code == 0
        assert json.loads(out)["delta_gamma"]["dgamma_per_s"] == 0.0
        assert json.loads((tmp_path / "fit.json").read_text()) == json.loads(out)

    def test_truncated_file(self, data_dir, tmp_path, capsys):
        lines = (data_dir / "sample_trace.csv").read_text().splitlines()
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(lines[:-1] + [lines[-1].split(",")[0]]))
        code, _, err = run(capsys, "fit", bad)
        assert code == 2
        assert f"bad.csv:{len(lines)}:" in err

    def test_bad_header(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("time,value\n0,1\n")
        code, _, err = run(capsys, "fit", bad)
        assert code == 2 and ":1:" in err

    def test_flat_trace(self, tmp_path, capsys):
        flat = tmp_path / "flat.csv"
        flat.write_text(fileio.csv_text(fileio.TRACE_HEADER, [(t, 5.0) for t in range(10)]))
        assert run(capsys, "fit", flat)[0] == 4

    def test_missing_file(self, tmp_path, capsys):
        assert run(capsys, "fit", tmp_path / "nope.csv")[0] == 2


class TestSweepKinetics:
    def test_sweep_fig4a(self, tmp_path, capsys):
        grid = ["1e-17", "1e-16", "1e-15", "1e-14", "1e-13"]
        assert run(capsys, "sweep", "--seed", 1, "--n-mc", 50, "--grid", *grid, "--out", tmp_path)[0] == 0
        header, rows, _ = fileio.read_csv(tmp_path / "sweep.csv")
        assert header == fileio.SWEEP_HEADER
        means = [r[2] for r in rows]
        assert len(rows) == 5 and np.all(np.diff(means) > 0)

    def test_ratio(self, capsys):
        code, out, _ = run(capsys, "kinetics", "--ratio", "silica", "gd_silica", "--temp", 300)
        assert code == 0
        fields = dict(kv.split("=") for kv in out.split())
        assert round(float(fields["log_ratio"]), 2) == 21.49
        ratio = float(fields["ratio"])
        assert ratio == pytest.approx(2.1e9, rel=0.03)

    def test_ratio_overflow_reported_in_log_form(self, capsys):
        code, out, _ = run(capsys, "kinetics", "--ratio", "spontaneous", "silica", "--temp", 300)
        assert code == 0 and "overflow" in out
        log = float(out.split("log_ratio=")[1].split()[0])
        assert log == pytest.approx(278.9, abs=0.1)

    def test_concentration_tables(self, tmp_path, capsys):
        assert run(capsys, "kinetics", "--out", tmp_path)[0] == 0
        header, rows, _ = fileio.read_csv(tmp_path / "kinetics_ss.csv")
        assert header == ("c_cat_m", "c_radical_ss_m") and len(rows) == 5
        _, rows, _ = fileio.read_csv(tmp_path / "kinetics_transient.csv")
        assert rows[0][1] == 0.0


class TestPopulation:
    def test_fraction_positive(self, tmp_path, capsys):
        code, out, _ = run(capsys, "population", "--seed", 4, "--n", 177, "--out", tmp_path)
        assert code == 0
        frac = float(out.split("fraction_positive=")[1].split()[0])
        assert frac >= 0.8
        _, rows, _ = fileio.read_csv(tmp_path / "histogram.csv")
        assert sum(r[2] for r in rows) == 177

    def test_threads_do_not_change_output(self, tmp_path, capsys):
        for t in (1, 8):
            run(capsys, "population", "--seed", 4, "--n", 40, "--threads", t, "--out", tmp_path / str(t))
        for name in ("population.csv", "histogram.csv", "manifest.json"):
            assert digest(tmp_path / "1" / name) == digest(tmp_path / "8" / name)


class TestInvert:
    @pytest.fixture
    def calibration(self, tmp_path, capsys):
        assert run(capsys, "calibrate", "--seed", 2, "--n-mc", 50, "--out", tmp_path)[0] == 0
        return tmp_path / "calibration.json"

    def test_calibration_embeds_manifest(self, calibration):
        d = json.loads(calibration.read_text())
        assert d["interpolation"] == "pchip" and d["manifest"]["seed"] == 2
        assert len(d["knots"]) == 5

    def test_in_range(self, calibration, capsys):
        mid = json.loads(calibration.read_text())["knots"][2]
        code, out, _ = run(capsys, "invert", calibration, "--dgamma", mid["dgamma_mean_per_s"])
        assert code == 0
        assert json.loads(out)["estimate_m"] == pytest.approx(mid["c_m"], rel=1e-9)

    def test_out_of_range(self, calibration, capsys):
        assert run(capsys, "invert", calibration, "--dgamma", 10.0)[0] == 5

    def test_extrapolate_flag(self, calibration, capsys):
        code, out, _ = run(capsys, "invert", calibration, "--dgamma", 10.0, "--extrapolate")
        assert code == 0 and "extrapolated" in json.loads(out)["note"]

    def test_needs_a_measurement(self, calibration, capsys):
        assert run(capsys, "invert", calibration)[0] == 2


class TestRerun:
    @pytest.mark.parametrize("command,extra", [("population", ["--n", "25"]),
                                               ("sweep", ["--n-mc", "20"]),
                                               ("profile", ["--n-mc", "5", "--n-t", "11"]),
                                               ("synth", []),
                                               ("calibrate", ["--n-mc", "20"])])
    def test_verify(self, tmp_path, capsys, command, extra):
        assert run(capsys, command, "--seed", 9, "--out", tmp_path / "a", *extra)[0] == 0
        code, out, _ = run(capsys, "rerun", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b",
                           "--verify", "--threads", 3)
        assert code == 0 and "digests match" in out

    def test_tampered_manifest(self, tmp_path, capsys):
        run(capsys, "synth", "--seed", 9, "--out", tmp_path)
        m = json.loads((tmp_path / "manifest.json").read_text())
        m["seed"] = 10
        (tmp_path / "manifest.json").write_text(json.dumps(m))
        assert run(capsys, "rerun", tmp_path / "manifest.json", "--out", tmp_path / "b", "--verify")[0] == 1


class TestConfig:
    def test_config_file_and_seed(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 12, "simulation": {"n_particles": 7}}))
        assert run(capsys, "population", "--config", cfg, "--out", tmp_path / "o")[0] == 0
        manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert manifest["seed"] == 12 and str(cfg) in manifest["inputs"]
        _, rows, _ = fileio.read_csv(tmp_path / "o" / "population.csv")
        assert len(rows) == 7

    @pytest.mark.parametrize("content", ['{"bogus": 1}', "{not json", '{"nv": {"t1_us": 200, "gamma0_per_s": 5000}}',
                                         '{"geometry": {"core_diameter_nm": {"mean": -1}}}', "[1, 2]"])
    def test_bad_config(self, tmp_path, capsys, content):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(content)
        code, _, err = run(capsys, "sweep", "--seed", 1, "--config", cfg, "--out", tmp_path / "o")
        assert code == 2 and err
        assert not (tmp_path / "o").exists()

    def test_gamma0_alternative(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nv": {"gamma0_per_s": 1e6 / 238.5}}))
        assert run(capsys, "sweep", "--seed", 1, "--n-mc", 5, "--config", cfg, "--out", tmp_path / "o")[0] == 0

    def test_no_partial_output_on_failure(self, tmp_path, capsys, monkeypatch):
        calls = []
        real = fileio.atomic_write

        def flaky(path, data):
            calls.append(path)
            if len(calls) == 2:
                raise OSError("disk full")
            return real(path, data)

        monkeypatch.setattr(fileio, "atomic_write", flaky)
        code = main(["population", "--seed", "1", "--n", "5", "--out", str(tmp_path)])
        assert code == 2
        assert not [p for p in os.listdir(tmp_path) if p.startswith(".tmp-")]


@settings(max_examples=50, deadline=None)
@given(rows=st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False),
                               st.floats(allow_nan=False, allow_infinity=False)), max_size=20))
def test_csv_round_trip(rows):
    header, back, _ = fileio.parse_csv(fileio.csv_text(("a", "b"), rows, ["note"]))
    assert header == ("a", "b")
    assert back == [list(r) for r in rows]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "fndrelax", "kinetics", "--ratio", "silica", "gd_silica"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "log_ratio=21.4875" in res.stdout
