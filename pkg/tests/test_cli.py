import json
import subprocess
import sys

import pytest

from eacq.cli import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, run
from eacq.hilbert import ensemble_to_json, max_entangled, maximally_mixed, SystemLayout, CQEnsemble
from eacq.region import HRep, SingletonParams, hrep_singleton


def _json(argv):
    code, text = run(argv)
    return code, json.loads(text)


class TestRegion:
    def test_hrep_matches_region_module(self):
        code, out = _json(["region", "--n", "5", "--d", "3", "--q", "2", "--hrep"])
        assert code == EXIT_OK
        assert out["units"] == "logq"
        assert HRep.from_json(out["rows"]) == hrep_singleton(SingletonParams(5, 3, 2))

    def test_geometry_in_bits(self):
        code, out = _json(["region", "--n", "5", "--d", "3", "--q", "4", "--geometry", "--units", "bits"])
        assert code == EXIT_OK
        assert out["a0"] == [6.0, 0.0, 0.0]
        assert out["units"] == "bits"

    def test_slice_header_and_units(self):
        code, text = run(["region", "--n", "2", "--d", "2", "--q", "4", "--slice", "E=1", "--step", "1",
                          "--units", "bits"])
        assert code == EXIT_OK
        lines = text.splitlines()
        assert lines[0] == "# units=bits fixed=E=1"
        assert lines[1] == "x,y,member"
        assert "0.0,2.0,1" in lines

    def test_iid_slice(self):
        code, text = run(["region", "--delta", "1", "--slice", "C=1", "--step", "1/2"])
        assert code == EXIT_OK
        assert all(line.endswith(",0") for line in text.splitlines()[2:])

    def test_bad_slice(self):
        assert run(["region", "--n", "2", "--d", "2", "--slice", "Z=1"])[0] == EXIT_USAGE

    def test_both_parameter_kinds(self):
        assert run(["region", "--n", "2", "--d", "2", "--delta", "1/2"])[0] == EXIT_USAGE

    def test_invalid_distance_is_domain_error(self):
        assert run(["region", "--n", "2", "--d", "5"])[0] == EXIT_DOMAIN


class TestMember:
    def test_example(self):
        code, out = _json(["member", "--n", "5", "--d", "3", "--q", "2", "--triple", "0,1,0"])
        assert code == EXIT_OK
        assert out["member"] is True
        assert out["t_interval"] == ["1", "1"]
        assert out["units"] == "logq"

    def test_non_member(self):
        code, out = _json(["member", "--n", "5", "--d", "3", "--triple", "0,2,0"])
        assert code == EXIT_OK
        assert out["member"] is False
        assert out["t_interval"] is None

    def test_missing_distance(self):
        assert run(["member", "--n", "5", "--triple", "0,1,0"])[0] == EXIT_USAGE


class TestLemmas:
    def test_small_run_passes(self):
        code, out = _json(["lemmas", "--suite", "all", "--trials", "20", "--seed", "7"])
        assert code == EXIT_OK
        assert out["pass"] and out["units"] == "bits"

    def test_unknown_suite(self):
        assert run(["lemmas", "--suite", "bogus"])[0] == EXIT_USAGE


class TestConverse:
    def _write(self, tmp_path, ens, rates=None):
        p = tmp_path / "ens.json"
        p.write_text(json.dumps(ensemble_to_json(ens)))
        argv = ["converse", "--ensemble", str(p)]
        if rates is not None:
            r = tmp_path / "rates.json"
            r.write_text(json.dumps(rates))
            argv += ["--rates", str(r)]
        return argv

    def test_entangled_witness_through_perfect_channel(self, tmp_path):
        ens = CQEnsemble(((1.0, max_entangled("R", "A1", 2)),))
        argv = self._write(tmp_path, ens, {"Q2": 1.0, "E1": 0.0})
        code, out = _json(argv + ["--channel", "erasure:0"])
        assert code == EXIT_OK
        assert out["bounds"]["b2"] == pytest.approx(1.0)
        assert out["within_bounds"] is True

    def test_rates_beyond_bounds_fail_verification(self, tmp_path):
        ens = CQEnsemble(((1.0, max_entangled("R", "A1", 2)),))
        argv = self._write(tmp_path, ens, {"C2": 5.0})
        code, out = _json(argv + ["--channel", "erasure:1/2"])
        assert code == EXIT_VERIFY
        assert out["within_bounds"] is False

    def test_mixed_witness_is_domain_error(self, tmp_path):
        ens = CQEnsemble(((1.0, maximally_mixed(SystemLayout.of(("R", 2), ("A1", 2)))),))
        assert run(self._write(tmp_path, ens) + ["--channel", "erasure:0"])[0] == EXIT_DOMAIN

    def test_missing_file(self, tmp_path):
        assert run(["converse", "--ensemble", str(tmp_path / "none.json"), "--channel", "erasure:0"])[0] == EXIT_DOMAIN


class TestSimulate:
    def test_reed_solomon_zero_error(self):
        code, out = _json(["simulate", "--code", "rs:5,4,2", "--channel", "block:4,2"])
        assert code == EXIT_OK
        assert out["zero_error"] is True
        assert out["triple_logq"] == ["2", "0", "0"]
        assert out["rates_bits"]["units"] == "bits"

    def test_missing_qubit_code_reports_reason(self):
        code, out = _json(["simulate", "--code", "eaq:2,2,2", "--channel", "block:2,1"])
        assert code == EXIT_DOMAIN
        assert "absolutely maximally entangled" in out["message"]

    def test_channel_size_mismatch(self):
        assert run(["simulate", "--code", "rs:5,4,2", "--channel", "block:3,1"])[0] == EXIT_DOMAIN

    def test_bad_channel_spec(self):
        assert run(["simulate", "--code", "rs:5,4,2", "--channel", "depolarize:1"])[0] == EXIT_USAGE

    def test_zero_energy_fields_are_plain_zero(self):
        _, text = run(["simulate", "--code", "rs:5,4,2", "--channel", "block:4,2"])
        assert "-0.0" not in text


class TestGeneral:
    def test_unknown_command(self):
        assert run(["bogus"])[0] == EXIT_USAGE

    def test_unknown_flag(self):
        assert run(["member", "--n", "5", "--d", "3", "--triple", "0,1,0", "--nope"])[0] == EXIT_USAGE

    def test_out_flag_writes_file(self, tmp_path):
        target = tmp_path / "out.json"
        code, text = run(["member", "--n", "5", "--d", "3", "--triple", "3,0,0", "--out", str(target)])
        assert code == EXIT_OK and text == ""
        assert json.loads(target.read_text())["member"] is True

    @pytest.mark.parametrize("argv", [
        ["lemmas", "--suite", "ssa", "--trials", "15", "--seed", "3"],
        ["region", "--delta", "1/4", "--hrep"],
        ["simulate", "--code", "eaq:3,2,2", "--channel", "block:3,1"],
    ])
    def test_byte_identical_reruns(self, argv):
        assert run(argv) == run(argv)

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "eacq", "member", "--n", "5", "--d", "3", "--triple", "0,1,0"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == EXIT_OK
        assert json.loads(proc.stdout)["member"] is True

    def test_usage_goes_to_stderr(self):
        proc = subprocess.run([sys.executable, "-m", "eacq", "frobnicate"], capture_output=True, text=True,
                              check=False)
        assert proc.returncode == EXIT_USAGE
        assert proc.stdout == ""
        assert "usage" in proc.stderr

    def test_codes_listing(self):
        code, out = _json(["codes"])
        assert code == EXIT_OK
        names = {c["name"] for c in out["codes"]}
        assert {"rs-5-4-2", "eaq-3-2-2", "eaq-2-2-3"} <= names
        assert out["units"] == "logq"
