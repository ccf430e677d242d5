"""Command-line contract: subcommands, exit codes, report determinism."""

import math

import pytest
import yaml

from topocharge.cli import main

TWO_PI = 2.0 * math.pi


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestVerify:
    def test_catalog_multiplier(self, capsys):
        code, out, _ = run(capsys, "verify", "kdv_lagrangian", "multiplier-f")
        assert code == 0 and "verified" in out

    def test_catalog_current(self, capsys):
        code, out, _ = run(capsys, "verify", "kp", "current-1")
        assert code == 0

    def test_adhoc_current_residual(self, capsys):
        code, out, _ = run(capsys, "verify", "kp", "(u, 0, 0)")
        assert code == 1 and "u_t" in out

    def test_adhoc_multiplier(self, capsys):
        code, out, _ = run(capsys, "verify", "kp", "y*f")
        assert code == 0

    def test_unknown_entry(self, capsys):
        code, _, err = run(capsys, "verify", "heat", "multiplier-f")
        assert code == 2

    def test_flag_style(self, capsys):
        code, _, _ = run(capsys, "verify", "--pde", "kp", "--object", "current-2")
        assert code == 0


class TestReduce:
    def test_kdv_already_flux_form(self, capsys):
        code, out, _ = run(capsys, "reduce", "kdv_lagrangian", "current-1")
        assert code == 0
        assert "u_x^2/2 + u_xxx + u_t" in out

    def test_kp_current3(self, capsys):
        code, out, _ = run(capsys, "reduce", "kp", "current-3", "--no-certify")
        assert code == 0
        assert "R(G) = y^2*G*sigma/2" in out


class TestPotential:
    def test_kp_charge1(self, capsys):
        code, out, _ = run(capsys, "potential", "kp", "charge-1")
        assert code == 0
        assert "= w_y" in out and "= -w_x" in out
        assert "chi(t)" in out

    def test_vorticity_charge1(self, capsys):
        code, out, _ = run(capsys, "potential", "vorticity", "charge-1")
        assert code == 0

    def test_kdv_has_no_curls(self, capsys):
        code, _, err = run(capsys, "potential", "kdv", "charge-1")
        assert code == 2
        assert "dim" in err


class TestCatalogCmd:
    def test_list(self, capsys):
        code, out, _ = run(capsys, "catalog", "list")
        assert code == 0 and "vorticity" in out

    def test_show(self, capsys):
        code, out, _ = run(capsys, "catalog", "show", "kdv_lagrangian")
        assert code == 0 and "multiplier-f" in out


@pytest.fixture()
def kp_manifest(tmp_path):
    manifest = {
        "pde": "kp",
        "params": {"sigma": "1"},
        "grid": {"resolutions": [32, 32], "periods": [TWO_PI, TWO_PI]},
        "u0": {"modes": [{"a": 0.05, "k": [1, 1]}]},
        "t_end": 0.05,
        "samples": 5,
        "f": "one",
        "constraints": [{"density": "u"}],
        "charges": [{"id": "charge-1", "curve": {"rect": [0.7, 3.9, 1.1, 5.2]}}],
        "checks": [{"type": "mass", "tolerance": 1e-9}],
        "seed": 7,
    }
    path = tmp_path / "kp.yaml"
    path.write_text(yaml.safe_dump(manifest))
    return path


class TestSimulate:
    def test_zero_data_all_zero(self, tmp_path, capsys):
        manifest = {
            "pde": "kdv_lagrangian",
            "grid": {"resolutions": [32], "periods": [TWO_PI]},
            "u0": {},
            "t_end": 0.01,
            "samples": 3,
            "constraints": [{"density": "u"}],
        }
        path = tmp_path / "zero.yaml"
        path.write_text(yaml.safe_dump(manifest))
        code, out, _ = run(capsys, "simulate", "--manifest", str(path),
                           "--out", str(tmp_path / "rep"))
        assert code == 0
        report = (tmp_path / "rep" / "report_00_constraint.txt").read_text()
        assert "satisfied" in report

    def test_kp_run_and_determinism(self, kp_manifest, tmp_path, capsys):
        code, _, _ = run(capsys, "simulate", "--manifest", str(kp_manifest),
                         "--out", str(tmp_path / "r1"))
        assert code == 0
        code, _, _ = run(capsys, "simulate", "--manifest", str(kp_manifest),
                         "--out", str(tmp_path / "r2"))
        assert code == 0
        for p1 in sorted((tmp_path / "r1").iterdir()):
            p2 = tmp_path / "r2" / p1.name
            assert p1.read_bytes() == p2.read_bytes()

    def test_violating_datum_exits_3(self, tmp_path, capsys):
        manifest = {
            "pde": "kp",
            "params": {"sigma": "1"},
            "grid": {"resolutions": [32, 32], "periods": [TWO_PI, TWO_PI]},
            "u0": {"constant": 0.05, "modes": [{"a": 0.05, "k": [0, 1]}]},
            "t_end": 0.02,
            "samples": 3,
            "constraints": [{"density": "u"}],
        }
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump(manifest))
        code, out, _ = run(capsys, "simulate", "--manifest", str(path),
                           "--out", str(tmp_path / "rep"))
        assert code == 3
        assert "violated" in out
