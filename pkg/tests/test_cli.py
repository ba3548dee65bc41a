"""
Tests for the sg-waves command line: artifacts, manifests, exit codes and config precedence.
"""

import csv
import json
import math
import os
import shutil
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import pytest
import yaml

from sgwaves.cli import parse_and_dispatch

REPO_ROOT = Path(__file__).parent.parent


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp(prefix="test_sgwaves_cli_"))
        self.out = self.test_dir / "out"
        self.env = dict(os.environ)
        self.env["PYTHONPATH"] = os.pathsep.join(
            p for p in (str(REPO_ROOT), self.env.get("PYTHONPATH")) if p
        )
        self.env["HOME"] = str(self.test_dir)
        self.env.pop("SGWAVES_OUTPUT_DIR", None)

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def run_cli(self, *args, out=None):
        """Run sg-waves in a subprocess with its artifacts under the test directory."""
        cmd = [sys.executable, "-m", "sgwaves.cli", "-o", str(out or self.out)] + list(args)
        return subprocess.run(cmd, capture_output=True, text=True, env=self.env, timeout=600)

    def write_config(self, data):
        path = self.test_dir / "config.yaml"
        path.write_text(yaml.safe_dump(data))
        return str(path)


@pytest.mark.integration
class TestCommands(CliTestCase):
    def test_equilibria(self):
        result = self.run_cli("equilibria", "--gamma", "0.5")
        self.assertEqual(result.returncode, 0, result.stderr)
        rows = read_rows(self.out / "equilibria.csv")
        self.assertEqual(len(rows), 1)
        self.assertAlmostEqual(float(rows[0]["g_min"]), math.asin(0.5), places=12)
        self.assertAlmostEqual(float(rows[0]["g_max"]), math.pi - math.asin(0.5), places=12)
        self.assertAlmostEqual(json.loads(result.stdout)["g_min"], math.asin(0.5), places=12)

        manifest = json.loads((self.out / "equilibria.manifest.json").read_text())
        self.assertEqual(manifest["command"], "equilibria")
        self.assertEqual(manifest["config"]["gamma"], 0.5)
        self.assertFalse(manifest["forcing_flipped"])
        self.assertIn("numpy", manifest["versions"])
        self.assertEqual(manifest["artifacts"], [str(self.out / "equilibria.csv")])

    def test_kink_mu(self):
        result = self.run_cli("kink-mu", "--gamma", "0.1", "--alpha", "0.1", "--tol", "1e-10")
        self.assertEqual(result.returncode, 0, result.stderr)
        data = json.loads((self.out / "kink-mu.json").read_text())
        keys = ("mu_hat", "v_hat", "degenerate", "v_inf", "iterations", "bracket", "energy_audit")
        for key in keys:
            self.assertIn(key, data)
        self.assertFalse(data["degenerate"])
        self.assertGreater(data["mu_hat"], 0.0)
        self.assertLessEqual(data["bracket"][1] - data["bracket"][0], 1e-10)
        manifest = json.loads((self.out / "kink-mu.manifest.json").read_text())
        self.assertEqual(manifest["config"]["shoot.tol"], 1e-10)
        self.assertEqual(manifest["results"]["mu_hat"], data["mu_hat"])

    def test_kink_mu_flags_luminal_speed(self):
        result = self.run_cli("kink-mu", "--gamma", "0.1", "--alpha", "0", "--tol", "1e-8")
        self.assertEqual(result.returncode, 0, result.stderr)
        data = json.loads((self.out / "kink-mu.json").read_text())
        self.assertEqual(data["v_hat"], 1.0)
        self.assertTrue(data["degenerate"])
        manifest = json.loads((self.out / "kink-mu.manifest.json").read_text())
        self.assertTrue(manifest["results"]["degenerate"])

    def test_kink_profile_at_zero_forcing(self):
        result = self.run_cli("kink-profile", "--gamma", "0")
        self.assertEqual(result.returncode, 0, result.stderr)
        text = (self.out / "kink-profile.csv").read_text()
        self.assertIn("# v: free parameter", text.splitlines())
        self.assertIsNone(json.loads(result.stdout)["v"])

    def test_json_format(self):
        result = self.run_cli("-f", "json", "pair", "--gamma", "0.2", "--samples", "201")
        self.assertEqual(result.returncode, 0, result.stderr)
        data = json.loads((self.out / "pair.json").read_text())
        self.assertEqual(data["kind"], "bounded-pair")
        self.assertTrue(100 < len(data["xi"]) <= 201)
        self.assertEqual(data["v"], "free parameter")

    def test_pair_velocity(self):
        result = self.run_cli(
            "-f", "json", "pair", "--gamma", "0.2", "--samples", "201", "--velocity", "0.3"
        )
        self.assertEqual(result.returncode, 0, result.stderr)
        data = json.loads((self.out / "pair.json").read_text())
        self.assertEqual(data["v"], 0.3)
        manifest = json.loads((self.out / "pair.manifest.json").read_text())
        self.assertEqual(manifest["config"]["pair.velocity"], 0.3)

    def test_pde_run(self):
        result = self.run_cli(
            "pde-run",
            "--gamma", "0",
            "--profile", "closed-form",
            "--velocity", "0.5",
            "--x0", "-10",
            "--dx", "0.1",
            "--dt", "0.08",
            "--t-end", "20",
        )
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertTrue((self.out / "pde-run.diagnostics.json").exists())
        header = (self.out / "pde-run.field.csv").read_text().splitlines()[0]
        self.assertEqual(header, "x,phi,phi_t,h")
        results = json.loads(result.stdout)
        self.assertLess(results["relative_error"], 1e-2)
        self.assertTrue(results["winding_constant"])

    def test_pde_run_array_periods_on_circle(self):
        result = self.run_cli(
            "pde-run",
            "--gamma", "0.1",
            "--alpha", "0.1",
            "--profile", "array",
            "--domain", "circle",
            "--m", "2",
            "--dx", "0.1",
            "--dt", "0.08",
            "--t-end", "2",
        )
        self.assertEqual(result.returncode, 0, result.stderr)
        diagnostics = json.loads((self.out / "pde-run.diagnostics.json").read_text())
        self.assertTrue(diagnostics["windings"])
        self.assertTrue(all(w == 2 for w in diagnostics["windings"]))
        manifest = json.loads((self.out / "pde-run.manifest.json").read_text())
        self.assertEqual(manifest["config"]["pde.m"], 2)

    def test_pde_run_negative_forcing_maps_field_back(self):
        runs = {}
        for gamma in ("0.1", "-0.1"):
            out = self.test_dir / f"static{gamma}"
            result = self.run_cli(
                "pde-run",
                f"--gamma={gamma}",
                "--profile", "static-stable",
                "--dx", "0.1",
                "--dt", "0.08",
                "--t-end", "1",
                out=out,
            )
            self.assertEqual(result.returncode, 0, result.stderr)
            runs[gamma] = read_rows(out / "pde-run.field.csv")
        plain, flipped = runs["0.1"], runs["-0.1"]
        self.assertEqual(len(plain), len(flipped))
        for a, b in zip(plain, flipped):
            self.assertEqual(float(b["phi"]), -float(a["phi"]))
            self.assertEqual(float(b["phi_t"]), -float(a["phi_t"]))
            self.assertEqual(float(b["h"]), float(a["h"]))
        self.assertAlmostEqual(float(flipped[0]["phi"]), math.asin(0.1), delta=1e-9)

    def test_dry_run_writes_nothing(self):
        result = self.run_cli("-n", "equilibria", "--gamma", "0.3")
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertFalse(self.out.exists())
        self.assertIn("DRY RUN SUMMARY", result.stderr)


@pytest.mark.integration
class TestExitCodes(CliTestCase):
    def test_gamma_out_of_range(self):
        result = self.run_cli("equilibria", "--gamma", "1.5")
        self.assertEqual(result.returncode, 2)
        self.assertIn("[0, 1)", result.stderr)
        self.assertFalse((self.out / "equilibria.csv").exists())

    def test_undefined_at_zero_forcing(self):
        self.assertEqual(self.run_cli("kink-mu", "--gamma", "0").returncode, 2)
        self.assertEqual(self.run_cli("pair", "--gamma", "0").returncode, 2)

    def test_unknown_config_key(self):
        config = self.write_config({"pde.resolution": 4})
        result = self.run_cli("-c", config, "equilibria")
        self.assertEqual(result.returncode, 2)
        self.assertIn("pde.resolution", result.stderr)

    def test_cfl_violation(self):
        result = self.run_cli("pde-run", "--dx", "0.05", "--dt", "0.05")
        self.assertEqual(result.returncode, 2)

    def test_solver_failure(self):
        config = self.write_config({"ode.horizon": 1.0})
        result = self.run_cli("-c", config, "kink-mu", "--gamma", "0.1", "--alpha", "0.1")
        self.assertEqual(result.returncode, 3)
        self.assertIn("AmbiguousFateError", result.stderr)

    def test_velocity_cannot_override_fixed_speed(self):
        result = self.run_cli("pde-run", "--profile", "static-stable", "--velocity", "0.5")
        self.assertEqual(result.returncode, 2)
        self.assertIn("--velocity", result.stderr)
        self.assertFalse((self.out / "pde-run.diagnostics.json").exists())


@pytest.mark.integration
class TestConfigPrecedence(CliTestCase):
    def test_flag_overrides_config(self):
        config = self.write_config({"gamma": 0.3})
        result = self.run_cli("-c", config, "equilibria", "--gamma", "0.5")
        self.assertEqual(result.returncode, 0, result.stderr)
        rows = read_rows(self.out / "equilibria.csv")
        self.assertAlmostEqual(float(rows[0]["g_min"]), math.asin(0.5), places=12)

    def test_config_overrides_defaults(self):
        config = self.write_config({"gamma": 0.3, "output": {"name": "eq03"}})
        result = self.run_cli("-c", config, "equilibria")
        self.assertEqual(result.returncode, 0, result.stderr)
        rows = read_rows(self.out / "eq03.csv")
        self.assertAlmostEqual(float(rows[0]["g_min"]), math.asin(0.3), places=12)
        self.assertTrue((self.out / "eq03.manifest.json").exists())

    def test_manifest_replays_run(self):
        first = self.test_dir / "first"
        second = self.test_dir / "second"
        result = self.run_cli("periods", "--gamma", "0.2", "--energies=-0.5,0.5,3", out=first)
        self.assertEqual(result.returncode, 0, result.stderr)
        manifest = json.loads((first / "periods.manifest.json").read_text())
        config = self.write_config(manifest["config"])

        result = self.run_cli("-c", config, "periods", out=second)
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertEqual(
            (first / "periods.csv").read_text(), (second / "periods.csv").read_text()
        )

    def test_negative_forcing_is_flipped(self):
        result = self.run_cli("equilibria", "--gamma=-0.5")
        self.assertEqual(result.returncode, 0, result.stderr)
        manifest = json.loads((self.out / "equilibria.manifest.json").read_text())
        self.assertTrue(manifest["forcing_flipped"])
        self.assertEqual(manifest["config"]["gamma"], -0.5)


class TestInProcess(CliTestCase):
    def setUp(self):
        super().setUp()
        patcher = mock.patch.dict(os.environ, {"HOME": str(self.test_dir)})
        patcher.start()
        self.addCleanup(patcher.stop)

    def test_init_config(self):
        path = self.test_dir / "sg-waves" / "config.yaml"
        self.assertEqual(parse_and_dispatch(["init-config", "-p", str(path)]), 0)
        loaded = yaml.safe_load(path.read_text())
        self.assertEqual(loaded["output.format"], "csv")
        self.assertEqual(parse_and_dispatch(["init-config", "-p", str(path)]), 1)

    def test_default_config_file_is_read(self):
        path = self.test_dir / ".config" / "sg-waves" / "config.yaml"
        path.parent.mkdir(parents=True)
        path.write_text("gamma: 0.4\n")
        code = parse_and_dispatch(["-o", str(self.out), "equilibria"])
        self.assertEqual(code, 0)
        rows = read_rows(self.out / "equilibria.csv")
        self.assertAlmostEqual(float(rows[0]["g_min"]), math.asin(0.4), places=12)

    def test_invalid_input_code(self):
        self.assertEqual(parse_and_dispatch(["-o", str(self.out), "equilibria", "-g", "2"]), 2)


@pytest.mark.integration
def test_help_lists_commands(cli_env, temp_dir):
    result = subprocess.run(
        [sys.executable, "-m", "sgwaves.cli", "--help"],
        capture_output=True,
        text=True,
        env=cli_env,
        cwd=temp_dir,
    )
    assert result.returncode == 0, result.stderr
    for command in ("equilibria", "kink-mu", "array", "half-array", "pde-run", "sweep"):
        assert command in result.stdout


@pytest.mark.integration
def test_output_dir_from_environment(cli_env, temp_dir):
    cli_env["SGWAVES_OUTPUT_DIR"] = str(temp_dir / "env-out")
    result = subprocess.run(
        [sys.executable, "-m", "sgwaves.cli", "equilibria", "--gamma", "0.2"],
        capture_output=True,
        text=True,
        env=cli_env,
        cwd=temp_dir,
    )
    assert result.returncode == 0, result.stderr
    assert (temp_dir / "env-out" / "equilibria.csv").exists()


if __name__ == "__main__":
    unittest.main()
