"""
Tests for RunConfig: YAML loading, dotted-key overrides and validation.
"""

import os
import shutil
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from sgwaves.config import OUTPUT_ENV, RunConfig, create_default_config
from sgwaves.errors import CflError, ConfigError, ParameterError


class TestRunConfig(unittest.TestCase):
    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp(prefix="test_sgwaves_config_"))

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def write(self, text: str) -> str:
        path = self.test_dir / "config.yaml"
        path.write_text(text)
        return str(path)

    def test_defaults(self):
        config = RunConfig()
        self.assertEqual(config.gamma, 0.1)
        self.assertEqual(config.alpha, 0.0)
        self.assertEqual(config.ode.rtol, 1e-10)
        self.assertEqual(config.pde.dx, 0.05)
        self.assertEqual(config.output.format, "csv")
        config.validate()

    def test_dotted_keys(self):
        config = RunConfig.from_file(self.write("gamma: 0.2\npde.dx: 0.1\nshoot.tol: 1e-10\n"))
        self.assertEqual(config.gamma, 0.2)
        self.assertEqual(config.pde.dx, 0.1)
        # PyYAML reads 1e-10 as a string
        self.assertEqual(config.shoot.tol, 1e-10)

    def test_nested_sections(self):
        config = RunConfig.from_file(self.write("pde:\n  dt: 0.02\n  snapshot: false\n"))
        self.assertEqual(config.pde.dt, 0.02)
        self.assertFalse(config.pde.snapshot)

    def test_empty_file_gives_defaults(self):
        self.assertEqual(RunConfig.from_file(self.write("")), RunConfig())

    def test_bad_files(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_file(str(self.test_dir / "missing.yaml"))
        with self.assertRaises(ConfigError):
            RunConfig.from_file(self.write("gamma: [0.1\n"))
        with self.assertRaises(ConfigError):
            RunConfig.from_file(self.write("- 0.1\n- 0.2\n"))

    def test_unknown_keys(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"pde.resolution": 4})
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"solver.tol": 1e-8})
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"beta": 0.1})

    def test_invalid_value(self):
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"pde.dx": "fine"})
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"array.m": 1.5})

    def test_list_coercion(self):
        config = RunConfig.from_dict({"sweep.gammas": "0.04, 0.02,0.01"})
        self.assertEqual(config.sweep.gammas, [0.04, 0.02, 0.01])
        config.update({"periods.energies": 0.5})
        self.assertEqual(config.periods.energies, [0.5])

    def test_update_overrides_file(self):
        config = RunConfig.from_file(self.write("gamma: 0.2\nalpha: 0.1\n"))
        config.update({"gamma": 0.05})
        self.assertEqual(config.gamma, 0.05)
        self.assertEqual(config.alpha, 0.1)

    def test_to_dict_round_trip(self):
        config = RunConfig.from_dict({"gamma": 0.3, "pde.velocity": 0.5, "sweep.alphas": [0.1]})
        flat = config.to_dict()
        self.assertEqual(flat["pde.velocity"], 0.5)
        self.assertIsNone(flat["array.period"])
        self.assertEqual(RunConfig.from_dict(flat), config)

    def test_validate_gamma(self):
        with self.assertRaises(ParameterError) as ctx:
            RunConfig(gamma=1.5).validate()
        self.assertIn("[0, 1)", str(ctx.exception))
        config = RunConfig(gamma=-0.5).validate()
        self.assertEqual(config.params.gamma, 0.5)

    def test_validate_cfl(self):
        config = RunConfig.from_dict({"pde.dx": 0.05, "pde.dt": 0.05})
        with self.assertRaises(CflError):
            config.validate()

    def test_validate_choices(self):
        with self.assertRaises(ConfigError):
            RunConfig(command="plot").validate()
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"output.format": "xml"}).validate()
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({"pde.profile": "breather"}).validate()
        with self.assertRaises(ParameterError):
            RunConfig.from_dict({"shoot.delta": 1e-3}).validate()
        with self.assertRaises(ParameterError):
            RunConfig.from_dict({"pde.velocity": 1.0}).validate()
        with self.assertRaises(ParameterError):
            RunConfig.from_dict({"pair.velocity": -1.2}).validate()
        config = RunConfig.from_dict({"pair.velocity": 0.3, "pde.m": 2}).validate()
        self.assertEqual((config.pair.velocity, config.pde.m), (0.3, 2))

    def test_output_dir_from_environment(self):
        with mock.patch.dict(os.environ, {OUTPUT_ENV: str(self.test_dir / "env-out")}):
            self.assertEqual(RunConfig().output.dir, str(self.test_dir / "env-out"))

    def test_example_config_is_valid(self):
        path = Path(__file__).parent.parent / "config.example.yaml"
        config = RunConfig.from_file(str(path)).validate()
        self.assertEqual(config.sweep.alphas, [0.05])
        self.assertEqual(config.shoot.delta, 1e-8)

    def test_create_default_config(self):
        path = self.test_dir / "nested" / "config.yaml"
        created = create_default_config(str(path))
        self.assertTrue(path.exists())
        self.assertEqual(RunConfig.from_file(str(path)), created)


if __name__ == "__main__":
    unittest.main()
