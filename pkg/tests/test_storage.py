"""
Tests for artifact storage: profile CSV/JSON files, tables, field snapshots and manifests.
"""

import csv
import io
import json
import math
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np

from sgwaves.model import Params
from sgwaves.pde import Domain, init_from_profile
from sgwaves.profiles import WaveProfile
from sgwaves.storage import (
    FREE_PARAMETER,
    ArtifactStorage,
    emit_profile,
    field_to_csv,
    read_profile,
    table_to_csv,
)
from sgwaves.unperturbed import kink_profile


def header_lines(path):
    return [line for line in Path(path).read_text().splitlines() if line.startswith("#")]


class StorageTestCase(unittest.TestCase):
    def setUp(self):
        self.test_dir = Path(tempfile.mkdtemp(prefix="test_sgwaves_storage_"))

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)


class TestProfileFiles(StorageTestCase):
    def assert_same_profile(self, a, b):
        self.assertEqual(a.kind, b.kind)
        self.assertEqual(a.v, b.v)
        self.assertEqual(a.winding, b.winding)
        self.assertEqual(a.sign, b.sign)
        np.testing.assert_array_equal(a.xi, b.xi)
        np.testing.assert_array_equal(a.g, b.g)
        np.testing.assert_array_equal(a.gp, b.gp)

    def test_csv_round_trip(self):
        profile = kink_profile(velocity=0.3)
        path = emit_profile(profile, "csv", self.test_dir / "kink.csv")
        self.assert_same_profile(read_profile(path), profile)
        self.assertEqual(read_profile(path).meta["source"], "closed-form")

    def test_json_round_trip(self):
        profile = kink_profile(velocity=0.3, sign=-1)
        path = emit_profile(profile, "json", self.test_dir / "antikink.json")
        data = json.loads(path.read_text())
        self.assertEqual(data["kind"], "antikink")
        self.assertEqual(len(data["xi"]), len(profile))
        self.assert_same_profile(read_profile(path), profile)

    def test_free_speed_header(self):
        path = emit_profile(kink_profile(), "csv", self.test_dir / "free.csv")
        self.assertIn(f"# v: {FREE_PARAMETER}", header_lines(path))
        self.assertIsNone(read_profile(path).v)

    def test_array_header_carries_circumference(self):
        xi = np.linspace(0.0, 2.0, 5)
        profile = WaveProfile(
            kind="array",
            xi=xi,
            g=np.pi * xi,
            gp=np.full(5, np.pi),
            gamma=0.1,
            alpha=0.1,
            mu=0.05,
            v=0.6,
            winding=1,
            Xi=2.0,
        )
        path = emit_profile(profile, "csv", self.test_dir / "array.csv")
        headers = dict(line[1:].split(":", 1) for line in header_lines(path))
        self.assertAlmostEqual(float(headers[" circumference"]), 1.6, places=12)
        self.assertAlmostEqual(float(headers[" Xi"]), 2.0, places=15)
        self.assertEqual(read_profile(path).Xi, 2.0)

    def test_extra_column_round_trip(self):
        xi = np.linspace(0.0, 1.0, 5)
        profile = WaveProfile(
            kind="half-array",
            xi=xi,
            g=xi,
            gp=np.ones(5),
            gamma=0.1,
            alpha=0.1,
            mu=0.05,
            v=0.4,
            winding=0,
            meta={"distance": np.linspace(1.0, 0.0, 5), "captured": False},
        )
        path = emit_profile(profile, "csv", self.test_dir / "half.csv")
        column_line = [
            line for line in path.read_text().splitlines() if not line.startswith("#")
        ][0]
        self.assertEqual(column_line, "xi,g,gp,distance")
        loaded = read_profile(path)
        np.testing.assert_array_equal(loaded.meta["distance"], profile.meta["distance"])
        self.assertIs(loaded.meta["captured"], False)

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            emit_profile(kink_profile(), "xml", self.test_dir / "kink.xml")

    def test_unwritable_path(self):
        blocker = self.test_dir / "blocker"
        blocker.write_text("not a directory")
        target = blocker / "kink.csv"
        with self.assertRaises(OSError) as ctx:
            emit_profile(kink_profile(), "csv", target)
        self.assertIn("cannot write", str(ctx.exception))
        self.assertIn(str(target), str(ctx.exception))


class TestTables(unittest.TestCase):
    def test_missing_cells_are_empty(self):
        text = table_to_csv([{"a": 1.5, "b": None}, {"a": 2, "c": "x"}])
        self.assertEqual(text, "a,b,c\n1.5,,\n2,,x\n")

    def test_floats_round_trip(self):
        value = 0.1 + 0.2
        text = table_to_csv([{"value": value}])
        self.assertEqual(float(text.splitlines()[1]), value)


class TestArtifactStorage(StorageTestCase):
    def test_writes_profile_in_chosen_format(self):
        storage = ArtifactStorage(self.test_dir / "out", "json")
        path = storage.write_profile(kink_profile(velocity=0.1), "kink")
        self.assertEqual(path.name, "kink.json")
        self.assertTrue(path.exists())
        self.assertEqual(storage.written, [path])
        self.assertIsNone(storage.get_dry_run_summary())

    def test_dry_run_writes_nothing(self):
        out = self.test_dir / "out"
        storage = ArtifactStorage(out, "csv", dry_run=True)
        path = storage.write_profile(kink_profile(velocity=0.1), "kink")
        self.assertFalse(path.exists())
        self.assertFalse(out.exists())
        summary = storage.get_dry_run_summary()
        self.assertIn("DRY RUN SUMMARY", summary)
        self.assertIn("Artifacts: 1", summary)
        self.assertIn("kink.csv", summary)

    def test_field_snapshot(self):
        params = Params(0.0)
        field = init_from_profile(kink_profile(velocity=0.0), Domain.line(-30, 30), 0.5)
        storage = ArtifactStorage(self.test_dir)
        path = storage.write_field("run.field", field, params)
        lines = path.read_text().splitlines()
        self.assertEqual(path.name, "run.field.csv")
        self.assertEqual(lines[0], "x,phi,phi_t,h")
        self.assertEqual(len(lines), len(field.phi) + 1)
        self.assertEqual([float(v) for v in lines[1].split(",")][:2], [-30.0, 0.0])

    def test_flipped_field_snapshot(self):
        params = Params(0.0)
        field = init_from_profile(kink_profile(velocity=0.4), Domain.line(-30, 30), 0.5)
        plain = list(csv.reader(io.StringIO(field_to_csv(field, params))))[1:]
        flipped = list(csv.reader(io.StringIO(field_to_csv(field, params, flipped=True))))[1:]
        self.assertEqual(len(plain), len(flipped))
        for a, b in zip(plain, flipped):
            self.assertEqual(float(b[0]), float(a[0]))
            self.assertEqual(float(b[1]), -float(a[1]))
            self.assertEqual(float(b[2]), -float(a[2]))
            self.assertEqual(float(b[3]), float(a[3]))
        self.assertAlmostEqual(float(flipped[-1][1]), -2 * math.pi, delta=1e-12)

    def test_manifest_is_sorted(self):
        storage = ArtifactStorage(self.test_dir)
        path = storage.write_manifest("kink-mu", {"results": {"mu": np.float64(0.5)}, "command": "kink-mu"})
        self.assertEqual(path.name, "kink-mu.manifest.json")
        text = path.read_text()
        self.assertLess(text.index('"command"'), text.index('"results"'))
        self.assertEqual(json.loads(text)["results"]["mu"], 0.5)

    def test_json_accepts_numpy(self):
        storage = ArtifactStorage(self.test_dir)
        path = storage.write_json("data", {"values": np.arange(3), "flag": np.bool_(True)})
        self.assertEqual(json.loads(path.read_text()), {"values": [0, 1, 2], "flag": True})

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            ArtifactStorage(self.test_dir, "xml")


if __name__ == "__main__":
    unittest.main()
