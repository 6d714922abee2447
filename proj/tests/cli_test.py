"""End-to-end checks of the e3dnas binary.

usage: cli_test.py <path-to-e3dnas> <source-dir>
"""

import json
import pathlib
import subprocess
import sys
import tempfile
import unittest

import jsonschema
from referencing import Registry, Resource

CLI = ""
SOURCE = pathlib.Path(".")


def run(*args, stdin=None):
    return subprocess.run([CLI, *args], input=stdin, capture_output=True, text=True)


def load_schemas():
    resources = []
    for path in sorted((SOURCE / "schemas").glob("*.schema.json")):
        doc = json.loads(path.read_text())
        resources.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(resources)


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.registry = load_schemas()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = pathlib.Path(cls.tmp.name)
        cls.micro = cls.dir / "micro.json"
        arch = json.loads(run("preset", "init-s").stdout)
        arch["input"].update(frames=4, height=24, width=24)
        for stage in arch["stages"]:
            for block in stage["blocks"]:
                block["bottleneck_channels"] = 16
                block["out_channels"] = 8
                block["kernel"] = [1, 1, 1]
        arch["stem"]["out_channels"] = 8
        arch["head"]["out_channels"] = 8
        cls.micro.write_text(json.dumps(arch))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def validate(self, doc, schema_id):
        schema = {"$ref": schema_id}
        jsonschema.Draft202012Validator(schema, registry=self.registry).validate(doc)

    def test_preset_score_pipeline(self):
        preset = run("preset", "e3d-s").stdout
        out = run("score", "--metric", "st", stdin=preset)
        self.assertEqual(out.returncode, 0, out.stderr)
        self.assertAlmostEqual(float(out.stdout), 202.86, delta=0.02 * 202.86)

    def test_preset_cost_pipeline(self):
        out = run("cost", stdin=run("preset", "e3d-m").stdout)
        self.assertEqual(out.returncode, 0, out.stderr)
        gflops = next(l for l in out.stdout.splitlines() if l.startswith("gflops:"))
        self.assertAlmostEqual(float(gflops.split()[1]), 4.7, delta=0.47)

    def test_presets_match_shipped_files(self):
        for name in ("init-s", "e3d-s", "e3d-m", "e3d-l"):
            out = run("preset", name)
            self.assertEqual(out.stdout, (SOURCE / "presets" / f"{name}.json").read_text())
            self.validate(json.loads(out.stdout), "architecture.schema.json")

    def test_missing_file(self):
        out = run("score", "missing.json")
        self.assertEqual(out.returncode, 3)
        self.assertIn("missing.json", out.stderr)
        self.assertEqual(len(out.stderr.strip().splitlines()), 1)

    def test_distinct_exit_codes(self):
        self.assertEqual(run("score", "--no-such-flag").returncode, 2)
        self.assertEqual(run("preset", "e3d-xl").returncode, 2)
        bad = self.dir / "bad.json"
        bad.write_text('{"version": 1}')
        out = run("score", str(bad))
        self.assertEqual(out.returncode, 4)
        self.assertIn("input", out.stderr)
        cfg = self.dir / "tight.json"
        cfg.write_text('{"version": 1, "budget_macs": 1000}')
        self.assertEqual(run("search", "--config", str(cfg)).returncode, 5)
        out = run("simulate", "--samples", "2", "--max-elements", "100", str(self.micro))
        self.assertEqual(out.returncode, 6)
        self.assertIn("element cap", out.stderr)

    def test_json_outputs_match_schema(self):
        arch = str(self.micro)
        for args in (
            ("score", "--json", arch),
            ("score", "--json", "--breakdown", "--metric", "homo", arch),
            ("cost", "--json", "--include-classifier", arch),
            ("simulate", "--json", "--samples", "5", "--pooling", "all", arch),
        ):
            out = run(*args)
            self.assertEqual(out.returncode, 0, out.stderr)
            doc = json.loads(out.stdout)
            self.validate(doc, "report.schema.json")
            self.assertEqual(doc["manifest"]["subcommand"], args[0])

    def test_breakdown_csv(self):
        out = run("score", "--breakdown", "--format", "csv", str(self.micro))
        lines = out.stdout.splitlines()
        self.assertEqual(lines[0], "layer,kernel_volume,effective_in_channels,refinement,term")
        self.assertEqual(len(lines), 1 + 17)

    def test_search_artifacts_and_manifest_replay(self):
        cfg = self.dir / "search.json"
        cfg.write_text(json.dumps({"version": 1, "iterations": 300, "population_size": 16,
                                   "seed": 4, "history_stride": 100}))
        self.validate(json.loads(cfg.read_text()), "search-config.schema.json")
        best, history = self.dir / "best.json", self.dir / "history.csv"
        out = run("search", "--json", "--config", str(cfg), "--out", str(best),
                  "--history", str(history))
        self.assertEqual(out.returncode, 0, out.stderr)
        doc = json.loads(out.stdout)
        self.validate(doc, "report.schema.json")
        self.validate(json.loads(best.read_text()), "architecture.schema.json")
        self.assertEqual(history.read_text().splitlines()[0],
                         "iteration,best_score,pop_size,accepted,rejected")

        sidecar = json.loads((self.dir / "best.json.manifest.json").read_text())
        self.validate(sidecar, "report.schema.json#/$defs/manifest")
        self.assertEqual([o["path"] for o in sidecar["outputs"]], [str(best), str(history)])

        # The manifest's resolved config alone reproduces the run.
        resolved = self.dir / "resolved.json"
        resolved.write_text(json.dumps(sidecar["config"]))
        self.validate(sidecar["config"], "search-config.schema.json")
        replay = self.dir / "replay.json"
        out = run("search", "--config", str(resolved), "--out", str(replay))
        self.assertEqual(out.returncode, 0, out.stderr)
        self.assertEqual(replay.read_bytes(), best.read_bytes())

    def test_schemas_reject_off_grid_widths(self):
        arch = json.loads(run("preset", "init-s").stdout)
        arch["head"]["out_channels"] = 13
        with self.assertRaises(jsonschema.ValidationError):
            self.validate(arch, "architecture.schema.json")

    def test_shipped_config_matches_schema(self):
        doc = json.loads((SOURCE / "configs" / "search-e3d-s.json").read_text())
        self.validate(doc, "search-config.schema.json")


if __name__ == "__main__":
    CLI, SOURCE = sys.argv[1], pathlib.Path(sys.argv[2])
    unittest.main(argv=sys.argv[:1], verbosity=2)
