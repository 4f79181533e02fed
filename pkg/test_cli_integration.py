import csv
import json
import shutil
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent


class TestDlsSilCLI(unittest.TestCase):

    def setUp(self):
        self.test_root = Path(tempfile.mkdtemp(prefix="dls_sil_test_"))
        self.create_inputs()

    def tearDown(self):
        shutil.rmtree(self.test_root, ignore_errors=True)

    def create_inputs(self):
        # Small plan: two techniques and SiL on an eight core machine
        self.plan_path = self.test_root / "plan.json"
        self.plan_path.write_text(json.dumps({
            "apps": ["psia"],
            "techniques": ["SS", "GSS", "SIL"],
            "scenarios": ["np", "pea-cm"],
            "platforms": ["p224"],
            "scale_to": 8,
            "n": 1000,
            "sil_candidates": ["SS", "GSS", "FAC"],
            "output_dir": str(self.test_root / "plan_out"),
        }))

        # Plan with a key the schema does not know
        self.bad_plan_path = self.test_root / "bad_plan.json"
        self.bad_plan_path.write_text(json.dumps({
            "apps": ["psia"], "techniques": ["SS"], "scenarios": ["np"], "colour": "red",
        }))

        # Platform file with three custom cores
        self.platform_path = self.test_root / "three.json"
        self.platform_path.write_text(json.dumps({"cores": [1.0, 0.5, 0.25], "S0": 1e9}))

    def run_cli(self, *args):
        cmd = [sys.executable, "-m", "dls_sil"] + [str(a) for a in args]
        return subprocess.run(cmd, capture_output=True, text=True, cwd=REPO_ROOT)

    def read_csv(self, path):
        with open(path, newline="") as f:
            return list(csv.reader(f))

    def test_simulate_single_technique(self):
        result = self.run_cli("simulate", "--app", "constant", "--n", "2000", "--platform", "p224",
                              "--scale-to", "4", "--technique", "GSS")
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertIn("Makespan:", result.stdout)
        self.assertIn("Total overhead:", result.stdout)
        self.assertIn("Chunks:", result.stdout)
        self.assertNotIn("SiL switches", result.stdout)

    def test_simulate_sil(self):
        result = self.run_cli("simulate", "--app", "gamma", "--n", "2000", "--platform", "p224",
                              "--scale-to", "4", "--scenario", "pea-cs", "--candidates", "SS,WF,AF",
                              "--sil-period", "20")
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertIn("SiL switches:", result.stdout)
        self.assertIn("SiL selections: 0s ", result.stdout)
        self.assertIn("Average selection time:", result.stdout)

    def test_simulate_writes_outputs(self):
        out = self.test_root / "run1"
        result = self.run_cli("simulate", "--app", "psia", "--n", "500", "--platform", self.platform_path,
                              "--technique", "SIL", "--candidates", "SS,GSS", "--out", out)
        self.assertEqual(result.returncode, 0, result.stderr)

        rows = self.read_csv(out / "results.csv")
        self.assertEqual(rows[0][:5], ["app", "technique", "scenario", "platform", "seed"])
        self.assertEqual(rows[1][:5], ["psia", "SIL", "np", "three", "0"])
        self.assertEqual(self.read_csv(out / "selections.csv")[0], ["t", "selected", "SS", "GSS"])
        timelines = self.read_csv(out / "timelines.csv")
        self.assertEqual(timelines[0][-1], "selection_timeline")
        self.assertEqual(timelines[1][:5], ["psia", "SIL", "np", "three", "0"])
        self.assertRegex(timelines[1][5], r"^0\.0:(SS|GSS)")
        chunks = self.read_csv(out / "chunks.csv")
        self.assertEqual(sum(int(row[4]) for row in chunks[1:]), 500)

    def test_simulate_is_deterministic(self):
        args = ("simulate", "--app", "uniform", "--n", "1500", "--platform", "p224", "--scale-to", "6",
                "--technique", "AF", "--scenario", "all-es", "--seed", "9")
        first = self.run_cli(*args)
        second = self.run_cli(*args)
        self.assertEqual(first.returncode, 0, first.stderr)
        self.assertEqual(first.stdout, second.stdout)

    def test_quiet_suppresses_progress(self):
        result = self.run_cli("-q", "simulate", "--app", "constant", "--n", "100", "--platform", "p224",
                              "--scale-to", "2", "--technique", "SS")
        self.assertEqual(result.returncode, 0)
        self.assertEqual(result.stderr, "")

    def test_unknown_technique(self):
        result = self.run_cli("simulate", "--technique", "TSS")
        self.assertEqual(result.returncode, 1)
        self.assertIn("Error:", result.stderr)
        self.assertIn("TSS", result.stderr)

    def test_unknown_scenario(self):
        result = self.run_cli("simulate", "--scenario", "pea-xx")
        self.assertEqual(result.returncode, 1)
        self.assertIn("Error:", result.stderr)

    def test_unknown_application(self):
        result = self.run_cli("simulate", "--app", "lu-decomposition")
        self.assertEqual(result.returncode, 1)
        self.assertIn("neither an application nor a workload file", result.stderr)

    def test_verbose_and_quiet(self):
        result = self.run_cli("-v", "-q", "simulate")
        self.assertEqual(result.returncode, 1)
        self.assertIn("Cannot use both --verbose and --quiet", result.stderr)

    def test_no_command(self):
        result = self.run_cli()
        self.assertNotEqual(result.returncode, 0)

    def test_run_plan_and_report(self):
        result = self.run_cli("run-plan", self.plan_path)
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertIn("6 cells succeeded, 0 failed", result.stdout)

        out = self.test_root / "plan_out"
        rows = self.read_csv(out / "results.csv")
        self.assertEqual(len(rows), 7)
        self.assertTrue((out / "charts" / "psia.png").is_file())

        report = self.run_cli("report", out / "results.csv")
        self.assertEqual(report.returncode, 0, report.stderr)
        self.assertIn("psia", report.stdout)
        self.assertIn("pea-cm", report.stdout)

    def test_run_plan_output_override(self):
        out = self.test_root / "elsewhere"
        result = self.run_cli("-q", "run-plan", self.plan_path, "--out", out, "--workers", "2")
        self.assertEqual(result.returncode, 0, result.stderr)
        self.assertTrue((out / "results.csv").is_file())
        self.assertFalse((self.test_root / "plan_out").exists())

    def test_run_plan_with_failed_cells(self):
        plan = json.loads(self.plan_path.read_text())
        plan["platforms"] = ["missing.json"]
        plan["output_dir"] = str(self.test_root / "failing")
        path = self.test_root / "failing.json"
        path.write_text(json.dumps(plan))

        result = self.run_cli("-q", "run-plan", path)
        self.assertEqual(result.returncode, 2)
        self.assertIn("0 cells succeeded, 6 failed", result.stdout)
        self.assertEqual(len(self.read_csv(self.test_root / "failing" / "failures.csv")), 7)

    def test_invalid_plan(self):
        result = self.run_cli("run-plan", self.bad_plan_path)
        self.assertEqual(result.returncode, 1)
        self.assertIn("Error:", result.stderr)
        self.assertIn("colour", result.stderr)

    def test_missing_plan_file(self):
        result = self.run_cli("run-plan", self.test_root / "nope.json")
        self.assertEqual(result.returncode, 1)
        self.assertIn("is not a file", result.stderr)

    def test_report_rejects_other_csv(self):
        path = self.test_root / "other.csv"
        path.write_text("a,b\n1,2\n")
        result = self.run_cli("report", path)
        self.assertEqual(result.returncode, 1)
        self.assertIn("Error:", result.stderr)


if __name__ == "__main__":
    unittest.main()
