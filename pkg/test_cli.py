import contextlib
import io
import os
import shutil
import tempfile
import unittest

import numpy as np
import pandas as pd

from cli import RunConfig, build_parser, run
from fileio import dump_instance, dump_samples, load_instance, read_json
from models import BoxSet, FirstStageSpace, Instance, RecourseData, SampleSet
from synthetic import draw_scenarios
from test_reformulation import corner_instance
from uc import dump_uc_system, toy_system, uc_support


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = run(list(argv))
    return code, out.getvalue(), err.getvalue()


def parse_summary(text):
    lines = text.strip().splitlines()
    return lines[0], dict(line.split("=", 1) for line in lines[1:])


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def path(self, name):
        return os.path.join(self.tmp, name)


class TestUsage(CliTestCase):

    def test_missing_command(self):
        code, out, err = invoke()
        self.assertEqual(code, 2)
        self.assertEqual(err.splitlines()[0], "error=USAGE exit=2")
        self.assertEqual(out, "")

    def test_missing_required_option(self):
        code, _, err = invoke("solve")
        self.assertEqual(code, 2)
        self.assertIn("--instance", err)

    def test_bad_grid(self):
        code, _, err = invoke("holdout", "--instance", self.path("x.json"), "--grid", "0.1,abc")
        self.assertEqual(code, 2)
        self.assertEqual(err.splitlines()[0], "error=USAGE exit=2")

    def test_conflicting_modes(self):
        code, _, _ = invoke("solve", "--instance", self.path("x.json"), "--plain", "--robust")
        self.assertEqual(code, 2)

    def test_config_from_args(self):
        args = build_parser().parse_args(["uc-demo", "--grid", "0.1,0.2", "--N", "12"])
        cfg = RunConfig.from_args(args)
        self.assertEqual((cfg.command, cfg.grid, cfg.N, cfg.seed), ("uc-demo", (0.1, 0.2), 12, 7))
        self.assertIsNone(cfg.epsilon)

    def test_holdout_mode_defaults_to_refined(self):
        args = build_parser().parse_args(["holdout", "--instance", "x.json"])
        self.assertEqual(RunConfig.from_args(args).mode, "refined")

    def test_holdout_rejects_other_modes(self):
        code, _, err = invoke("holdout", "--instance", self.path("x.json"), "--mode", "robust")
        self.assertEqual(code, 2)
        self.assertEqual(err.splitlines()[0], "error=USAGE exit=2")


class TestErrors(CliTestCase):

    def test_missing_file_is_an_input_error(self):
        code, out, err = invoke("solve", "--instance", self.path("missing.json"))
        self.assertEqual(code, 2)
        self.assertIn("error=SCHEMA_ERROR exit=2", err.splitlines())
        self.assertEqual(out, "")

    def test_affine_infeasible(self):
        support = BoxSet([0.0], [1.0])
        # xi <= 0.5 has no recourse variable to fix it
        instance = Instance([0.0], [1.0], FirstStageSpace(1, 0, np.zeros((0, 1)), []),
                            RecourseData([[0.0], [0.0]], [[-1.0], [0.0]], [[0.0], [1.0]], [0.0, 0.5]),
                            support, SampleSet([[0.2]], support), 0.1)
        dump_instance(self.path("bad.json"), instance)
        code, _, err = invoke("solve", "--instance", self.path("bad.json"), "--output", self.path("s.json"))
        self.assertEqual(code, 1)
        self.assertIn("error=AFFINE_INFEASIBLE exit=1", err.splitlines())
        self.assertFalse(os.path.exists(self.path("s.json")))

    def test_negative_threads(self):
        dump_instance(self.path("c.json"), corner_instance())
        code, _, err = invoke("solve", "--instance", self.path("c.json"), "--threads", "0")
        self.assertEqual(code, 2)
        self.assertIn("error=MODEL_ERROR exit=2", err.splitlines())


class TestSolveAndEvaluate(CliTestCase):

    def setUp(self):
        super().setUp()
        dump_instance(self.path("corner.json"), corner_instance())

    def test_plain_solve(self):
        code, out, _ = invoke("solve", "--instance", self.path("corner.json"), "--output", self.path("sol.json"),
                              "--trace", self.path("trace.csv"))
        self.assertEqual(code, 0)
        header, fields = parse_summary(out)
        self.assertEqual(header, "[solve]")
        self.assertAlmostEqual(float(fields["objective"]), 1.0, places=5)
        self.assertEqual(fields["mode"], "plain")
        self.assertEqual(read_json(self.path("sol.json"))["mode"], "plain")
        trace = pd.read_csv(self.path("trace.csv"))
        self.assertEqual(len(trace), int(fields["iterations"]))

    def test_exact_then_evaluate(self):
        code, out, _ = invoke("solve", "--instance", self.path("corner.json"), "--exact",
                              "--output", self.path("exact.json"))
        self.assertEqual(code, 0)
        self.assertAlmostEqual(float(parse_summary(out)[1]["objective"]), 0.5, places=5)
        self.assertEqual(read_json(self.path("exact.json"))["format"], "drlp-exact-solution")

        dump_samples(self.path("xi.csv"), np.array([[0.2, 0.9], [0.5, 0.1]]))
        code, out, _ = invoke("evaluate", "--instance", self.path("corner.json"), "--solution", self.path("exact.json"),
                              "--scenarios", self.path("xi.csv"), "--output", self.path("eval.csv"))
        self.assertEqual(code, 0)
        fields = parse_summary(out)[1]
        self.assertAlmostEqual(float(fields["mean_cost"]), 0.7, places=6)
        self.assertEqual(fields["infeasible"], "0")
        self.assertEqual(len(pd.read_csv(self.path("eval.csv"))), 2)

    def test_gap(self):
        code, out, _ = invoke("gap", "--instance", self.path("corner.json"))
        self.assertEqual(code, 0)
        fields = parse_summary(out)[1]
        self.assertAlmostEqual(float(fields["gap"]), 0.5, places=5)
        self.assertEqual(fields["finite"], "True")

    def test_holdout(self):
        instance = corner_instance().with_samples(draw_scenarios(corner_instance().support, 8, seed=3))
        dump_instance(self.path("eight.json"), instance)
        code, out, _ = invoke("holdout", "--instance", self.path("eight.json"), "--grid", "0.01,0.1",
                              "--mode", "plain", "--output", self.path("holdout.csv"))
        self.assertEqual(code, 0)
        fields = parse_summary(out)[1]
        self.assertIn(float(fields["epsilon"]), (0.01, 0.1))
        self.assertEqual(list(pd.read_csv(self.path("holdout.csv"))["epsilon"]), [0.01, 0.1])


class TestUcCommands(CliTestCase):

    def test_uc_build(self):
        system = toy_system("tiny", seed=1)
        dump_uc_system(self.path("sys.json"), system)
        dump_samples(self.path("xi.csv"), draw_scenarios(uc_support(system), 6, seed=0))
        code, out, _ = invoke("uc-build", "--system", self.path("sys.json"), "--samples", self.path("xi.csv"),
                              "--output", self.path("inst.json"))
        self.assertEqual(code, 0)
        fields = parse_summary(out)[1]
        self.assertEqual((fields["m"], fields["N"], fields["parameters"]), ("8", "6", "48"))
        instance, structure = load_instance(self.path("inst.json"))
        self.assertEqual(instance.epsilon, 0.01)
        self.assertEqual(structure.parameter_count, 48)

    def test_uc_demo(self):
        out_dir = self.path("demo")
        code, out, _ = invoke("uc-demo", "--profile", "tiny", "--epsilon", "0.01", "--N", "5", "--eval", "20",
                              "--solver", "highs", "--out-dir", out_dir)
        self.assertEqual(code, 0)
        header, fields = parse_summary(out)
        self.assertEqual(header, "[uc-demo]")
        self.assertEqual(fields["infeasible"], "0")
        self.assertLessEqual(float(fields["balance_residual"]), 1e-6)
        for name in ("solution.json", "trace.csv", "evaluation.csv"):
            self.assertTrue(os.path.exists(os.path.join(out_dir, name)), name)
        self.assertFalse(os.path.exists(os.path.join(out_dir, "holdout.csv")))

    def test_bench_scaling(self):
        code, out, _ = invoke("bench-scaling", "--family", "random", "--N", "10,20", "--repeats", "1",
                              "--output", self.path("scaling.csv"))
        self.assertEqual(code, 0)
        fields = parse_summary(out)[1]
        self.assertEqual((fields["sizes"], fields["same_dimensions"]), ("2", "True"))
        self.assertEqual(list(pd.read_csv(self.path("scaling.csv"))["N"]), [10, 20])


if __name__ == "__main__":
    unittest.main()
