import os
import tempfile
import unittest

import numpy as np

from backend import EQ, GE, INF, LE, MAXIMIZE, ProgramBuilder, solve_milp
from errors import SchemaError
from lpformat import export_lp_text, lpnum, parse_lp_text


def sample_spec(seed=0):
    rng = np.random.default_rng(seed)
    builder = ProgramBuilder(MAXIMIZE)
    u = builder.add_variables(3, upper=1.0, cost=rng.uniform(-1, 1, 3), binary=True, name="u")
    x = builder.add_variables(2, lower=-2.5, upper=4.0, cost=rng.uniform(-1, 1, 2), name="x")
    z = builder.add_variables(1, lower=-INF, upper=INF, name="z")
    cols = np.concatenate([u, x, z])
    builder.add_rows(cols, rng.uniform(-1, 1, (3, 6)), LE, rng.uniform(1, 2, 3), name="le")
    builder.add_row(cols, rng.uniform(-1, 1, 6), GE, -1.0 / 3.0, name="lower side")
    builder.add_row([x[0], z[0]], [1.0, -1.0], EQ, 0.0, name="tie")
    return builder.build()


class TestLpFormat(unittest.TestCase):

    def test_numbers_keep_full_precision(self):
        self.assertEqual(float(lpnum(1.0 / 3.0)), 1.0 / 3.0)
        self.assertEqual(lpnum(INF), "+inf")
        self.assertEqual(lpnum(-INF), "-inf")

    def test_export_has_all_sections(self):
        text = export_lp_text(sample_spec(), title="check")
        for heading in ("Maximize", "Subject To", "Bounds", "Binaries", "End"):
            self.assertIn(heading, text)
        self.assertIn("z free", text)
        self.assertIn("lower_side:", text)

    def test_round_trip_preserves_the_model(self):
        spec = sample_spec(3)
        back = parse_lp_text(export_lp_text(spec))
        self.assertEqual(back.sense, spec.sense)
        self.assertEqual(back.senses, spec.senses)
        np.testing.assert_array_equal(back.objective, spec.objective)
        np.testing.assert_array_equal(back.matrix.toarray(), spec.matrix.toarray())
        np.testing.assert_array_equal(back.rhs, spec.rhs)
        np.testing.assert_array_equal(back.lower, spec.lower)
        np.testing.assert_array_equal(back.upper, spec.upper)
        np.testing.assert_array_equal(back.binary, spec.binary)

    def test_round_trip_gives_the_same_optimum(self):
        spec = sample_spec(7)
        first = solve_milp(spec)
        second = solve_milp(parse_lp_text(export_lp_text(spec)))
        self.assertEqual(first.status, second.status)
        if first.optimal:
            self.assertAlmostEqual(first.objective, second.objective, places=9)

    def test_long_rows_wrap(self):
        builder = ProgramBuilder()
        x = builder.add_variables(20, upper=1.0, cost=1.0)
        builder.add_row(x, np.arange(1.0, 21.0), GE, 3.0, name="wide")
        spec = builder.build()
        text = export_lp_text(spec)
        self.assertGreater(text.count("\n   "), 1)
        np.testing.assert_array_equal(parse_lp_text(text).matrix.toarray(), spec.matrix.toarray())

    def test_written_file_parses(self):
        spec = sample_spec(1)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "model.lp")
            with open(path, "w") as fh:
                fh.write(export_lp_text(spec))
            with open(path) as fh:
                self.assertEqual(parse_lp_text(fh.read()).n_rows, spec.n_rows)

    def test_general_integers_rejected(self):
        text = "Minimize\n obj: x\nSubject To\n c: x >= 1\nGeneral\n x\nEnd\n"
        with self.assertRaises(SchemaError):
            parse_lp_text(text)

    def test_missing_operator_rejected(self):
        with self.assertRaises(SchemaError):
            parse_lp_text("Minimize\n obj: x\nSubject To\n c: x + y\nEnd\n")

    def test_text_before_objective_rejected(self):
        with self.assertRaises(SchemaError):
            parse_lp_text("x + y <= 1\nMinimize\n obj: x\nEnd\n")

    def test_default_bounds(self):
        spec = parse_lp_text("Minimize\n obj: x + y\nSubject To\n c: x + y >= 1\nBinaries\n y\nEnd\n")
        np.testing.assert_array_equal(spec.lower, [0.0, 0.0])
        np.testing.assert_array_equal(spec.upper, [INF, 1.0])


if __name__ == "__main__":
    unittest.main()
