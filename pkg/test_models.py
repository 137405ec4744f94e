import os
import tempfile
import unittest

import numpy as np

from errors import (EmptyIntersectionError, ModelError, SampleOutsideSupportError, SchemaError, VertexCapError)
from fileio import (dump_instance, dump_samples, load_instance, load_samples, read_json, write_json, write_table)
from models import (BoxSet, FirstStageDecision, FirstStageSpace, Instance, PolicyStructure, RecourseData,
                    SampleSet, box_vertices, intersect_boxes, sample_mean)
from synthetic import random_instance


class TestBoxSet(unittest.TestCase):

    def test_vertices_start_at_all_lower(self):
        box = BoxSet([0.0, -1.0, 2.0], [1.0, 1.0, 2.0])
        vertices = list(box_vertices(box))
        self.assertEqual(len(vertices), 4)
        np.testing.assert_array_equal(vertices[0], [0.0, -1.0, 2.0])
        self.assertEqual(len({tuple(v) for v in vertices}), 4)
        self.assertTrue(all(v[2] == 2.0 for v in vertices))

    def test_degenerate_box_has_one_vertex(self):
        box = BoxSet([1.0, 2.0], [1.0, 2.0])
        self.assertEqual(box.vertex_count, 1)
        self.assertEqual(len(list(box_vertices(box))), 1)

    def test_vertex_cap(self):
        box = BoxSet(np.zeros(5), np.ones(5))
        with self.assertRaises(VertexCapError):
            box_vertices(box, cap=16)

    def test_inverted_bounds_name_the_coordinate(self):
        with self.assertRaisesRegex(ModelError, "coordinate 1"):
            BoxSet([0.0, 2.0], [1.0, 1.0])

    def test_intersection(self):
        out = intersect_boxes(BoxSet([0.0, 0.0], [2.0, 2.0]), BoxSet([1.0, -1.0], [3.0, 1.0]))
        np.testing.assert_array_equal(out.lower, [1.0, 0.0])
        np.testing.assert_array_equal(out.upper, [2.0, 1.0])
        with self.assertRaises(EmptyIntersectionError):
            intersect_boxes(BoxSet([0.0], [1.0]), BoxSet([2.0], [3.0]))

    def test_bounds_are_read_only(self):
        box = BoxSet([0.0], [1.0])
        with self.assertRaises(ValueError):
            box.lower[0] = -1.0


class TestSampleSet(unittest.TestCase):

    def test_outside_support_names_sample_and_coordinate(self):
        support = BoxSet([0.0, 0.0], [1.0, 1.0])
        with self.assertRaises(SampleOutsideSupportError) as ctx:
            SampleSet([[0.5, 0.5], [0.2, 1.5]], support)
        self.assertEqual(ctx.exception.details, {"sample": 1, "coordinate": 1})

    def test_clamped_ingest(self):
        support = BoxSet([0.0], [1.0])
        samples = SampleSet.ingest([[1.5], [-0.5]], support, clamp=True)
        np.testing.assert_array_equal(samples.points[:, 0], [1.0, 0.0])

    def test_mean_stays_in_hull(self):
        samples = SampleSet(np.full((7, 2), 0.1))
        mean = sample_mean(samples)
        hull = samples.hull()
        self.assertTrue(np.all(mean >= hull.lower) and np.all(mean <= hull.upper))

    def test_subset_and_concat(self):
        samples = SampleSet(np.arange(6.0).reshape(3, 2))
        self.assertEqual(samples.subset([0, 2]).N, 2)
        self.assertEqual(samples.concat(samples).N, 6)


class TestInstance(unittest.TestCase):

    def test_dimension_mismatch_names_field(self):
        base = random_instance(0)
        with self.assertRaisesRegex(ModelError, "c2"):
            Instance(base.c1, np.ones(base.n2 + 1), base.first_stage, base.recourse, base.support, base.samples,
                     0.1)
        with self.assertRaisesRegex(ModelError, "epsilon"):
            base.with_epsilon(-1.0)

    def test_first_stage_needs_a_binary(self):
        with self.assertRaises(ModelError):
            FirstStageSpace(0, 1, np.zeros((0, 1)), [])

    def test_normalization_keeps_feasible_set(self):
        rc = RecourseData([[2.0]], [[4.0]], [[-8.0]], [2.0])
        scaled = rc.normalized()
        np.testing.assert_allclose([scaled.A1[0, 0], scaled.A2[0, 0], scaled.A3[0, 0], scaled.b[0]],
                                   [0.25, 0.5, -1.0, 0.25])

    def test_first_stage_decision_rounds_binaries(self):
        decision = FirstStageDecision.from_vector([0.9999999, 1e-9, 2.5], 2)
        np.testing.assert_array_equal(decision.binary, [1.0, 0.0])
        np.testing.assert_array_equal(decision.vector, [1.0, 0.0, 2.5])


class TestPolicyStructure(unittest.TestCase):

    def test_identity_assembles_entries_in_order(self):
        structure = PolicyStructure.identity(2, 3)
        policy = structure.assemble(np.arange(8.0))
        np.testing.assert_array_equal(policy.A, [[0, 1, 2], [4, 5, 6]])
        np.testing.assert_array_equal(policy.a, [3, 7])

    def test_static_policy(self):
        policy = PolicyStructure.static(2, 3).assemble([1.0, 2.0])
        np.testing.assert_array_equal(policy.A, np.zeros((2, 3)))
        np.testing.assert_array_equal(policy.a, [1.0, 2.0])

    def test_tied_entries_share_a_parameter(self):
        structure = PolicyStructure(1, 2, 2, ((0, 0, 1.0), (1, 0, 1.0), (2, 1, 1.0)))
        policy = structure.assemble([3.0, -1.0])
        np.testing.assert_array_equal(policy.A, [[3.0, 3.0]])
        np.testing.assert_array_equal(policy.a, [-1.0])
        self.assertFalse(structure.fixed_zero.any())

    def test_bad_terms(self):
        with self.assertRaises(ModelError):
            PolicyStructure(1, 1, 1, ((5, 0, 1.0),))
        with self.assertRaises(ModelError):
            PolicyStructure(1, 1, 1, ((0, 3, 1.0),))
        with self.assertRaises(ModelError):
            PolicyStructure.identity(2, 2).assemble(np.zeros(5))

    def test_check_against_instance(self):
        instance = random_instance(1, m=2, n2=2)
        PolicyStructure.identity(2, 2).check(instance)
        with self.assertRaises(ModelError):
            PolicyStructure.identity(3, 2).check(instance)


class TestFileIo(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp, name)

    def test_instance_round_trip(self):
        instance = random_instance(4, n_continuous=1)
        structure = PolicyStructure.static(instance.n2, instance.m)
        dump_instance(self.path("inst.json"), instance, structure)
        back, back_structure = load_instance(self.path("inst.json"))
        for key in ("c1", "c2"):
            np.testing.assert_array_equal(getattr(back, key), getattr(instance, key))
        np.testing.assert_array_equal(back.recourse.A3, instance.recourse.A3)
        np.testing.assert_array_equal(back.samples.points, instance.samples.points)
        self.assertEqual(back.epsilon, instance.epsilon)
        self.assertEqual(back_structure.terms, structure.terms)

    def test_instance_missing_field(self):
        write_json(self.path("bad.json"), {"format": "drlp-instance"})
        with self.assertRaisesRegex(SchemaError, "dimensions"):
            load_instance(self.path("bad.json"))

    def test_declared_dimension_checked(self):
        instance = random_instance(2)
        dump_instance(self.path("inst.json"), instance)
        doc = read_json(self.path("inst.json"))
        doc["dimensions"]["L"] = 99
        write_json(self.path("inst.json"), doc)
        with self.assertRaisesRegex(SchemaError, "dimensions.L"):
            load_instance(self.path("inst.json"))

    def test_broken_json_reports_line(self):
        with open(self.path("broken.json"), "w") as fh:
            fh.write('{\n  "format": \n}\n')
        with self.assertRaisesRegex(SchemaError, "line 3"):
            read_json(self.path("broken.json"))

    def test_samples_round_trip(self):
        support = BoxSet([0.0, -1.0], [1.0, 1.0])
        samples = SampleSet([[0.1, -0.2], [1.0 / 3.0, 0.9]], support)
        dump_samples(self.path("s.csv"), samples)
        back = load_samples(self.path("s.csv"), support)
        np.testing.assert_array_equal(back.points, samples.points)

    def test_short_sample_row_names_the_row(self):
        with open(self.path("s.csv"), "w") as fh:
            fh.write("# header comment\n0.1,0.2\n0.3\n")
        with self.assertRaisesRegex(SchemaError, "row 3"):
            load_samples(self.path("s.csv"), BoxSet([0.0, 0.0], [1.0, 1.0]))

    def test_sample_outside_support_names_row_and_column(self):
        with open(self.path("s.csv"), "w") as fh:
            fh.write("0.1,0.2\n0.3,7.0\n")
        with self.assertRaisesRegex(SampleOutsideSupportError, "row 2, column 1"):
            load_samples(self.path("s.csv"), BoxSet([0.0, 0.0], [1.0, 1.0]))

    def test_write_table(self):
        frame = write_table(self.path("t.csv"), [{"a": 1, "b": 0.5}, {"a": 2, "b": np.nan}])
        self.assertEqual(list(frame.columns), ["a", "b"])
        with open(self.path("t.csv")) as fh:
            self.assertEqual(fh.readline().strip(), "a,b")
        self.assertEqual(os.listdir(self.tmp), ["t.csv"])


if __name__ == "__main__":
    unittest.main()
