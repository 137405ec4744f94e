import os
import tempfile
import unittest

import numpy as np

from backend import SolverOptions
from errors import AffineInfeasibleError, ModelError, RecourseInfeasibleError
from models import (BoxSet, FirstStageSpace, Instance, PolicyStructure, RecourseData, SampleSet, box_vertices,
                    sample_mean)
from reformulation import (AffineOptions, MasterState, _dual_coupling, audit_rows, build_master, export_solution,
                           feasibility_subproblem, feasibility_value, load_solution, policy_kernel,
                           row_violation, row_violations, second_stage, solve_affine, solve_affine_refined)
from synthetic import draw_scenarios, random_instance
from worst_case import dual_value

OPTIONS = AffineOptions(policy_bound=1e4)


def corner_instance(epsilon=0.0):
    """x2 >= xi_1 and x2 >= xi_2 on the unit square, cost x2, one sample at the center."""
    support = BoxSet([0.0, 0.0], [1.0, 1.0])
    return Instance(
        c1=[0.0],
        c2=[1.0],
        first_stage=FirstStageSpace(1, 0, np.zeros((0, 1)), []),
        recourse=RecourseData(np.zeros((2, 1)), [[-1.0], [-1.0]], [[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]),
        support=support,
        samples=SampleSet([[0.5, 0.5]], support),
        epsilon=epsilon,
    )


def determined_instance(epsilon=0.1):
    """x2 = xi exactly, cost x2; the affine policy is optimal."""
    support = BoxSet([0.0], [1.0])
    return Instance(
        c1=[1.0],
        c2=[1.0],
        first_stage=FirstStageSpace(1, 0, np.zeros((0, 1)), []),
        recourse=RecourseData(np.zeros((2, 1)), [[1.0], [-1.0]], [[-1.0], [1.0]], [0.0, 0.0]),
        support=support,
        samples=SampleSet([[0.2], [0.6]], support),
        epsilon=epsilon,
    )


def objective_from_parts(instance, solution):
    value, _ = dual_value(solution.policy, instance.c2, solution.omega or instance.support, instance.xi_mean,
                          instance.epsilon)
    return float(instance.c1 @ solution.x1.vector) + value


def trace_dims(solution):
    return [(r.master_vars, r.master_rows) for r in solution.history]


def counted_dims(instance, structure, solution):
    """Master size at every iteration from the cut counts alone."""
    n1, n2, m, L = instance.n1, instance.n2, instance.m, instance.L
    fixed_vars = n1 + structure.parameter_count + 2 * m + 1
    fixed_rows = instance.first_stage.G.shape[0] + 2 * m
    row_vertices, feasibility = L, int(solution.refined is not None)
    dims = []
    for record in solution.history:
        dims.append((fixed_vars + n2 * feasibility, fixed_rows + row_vertices + L * feasibility))
        row_vertices += record.row_cuts
        feasibility += record.feasibility_cuts
    return dims


class TestPolicyMaps(unittest.TestCase):

    def test_kernel_reproduces_the_policy(self):
        rng = np.random.default_rng(0)
        structure = PolicyStructure(3, 2, 4, ((0, 0, 1.0), (1, 0, 2.0), (2, 1, 1.0), (4, 2, -1.0), (8, 3, 0.5)))
        for _ in range(10):
            theta = rng.normal(size=4)
            xi = rng.normal(size=2)
            np.testing.assert_allclose(policy_kernel(structure, xi) @ theta, structure.assemble(theta).evaluate(xi))

    def test_dual_coupling_gives_the_direction(self):
        rng = np.random.default_rng(1)
        structure = PolicyStructure.identity(3, 4)
        c2 = rng.normal(size=3)
        theta = rng.normal(size=structure.parameter_count)
        np.testing.assert_allclose(_dual_coupling(structure, c2) @ theta, structure.assemble(theta).direction(c2))


class TestRowSubproblem(unittest.TestCase):

    def test_closed_form_matches_enumeration(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            instance = random_instance(int(rng.integers(1000)), m=3, n2=2, L=3)
            structure = PolicyStructure.identity(instance.n2, instance.m)
            policy = structure.assemble(rng.normal(size=structure.parameter_count))
            x1 = rng.integers(0, 2, instance.n1).astype(float)
            vertices, values = row_violations(x1, policy, instance.support, instance.recourse)
            rc = instance.recourse
            for l in range(instance.L):
                brute = max(rc.A1[l] @ x1 + rc.A2[l] @ policy.evaluate(v) + rc.A3[l] @ v - rc.b[l]
                            for v in box_vertices(instance.support))
                self.assertAlmostEqual(values[l], brute, places=9)
                vertex, value = row_violation(l, x1, policy, instance.support, rc)
                self.assertAlmostEqual(value, brute, places=9)
                np.testing.assert_array_equal(vertex, vertices[l])
            self.assertAlmostEqual(audit_rows(x1, policy, instance.support, rc), values.max(), places=9)

    def test_row_out_of_range(self):
        instance = corner_instance()
        policy = PolicyStructure.identity(1, 2).assemble(np.zeros(3))
        with self.assertRaises(ModelError):
            row_violation(5, [0.0], policy, instance.support, instance.recourse)


class TestFeasibilitySubproblem(unittest.TestCase):

    def test_enumeration_and_milp_agree(self):
        rng = np.random.default_rng(12)
        for trial in range(50):
            m = 1 + trial % 4
            instance = random_instance(trial, m=m, n2=2, L=3, n_binary=2)
            x1 = rng.integers(0, 2, instance.n1).astype(float)
            _, enumerated = feasibility_subproblem(x1, instance.support, instance, "enumerate")
            vertex, milp = feasibility_subproblem(x1, instance.support, instance, "milp")
            self.assertAlmostEqual(enumerated, milp, delta=1e-7 * max(1.0, abs(enumerated)))
            self.assertAlmostEqual(feasibility_value(x1, vertex, instance), milp,
                                   delta=1e-7 * max(1.0, abs(milp)))

    def test_auto_switches_on_the_limit(self):
        instance = random_instance(3, m=3)
        x1 = np.zeros(instance.n1)
        small = feasibility_subproblem(x1, instance.support, instance, "auto", enumeration_limit=1)[1]
        large = feasibility_subproblem(x1, instance.support, instance, "auto", enumeration_limit=1024)[1]
        self.assertAlmostEqual(small, large, places=7)

    def test_unknown_method(self):
        instance = corner_instance()
        with self.assertRaises(ModelError):
            feasibility_subproblem([0.0], instance.support, instance, "guess")

    def test_feasible_point_has_zero_value(self):
        instance = determined_instance()
        self.assertEqual(feasibility_value([1.0], [0.3], instance), 0.0)


class TestSecondStage(unittest.TestCase):

    def test_recourse_cost(self):
        x2, cost = second_stage([0.0], [0.3, 0.8], corner_instance())
        self.assertAlmostEqual(cost, 0.8)
        self.assertAlmostEqual(x2[0], 0.8)

    def test_infeasible_recourse_carries_xi(self):
        support = BoxSet([0.0], [1.0])
        instance = Instance([1.0], [1.0], FirstStageSpace(1, 0, np.zeros((0, 1)), []),
                            RecourseData([[1.0], [0.0]], [[0.0], [-1.0]], [[0.0], [0.0]], [0.5, 0.0]),
                            support, SampleSet([[0.5]], support), 0.0)
        with self.assertRaises(RecourseInfeasibleError) as ctx:
            second_stage([1.0], [0.5], instance)
        np.testing.assert_array_equal(ctx.exception.xi, [0.5])

    def test_outside_support(self):
        with self.assertRaises(ModelError):
            second_stage([0.0], [2.0, 0.0], corner_instance())


class TestMaster(unittest.TestCase):

    def test_master_size_does_not_depend_on_n(self):
        small = random_instance(6, N=5)
        large = small.with_samples(draw_scenarios(small.support, 1000, 60))
        structure = PolicyStructure.identity(small.n2, small.m)
        dims = []
        for instance in (small, large):
            state = MasterState.initial(instance.L, instance.support)
            spec = build_master(instance, structure, state, instance.support)
            dims.append((spec.n_vars, spec.n_rows))
        self.assertEqual(dims[0], dims[1])
        n1, n2, m, L = small.n1, small.n2, small.m, small.L
        self.assertEqual(dims[0], (n1 + n2 * (m + 1) + 2 * m + 1, small.first_stage.G.shape[0] + 2 * m + L))

    def test_state_ignores_repeated_vertices(self):
        state = MasterState.initial(2, BoxSet([0.0, 0.0], [1.0, 1.0]))
        self.assertFalse(state.add_row_vertex(0, [0.0, 0.0]))
        self.assertTrue(state.add_row_vertex(0, [1.0, 0.0]))
        self.assertFalse(state.add_row_vertex(0, [1.0, 0.0]))
        self.assertEqual(state.cut_count, 3)

    def test_options_are_validated(self):
        with self.assertRaises(ModelError):
            AffineOptions(rho=-1.0)
        with self.assertRaises(ModelError):
            AffineOptions(feasibility_method="bogus")
        with self.assertRaises(ModelError):
            AffineOptions(threads=0)


class TestSolveAffine(unittest.TestCase):

    def test_corner_instance(self):
        solution = solve_affine(corner_instance(), options=OPTIONS)
        self.assertAlmostEqual(solution.objective, 1.0, places=6)

    def test_determined_instance(self):
        instance = determined_instance(0.1)
        solution = solve_affine(instance, options=OPTIONS)
        # c1 x1 is paid only if x1 = 1; mean 0.4 plus radius 0.1
        self.assertAlmostEqual(solution.objective, 0.5, places=6)
        np.testing.assert_allclose(solution.policy.A, [[1.0]], atol=1e-6)

    def test_random_instances_are_certified(self):
        for seed in range(50):
            instance = random_instance(seed, m=1 + seed % 4, n2=2, L=3, N=5, epsilon=0.05 * (seed % 3))
            solution = solve_affine(instance, options=OPTIONS)
            bounds = solution.lower_bounds
            for a, b in zip(bounds, bounds[1:]):
                self.assertGreaterEqual(b, a - 1e-6 * max(1.0, abs(a)))
            self.assertLessEqual(solution.history[-1].max_violation, OPTIONS.rho + 1e-4)
            normalized = instance.normalized().recourse
            self.assertLessEqual(audit_rows(solution.x1, solution.policy, instance.support, normalized), 1e-4)
            self.assertAlmostEqual(solution.objective, objective_from_parts(instance, solution),
                                   delta=1e-6 * max(1.0, abs(solution.objective)))
            self.assertTrue(solution.certificate.in_dual_set(solution.policy.direction(instance.c2), tol=1e-6))

    def test_static_structure_pays_the_corner(self):
        instance = corner_instance()
        static = solve_affine(instance, PolicyStructure.static(1, 2), OPTIONS)
        self.assertAlmostEqual(static.objective, 1.0, places=6)

    def test_infeasible_affine_problem(self):
        support = BoxSet([0.0], [1.0])
        instance = Instance([0.0], [1.0], FirstStageSpace(1, 0, np.zeros((0, 1)), []),
                            RecourseData(np.zeros((2, 1)), [[-1.0], [0.0]], [[0.0], [1.0]], [0.0, 0.5]),
                            support, SampleSet([[0.2]], support), 0.0)
        with self.assertRaises(AffineInfeasibleError):
            solve_affine(instance, options=OPTIONS)

    def test_structure_dimension_checked(self):
        with self.assertRaises(ModelError):
            solve_affine(corner_instance(), PolicyStructure.identity(2, 2), OPTIONS)

    def test_lp_export(self):
        with tempfile.TemporaryDirectory() as tmp:
            options = AffineOptions(policy_bound=1e4, export_lp_dir=tmp)
            solution = solve_affine(corner_instance(), options=options)
            files = sorted(os.listdir(tmp))
            self.assertEqual(len(files), solution.iterations)
            self.assertEqual(files[0], "master_0001.lp")

    def test_highs_engine_gives_the_same_objective(self):
        instance = random_instance(2, m=2)
        ours = solve_affine(instance, options=OPTIONS)
        theirs = solve_affine(instance, options=AffineOptions(policy_bound=1e4, solver=SolverOptions(engine="highs")))
        self.assertAlmostEqual(ours.objective, theirs.objective, delta=1e-6 * max(1.0, abs(ours.objective)))


class TestSolveAffineRefined(unittest.TestCase):

    def test_corner_instance_reaches_the_sample(self):
        solution = solve_affine_refined(corner_instance(), beta=100, options=OPTIONS)
        self.assertAlmostEqual(solution.objective, 0.5, places=6)
        np.testing.assert_allclose(solution.omega.lower, [0.5, 0.5])

    def test_random_instances_keep_every_vertex_feasible(self):
        for seed in range(12):
            instance = random_instance(100 + seed, m=1 + seed % 3, n2=2, L=3, N=6, epsilon=0.01)
            refined = solve_affine_refined(instance, beta=100, options=OPTIONS)
            plain = solve_affine(instance, options=OPTIONS)
            self.assertLessEqual(refined.objective, plain.objective + 1e-6 * max(1.0, abs(plain.objective)))
            for vertex in box_vertices(instance.support):
                self.assertLessEqual(feasibility_value(refined.x1, vertex, instance), 1e-4)
            bounds = refined.lower_bounds
            for a, b in zip(bounds, bounds[1:]):
                self.assertGreaterEqual(b, a - 1e-6 * max(1.0, abs(a)))
            self.assertIsNotNone(refined.refined)
            self.assertTrue(instance.support.contains_box(refined.omega))

    def test_milp_feasibility_method_agrees(self):
        instance = random_instance(7, m=3, N=4, epsilon=0.02)
        enumerated = solve_affine_refined(instance, beta=100, options=OPTIONS)
        milp = solve_affine_refined(instance, beta=100,
                                    options=AffineOptions(policy_bound=1e4, feasibility_method="milp"))
        self.assertAlmostEqual(enumerated.objective, milp.objective,
                               delta=1e-6 * max(1.0, abs(enumerated.objective)))

    def test_objective_depends_on_samples_only_through_mean_and_hull(self):
        base = random_instance(9, m=2, epsilon=0.01)
        support = base.support

        def at(t1, t2):
            return support.lower + np.array([t1, t2]) * support.span

        base = base.with_samples(SampleSet([at(0.25, 0.25), at(0.75, 0.75), at(0.5, 0.5), at(0.5, 0.5)], support))
        other = base.with_samples(SampleSet([at(0.25, 0.75), at(0.75, 0.25), at(0.25, 0.25), at(0.75, 0.75)],
                                            support))
        np.testing.assert_allclose(sample_mean(base.samples), sample_mean(other.samples))
        first = solve_affine_refined(base, beta=100, options=OPTIONS)
        second = solve_affine_refined(other, beta=100, options=OPTIONS)
        self.assertAlmostEqual(first.objective, second.objective, delta=1e-7 * max(1.0, abs(first.objective)))


class TestSampleSizeIndependence(unittest.TestCase):
    SIZES = (10, 100, 1000)

    def test_static_corner_has_the_same_trace_for_every_n(self):
        base = corner_instance()
        structure = PolicyStructure.static(1, 2)
        for solve in (lambda i: solve_affine(i, structure, OPTIONS),
                      lambda i: solve_affine_refined(i, structure, options=OPTIONS)):
            traces = []
            for N in self.SIZES:
                instance = base.with_samples(draw_scenarios(base.support, N, [3, N]))
                traces.append(trace_dims(solve(instance)))
            self.assertEqual(len(traces[0]), 2)
            self.assertEqual(traces[0], traces[1])
            self.assertEqual(traces[0], traces[2])

    def test_trace_sizes_follow_the_cut_counts(self):
        base = random_instance(4, m=2, n2=2, L=3, N=1, epsilon=0.05)
        structure = PolicyStructure.identity(base.n2, base.m)
        for solve in (solve_affine, lambda i, s, options: solve_affine_refined(i, s, beta=100, options=options)):
            first = set()
            for N in self.SIZES:
                instance = base.with_samples(draw_scenarios(base.support, N, [4, N]))
                solution = solve(instance, structure, options=OPTIONS)
                self.assertEqual(trace_dims(solution), counted_dims(instance, structure, solution))
                first.add(trace_dims(solution)[0])
            self.assertEqual(len(first), 1)

    def test_same_cuts_give_the_same_master_for_every_n(self):
        base = random_instance(5, m=2, n2=2, L=3, N=1, epsilon=0.05)
        structure = PolicyStructure.identity(base.n2, base.m)
        instances = [base.with_samples(draw_scenarios(base.support, N, [5, N])) for N in self.SIZES]
        for instance in instances:
            solution = solve_affine_refined(instance, structure, beta=100, options=OPTIONS)
            for refined in (False, True):
                dims = {(spec.n_vars, spec.n_rows) for spec in
                        (build_master(other, structure, solution.state, other.support, refined)
                         for other in instances)}
                self.assertEqual(len(dims), 1)


class TestSolutionDocuments(unittest.TestCase):

    def test_round_trip(self):
        solution = solve_affine_refined(corner_instance(0.01), beta=100, options=OPTIONS)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "solution.json")
            export_solution(path, solution)
            back = load_solution(path)
        self.assertEqual(back.mode, "refined")
        self.assertEqual(back.objective, solution.objective)
        np.testing.assert_array_equal(back.policy.A, solution.policy.A)
        np.testing.assert_array_equal(back.x1.vector, solution.x1.vector)
        self.assertEqual(back.iterations, solution.iterations)
        self.assertEqual(back.omega, solution.omega)


if __name__ == "__main__":
    unittest.main()
