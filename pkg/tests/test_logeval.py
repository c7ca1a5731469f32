"""
Test realroot.logeval functionality.

Classes:
========
    TestEvalSign: Test realroot.logeval.eval_sign functionality.
    TestDominance: Test realroot.logeval.dominance_margin and realroot.logeval.dominance_over.
"""

# Standard library
import math
import unittest

# Third party
import mpmath
import numpy as np
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies
from mpmath import libmp

# Project specific
from realroot import construction
from realroot import logeval
from realroot import noise
from tests import factories

small_degrees = strategies.integers(min_value=0, max_value=200)
seeds = strategies.integers(min_value=0, max_value=2**64 - 1)
coordinates = strategies.floats(min_value=-3.0, max_value=40.0, allow_nan=False)


class TestEvalSign(unittest.TestCase):
    """
    Methods:
    ========
        test_no_negative_mass()
        test_closed_form()
        test_exact_cancellation()
        test_interval_request()
        test_weights()
        test_soundness()
        test_soundness_sweep()
        test_precision_monotonicity()
        test_axis_symmetry()
        test_worth_escalating()
        test_error_budget()
        test_invalid_requests()
        test_methods_in_docstring()
    """

    def setUp(self):
        # g(t) = exp(-1) - exp(-2 + t), a single root at t = 1
        self.realization, self.schedule = factories.make_realization([1.0, -1.0])

    def test_no_negative_mass(self):
        realization, schedule = factories.make_realization([1.0] * 31)
        for t in (-10, 0, 2.5, 17, 300):
            result = logeval.eval_sign(logeval.EvalRequest(t), realization, schedule)
            self.assertEqual(result.sign, 1)
            self.assertGreater(result.gap, 0)

    def test_closed_form(self):
        result = logeval.eval_sign(logeval.EvalRequest(0), self.realization, self.schedule)
        self.assertEqual(result.sign, 1)
        self.assertTrue(result.is_determinate)
        # log|e^-1 - e^-2| = -1 + log(1 - e^-1)
        expected = -1 + math.log1p(-math.exp(-1))
        self.assertLessEqual(result.log_lo, expected)
        self.assertGreaterEqual(result.log_hi, expected)
        self.assertTrue(mpmath.almosteq(result.gap, 1, abs_eps=1e-9))

        result = logeval.eval_sign(logeval.EvalRequest(2), self.realization, self.schedule)
        self.assertEqual(result.sign, -1)

    def test_exact_cancellation(self):
        for prec in (40, 128, 512, 4096):
            result = logeval.eval_sign(logeval.EvalRequest(1), self.realization, self.schedule,
                                       prec=prec)
            self.assertEqual(result.sign, logeval.INDETERMINATE)
            self.assertFalse(result.is_determinate)
            self.assertEqual(result.log_lo, mpmath.ninf)

    def test_interval_request(self):
        request = logeval.EvalRequest(-5, t_hi=0)
        self.assertEqual(logeval.eval_sign(request, self.realization, self.schedule).sign, 1)

        request = logeval.EvalRequest(1.5, t_hi=6)
        self.assertEqual(logeval.eval_sign(request, self.realization, self.schedule).sign, -1)

        request = logeval.EvalRequest(0, t_hi=2)
        result = logeval.eval_sign(request, self.realization, self.schedule)
        self.assertFalse(result.is_determinate)

    def test_weights(self):
        # g'(t) = -exp(-2 + t)
        request = logeval.EvalRequest(0, weight=logeval.DERIVATIVE_WEIGHT)
        self.assertEqual(logeval.eval_sign(request, self.realization, self.schedule).sign, -1)

        # w_0 = -1, w_1 = 0
        request = logeval.EvalRequest(3, weight=logeval.Weight.rescaled(0, 2))
        self.assertEqual(logeval.eval_sign(request, self.realization, self.schedule).sign, -1)
        self.assertEqual(str(logeval.Weight.rescaled(0, 2)), 'rescaled(0, 2)')

        with self.assertRaises(logeval.EvaluationError):
            logeval.Weight.rescaled(2, 2)

    @settings(max_examples=150, deadline=None)
    @given(small_degrees, seeds, coordinates, strategies.sampled_from(noise.AXES))
    def test_soundness(self, n, seed, t, axis):
        realization, schedule = factories.sample_realization(n, seed)
        result = logeval.eval_sign(logeval.EvalRequest(t, axis), realization, schedule)
        if result.is_determinate:
            self.assertEqual(result.sign, factories.reference_sign(realization, schedule, t, axis))

    def test_soundness_sweep(self):
        generator = np.random.default_rng(20241016)
        kinds = (noise.GAUSSIAN, noise.RADEMACHER, noise.UNIFORM)
        degrees = (5, 40, 120, 200)
        weights = (logeval.NO_WEIGHT, logeval.DERIVATIVE_WEIGHT)
        points = determinate = intervals = 0
        for trial in range(100):
            n = degrees[trial % len(degrees)]
            realization, schedule = factories.sample_realization(n, 7000 + trial,
                                                                 kind=kinds[trial % len(kinds)])
            reference = factories.ReferencePolynomial(realization, schedule)
            # Leaders of adjacent blocks trade places at the crossings; roots cluster there
            crossings = [float(schedule.params.crossing(j)) for j in range(schedule.j_star)]
            crossings = crossings or [0.0]
            for draw in range(100):
                centre = crossings[draw % len(crossings)]
                if draw % 3 == 0:
                    t = centre + generator.normal(scale=0.05)
                elif draw % 3 == 1:
                    t = centre * (1 + generator.normal(scale=0.1))
                else:
                    t = generator.uniform(-3.0, 40.0)
                t = float(t)
                axis = noise.AXES[draw % 2]
                weight = weights[(draw // 2) % 2]
                derivative = weight == logeval.DERIVATIVE_WEIGHT
                context = f'n={n} trial={trial} t={t!r} axis={axis} weight={weight}'

                result = logeval.eval_sign(logeval.EvalRequest(t, axis, weight), realization,
                                           schedule)
                points += 1
                if result.is_determinate:
                    determinate += 1
                    self.assertEqual(result.sign, reference.sign(t, axis, derivative), context)

                if draw % 4 == 0:
                    t_hi = t + float(10.0 ** generator.uniform(-6.0, 0.0))
                    request = logeval.EvalRequest(t, axis, weight, t_hi)
                    result = logeval.eval_sign(request, realization, schedule)
                    if result.is_determinate:
                        intervals += 1
                        for s in (t, t + (t_hi - t) / 2, t_hi):
                            self.assertIn(reference.sign(s, axis, derivative), (result.sign, 0),
                                          f'{context} t_hi={t_hi!r}')
        self.assertEqual(points, 10**4)
        self.assertGreater(determinate, 8000)
        self.assertGreater(intervals, 0)

    def test_precision_monotonicity(self):
        for seed in range(12):
            realization, schedule = factories.sample_realization(120, seed, kind=noise.UNIFORM)
            for t in np.linspace(-1.0, 30.0, 25):
                coarse = logeval.eval_sign(logeval.EvalRequest(float(t)), realization, schedule,
                                           prec=40)
                fine = logeval.eval_sign(logeval.EvalRequest(float(t)), realization, schedule,
                                         prec=128)
                if coarse.is_determinate:
                    self.assertEqual(fine.sign, coarse.sign)

    @settings(max_examples=60, deadline=None)
    @given(strategies.integers(min_value=0, max_value=60), seeds, coordinates)
    def test_axis_symmetry(self, n, seed, t):
        realization, schedule = factories.sample_realization(n, seed)
        alternating = realization.values * np.where(np.arange(n + 1) % 2 == 0, 1.0, -1.0)
        mirrored, _ = factories.make_realization(alternating, kind=noise.GAUSSIAN)
        self.assertEqual(
            logeval.eval_sign(logeval.EvalRequest(t, noise.NEGATIVE), realization, schedule),
            logeval.eval_sign(logeval.EvalRequest(t, noise.POSITIVE), mirrored, schedule),
        )

    def test_worth_escalating(self):
        # Just right of the root at t = 1, log|g| differs between the two terms by about 2**-40
        request = logeval.EvalRequest(1 + 2.0**-40, t_hi=1 + 2.0**-39)
        coarse = logeval.eval_sign(request, self.realization, self.schedule, prec=40)
        self.assertFalse(coarse.is_determinate)
        self.assertTrue(logeval.worth_escalating(coarse, 1))

        fine = logeval.eval_sign(request, self.realization, self.schedule, prec=128)
        self.assertEqual(fine.sign, -1)
        self.assertFalse(logeval.worth_escalating(fine, 1))

        # The interval holds the root: no width settles it
        spanning = logeval.eval_sign(logeval.EvalRequest(0, t_hi=2), self.realization,
                                     self.schedule)
        self.assertFalse(logeval.worth_escalating(spanning, 1))

    def test_error_budget(self):
        self.assertEqual(logeval.error_budget(10, 40), libmp.from_man_exp(11, -38))
        self.assertTrue(libmp.mpf_lt(logeval.error_budget(10, 128), logeval.error_budget(10, 40)))

    def test_invalid_requests(self):
        for request in (logeval.EvalRequest(float('nan')), logeval.EvalRequest(mpmath.inf),
                        logeval.EvalRequest(2, t_hi=1), logeval.EvalRequest(0, 'sideways'),
                        logeval.EvalRequest('one')):
            with self.subTest(request=request):
                with self.assertRaises(logeval.EvaluationError):
                    logeval.eval_sign(request, self.realization, self.schedule)

        schedule = construction.make_schedule('0.5', 5)
        with self.assertRaises(logeval.EvaluationError):
            logeval.eval_sign(logeval.EvalRequest(0), self.realization, schedule)

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)


class TestDominance(unittest.TestCase):
    """
    Methods:
    ========
        test_single_term()
        test_leader_margin()
        test_small_leader()
        test_sides()
        test_top()
        test_dominance_over()
        test_invalid_arguments()
        test_methods_in_docstring()
    """

    def setUp(self):
        self.realization, self.schedule = factories.make_realization([1.0] * 601)

    def test_single_term(self):
        realization, schedule = factories.make_realization([0.75], kind=noise.UNIFORM)
        result = logeval.dominance_margin(0, 0, realization, schedule)
        self.assertEqual(result.sign, 1)
        # log(c_0 * |eps_0| / 2) = -1 + log(0.75) - log(2)
        self.assertTrue(mpmath.almosteq(result.log_lo, -1 + math.log(0.375), abs_eps=1e-9))

    def test_leader_margin(self):
        result = logeval.dominance_margin(16, 640, self.realization, self.schedule)
        self.assertEqual(result.sign, 1)
        # -2**16 + 512 * 640 = 262144; the closest competitor is index 511, 640 units down
        expected = 262144 + math.log(0.5)
        self.assertTrue(mpmath.almosteq(result.log_lo, expected, abs_eps=1e-6))
        self.assertTrue(mpmath.almosteq(result.log_hi, expected, abs_eps=1e-6))
        self.assertGreater(result.gap, 600)

    def test_small_leader(self):
        values = [1.0] * 251
        values[200] = 2.0**-61
        realization, schedule = factories.make_realization(values, kind=noise.UNIFORM)
        t = schedule.window(10).a
        result = logeval.dominance_margin(10, t, realization, schedule)
        self.assertIn(result.sign, (-1, logeval.INDETERMINATE))

    def test_sides(self):
        # At b_16 = 768 the leader still beats everything, even with the full factor
        for side in (logeval.LEFT, logeval.RIGHT, logeval.FULL):
            result = logeval.dominance_margin(16, 768, self.realization, self.schedule, side=side,
                                              factor=1.0)
            self.assertEqual(result.sign, 1)

        # Far left of the window, index 0 (block 0) carries more weight than the leader of block 3
        result = logeval.dominance_margin(3, -1, self.realization, self.schedule,
                                          side=logeval.LEFT)
        self.assertEqual(result.sign, -1)
        result = logeval.dominance_margin(3, -1, self.realization, self.schedule,
                                          side=logeval.RIGHT)
        self.assertEqual(result.sign, 1)

    def test_top(self):
        schedule = self.schedule
        top = schedule.top_window()
        result = logeval.dominance_margin(schedule.j_star, top.a * 2, self.realization, schedule,
                                          side=logeval.TOP)
        self.assertEqual(result.sign, 1)
        result = logeval.dominance_margin(schedule.j_star, 0, self.realization, schedule,
                                          side=logeval.TOP)
        self.assertEqual(result.sign, -1)

    def test_dominance_over(self):
        window = self.schedule.window(16)
        result = logeval.dominance_over(16, window.a, window.b, self.realization, self.schedule)
        self.assertEqual(result.sign, 1)

        # Over [0, b_16] the interval reaches far below the window
        result = logeval.dominance_over(16, 0, window.b, self.realization, self.schedule)
        self.assertNotEqual(result.sign, 1)

    def test_invalid_arguments(self):
        with self.assertRaises(logeval.EvaluationError):
            logeval.dominance_margin(99, 0, self.realization, self.schedule)
        with self.assertRaises(logeval.EvaluationError):
            logeval.dominance_margin(3, 0, self.realization, self.schedule, side='middle')
        with self.assertRaises(logeval.EvaluationError):
            logeval.dominance_margin(3, 0, self.realization, self.schedule, factor=1.5)
        with self.assertRaises(logeval.EvaluationError):
            logeval.dominance_over(16, 768, 640, self.realization, self.schedule)

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)
