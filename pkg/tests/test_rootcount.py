"""
Test realroot.rootcount functionality.

Classes:
========
    TestCountOptions: Test realroot.rootcount.CountOptions functionality.
    TestCertificates: Test the window, transition and disk certificates.
    TestCountCertified: Test realroot.rootcount.count_certified functionality.
    TestOracle: Test realroot.rootcount.oracle_count functionality.
"""

# Standard library
import math
import unittest
from unittest import mock

# Third party
import mpmath

# Project specific
from realroot import construction
from realroot import logeval
from realroot import noise
from realroot import rootcount
from tests import TEST_CONFIG
from tests import TEST_OPTIONS
from tests import factories


class TestCountOptions(unittest.TestCase):
    """
    Methods:
    ========
        test_from_config()
        test_invalid_options()
        test_methods_in_docstring()
    """

    def test_from_config(self):
        self.assertEqual(TEST_OPTIONS.precision_ladder, (40, 128, 512))
        self.assertEqual(TEST_OPTIONS.max_depth, TEST_CONFIG['MAX_BISECTION_DEPTH'])

        options = rootcount.CountOptions.from_config({
            'PRECISION_LADDER': '40, 256',
            'MAX_BISECTION_DEPTH': '50',
            'LEADER_FACTOR': '0.25',
            'REFINE_EXPONENT': '10',
        })
        self.assertEqual(options, rootcount.CountOptions((40, 256), 50, 0.25, 10))

    def test_invalid_options(self):
        for kwargs in ({'precision_ladder': ()}, {'precision_ladder': (128, 40)},
                       {'precision_ladder': (8,)}, {'leader_factor': 0},
                       {'leader_factor': 1.5}, {'max_depth': 0}, {'refine_exponent': -1}):
            with self.subTest(kwargs=kwargs):
                with self.assertRaises(rootcount.RootCountError):
                    rootcount.CountOptions(**kwargs)

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)


class TestCertificates(unittest.TestCase):
    """
    Methods:
    ========
        test_window()
        test_window_failure()
        test_top_window()
        test_transition_without_root()
        test_transition_with_root()
        test_rouche_bound()
        test_interval_escalation()
        test_out_of_range()
        test_methods_in_docstring()
    """

    def setUp(self):
        # alpha = 1/2, n = 600: m_16 = 512, m_17 = 578, j_star = 18
        self.realization, self.schedule = factories.make_realization([1.0] * 601)

    def test_window(self):
        outcome = rootcount.certify_window(16, self.realization, self.schedule,
                                           options=TEST_OPTIONS)
        self.assertEqual(outcome.kind, rootcount.NO_ROOT)
        self.assertEqual(outcome.sign, 1)
        self.assertEqual(outcome.certificate.kind, 'window')
        self.assertEqual(outcome.certificate.factor, TEST_OPTIONS.leader_factor)
        self.assertGreater(outcome.certificate.gap, 600)

        outcome = rootcount.certify_window(16, self.realization, self.schedule, noise.NEGATIVE,
                                           TEST_OPTIONS)
        self.assertEqual(outcome.sign, 1)

    def test_window_failure(self):
        values = [1.0] * 251
        values[200] = 2.0**-61
        realization, schedule = factories.make_realization(values, kind=noise.UNIFORM)
        outcome = rootcount.certify_window(10, realization, schedule, options=TEST_OPTIONS)
        self.assertEqual(outcome.kind, rootcount.FAILURE)
        self.assertEqual(outcome.sign, 0)
        self.assertIsNone(outcome.certificate.gap)

    def test_top_window(self):
        values = [1.0] * 601
        values[600] = -1.0
        realization, _ = factories.make_realization(values)
        outcome = rootcount.certify_window(18, realization, self.schedule, options=TEST_OPTIONS)
        self.assertEqual(outcome.kind, rootcount.NO_ROOT)
        self.assertEqual(outcome.sign, -1)
        self.assertEqual(outcome.certificate.kind, 'top')
        self.assertEqual(outcome.certificate.factor, 1.0)

        # (-1)**600 keeps the sign of the last term on the negative axis
        outcome = rootcount.certify_window(18, realization, self.schedule, noise.NEGATIVE,
                                           TEST_OPTIONS)
        self.assertEqual(outcome.sign, -1)

    def test_transition_without_root(self):
        outcome = rootcount.certify_transition(16, self.realization, self.schedule,
                                               options=TEST_OPTIONS)
        self.assertEqual(outcome.kind, rootcount.NO_ROOT)
        self.assertIsNone(outcome.root)
        self.assertEqual(outcome.certificate.kind, 'no-change')
        self.assertLessEqual(outcome.certificate.factor, 0.5)

    def test_transition_with_root(self):
        values = [1.0] * 601
        values[578] = -1.0
        realization, _ = factories.make_realization(values)
        certifier = rootcount.Certifier(realization, self.schedule, TEST_OPTIONS)
        outcome = rootcount.certify_transition(16, realization, self.schedule,
                                               options=TEST_OPTIONS, certifier=certifier)
        self.assertEqual(outcome.kind, rootcount.SINGLE_ROOT)
        self.assertEqual(outcome.certificate.kind, 'yes-change')
        root = outcome.root
        self.assertEqual((root.axis, root.tag), (noise.POSITIVE, rootcount.WINDOW_TRANSITION))

        # The terms 512 and 578 balance at 2**16 / 66; everything else is negligible there.
        crossing = self.schedule.params.crossing(16)
        self.assertTrue(mpmath.almosteq(crossing, mpmath.mpf(65536) / 66, rel_eps=1e-20))
        self.assertLessEqual(root.t_lo - 1e-9, crossing)
        self.assertLessEqual(crossing, root.t_hi + 1e-9)
        self.assertEqual(certifier.point_sign(root.t_lo, noise.POSITIVE), 1)
        self.assertEqual(certifier.point_sign(root.t_hi, noise.POSITIVE), -1)

        lo, hi = self.schedule.window(16).b, self.schedule.window(17).a
        width = (hi - lo) / 2**TEST_OPTIONS.refine_exponent
        self.assertLessEqual(root.t_hi - root.t_lo, width * (1 + 1e-12))

    def test_rouche_bound(self):
        outcome = rootcount.rouche_bound(16, self.realization, self.schedule, TEST_OPTIONS)
        self.assertEqual((outcome.kind, outcome.bound, outcome.j), (rootcount.AT_MOST, 512, 16))
        self.assertGreater(outcome.gap, 0)

    def test_interval_escalation(self):
        realization, schedule = factories.make_realization([1.0, -1.0])
        certifier = rootcount.Certifier(realization, schedule, TEST_OPTIONS)
        with mock.patch.object(logeval, 'eval_sign', wraps=logeval.eval_sign) as evaluate:
            # Negative just right of the root at t = 1; the first rung cannot tell
            self.assertEqual(certifier.interval_sign(1 + 2.0**-40, 1 + 2.0**-39, noise.POSITIVE),
                             -1)
            self.assertEqual([call.args[3] for call in evaluate.call_args_list], [40, 128])

            evaluate.reset_mock()
            # [0, 2] holds the root; wider rungs cannot help
            self.assertEqual(certifier.interval_sign(0.0, 2.0, noise.POSITIVE),
                             logeval.INDETERMINATE)
            self.assertEqual(evaluate.call_count, 1)

    def test_out_of_range(self):
        with self.assertRaises(rootcount.RootCountError):
            rootcount.certify_window(9, self.realization, self.schedule)
        with self.assertRaises(rootcount.RootCountError):
            rootcount.certify_window(19, self.realization, self.schedule)
        with self.assertRaises(rootcount.RootCountError):
            rootcount.certify_transition(18, self.realization, self.schedule)
        with self.assertRaises(rootcount.RootCountError):
            rootcount.rouche_bound(5, self.realization, self.schedule)
        # m_18 = 648 >= 600
        with self.assertRaises(rootcount.RootCountError):
            rootcount.rouche_bound(18, self.realization, self.schedule)
        with self.assertRaises(rootcount.RootCountError):
            rootcount.certify_window(16, self.realization, construction.make_schedule('0.5', 500))

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)


class TestCountCertified(unittest.TestCase):
    """
    Methods:
    ========
        test_predict()
        test_t_domain()
        test_near_origin_cut()
        test_constant()
        test_degree_one()
        test_no_real_roots()
        test_unresolved_double_root()
        test_structured_count()
        test_agrees_with_oracle()
        test_exact_rate()
        test_report_dict()
        test_methods_in_docstring()
    """

    def test_predict(self):
        values = [1.0] * 12
        for index, sign in zip((0, 2, 8, 11), (1, -1, -1, 1)):
            values[index] = float(sign)
        realization, schedule = factories.make_realization(values)
        self.assertEqual(rootcount.predict(realization, schedule), 3)

    def test_t_domain(self):
        realization, schedule = factories.make_realization([1.0])
        self.assertIsNone(rootcount.t_domain(realization, schedule))

        realization, schedule = factories.make_realization([1.0, -1.0])
        t_min, t_max = rootcount.t_domain(realization, schedule)
        # Cauchy bounds of e^-1 - e^-2 x: |x| <= 1 + e and |x| >= 1 / (1 + e^-1)
        self.assertTrue(mpmath.almosteq(t_max, math.log(1 + math.e), abs_eps=1e-12))
        self.assertTrue(mpmath.almosteq(t_min, -math.log(1 + math.exp(-1)), abs_eps=1e-12))

        with self.assertRaises(rootcount.RootCountError):
            rootcount.t_domain(realization, construction.make_schedule('0.5', 2))

    def test_near_origin_cut(self):
        self.assertEqual(rootcount.near_origin_cut(construction.make_schedule('0.5', 1)), 10)
        self.assertEqual(rootcount.near_origin_cut(construction.make_schedule('0.5', 1000)), 10)
        self.assertEqual(rootcount.near_origin_cut(construction.make_schedule('0.5', 10**6)), 14)

    def test_constant(self):
        realization, schedule = factories.make_realization([-0.5], kind=noise.UNIFORM)
        report = rootcount.count_certified(realization, schedule, TEST_OPTIONS)
        self.assertEqual((report.status, report.count), (rootcount.EXACT, 0))
        self.assertEqual(report.predicted, 0)

    def test_degree_one(self):
        realization, schedule = factories.make_realization([1.0, -1.0])
        report = rootcount.count_certified(realization, schedule, TEST_OPTIONS)
        self.assertEqual(report.status, rootcount.EXACT)
        self.assertEqual((report.count, report.count_lo, report.count_hi), (1, 1, 1))
        self.assertEqual(len(report.roots), 1)
        root = report.roots[0]
        self.assertEqual((root.axis, root.tag), (noise.POSITIVE, rootcount.BISECTION))
        self.assertLessEqual(root.t_lo, 1)
        self.assertGreaterEqual(root.t_hi, 1)
        self.assertEqual(report.warnings, [])
        self.assertEqual((report.s_pos, report.s_neg, report.predicted), (1, 0, 1))

    def test_no_real_roots(self):
        realization, schedule = factories.make_realization([1.0, 1.0, 1.0])
        report = rootcount.count_certified(realization, schedule, TEST_OPTIONS)
        self.assertEqual((report.status, report.count), (rootcount.EXACT, 0))
        self.assertEqual(report.roots, [])

    def test_unresolved_double_root(self):
        # e^-1 * eps_0 ~ e^-2 makes g(t) ~ e^-2 * (e^t - 1)**2, a (near) double root at t = 0
        realization, schedule = factories.make_realization([math.exp(-1), -2.0, 1.0],
                                                           kind=noise.UNIFORM)
        options = rootcount.CountOptions(TEST_OPTIONS.precision_ladder, 30)
        report = rootcount.count_certified(realization, schedule, options)
        self.assertEqual(report.status, rootcount.FAILED)
        self.assertTrue(report.indeterminate_regions)
        self.assertTrue(all(region.axis == noise.POSITIVE
                            for region in report.indeterminate_regions))
        self.assertLessEqual(report.count_lo, report.count_hi)
        self.assertEqual(report.count_hi, 2)
        self.assertIsNone(report.count)

    def test_structured_count(self):
        realization, schedule = factories.sample_realization(1000, 20240601, kind=noise.RADEMACHER)
        self.assertEqual(schedule.j_star, 23)
        report = rootcount.count_certified(realization, schedule, TEST_OPTIONS)
        self.assertIn(report.status, rootcount.STATUSES)
        self.assertLessEqual(report.count_lo, report.count_hi)
        self.assertLessEqual(report.count_hi, 1000)

        kinds = {certificate.kind for certificate in report.certificates}
        self.assertTrue({'window', 'top'} <= kinds)
        windows = [certificate for certificate in report.certificates
                   if certificate.kind == 'window']
        # blocks 10..22 on both axes
        self.assertEqual(len(windows), 2 * 13)

        domain = rootcount.t_domain(realization, schedule)
        for root in report.roots:
            self.assertLessEqual(domain[0], root.t_lo)
            self.assertLessEqual(root.t_hi, domain[1])
        if report.status == rootcount.EXACT and not report.warnings:
            self.assertEqual(report.count % 2, 0)

    def test_agrees_with_oracle(self):
        for n in (3, 12, 40, 200, 500):
            for kind in (noise.GAUSSIAN, noise.RADEMACHER):
                for seed in range(3):
                    with self.subTest(n=n, kind=kind, seed=seed):
                        realization, schedule = factories.sample_realization(n, seed, kind=kind)
                        report = rootcount.count_certified(realization, schedule, TEST_OPTIONS)
                        expected = rootcount.oracle_count(realization, schedule)
                        self.assertLessEqual(report.count_lo, expected)
                        self.assertLessEqual(expected, report.count_hi)
                        if report.status == rootcount.EXACT:
                            self.assertEqual(report.count, expected)

    def test_exact_rate(self):
        exact = 0
        for seed in range(1, 101):
            with self.subTest(seed=seed):
                realization, schedule = factories.sample_realization(200, seed,
                                                                     kind=noise.RADEMACHER)
                report = rootcount.count_certified(realization, schedule, TEST_OPTIONS)
                if report.status == rootcount.EXACT:
                    exact += 1
                    self.assertEqual(report.count, rootcount.oracle_count(realization, schedule))
        self.assertGreaterEqual(exact, 95)

    def test_report_dict(self):
        realization, schedule = factories.make_realization([1.0, -1.0])
        report = rootcount.count_certified(realization, schedule, TEST_OPTIONS).to_dict()
        self.assertEqual(
            list(report),
            ['status', 'count_lo', 'count_hi', 'predicted', 'per_axis', 'certificates',
             'indeterminate_regions', 'rouche', 'warnings'],
        )
        positive, negative = report['per_axis']
        self.assertEqual((positive['axis'], positive['certified_roots']), (noise.POSITIVE, 1))
        self.assertEqual((negative['axis'], negative['certified_roots']), (noise.NEGATIVE, 0))
        self.assertEqual(positive['roots'][0]['tag'], rootcount.BISECTION)

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)


class TestOracle(unittest.TestCase):
    """
    Methods:
    ========
        test_small_degrees()
        test_root_on_grid_point()
        test_degree_cap()
        test_methods_in_docstring()
    """

    def test_small_degrees(self):
        realization, schedule = factories.make_realization([0.3], kind=noise.UNIFORM)
        self.assertEqual(rootcount.oracle_count(realization, schedule), 0)

        realization, schedule = factories.make_realization([1.0, -1.0])
        self.assertEqual(rootcount.oracle_count(realization, schedule), 1)

        realization, schedule = factories.make_realization([1.0, 1.0, 1.0])
        self.assertEqual(rootcount.oracle_count(realization, schedule), 0)

        # e^-1 + e^-2 (x/2 - x^2) has one root on each half-axis
        realization, schedule = factories.make_realization([1.0, 0.5, -1.0], kind=noise.UNIFORM)
        self.assertEqual(rootcount.oracle_count(realization, schedule), 2)

    def test_root_on_grid_point(self):
        # e^-1 - e^-2 x vanishes at t = 1, the first point of the logarithmic grid
        self.assertIn(1.0, rootcount._oracle_grid(-1.0, 1.5))
        realization, schedule = factories.make_realization([1.0, -1.0])
        self.assertEqual(rootcount.oracle_count(realization, schedule), 1)
        self.assertEqual(rootcount.oracle_count(realization, schedule, precision_bits=64), 1)

    def test_degree_cap(self):
        realization, schedule = factories.make_realization([1.0] * 31)
        with self.assertRaises(rootcount.RootCountError):
            rootcount.oracle_count(realization, schedule, max_degree=20)

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)
