"""
Test realroot.mc functionality.

Classes:
========
    TestTheory: Test the sign-change moments, the constants and the exponent fit.
    TestDiagnostics: Test realroot.mc.moment_diagnostics and realroot.mc.clt_diagnostics.
    TestCampaign: Test realroot.mc.run_trial and realroot.mc.run_campaign functionality.
    TestSummary: Test realroot.mc.summarize and the trials.csv helpers.
"""

# Standard library
import dataclasses
import itertools
import math
import os
import tempfile
import unittest
from unittest import mock

# Project specific
from realroot import construction
from realroot import mc
from realroot import noise
from realroot import rootcount
from tests import TEST_OPTIONS
from tests import factories


class TestTheory(unittest.TestCase):
    """
    Methods:
    ========
        test_sign_change_moments()
        test_sign_change_enumeration()
        test_invalid_moments()
        test_sign_constants()
        test_estimate_exponent()
        test_invalid_exponent_points()
        test_methods_in_docstring()
    """

    def test_sign_change_moments(self):
        self.assertEqual(mc.theory_sign_change_moments(0.5, 1), (0.5, 0.25))
        self.assertEqual(mc.theory_sign_change_moments(0.5, 100), (50.0, 25.0))
        mean, variance = mc.theory_sign_change_moments(0.1, 100)
        self.assertAlmostEqual(mean, 18.0)
        self.assertAlmostEqual(variance, 26.1648)

    def test_sign_change_enumeration(self):
        # Every sign string of N + 1 entries, weighted by its probability
        for p in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
            for pairs in range(1, 13):
                with self.subTest(p=p, pairs=pairs):
                    first_moment = second_moment = 0.0
                    for signs in itertools.product((1, -1), repeat=pairs + 1):
                        positives = signs.count(1)
                        weight = p**positives * (1 - p)**(pairs + 1 - positives)
                        changes = sum(left != right for left, right in zip(signs, signs[1:]))
                        first_moment += weight * changes
                        second_moment += weight * changes**2
                    mean, variance = mc.theory_sign_change_moments(p, pairs)
                    self.assertAlmostEqual(mean, first_moment, places=9)
                    self.assertAlmostEqual(variance, second_moment - first_moment**2, places=9)

    def test_invalid_moments(self):
        for p, pairs in ((0, 5), (1, 5), (0.5, 0), (0.5, 2.5), (0.5, True)):
            with self.subTest(p=p, pairs=pairs):
                with self.assertRaises(mc.StatisticsError):
                    mc.theory_sign_change_moments(p, pairs)

    def test_sign_constants(self):
        self.assertEqual(mc.sign_constants(0.5), (1.0, 1.0))
        c_p, c_p_prime = mc.sign_constants(0.1)
        self.assertAlmostEqual(c_p, 0.36)
        # 4 * 0.18 * 0.82 + 8 * (0.09 - 0.0324)
        self.assertAlmostEqual(c_p_prime, 1.0512)

    def test_estimate_exponent(self):
        alpha_hat, stderr = mc.estimate_exponent([(100, 10), (10**4, 100)])
        self.assertAlmostEqual(alpha_hat, 0.5)
        self.assertEqual(stderr, 0.0)

        points = [(n, 3 * n**0.3) for n in (100, 1000, 10**4, 10**5)]
        alpha_hat, stderr = mc.estimate_exponent(points)
        self.assertAlmostEqual(alpha_hat, 0.3)
        self.assertAlmostEqual(stderr, 0.0)

    def test_invalid_exponent_points(self):
        for points in ([(100, 10)], [(100, 10), (100, 12)], [(100, 10), (1000, 30)],
                       [(100, 0), (10**4, 100)], [(-100, 10), (10**4, 100)]):
            with self.subTest(points=points):
                with self.assertRaises(mc.StatisticsError):
                    mc.estimate_exponent(points)

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)


class TestDiagnostics(unittest.TestCase):
    """
    Methods:
    ========
        test_moment_diagnostics()
        test_degenerate_samples()
        test_clt_diagnostics()
        test_methods_in_docstring()
    """

    def test_moment_diagnostics(self):
        diagnostics = mc.moment_diagnostics([1, 2, 3, 4], bins=8)
        self.assertEqual(diagnostics.count, 4)
        self.assertAlmostEqual(diagnostics.mean, 2.5)
        self.assertAlmostEqual(diagnostics.variance, 1.25)
        self.assertAlmostEqual(diagnostics.skewness, 0.0)
        # a uniform sample on four points: E z**4 = 1.64
        self.assertAlmostEqual(diagnostics.excess_kurtosis, 1.64 - 3)
        self.assertEqual(len(diagnostics.bin_edges), 9)
        self.assertEqual((diagnostics.bin_edges[0], diagnostics.bin_edges[-1]), (-4.0, 4.0))
        self.assertEqual(sum(diagnostics.histogram), 4)
        self.assertEqual(list(diagnostics.to_dict()),
                         ['count', 'mean', 'variance', 'skewness', 'excess_kurtosis'])

    def test_degenerate_samples(self):
        with self.assertRaises(mc.StatisticsError):
            mc.moment_diagnostics([3])
        with self.assertRaises(mc.StatisticsError):
            mc.moment_diagnostics([2, 2, 2])

    def test_clt_diagnostics(self):
        records = [factories.make_record(n=100, count_lo=count, count_hi=count)
                   for count in (4, 6, 6, 8)]
        records.append(factories.make_record(n=100, count_lo=0, count_hi=100, status='failed'))
        records.append(factories.make_record(n=200, count_lo=50, count_hi=50))

        diagnostics = mc.clt_diagnostics(records, 100, min_records=4)
        self.assertEqual(diagnostics.count, 4)
        self.assertAlmostEqual(diagnostics.mean, 6.0)
        self.assertAlmostEqual(diagnostics.variance, 2.0)

        with self.assertRaises(mc.StatisticsError):
            mc.clt_diagnostics(records, 100, min_records=5)

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)


class TestCampaign(unittest.TestCase):
    """
    Methods:
    ========
        test_campaign_config()
        test_run_trial()
        test_run_trial_failure()
        test_run_campaign()
        test_resume_campaign()
        test_methods_in_docstring()
    """

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.store = os.path.join(self.directory.name, 'campaign.db')
        self.config = mc.CampaignConfig(
            alphas=('0.5',), ns=(10, 20), dist=noise.GAUSSIAN, trials=3, master_seed=7,
            options=TEST_OPTIONS,
        )

    def tearDown(self):
        self.directory.cleanup()

    def test_campaign_config(self):
        config = mc.CampaignConfig(alphas=(0.3, '0.5'), ns=('10',), dist='rademacher', p=0.25)
        self.assertEqual(config.alphas, ('0.3', '0.5'))
        self.assertEqual(config.ns, (10,))
        self.assertEqual(config.spec(), noise.make_spec(noise.RADEMACHER, 0.25))

        with self.assertRaises(construction.ConstructionError):
            mc.CampaignConfig(alphas=('1.5',), ns=(10,), dist=noise.GAUSSIAN)
        with self.assertRaises(construction.ConstructionError):
            mc.CampaignConfig(alphas=('0.5',), ns=(-10,), dist=noise.GAUSSIAN)
        with self.assertRaises(mc.StatisticsError):
            mc.CampaignConfig(alphas=('0.5',), ns=(10,), dist=noise.GAUSSIAN, trials=-1)
        with self.assertRaises(mc.StatisticsError):
            mc.CampaignConfig(alphas=('0.5',), ns=(10,), dist=noise.GAUSSIAN, workers=0)
        with self.assertRaises(noise.NoiseError):
            mc.CampaignConfig(alphas=('0.5',), ns=(10,), dist=noise.GAUSSIAN, master_seed=2**64)
        with self.assertRaises(noise.NoiseError):
            mc.CampaignConfig(alphas=('0.5',), ns=(10,), dist='cauchy')

    def test_run_trial(self):
        spec = noise.make_spec(noise.GAUSSIAN)
        record = mc.run_trial('0.5', 30, spec, 4, 7, TEST_OPTIONS)
        self.assertEqual(record.seed, noise.mix64(4, 7))
        self.assertEqual((record.alpha, record.n, record.dist, record.p),
                         ('0.5', 30, 'gaussian', 0.5))
        self.assertEqual(record.predicted, record.s_pos + record.s_neg)
        self.assertIn(record.status, rootcount.STATUSES)
        self.assertLessEqual(record.count_lo, record.count_hi)
        self.assertGreaterEqual(record.wall_ms, 0)

        schedule = construction.make_schedule('0.5', 30)
        realization = noise.sample(spec, 30, record.seed)
        self.assertEqual(record.s_pos, noise.sign_changes(realization, schedule, noise.POSITIVE))

        again = mc.run_trial('0.5', 30, spec, 4, 7, TEST_OPTIONS)
        self.assertEqual(dataclasses.replace(again, wall_ms=0),
                         dataclasses.replace(record, wall_ms=0))

    def test_run_trial_failure(self):
        spec = noise.make_spec(noise.GAUSSIAN)
        with mock.patch.object(rootcount, 'count_certified', side_effect=ArithmeticError('boom')):
            with self.assertLogs('realroot.mc', level='ERROR'):
                record = mc.run_trial('0.5', 30, spec, 0, 7, TEST_OPTIONS)
        self.assertEqual((record.status, record.count_lo, record.count_hi), ('failed', 0, 30))

    def test_run_campaign(self):
        records = mc.run_campaign(self.config)
        self.assertEqual(len(records), 6)
        self.assertEqual([(record.n, record.trial_index) for record in records],
                         [(10, 0), (10, 1), (10, 2), (20, 0), (20, 1), (20, 2)])
        self.assertEqual(len({record.seed for record in records if record.n == 10}), 3)

    def test_resume_campaign(self):
        first = mc.run_campaign(self.config, self.store)
        with mock.patch.object(mc, 'run_trial', wraps=mc.run_trial) as run_trial:
            second = mc.run_campaign(self.config, self.store)
            self.assertEqual(run_trial.call_count, 0)
        self.assertEqual(first, second)

        extended = mc.CampaignConfig(
            alphas=('0.5',), ns=(10, 20), dist=noise.GAUSSIAN, trials=4, master_seed=7,
            options=TEST_OPTIONS,
        )
        with mock.patch.object(mc, 'run_trial', wraps=mc.run_trial) as run_trial:
            records = mc.run_campaign(extended, self.store)
            self.assertEqual(run_trial.call_count, 2)
        self.assertEqual(len(records), 8)

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)


class TestSummary(unittest.TestCase):
    """
    Methods:
    ========
        test_group_statistics()
        test_order_independence()
        test_exponent_fit()
        test_failed_group()
        test_histogram_rows()
        test_histogram_needs_enough_records()
        test_trials_csv()
        test_methods_in_docstring()
    """

    def setUp(self):
        self.records = [
            factories.make_record(trial_index=index, n=100, count_lo=count, count_hi=count,
                                  predicted=count)
            for index, count in enumerate((8, 10, 12, 10))
        ]

    def test_group_statistics(self):
        summary = mc.summarize(self.records)
        self.assertEqual(len(summary.groups), 1)
        group = summary.groups[0]
        self.assertEqual((group.alpha, group.n, group.trials, group.exact_trials),
                         ('0.5', 100, 4, 4))
        self.assertEqual(group.exact_fraction, 1.0)
        self.assertAlmostEqual(group.mean_R, 10.0)
        self.assertAlmostEqual(group.var_R, 8 / 3)
        self.assertAlmostEqual(group.normalized_mean, 10 / math.sqrt(50))
        self.assertEqual(group.tracking_fraction, 1.0)
        self.assertEqual(group.j_star, 8)
        self.assertEqual((group.c_p, group.c_p_prime), (1.0, 1.0))
        # S over the 8 adjacent pairs of the leader chain: mean 4, variance 2
        self.assertAlmostEqual(group.theory_mean_R, 8.0)
        self.assertAlmostEqual(group.theory_var_R, 8.0)
        self.assertEqual(summary.exponents, ())

    def test_order_independence(self):
        forward = mc.summarize(self.records).to_dict()
        backward = mc.summarize(list(reversed(self.records))).to_dict()
        self.assertEqual(forward, backward)

    def test_exponent_fit(self):
        records = self.records + [
            factories.make_record(trial_index=index, n=10**4, count_lo=count, count_hi=count)
            for index, count in enumerate((90, 110))
        ]
        summary = mc.summarize(records)
        self.assertEqual([group.n for group in summary.groups], [100, 10**4])
        self.assertEqual(len(summary.exponents), 1)
        fit = summary.exponents[0]
        self.assertEqual((fit.alpha, fit.points), ('0.5', 2))
        self.assertAlmostEqual(fit.alpha_hat, 0.5)

    def test_failed_group(self):
        records = [factories.make_record(n=50, count_lo=0, count_hi=50, status='failed')
                   for _ in range(3)]
        group = mc.summarize(records).groups[0]
        self.assertEqual((group.exact_trials, group.exact_fraction), (0, 0.0))
        self.assertIsNone(group.mean_R)
        self.assertIsNone(group.normalized_variance)

    def test_histogram_rows(self):
        summary = mc.summarize(self.records, bins=4)
        rows = summary.histogram_rows()
        self.assertEqual(len(rows), 4)
        self.assertEqual(rows[0][:4], ('0.5', 100, -4.0, -2.0))
        self.assertEqual(sum(row[4] for row in rows), 4)

    def test_histogram_needs_enough_records(self):
        summary = mc.summarize(self.records, bins=4, min_records=5)
        self.assertEqual(summary.histogram_rows(), [])
        self.assertIsNotNone(summary.groups[0].skewness)

    def test_trials_csv(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'trials.csv')
            mc.write_trials_csv(reversed(self.records), path, header_lines=['realroot 1.0.0'])
            with open(path) as file_object:
                self.assertEqual(file_object.readline(), '# realroot 1.0.0\n')
            self.assertEqual(mc.read_trials_csv(path), self.records)

            with open(path, 'w') as file_object:
                file_object.write('trial_index,seed\n1,2\n')
            with self.assertRaises(mc.StatisticsError):
                mc.read_trials_csv(path)

    def test_methods_in_docstring(self):
        test_methods = [method for method in dir(self) if method.startswith('test_')]
        for test_method in test_methods:
            self.assertIn(test_method, self.__doc__)
