import unittest

import numpy as np
from scipy.spatial.transform import Rotation

from magtrack.evaluation import (AlignedPair, ErrorReport, REFERENCE_ERRORS,
    alignStreams, computeErrors, reportExport, reportImport)
from magtrack.exceptions import (AlignmentError, InsufficientDataError,
    ParameterError, ParseError)
from magtrack.positioning import PositionEstimate
from magtrack.simulation import Trajectory


def pairsFromErrors(errors):
    return [AlignedPair(i * 420.0, np.asarray(e, dtype=float), np.zeros(3))
        for i, e in enumerate(errors)]


def estimate(t, position):
    return PositionEstimate(t, position, 0.0, converged=True)



class TestComputeErrors(unittest.TestCase):


    def test_perfect(self):
        """
        Estimates on the truth have no error
        """
        pairs = [AlignedPair(0.0, np.ones(3), np.ones(3))] * 4
        report = computeErrors(pairs, 'table')
        np.testing.assert_array_equal(report.mae, [0, 0, 0])
        np.testing.assert_array_equal(report.std, [0, 0, 0])
        self.assertEqual(report.n, 4)


    def test_twoPairs(self):
        """
        Errors of 0 and 0.1 m give MAE 0.05 and the n - 1 Std
        """
        report = computeErrors(pairsFromErrors([(0.0, 0, 0), (0.1, 0, 0)]))
        self.assertAlmostEqual(report.mae[0], 0.05)
        self.assertAlmostEqual(report.std[0], 0.0707106781, places=9)
        self.assertEqual(report.mae[1], 0.0)


    def test_signIgnored(self):
        """
        Errors count by magnitude
        """
        report = computeErrors(pairsFromErrors([(-0.2, 0.1, 0),
            (0.2, -0.1, 0)]))
        np.testing.assert_allclose(report.mae, [0.2, 0.1, 0.0])
        np.testing.assert_allclose(report.std, [0.0, 0.0, 0.0], atol=1e-15)


    def test_singlePair(self):
        """
        One pair has a Std of zero rather than NaN
        """
        report = computeErrors(pairsFromErrors([(0.3, 0.1, 0.2)]))
        np.testing.assert_array_equal(report.std, [0, 0, 0])
        np.testing.assert_allclose(report.mae, [0.3, 0.1, 0.2])


    def test_permutation(self):
        """
        The order of the pairs doesn't matter
        """
        rng = np.random.default_rng(8)
        errors = rng.normal(0, 0.1, (50, 3))
        first = computeErrors(pairsFromErrors(errors))
        second = computeErrors(pairsFromErrors(errors[rng.permutation(50)]))
        np.testing.assert_allclose(first.mae, second.mae, rtol=1e-12)
        np.testing.assert_allclose(first.std, second.std, rtol=1e-12)


    def test_scaling(self):
        """
        Scaling every error scales MAE and Std alike
        """
        rng = np.random.default_rng(9)
        errors = rng.normal(0, 0.1, (30, 3))
        base = computeErrors(pairsFromErrors(errors))
        scaled = computeErrors(pairsFromErrors(errors * 3.0))
        np.testing.assert_allclose(scaled.mae, base.mae * 3.0, rtol=1e-12)
        np.testing.assert_allclose(scaled.std, base.std * 3.0, rtol=1e-12)


    def test_empty(self):
        """
        Nothing aligned, nothing to report
        """
        self.assertRaises(InsufficientDataError, computeErrors, [])



class TestAlignStreams(unittest.TestCase):


    def setUp(self):
        times = np.arange(101) * 10.0
        self.truth = Trajectory(times, np.stack([times / 1000.0,
            np.zeros(101), np.zeros(101)], axis=1))


    def test_nearest(self):
        """
        Each estimate meets the truth sample nearest in time, ties going
        to the earlier one
        """
        alignment = alignStreams([estimate(14.0, (0, 0, 0)),
            estimate(15.0, (0, 0, 0)), estimate(16.0, (0, 0, 0))], self.truth)
        self.assertEqual([p.truth[0] for p in alignment], [0.01, 0.01, 0.02])
        self.assertEqual(alignment.dropped, 0)


    def test_tolerance(self):
        """
        Estimates too far from any truth sample are dropped and counted
        """
        alignment = alignStreams([estimate(500.0, (0, 0, 0)),
            estimate(1500.0, (0, 0, 0))], self.truth, tolerance_ms=210)
        self.assertEqual(len(alignment), 1)
        self.assertEqual(alignment.dropped, 1)
        self.assertEqual(alignment[0].timestamp, 500.0)


    def test_failedEstimates(self):
        """
        Failed estimates never reach the error computation
        """
        alignment = alignStreams([estimate(100.0, (0, 0, 0)),
            PositionEstimate.failed(200.0, "no fix")], self.truth)
        self.assertEqual(len(alignment), 1)
        self.assertEqual(alignment.dropped, 1)


    def test_nothingToAlign(self):
        """
        Empty inputs and disjoint time ranges are alignment errors
        """
        self.assertRaises(AlignmentError, alignStreams, [], self.truth)
        self.assertRaises(AlignmentError, alignStreams,
            [estimate(0.0, (0, 0, 0))], Trajectory([], np.zeros((0, 3))))
        self.assertRaises(AlignmentError, alignStreams,
            [estimate(9000.0, (0, 0, 0))], self.truth)


    def test_badTolerance(self):
        """
        A negative tolerance is refused
        """
        self.assertRaises(ParameterError, alignStreams,
            [estimate(0.0, (0, 0, 0))], self.truth, -1.0)


    def test_transform(self):
        """
        A rigid transform moves the truth into the estimates' frame
        """
        rotation = Rotation.from_euler('z', 90, degrees=True)
        alignment = alignStreams([estimate(1000.0, (0, 0, 0))], self.truth,
            transform=(rotation, (0.0, 0.0, 2.0)))
        np.testing.assert_allclose(alignment[0].truth, [0.0, 1.0, 2.0],
            atol=1e-12)



class TestReports(unittest.TestCase):


    def setUp(self):
        self.reports = [ErrorReport('whiteboard', [0.01, 0.02, 0.03],
            [0.004, 0.005, 0.006], 140), ErrorReport('waist_v3',
            [0.1, 0.2, 0.3], [0.05, 0.06, 0.07], 139)]


    def test_csvLayout(self):
        """
        CSV reports have one row per scenario and axis under a fixed header
        """
        text = reportExport(self.reports, 'csv')
        lines = text.split('\n')
        self.assertEqual(lines[0], 'scenario,axis,mae_m,std_m,n')
        self.assertEqual(lines[1], 'whiteboard,x,0.01,0.004,140')
        self.assertEqual(len(text.strip().split('\n')), 7)


    def test_csvReadBack(self):
        """
        A CSV report reads back as the same reports
        """
        self.assertEqual(reportImport(reportExport(self.reports, 'csv'),
            'csv'), self.reports)


    def test_jsonReadBack(self):
        """
        A JSON report reads back as the same reports
        """
        self.assertEqual(reportImport(reportExport(self.reports, 'json'),
            'json'), self.reports)


    def test_singleReport(self):
        """
        A lone report exports like a batch of one
        """
        self.assertEqual(reportExport(self.reports[0]),
            reportExport(self.reports[:1]))


    def test_unknownFormat(self):
        """
        Only csv and json are known
        """
        self.assertRaises(ParameterError, reportExport, self.reports, 'xml')
        self.assertRaises(ParameterError, reportImport, '', 'xml')


    def test_badCsv(self):
        """
        Malformed reports are parse errors that point at the line
        """
        text = "scenario,axis,mae_m,std_m,n\ntable,x,0.1,0.1,3\n" \
            "table,y,oops,0.1,3\n"
        with self.assertRaises(ParseError) as context:
            reportImport(text, 'csv', 'report.csv')
        self.assertEqual(context.exception.line_number, 3)
        self.assertIn('report.csv:3', str(context.exception))
        partial = "scenario,axis,mae_m,std_m,n\ntable,x,0.1,0.1,3\n"
        self.assertRaises(ParseError, reportImport, partial, 'csv')
        self.assertRaises(ParseError, reportImport, '{"reports": 3}', 'json')


    def test_reference(self):
        """
        Builtin scenarios know their field-trial counterpart
        """
        self.assertEqual(self.reports[1].reference, REFERENCE_ERRORS['V3 W'])
        self.assertEqual(ErrorReport('custom', [0] * 3, [0] * 3, 1).reference,
            None)
