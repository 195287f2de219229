"""
Comparison of estimated trajectories with ground truth: nearest-neighbour
alignment in time, per-axis mean absolute error with the standard deviation
of the absolute errors, and report export.
"""
import json
from collections import namedtuple

import numpy as np

from magtrack.exceptions import (AlignmentError, InsufficientDataError,
    ParameterError, ParseError)
from magtrack.output import debug
from magtrack import records

AXES = ('x', 'y', 'z')
FORMATS = ('csv', 'json')
REPORT_COLUMNS = ['scenario', 'axis', 'mae_m', 'std_m', 'n']
DEFAULT_TOLERANCE_MS = 210.0

# Per-axis MAE and Std (meters) measured in the field trial with an
# ultrasound reference
REFERENCE_ERRORS = {
    'Cabinet': ((0.079, 0.070), (0.051, 0.041), (0.113, 0.113)),
    'Table': ((0.088, 0.077), (0.076, 0.059), (0.082, 0.068)),
    'Whiteboard': ((0.082, 0.062), (0.086, 0.059), (0.097, 0.087)),
    'V1 W_C': ((0.070, 0.056), (0.070, 0.055), (0.089, 0.062)),
    'V2 W_C': ((0.094, 0.070), (0.084, 0.063), (0.131, 0.083)),
    'V3 W_C': ((0.110, 0.087), (0.110, 0.100), (0.139, 0.101)),
    'V1 W': ((0.118, 0.084), (0.091, 0.074), (0.150, 0.103)),
    'V2 W': ((0.110, 0.090), (0.095, 0.070), (0.262, 0.252)),
    'V3 W': ((0.116, 0.099), (0.204, 0.131), (0.310, 0.181)),
}

SCENARIO_REFERENCE = {
    'shelf': 'Cabinet',
    'table': 'Table',
    'whiteboard': 'Whiteboard',
    'waist_chest': 'V1 W_C',
    'waist_v1': 'V1 W',
    'waist_v2': 'V2 W',
    'waist_v3': 'V3 W',
}

AlignedPair = namedtuple('AlignedPair', ['timestamp', 'estimate', 'truth'])



class Alignment(list):
    """
    A list of AlignedPair that also remembers how many estimates found no
    truth sample within the tolerance.
    """

    def __init__(self, pairs=(), dropped=0):
        super(Alignment, self).__init__(pairs)
        self.dropped = dropped


def rigidTransform(points, rotation, translation=(0.0, 0.0, 0.0)):
    """
    Map points from one coordinate frame into another, x -> R x + t.
    """
    return rotation.apply(np.asarray(points, dtype=float)) + np.asarray(
        translation, dtype=float)


def alignStreams(estimates, truth, tolerance_ms=DEFAULT_TOLERANCE_MS,
        transform=None):
    """
    I pair every estimate with the truth sample nearest in time.

    estimates is a timestamp-sorted sequence of PositionEstimate, truth a
    Trajectory.  Estimates without a truth sample within tolerance_ms, and
    failed estimates, are dropped and counted.  transform, a (Rotation,
    translation) pair, maps the truth into the estimates' frame.
    """
    if not tolerance_ms >= 0:
        raise ParameterError("tolerance_ms must be >= 0")
    estimates = list(estimates)
    if not len(truth) or not estimates:
        raise AlignmentError("nothing to align: {} estimates, {} truth samples"
            .format(len(estimates), len(truth)))
    truth_positions = truth.positions
    if transform is not None:
        truth_positions = rigidTransform(truth_positions, *transform)
    times = np.array([e.timestamp for e in estimates])
    right = np.clip(np.searchsorted(truth.times, times), 0, len(truth) - 1)
    left = np.clip(right - 1, 0, len(truth) - 1)
    nearer_left = np.abs(truth.times[left] - times) <= np.abs(
        truth.times[right] - times)
    nearest = np.where(nearer_left, left, right)
    gaps = np.abs(truth.times[nearest] - times)
    alignment = Alignment()
    for estimate, index, gap in zip(estimates, nearest, gaps):
        if gap > tolerance_ms or not np.all(np.isfinite(estimate.position)):
            alignment.dropped += 1
            continue
        alignment.append(AlignedPair(estimate.timestamp, estimate.position,
            truth_positions[index]))
    if not alignment:
        raise AlignmentError(
            "no estimate within {} ms of a truth sample (estimates "
            "{:.0f}..{:.0f} ms, truth {:.0f}..{:.0f} ms)".format(tolerance_ms,
                times[0], times[-1], truth.times[0], truth.times[-1]))
    if alignment.dropped:
        debug("Alignment dropped {} of {} estimates".format(alignment.dropped,
            len(estimates)))
    return alignment



class ErrorReport(object):
    """
    Per-axis tracking error of one scenario: mae and std are (x, y, z) arrays
    in meters, n the number of aligned pairs.
    """


    def __init__(self, scenario, mae, std, n):
        self.scenario = scenario
        self.mae = np.asarray(mae, dtype=float)
        self.std = np.asarray(std, dtype=float)
        self.n = int(n)


    @property
    def reference(self):
        """
        The field-trial row matching my scenario, or None.
        """
        return REFERENCE_ERRORS.get(SCENARIO_REFERENCE.get(self.scenario))


    def rows(self):
        for axis, mae, std in zip(AXES, self.mae, self.std):
            yield [self.scenario, axis, float(mae), float(std), self.n]


    def asDict(self):
        return {
            'scenario': self.scenario,
            'n': self.n,
            'axes': dict((axis, {'mae_m': float(mae), 'std_m': float(std)})
                for axis, mae, std in zip(AXES, self.mae, self.std)),
        }


    def __eq__(self, other):
        return (isinstance(other, ErrorReport)
            and self.scenario == other.scenario and self.n == other.n
            and np.array_equal(self.mae, other.mae)
            and np.array_equal(self.std, other.std))


    def __repr__(self):
        return "ErrorReport(scenario={!r}, mae={}, std={}, n={})".format(
            self.scenario, list(self.mae), list(self.std), self.n)


def computeErrors(pairs, scenario=''):
    """
    MAE and the sample (n - 1) standard deviation of the absolute errors per
    axis.  A single pair has Std 0.
    """
    pairs = list(pairs)
    if not pairs:
        raise InsufficientDataError("no aligned pairs to evaluate")
    errors = np.abs(np.array([p.estimate for p in pairs], dtype=float)
        - np.array([p.truth for p in pairs], dtype=float))
    mae = errors.mean(axis=0)
    if len(pairs) > 1:
        std = errors.std(axis=0, ddof=1)
    else:
        std = np.zeros(3)
    return ErrorReport(scenario, mae, std, len(pairs))


def _asList(reports):
    if isinstance(reports, ErrorReport):
        return [reports]
    return list(reports)


def reportExport(reports, format='csv'):
    """
    One report or a batch as a CSV (one row per scenario and axis) or JSON
    document.
    """
    reports = _asList(reports)
    if format == 'csv':
        return records.dumpCsv(REPORT_COLUMNS,
            (row for report in reports for row in report.rows()))
    if format == 'json':
        return json.dumps({'reports': [r.asDict() for r in reports]},
            indent=2, sort_keys=True) + '\n'
    raise ParameterError("unknown report format {!r}, use one of {}".format(
        format, FORMATS))


def _reportsFromRows(rows, path):
    grouped = []
    for scenario, axis, mae, std, n in rows:
        if axis not in AXES:
            raise ParseError("unknown axis {!r}".format(axis), path)
        if not grouped or grouped[-1][0] != scenario or \
                axis in grouped[-1][1]:
            grouped.append((scenario, {}, n))
        grouped[-1][1][axis] = (mae, std)
    reports = []
    for scenario, axes, n in grouped:
        if set(axes) != set(AXES):
            raise ParseError("scenario {!r} lacks axes {}".format(scenario,
                sorted(set(AXES) - set(axes))), path)
        reports.append(ErrorReport(scenario, [axes[a][0] for a in AXES],
            [axes[a][1] for a in AXES], n))
    return reports


def reportImport(text, format='csv', path=''):
    """
    Read back a document written by reportExport().
    """
    if format == 'csv':
        return _reportsFromRows(records.parseCsv(text, [('scenario', str),
            ('axis', str), ('mae_m', float), ('std_m', float), ('n', int)],
            path), path)
    if format == 'json':
        try:
            document = json.loads(text)
            return [ErrorReport(r['scenario'],
                [r['axes'][a]['mae_m'] for a in AXES],
                [r['axes'][a]['std_m'] for a in AXES], r['n'])
                for r in document['reports']]
        except (ValueError, KeyError, TypeError) as err:
            raise ParseError("not a report document: {}".format(err), path)
    raise ParameterError("unknown report format {!r}, use one of {}".format(
        format, FORMATS))
