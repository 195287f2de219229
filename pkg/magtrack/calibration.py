"""
Strength-to-distance calibration.

Each coil gets its own straight line d = a * s + b fitted by ordinary least
squares with the distance as the dependent variable.  A coil may instead use
the 'log' response ln(d) = a * s + b, which is what a logarithmic amplifier
gives for a cube-law field.
"""
import json
from collections import namedtuple

import numpy as np
from scipy import stats

from magtrack.exceptions import (IncompleteFrameError, InsufficientDataError,
    MissingCalibrationError, ParameterError, ParseError, SingularFitError)
from magtrack.output import debug
from magtrack.positioning import DistanceVector
from magtrack import records

MIN_DISTANCE = 0.01
RESPONSES = ('linear', 'log')
PAIR_COLUMNS = ['coil_id', 'strength', 'distance_m']

CalibrationPair = namedtuple('CalibrationPair', ['strength', 'distance'])



class FitDiagnostics(object):
    """
    Quality of a calibration fit: residual RMS in meters, R**2 of the
    regression, number of pairs and the standard errors of a and b.
    """


    def __init__(self, rms, r2, n, a_stderr=float('nan'),
            b_stderr=float('nan')):
        self.rms = float(rms)
        self.r2 = float(r2)
        self.n = int(n)
        self.a_stderr = float(a_stderr)
        self.b_stderr = float(b_stderr)


def _checkPairs(pairs):
    pairs = [CalibrationPair(float(s), float(d)) for s, d in pairs]
    if len(pairs) < 2:
        raise InsufficientDataError(
            "{} calibration pair(s), at least 2 needed".format(len(pairs)))
    for pair in pairs:
        if not (np.isfinite(pair.distance) and pair.distance > 0):
            raise ParameterError("calibration distance must be > 0, got {!r}"
                .format(pair.distance))
        if not np.isfinite(pair.strength):
            raise ParameterError("calibration strength must be finite")
    return pairs


def fitLinear(pairs, response='linear'):
    """
    I fit distance against strength over pairs, a list of CalibrationPair,
    and return (a, b, FitDiagnostics).  The result does not depend on the
    order of the pairs.
    """
    if response not in RESPONSES:
        raise ParameterError("response must be one of {}, got {!r}".format(
            RESPONSES, response))
    pairs = _checkPairs(pairs)
    # Sorted so that the floating point sums don't depend on input order
    pairs.sort()
    strengths = np.array([p.strength for p in pairs])
    distances = np.array([p.distance for p in pairs])
    if np.all(strengths == strengths[0]):
        raise SingularFitError(
            "all {} strengths equal {}, the slope is undetermined".format(
                len(pairs), strengths[0]))
    target = np.log(distances) if response == 'log' else distances
    fit = stats.linregress(strengths, target)
    a, b = float(fit.slope), float(fit.intercept)
    fitted = a * strengths + b
    if response == 'log':
        fitted = np.exp(fitted)
    rms = np.sqrt(np.mean((distances - fitted) ** 2))
    r2 = fit.rvalue ** 2 if np.isfinite(fit.rvalue) else 1.0
    b_stderr = getattr(fit, 'intercept_stderr', float('nan'))
    if len(pairs) == 2:
        a_stderr = b_stderr = 0.0
    else:
        a_stderr = fit.stderr
    debug("Fitted {} response over {} pairs: a={!r} b={!r} rms={:.4f}".format(
        response, len(pairs), a, b, rms), 2)
    return a, b, FitDiagnostics(rms, r2, len(pairs), a_stderr, b_stderr)



class CoilCalibration(object):
    """
    The fitted response of one coil.
    """


    def __init__(self, a, b, rms=float('nan'), r2=float('nan'),
            response='linear'):
        if response not in RESPONSES:
            raise ParameterError("unknown response {!r}".format(response))
        if not (np.isfinite(a) and np.isfinite(b)):
            raise ParameterError("calibration coefficients must be finite")
        if not a < 0:
            raise ParameterError(
                "slope must be negative (strength falls with distance), got "
                "{!r}".format(a))
        self.a = float(a)
        self.b = float(b)
        self.rms = float(rms)
        self.r2 = float(r2)
        self.response = response


    def distance(self, strength):
        value = self.a * np.asarray(strength, dtype=float) + self.b
        if self.response == 'log':
            value = np.exp(value)
        return np.maximum(value, MIN_DISTANCE)


    def asDict(self):
        return {'a': self.a, 'b': self.b, 'rms': self.rms, 'r2': self.r2,
            'response': self.response}



class CalibrationModel(object):
    """
    Per-coil calibrations keyed by coil id.  Immutable once built.
    """


    def __init__(self, coils):
        self._coils = dict((int(k), v) for k, v in dict(coils).items())


    @classmethod
    def fit(cls, pairs_by_coil, response='linear'):
        """
        Fit every coil of pairs_by_coil, a mapping coil_id -> pairs.
        """
        coils = {}
        for coil_id in sorted(pairs_by_coil):
            try:
                a, b, diag = fitLinear(pairs_by_coil[coil_id], response)
            except (InsufficientDataError, SingularFitError) as err:
                raise type(err)("coil {}: {}".format(coil_id, err))
            if not a < 0:
                raise SingularFitError(
                    "coil {}: fitted slope {!r} is not negative".format(
                        coil_id, a))
            coils[coil_id] = CoilCalibration(a, b, diag.rms, diag.r2,
                response)
        return cls(coils)


    @property
    def coil_ids(self):
        return sorted(self._coils)


    def __len__(self):
        return len(self._coils)


    def __contains__(self, coil_id):
        return coil_id in self._coils


    def __getitem__(self, coil_id):
        try:
            return self._coils[coil_id]
        except KeyError:
            raise MissingCalibrationError(
                "no calibration for coil {}".format(coil_id))


    def toJson(self):
        return json.dumps(dict((str(k), self._coils[k].asDict())
            for k in self.coil_ids), indent=2, sort_keys=True) + '\n'


    @classmethod
    def fromJson(cls, text, path=''):
        try:
            document = json.loads(text)
            return cls(dict((int(k), CoilCalibration(v['a'], v['b'],
                v.get('rms', float('nan')), v.get('r2', float('nan')),
                v.get('response', 'linear'))) for k, v in document.items()))
        except (ValueError, KeyError, TypeError, AttributeError) as err:
            raise ParseError("not a calibration document: {}".format(err),
                path)


    def save(self, path):
        with open(path, 'w') as fh:
            fh.write(self.toJson())


    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.fromJson(fh.read(), path)


def estimateDistance(model, coil_id, strength):
    """
    a * strength + b in meters, never below 0.01 m.
    """
    return float(model[coil_id].distance(strength))


def frameToDistances(model, frame):
    """
    I convert a complete Frame into a DistanceVector in coil order.  A coil
    whose strength sits at the ADC floor (0 counts) carries no distance
    information; its entry is marked invalid.
    """
    if not frame.complete:
        raise IncompleteFrameError(
            "frame at {} ms is missing coils {}".format(frame.timestamp,
                frame.missing))
    distances = np.empty(frame.n_coils)
    valid = frame.strengths > 0
    for coil_id, strength in enumerate(frame.strengths):
        distances[coil_id] = estimateDistance(model, coil_id, strength)
    return DistanceVector(distances, valid, frame.midpoint)


def collectPairs(frames, truth, coil_positions):
    """
    Pair every coil's strength in frames with the true receiver-to-coil
    distance at that coil's slot time.  truth is a Trajectory (anything with
    positionsAt(times)).  Returns {coil_id: [CalibrationPair, ...]}.
    """
    coil_positions = np.asarray(coil_positions, dtype=float)
    pairs = dict((coil_id, []) for coil_id in range(len(coil_positions)))
    for frame in frames:
        usable = np.flatnonzero((frame.counts > 0) & (frame.strengths > 0))
        if not len(usable):
            continue
        at = truth.positionsAt(frame.slot_times[usable])
        ranges = np.linalg.norm(at - coil_positions[usable], axis=1)
        for coil_id, strength, distance in zip(usable, frame.strengths[usable],
                ranges):
            pairs[int(coil_id)].append(CalibrationPair(float(strength),
                float(distance)))
    return pairs


def savePairs(path, pairs_by_coil):
    rows = ([coil_id, pair.strength, pair.distance]
        for coil_id in sorted(pairs_by_coil) for pair in pairs_by_coil[coil_id])
    records.writeCsv(path, PAIR_COLUMNS, rows)


def loadPairs(path):
    rows = records.readCsv(path, [('coil_id', int), ('strength', float),
        ('distance_m', float)])
    pairs = {}
    for coil_id, strength, distance in rows:
        pairs.setdefault(coil_id, []).append(
            CalibrationPair(strength, distance))
    return pairs
