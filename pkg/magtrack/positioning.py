"""
True-range multilateration: the receiver position is the point whose
distances to the transmitter coils best match the estimated ones, in the
least-squares sense

    minimize  sum_i (|p - p_i| - d_i) ** 2

solved with damped Gauss-Newton (Levenberg-Marquardt) steps.  Also here: the
smoothing of the resulting trajectory and the geometry analysis that tells
how much a beacon layout amplifies distance noise per axis.
"""
from collections import deque

import numpy as np

from magtrack.exceptions import (MagtrackError, ParameterError,
    UnderdeterminedError)
from magtrack.field import vec3
from magtrack.output import debug
from magtrack import records

MIN_BEACONS = 4
COPLANAR_RATIO = 1e-6
OUTLIER_RESIDUAL = 0.5
GRADIENT_TOLERANCE = 1e-9
STEP_TOLERANCE = 1e-10
MAX_ITERATIONS = 100
DEFAULT_WINDOW = 5
ESTIMATE_COLUMNS = ['timestamp_ms', 'x_m', 'y_m', 'z_m', 'residual_rms_m',
    'converged']



class BeaconSet(object):
    """
    Transmitter coil positions in the world frame, keyed by coil id.
    """


    def __init__(self, beacons):
        beacons = list(beacons)
        self.coil_ids = [int(coil_id) for coil_id, _ in beacons]
        if len(set(self.coil_ids)) != len(self.coil_ids):
            raise ParameterError("duplicate coil ids in beacon set")
        self.positions = np.array([vec3(position, 'beacon position')
            for _, position in beacons]).reshape(-1, 3)


    @classmethod
    def fromPositions(cls, positions):
        return cls(enumerate(positions))


    def __len__(self):
        return len(self.coil_ids)


    @property
    def centroid(self):
        return self.positions.mean(axis=0)


    @property
    def singular_values(self):
        return np.linalg.svd(self.positions - self.centroid, compute_uv=False)


    @property
    def coplanarity(self):
        """
        Smallest singular value of the centered position matrix; 0 means all
        beacons lie in one plane.
        """
        values = self.singular_values
        return float(values[-1]) if len(values) >= 3 else 0.0


    @property
    def coplanar(self):
        values = self.singular_values
        if len(values) < 3 or values[0] == 0:
            return True
        return bool(values[2] < COPLANAR_RATIO * values[0])


    def subset(self, mask):
        return BeaconSet((c, p) for c, p, keep in
            zip(self.coil_ids, self.positions, mask) if keep)



class DistanceVector(object):
    """
    Estimated distances (meters) to every coil of a frame with a validity
    flag per coil.
    """


    def __init__(self, distances, valid=None, timestamp=0.0):
        self.distances = np.asarray(distances, dtype=float)
        if valid is None:
            valid = np.isfinite(self.distances) & (self.distances > 0)
        self.valid = np.asarray(valid, dtype=bool)
        if self.valid.shape != self.distances.shape:
            raise ParameterError("one validity flag per distance required")
        self.timestamp = float(timestamp)


    def __len__(self):
        return len(self.distances)



class PositionEstimate(object):
    """
    A solved position.  A frame whose solve failed is still represented, with
    NaN coordinates, converged False and the reason in error.
    """


    def __init__(self, timestamp, position, residual_rms, iterations=0,
            converged=False, gradient_norm=float('nan'), outliers=(),
            coplanar=False, error=''):
        self.timestamp = float(timestamp)
        self.position = np.asarray(position, dtype=float)
        self.residual_rms = float(residual_rms)
        self.iterations = int(iterations)
        self.converged = bool(converged)
        self.gradient_norm = float(gradient_norm)
        self.outliers = list(outliers)
        self.coplanar = bool(coplanar)
        self.error = error


    @classmethod
    def failed(cls, timestamp, error):
        return cls(timestamp, [np.nan] * 3, float('nan'), error=str(error))


    def moved(self, position):
        """
        A copy of me at a different position.
        """
        return PositionEstimate(self.timestamp, position, self.residual_rms,
            self.iterations, self.converged, self.gradient_norm,
            self.outliers, self.coplanar, self.error)


    def __repr__(self):
        return "PositionEstimate(timestamp={}, position={}, residual_rms={}, "\
            "converged={})".format(self.timestamp, list(self.position),
                self.residual_rms, self.converged)


def rangeResiduals(positions, distances, point):
    """
    Residuals |point - p_i| - d_i and their Jacobian (unit vectors from the
    beacons to point).
    """
    offsets = point - positions
    ranges = np.linalg.norm(offsets, axis=1)
    ranges = np.maximum(ranges, 1e-12)
    return ranges - distances, offsets / ranges[:, np.newaxis]


def rangeObjective(positions, distances, point):
    residuals, _ = rangeResiduals(np.asarray(positions, dtype=float),
        np.asarray(distances, dtype=float), np.asarray(point, dtype=float))
    return float(np.dot(residuals, residuals))


def multilaterate(beacons, distances, initial_guess,
        max_iterations=MAX_ITERATIONS):
    """
    I return the PositionEstimate minimizing the sum of squared range
    residuals over the valid distances, starting from initial_guess.

    Raises UnderdeterminedError with fewer than 4 valid distances.  Running
    out of iterations is not an error: the estimate comes back with
    converged False.
    """
    if len(distances) != len(beacons):
        raise ParameterError("{} distances for {} beacons".format(
            len(distances), len(beacons)))
    mask = distances.valid & np.isfinite(distances.distances)
    if mask.sum() < MIN_BEACONS:
        raise UnderdeterminedError(
            "{} valid distances, at least {} are needed in 3D".format(
                int(mask.sum()), MIN_BEACONS))
    used = beacons.subset(mask)
    coplanar = used.coplanar
    if coplanar:
        debug("Beacons {} are (nearly) coplanar, the solution may be "
            "mirrored".format(used.coil_ids))
    positions = used.positions
    target = distances.distances[mask]

    point = vec3(initial_guess, 'initial guess')
    residuals, jacobian = rangeResiduals(positions, target, point)
    cost = np.dot(residuals, residuals)
    hessian = jacobian.T.dot(jacobian)
    gradient = jacobian.T.dot(residuals)
    damping = 1e-3 * max(np.max(np.diag(hessian)), 1e-12)
    growth = 2.0
    converged = False
    iterations = 0
    while iterations < max_iterations:
        if np.linalg.norm(2.0 * gradient) < GRADIENT_TOLERANCE:
            converged = True
            break
        iterations += 1
        try:
            step = np.linalg.solve(hessian + damping * np.eye(3), -gradient)
        except np.linalg.LinAlgError:
            damping *= growth
            growth *= 2.0
            continue
        if np.linalg.norm(step) < STEP_TOLERANCE:
            converged = True
            break
        candidate = point + step
        new_residuals, new_jacobian = rangeResiduals(positions, target,
            candidate)
        new_cost = np.dot(new_residuals, new_residuals)
        linear = residuals + jacobian.dot(step)
        predicted = cost - np.dot(linear, linear)
        gain = (cost - new_cost) / predicted if predicted > 0 else -1.0
        if gain > 0:
            point = candidate
            residuals, jacobian, cost = new_residuals, new_jacobian, new_cost
            hessian = jacobian.T.dot(jacobian)
            gradient = jacobian.T.dot(residuals)
            damping *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            growth = 2.0
        else:
            damping *= growth
            growth *= 2.0

    outliers = [coil for coil, residual in zip(used.coil_ids, residuals)
        if abs(residual) > OUTLIER_RESIDUAL]
    if outliers:
        debug("Range residual above {} m for coils {}".format(
            OUTLIER_RESIDUAL, outliers), 2)
    if not converged:
        debug("Solve at {:.0f} ms did not converge in {} iterations".format(
            distances.timestamp, max_iterations))
    return PositionEstimate(distances.timestamp, point,
        np.sqrt(cost / len(residuals)), iterations, converged,
        np.linalg.norm(2.0 * gradient), outliers, coplanar)


def solveStream(beacons, frames, initial_guess=None):
    """
    Solve every DistanceVector of frames in turn.  Each solve starts from the
    previous converged position; before there is one it starts from
    initial_guess, or the beacon centroid when that is None.  A frame that
    can't be solved yields a failed estimate, the stream goes on.
    """
    previous = None
    for distances in frames:
        if previous is not None:
            guess = previous
        elif initial_guess is not None:
            guess = initial_guess
        else:
            guess = beacons.centroid
        try:
            estimate = multilaterate(beacons, distances, guess)
        except MagtrackError as err:
            debug("Frame at {:.0f} ms not solved: {}".format(
                distances.timestamp, err))
            estimate = PositionEstimate.failed(distances.timestamp, err)
        if estimate.converged:
            previous = estimate.position
        yield estimate


def _windowMean(positions):
    stacked = np.array(positions)
    finite = np.all(np.isfinite(stacked), axis=1)
    return stacked[finite].mean(axis=0)


def smoothTrajectory(estimates, window=DEFAULT_WINDOW):
    """
    Centered moving average of the positions over window estimates, per
    axis.  Near the ends of the stream the window shrinks on both sides
    alike, so the first and last estimates are kept as they are.
    Timestamps and the rest of each estimate are kept; failed estimates stay
    failed and are left out of their neighbours' averages.
    """
    if int(window) != window or window < 1:
        raise ParameterError("window must be an integer >= 1, got {!r}"
            .format(window))
    before = (window - 1) // 2
    after = window // 2
    past = deque(maxlen=before or None)
    pending = deque()

    def emit(index, ended):
        center = pending.popleft()
        if not np.all(np.isfinite(center.position)):
            result = center
        else:
            # Estimates left after this one; only known once input ran out
            remaining = len(pending) if ended else after
            left = min(len(past), remaining)
            right = min(after, len(pending), index)
            behind = list(past)[len(past) - left:]
            ahead = [e.position for e, _ in zip(pending, range(right))]
            result = center.moved(_windowMean(
                behind + [center.position] + ahead))
        if before:
            past.append(center.position)
        return result

    index = 0
    for estimate in estimates:
        pending.append(estimate)
        if len(pending) > after:
            yield emit(index, False)
            index += 1
    while pending:
        yield emit(index, True)
        index += 1


def amplificationAt(beacons, point):
    """
    Per-axis standard deviation of the least-squares position for unit
    distance noise at point, from the linearized range equations.  An axis
    that the geometry can't resolve gets inf.
    """
    _, jacobian = rangeResiduals(beacons.positions,
        np.zeros(len(beacons)), vec3(point))
    values, vectors = np.linalg.eigh(jacobian.T.dot(jacobian))
    usable = values > 1e-12 * max(values[-1], 1e-300)
    variance = (vectors[:, usable] ** 2 / values[usable]).sum(axis=1)
    blind = np.any(np.abs(vectors[:, ~usable]) > 1e-6, axis=1)
    return np.where(blind, np.inf, np.sqrt(variance))



class DilutionReport(object):
    """
    Per-axis amplification factors of a beacon layout over a region: the
    median and maximum over the sampled points, and how many sample points
    could not be resolved on some axis.
    """


    def __init__(self, name, factors, coplanar):
        self.name = name
        self.factors = np.asarray(factors, dtype=float)
        self.coplanar = bool(coplanar)
        finite = np.where(np.isfinite(self.factors), self.factors, np.nan)
        self.degenerate_points = int(np.sum(
            np.any(~np.isfinite(self.factors), axis=1)))
        self.median = np.median(self.factors, axis=0)
        with np.errstate(all='ignore'):
            self.maximum = np.where(
                np.any(~np.isfinite(self.factors), axis=0), np.inf,
                np.nanmax(finite, axis=0))


    @property
    def points(self):
        return len(self.factors)


    @property
    def flagged(self):
        return self.coplanar or self.degenerate_points > 0


def regionGrid(region, points_per_axis=5):
    low, high = (vec3(corner, 'region corner') for corner in region)
    if np.any(high < low):
        raise ParameterError("region high corner below low corner")
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in zip(low, high)]
    grid = np.meshgrid(*axes, indexing='ij')
    return np.stack([g.ravel() for g in grid], axis=1)


def geometryQuality(beacons, region, points_per_axis=5, name=''):
    """
    Sample the bounding box region = (low, high) on a regular grid and report
    the amplification of unit distance noise into position error per axis.
    """
    if len(beacons) < MIN_BEACONS:
        raise UnderdeterminedError("{} beacons, at least {} needed".format(
            len(beacons), MIN_BEACONS))
    points = regionGrid(region, points_per_axis)
    factors = [amplificationAt(beacons, point) for point in points]
    report = DilutionReport(name, factors, beacons.coplanar)
    if report.flagged:
        debug("Geometry {}: {} of {} points unresolved, coplanar={}".format(
            name or '?', report.degenerate_points, report.points,
            report.coplanar))
    return report


def estimateRows(estimates):
    for estimate in estimates:
        yield ([estimate.timestamp] + [float(c) for c in estimate.position]
            + [estimate.residual_rms, estimate.converged])


def saveEstimates(path, estimates):
    records.writeCsv(path, ESTIMATE_COLUMNS, estimateRows(estimates))


def loadEstimates(path):
    rows = records.readCsv(path, [(name, float) for name in
        ESTIMATE_COLUMNS[:-1]] + [('converged', records.parseBool)])
    return [PositionEstimate(t, (x, y, z), rms, converged=converged)
        for t, x, y, z, rms, converged in rows]
