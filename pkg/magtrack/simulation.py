"""
Deployment scenarios, synthetic hand trajectories and the simulated
transmitter -> receiver -> frame pipeline that stands in for the hardware.

Every random draw comes from numpy generators seeded through one
SeedSequence, so a run is fully determined by its seeds.
"""
import json
import math
import os

import numpy as np
from scipy.ndimage import gaussian_filter1d

from magtrack.calibration import CalibrationPair
from magtrack.exceptions import ParameterError, ParseError, ScenarioLookupError
from magtrack.field import CoilSpec, Pose, dipoleField, vec3
from magtrack.output import debug
from magtrack.positioning import BeaconSet
from magtrack.receiver import (RawSample, ReceiverSpec, chainCounts,
    senseAxes, senseMagnitude)
from magtrack.scheduler import (ClockModel, TdmaSchedule, TdmaSimulation,
    acceptedCoilAt, activeCoilAt, assembleFrames)
from magtrack import records

TRUTH_RATE_HZ = 100.0
DEFAULT_TRUTH_SIGMA = 0.02
DEFAULT_MAX_SPEED = 1.5
WAYPOINT_INTERVAL_S = 4.0
SMOOTHING_S = 0.4
TRUTH_COLUMNS = ['timestamp_ms', 'x_m', 'y_m', 'z_m']
SAMPLE_COLUMNS = ['timestamp_ms', 'coil_id', 'strength']
RANGE_COLUMNS = ['coil_id', 'distance_m', 'strength', 'strength_x',
    'strength_y', 'strength_z']



class Scenario(object):
    """
    A deployment: where the transmitter coils are, what they are, and the box
    the hand moves in.

    name        - identifier used in reports
    coils       - list of Pose, one per transmitter, in coil id order
    coil        - CoilSpec shared by all transmitters
    workspace   - (low, high) corners of the bounding box, meters
    truth_sigma - standard deviation of the ground-truth noise, meters
    """


    def __init__(self, name, coils, workspace, coil=None,
            truth_sigma=DEFAULT_TRUTH_SIGMA):
        self.name = name
        self.coils = list(coils)
        if not self.coils:
            raise ParameterError("a scenario needs at least one coil")
        low, high = (vec3(corner, 'workspace corner') for corner in workspace)
        if np.any(high <= low):
            raise ParameterError("workspace is empty: {} .. {}".format(
                list(low), list(high)))
        self.workspace = (low, high)
        self.coil = coil or CoilSpec()
        if not (np.isfinite(truth_sigma) and truth_sigma >= 0):
            raise ParameterError("truth_sigma must be >= 0")
        self.truth_sigma = float(truth_sigma)


    @property
    def n_coils(self):
        return len(self.coils)


    @property
    def coil_positions(self):
        return np.array([pose.position for pose in self.coils])


    @property
    def workspace_centre(self):
        return (self.workspace[0] + self.workspace[1]) / 2.0


    @property
    def sources(self):
        return [(pose, self.coil) for pose in self.coils]


    def beacons(self):
        return BeaconSet.fromPositions(self.coil_positions)


    def contains(self, points, tolerance=1e-9):
        points = np.asarray(points, dtype=float)
        low, high = self.workspace
        return np.all((points >= low - tolerance) & (points <= high + tolerance),
            axis=-1)


    def adjacentSpacings(self):
        """
        Distance from every coil to its nearest neighbour.
        """
        positions = self.coil_positions
        gaps = np.linalg.norm(positions[:, np.newaxis] - positions, axis=2)
        np.fill_diagonal(gaps, np.inf)
        return gaps.min(axis=1)


    def asDict(self):
        return {
            'name': self.name,
            'coil': self.coil.asDict(),
            'coils': [{'position': [float(c) for c in pose.position],
                'orientation': [float(q) for q in pose.quaternion]}
                for pose in self.coils],
            'workspace': {'low': [float(c) for c in self.workspace[0]],
                'high': [float(c) for c in self.workspace[1]]},
            'truth_sigma': self.truth_sigma,
        }


    def toJson(self):
        return json.dumps(self.asDict(), indent=2, sort_keys=True) + '\n'


    @classmethod
    def fromJson(cls, text, path=''):
        try:
            document = json.loads(text)
            coils = [Pose(c['position'], c.get('orientation'))
                for c in document['coils']]
            workspace = (document['workspace']['low'],
                document['workspace']['high'])
            coil = CoilSpec(**document.get('coil', {}))
            return cls(document.get('name', os.path.basename(path) or 'custom'),
                coils, workspace, coil,
                document.get('truth_sigma', DEFAULT_TRUTH_SIGMA))
        except (ValueError, KeyError, TypeError) as err:
            raise ParseError("not a scenario document: {}".format(err), path)


    def save(self, path):
        with open(path, 'w') as fh:
            fh.write(self.toJson())


    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.fromJson(fh.read(), path)


    def __repr__(self):
        return "Scenario(name={!r}, n_coils={})".format(self.name, self.n_coils)


def _offBody(name, positions, low, high):
    centre = (np.asarray(low) + np.asarray(high)) / 2.0
    coils = [Pose.facing(p, centre - np.asarray(p)) for p in positions]
    return Scenario(name, coils, (low, high))


def _torsoPose(position):
    position = np.asarray(position, dtype=float)
    # Coils on the body face away from the torso axis, horizontally
    outward = np.array([position[0], position[1], 0.0])
    return Pose.facing(position, outward)


def _waistChest():
    coils = []
    for z in (1.30, 1.14):
        for x in (-0.14, 0.0, 0.14):
            coils.append(_torsoPose((x, 0.12 if x == 0.0 else 0.10, z)))
    return Scenario('waist_chest', coils, ((-0.4, 0.35, 0.9), (0.4, 0.75, 1.5)))


def _waistRing(name, spacing, radius=0.25, height=1.0, stagger=0.015):
    step = 2.0 * math.asin(spacing / (2.0 * radius))
    coils = []
    for k in range(6):
        angle = (k - 2.5) * step
        z = height + (stagger if k % 2 else -stagger)
        coils.append(_torsoPose((radius * math.sin(angle),
            radius * math.cos(angle), z)))
    return Scenario(name, coils, ((-0.4, 0.35, 0.8), (0.4, 0.75, 1.4)))


BUILTIN_SCENARIOS = {
    'whiteboard': lambda: _offBody('whiteboard', [
        (0.0, 0.0, 0.8), (2.0, 0.0, 0.8), (1.0, 0.0, 2.0),
        (0.0, 1.4, 1.7), (2.0, 1.4, 1.7), (1.0, 1.4, 0.6)],
        (0.4, 0.3, 1.0), (1.6, 0.9, 1.6)),
    'table': lambda: _offBody('table', [
        (0.0, 0.0, 0.75), (1.6, 0.0, 0.75), (0.8, 1.3, 0.75),
        (0.0, 1.0, 1.6), (1.6, 1.0, 1.6), (0.8, -0.2, 1.75)],
        (0.3, 0.2, 0.85), (1.3, 0.8, 1.35)),
    'shelf': lambda: _offBody('shelf', [
        (0.0, -0.35, 0.6), (1.2, -0.35, 0.6), (0.6, -0.35, 1.9),
        (0.0, 1.0, 1.5), (1.2, 1.0, 1.5), (0.6, 1.1, 0.45)],
        (0.2, -0.2, 0.8), (1.0, 0.8, 1.4)),
    'waist_chest': _waistChest,
    'waist_v1': lambda: _waistRing('waist_v1', 0.18),
    'waist_v2': lambda: _waistRing('waist_v2', 0.14),
    'waist_v3': lambda: _waistRing('waist_v3', 0.11),
}


def builtinScenario(name):
    """
    One of the builtin layouts.  Off-body coils face the middle of the
    workspace; body-worn coils face outward from the torso.
    """
    try:
        factory = BUILTIN_SCENARIOS[name]
    except KeyError:
        raise ScenarioLookupError("unknown scenario {!r}, choose from {}"
            .format(name, ', '.join(sorted(BUILTIN_SCENARIOS))))
    return factory()


def loadScenario(name_or_path):
    """
    A builtin scenario by name, or a scenario JSON file by path.
    """
    if name_or_path in BUILTIN_SCENARIOS:
        return builtinScenario(name_or_path)
    if os.path.isfile(name_or_path):
        return Scenario.load(name_or_path)
    return builtinScenario(name_or_path)



class Trajectory(object):
    """
    Timestamped positions: times in ms (increasing), positions (N, 3) in
    meters.
    """


    def __init__(self, times, positions, seed=None):
        self.times = np.asarray(times, dtype=float)
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        if len(self.times) != len(self.positions):
            raise ParameterError("{} times for {} positions".format(
                len(self.times), len(self.positions)))
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ParameterError("trajectory times must be increasing")
        self.seed = seed


    @classmethod
    def static(cls, position, duration_s, rate_hz=TRUTH_RATE_HZ):
        times = np.arange(int(round(duration_s * rate_hz)) + 1) * (
            1000.0 / rate_hz)
        return cls(times, np.tile(vec3(position), (len(times), 1)))


    def __len__(self):
        return len(self.times)


    @property
    def duration_ms(self):
        return float(self.times[-1] - self.times[0]) if len(self.times) else 0.0


    def speeds(self):
        """
        Speed over every sampling step, m/s.
        """
        steps = np.linalg.norm(np.diff(self.positions, axis=0), axis=1)
        return steps / (np.diff(self.times) / 1000.0)


    def positionsAt(self, times):
        """
        Linearly interpolated positions at times (ms), held constant past
        either end.
        """
        times = np.asarray(times, dtype=float)
        return np.stack([np.interp(times, self.times, self.positions[:, axis])
            for axis in range(3)], axis=-1)


    def withNoise(self, sigma, rng):
        if sigma == 0:
            return Trajectory(self.times, self.positions.copy(), self.seed)
        return Trajectory(self.times,
            self.positions + rng.normal(0.0, sigma, self.positions.shape),
            self.seed)


    def save(self, path):
        records.writeCsv(path, TRUTH_COLUMNS,
            ([t] + list(p) for t, p in zip(self.times, self.positions)))


    @classmethod
    def load(cls, path):
        rows = records.readCsv(path, [(name, float) for name in TRUTH_COLUMNS])
        if not rows:
            return cls(np.zeros(0), np.zeros((0, 3)))
        array = np.array(rows)
        try:
            return cls(array[:, 0], array[:, 1:])
        except ParameterError as err:
            raise ParseError(str(err), path)


def _limitSpeed(positions, max_step):
    limited = positions.copy()
    for i in range(1, len(limited)):
        step = positions[i] - limited[i - 1]
        length = np.linalg.norm(step)
        if length > max_step:
            step = step * (max_step / length)
        limited[i] = limited[i - 1] + step
    return limited


def generateTrajectory(scenario, duration_s, seed, max_speed=DEFAULT_MAX_SPEED,
        rate_hz=TRUTH_RATE_HZ):
    """
    A smooth random hand path through the scenario workspace: uniform random
    waypoints every few seconds, joined linearly, low-pass filtered,
    then rate limited to max_speed.  Each stage only ever forms convex
    combinations of workspace points, so the path stays in the box.
    """
    if not duration_s > 0:
        raise ParameterError("duration must be > 0, got {!r}".format(
            duration_s))
    if not max_speed > 0:
        raise ParameterError("max_speed must be > 0")
    rng = np.random.default_rng(seed)
    low, high = scenario.workspace
    count = int(math.ceil(duration_s / WAYPOINT_INTERVAL_S)) + 1
    waypoints = rng.uniform(low, high, size=(count, 3))
    waypoint_times = np.arange(count) * WAYPOINT_INTERVAL_S * 1000.0
    times = np.arange(int(round(duration_s * rate_hz)) + 1) * (1000.0 / rate_hz)
    path = np.stack([np.interp(times, waypoint_times, waypoints[:, axis])
        for axis in range(3)], axis=-1)
    path = gaussian_filter1d(path, SMOOTHING_S * rate_hz, axis=0,
        mode='nearest')
    # Slightly under the limit so rounding can't push a step over it
    path = _limitSpeed(path, max_speed / rate_hz * (1.0 - 1e-9))
    path = np.clip(path, low, high)
    debug("Trajectory seed={} in {}: {} points over {} s".format(seed,
        scenario.name, len(times), duration_s), 2)
    return Trajectory(times, path, seed)



class SimulatedRun(object):
    """
    Everything a simulated acquisition produces.

    samples     - RawSample list, receiver timestamps
    frames      - assembled Frame list
    truth       - ground truth with measurement noise
    truth_clean - the trajectory actually followed
    true_coils  - coil actually driven at every sample (-1 for none)
    saturated   - samples taken while a coil was driven that read the ADC
                  floor or full scale
    """


    def __init__(self, scenario, schedule, samples, frames, truth, truth_clean,
            true_coils, saturated=0):
        self.scenario = scenario
        self.schedule = schedule
        self.samples = samples
        self.frames = frames
        self.truth = truth
        self.truth_clean = truth_clean
        self.true_coils = np.asarray(true_coils, dtype=int)
        self.saturated = int(saturated)


    def misattributions(self):
        """
        Number of samples averaged into a coil's frame entry while another
        coil (or none) was actually driven.
        """
        wrong = 0
        for sample, true_coil in zip(self.samples, self.true_coils):
            coil = acceptedCoilAt(self.schedule, sample.timestamp)
            if coil is not None and coil != true_coil:
                wrong += 1
        return wrong


    def saveSamples(self, path):
        records.writeCsv(path, SAMPLE_COLUMNS, self.samples)


def loadSamples(path):
    return [RawSample(*row) for row in records.readCsv(path,
        [('timestamp_ms', float), ('coil_id', int), ('strength', int)])]


def simulateRun(scenario, trajectory, receiver, schedule, seed, clock=None):
    """
    I run the TDMA simulation over the span of trajectory, read the field of
    the driven coil at the hand position on every ADC tick, and assemble the
    readings into frames.  clock describes the receiver clock error (None:
    perfect).
    """
    if schedule.n_coils != scenario.n_coils:
        raise ParameterError("schedule has {} coils, scenario {} has {}"
            .format(schedule.n_coils, scenario.name, scenario.n_coils))
    clock = clock or ClockModel()
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    clock_seed, noise_seed, truth_seed = seed.spawn(3)
    simulation = TdmaSimulation(schedule, clock,
        np.random.default_rng(clock_seed))
    true_times, rx_times, true_coils = simulation.run(
        trajectory.times[-1] if len(trajectory) else 0.0)
    keep = rx_times >= 0
    true_times, rx_times, true_coils = (true_times[keep], rx_times[keep],
        true_coils[keep])

    positions = trajectory.positionsAt(true_times)
    strengths = np.zeros(len(true_times), dtype=np.int64)
    noise_rng = np.random.default_rng(noise_seed)
    for coil_id, (pose, coil) in enumerate(scenario.sources):
        driven = true_coils == coil_id
        if not np.any(driven):
            continue
        field = dipoleField(pose, coil, positions[driven])
        noise_db = receiver.noise_sigma * noise_rng.standard_normal(
            int(driven.sum()))
        strengths[driven] = chainCounts(senseMagnitude(field, receiver), coil,
            receiver, noise_db)
    driven = true_coils >= 0
    saturated = int(np.sum(driven & ((strengths == 0)
        | (strengths == receiver.max_code))))
    if saturated:
        debug("{} of {} driven samples saturated at the ADC limits".format(
            saturated, int(driven.sum())))

    samples = []
    for t, strength in zip(rx_times, strengths):
        labelled = activeCoilAt(schedule, t)
        samples.append(RawSample(float(t), -1 if labelled is None else labelled,
            int(strength)))
    frames = list(assembleFrames(samples, schedule, clock))
    truth = trajectory.withNoise(scenario.truth_sigma,
        np.random.default_rng(truth_seed))
    debug("Simulated {}: {} samples, {} frames".format(scenario.name,
        len(samples), len(frames)))
    return SimulatedRun(scenario, schedule, samples, frames, truth, trajectory,
        true_coils, saturated)


def rangeSweep(scenario, receiver, start=0.1, stop=2.5, step=0.05):
    """
    Noise-free rectified strength with the receiver walked out along each
    coil's axis.  Yields (coil_id, distance, strength, (x, y, z strengths))
    with the per-axis strengths read on the receiver's own axes.
    """
    if not step > 0 or not stop >= start or not start > scenario.coil.radius:
        raise ParameterError("bad sweep {}..{} step {}".format(start, stop,
            step))
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    distances = np.round(start + step * np.arange(count), 10)
    for coil_id, (pose, coil) in enumerate(scenario.sources):
        points = pose.position + distances[:, np.newaxis] * pose.normal
        field = dipoleField(pose, coil, points)
        magnitude = chainCounts(senseMagnitude(field, receiver), coil,
            receiver)
        axes = chainCounts(senseAxes(field, receiver), coil, receiver)
        for i, distance in enumerate(distances):
            yield coil_id, float(distance), int(magnitude[i]), tuple(
                int(a) for a in axes[i])


def calibrationSweep(scenario, receiver, seed, pairs_per_coil=120, near=0.2,
        far=2.0, samples_per_pair=5, rays=12):
    """
    I walk the receiver out from every coil along rays aimed at random points
    of the workspace, stopping at evenly spaced distances from near to far.
    Each stop gives one CalibrationPair: the mean of samples_per_pair noisy
    readings against the exact distance.  Returns {coil_id: [pair, ...]}.
    """
    if not far > near > scenario.coil.radius:
        raise ParameterError("bad calibration sweep {}..{} m".format(near, far))
    if not (int(rays) >= 1 and int(pairs_per_coil) >= int(rays)
            and int(samples_per_pair) >= 1):
        raise ParameterError("calibration sweep needs pairs_per_coil >= rays "
            ">= 1 and samples_per_pair >= 1")
    rays = int(rays)
    stops = int(math.ceil(int(pairs_per_coil) / float(rays)))
    distances = np.linspace(near, far, stops)
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    aim_seed, noise_seed = seed.spawn(2)
    aim_rng = np.random.default_rng(aim_seed)
    noise_rng = np.random.default_rng(noise_seed)
    low, high = scenario.workspace
    pairs = {}
    for coil_id, (pose, coil) in enumerate(scenario.sources):
        targets = aim_rng.uniform(low, high, size=(rays, 3))
        directions = targets - pose.position
        lengths = np.linalg.norm(directions, axis=1)
        # A target on top of the coil gives no direction; use the axis
        directions[lengths < 1e-9] = pose.normal
        lengths[lengths < 1e-9] = 1.0
        directions /= lengths[:, np.newaxis]
        points = (pose.position + distances[np.newaxis, :, np.newaxis]
            * directions[:, np.newaxis, :]).reshape(-1, 3)
        magnitude = senseMagnitude(dipoleField(pose, coil, points), receiver)
        noise_db = receiver.noise_sigma * noise_rng.standard_normal(
            (len(points), int(samples_per_pair)))
        counts = chainCounts(magnitude[:, np.newaxis], coil, receiver,
            noise_db)
        strengths = counts.mean(axis=1)
        ranges = np.tile(distances, rays)
        pairs[coil_id] = [CalibrationPair(float(s), float(d))
            for s, d in zip(strengths, ranges)][:int(pairs_per_coil)]
    debug("Calibration sweep of {}: {} pairs per coil over {}..{} m".format(
        scenario.name, len(pairs[0]), near, far))
    return pairs


def rangeRows(sweep):
    for coil_id, distance, strength, axes in sweep:
        yield [coil_id, distance, strength] + list(axes)


def defaultSchedule(scenario):
    return TdmaSchedule(scenario.n_coils)


def defaultReceiver(noise_sigma=None):
    receiver = ReceiverSpec()
    if noise_sigma is not None:
        receiver = receiver.withNoise(noise_sigma)
    return receiver
