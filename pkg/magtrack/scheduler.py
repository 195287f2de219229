"""
Time-division activation of the transmitter coils.

Every coil owns one window of window_ms per cycle and is driven for the first
activation_ms of it; the rest of the window is a guard interval.  The
receiver samples its ADC continuously and assigns samples to coils by their
timestamp, so its clock has to agree with the transmitters' to within the
guard.  A synchronization beacon resets the receiver clock periodically.

All times are milliseconds.
"""
import math

import numpy as np
import simpy

from magtrack.exceptions import ParameterError
from magtrack.output import debug



class TdmaSchedule(object):
    """
    I describe the activation schedule and the receiver's sampling of it.

    Samples are averaged into a coil's frame entry when they fall inside the
    steady part of the coil's activation, [max(settle_ms, guard/2),
    activation_ms - guard/2) measured from the start of its window.  Dropping
    half the guard at both ends keeps the attribution right for any clock
    error smaller than guard/2.
    """


    def __init__(self, n_coils, activation_ms=50.0, window_ms=70.0,
            adc_rate_hz=166.7, settle_ms=10.0):
        if int(n_coils) != n_coils or n_coils < 1:
            raise ParameterError("n_coils must be an integer >= 1")
        if not 0 < activation_ms <= window_ms:
            raise ParameterError(
                "need 0 < activation_ms <= window_ms, got {} and {}".format(
                    activation_ms, window_ms))
        if not adc_rate_hz > 0:
            raise ParameterError("adc_rate_hz must be > 0")
        if not settle_ms >= 0:
            raise ParameterError("settle_ms must be >= 0")
        self.n_coils = int(n_coils)
        self.activation_ms = float(activation_ms)
        self.window_ms = float(window_ms)
        self.adc_rate_hz = float(adc_rate_hz)
        self.settle_ms = float(settle_ms)
        low, high = self.acceptWindow()
        if low >= high:
            raise ParameterError(
                "settle_ms={} leaves no steady samples in a {} ms activation"
                .format(settle_ms, activation_ms))


    @property
    def cycle_ms(self):
        return self.n_coils * self.window_ms


    @property
    def guard_ms(self):
        return self.window_ms - self.activation_ms


    @property
    def tolerance_ms(self):
        """
        Largest receiver clock error that cannot cause a misattribution.
        """
        return self.guard_ms / 2.0


    @property
    def sample_period_ms(self):
        return 1000.0 / self.adc_rate_hz


    def acceptWindow(self):
        tolerance = self.tolerance_ms
        return (max(self.settle_ms, tolerance), self.activation_ms - tolerance)


    def asDict(self):
        return {
            'n_coils': self.n_coils,
            'activation_ms': self.activation_ms,
            'window_ms': self.window_ms,
            'adc_rate_hz': self.adc_rate_hz,
            'settle_ms': self.settle_ms,
        }



class Frame(object):
    """
    One cycle of per-coil strengths.

    timestamp  - cycle start, receiver clock (ms)
    strengths  - mean rectified strength per coil, NaN where nothing arrived
    counts     - number of samples averaged per coil
    slot_times - mean timestamp of the averaged samples per coil
    sync_lost  - the clock error bound reached the schedule tolerance, so the
                 attribution of this frame can't be trusted
    """


    def __init__(self, timestamp, strengths, counts=None, slot_times=None,
            sync_lost=False):
        self.timestamp = float(timestamp)
        self.strengths = np.asarray(strengths, dtype=float)
        if counts is None:
            counts = np.where(np.isnan(self.strengths), 0, 1)
        self.counts = np.asarray(counts, dtype=int)
        if slot_times is None:
            slot_times = np.full(len(self.strengths), self.timestamp)
        self.slot_times = np.asarray(slot_times, dtype=float)
        self.sync_lost = bool(sync_lost)
        self.held = False


    @property
    def n_coils(self):
        return len(self.strengths)


    @property
    def complete(self):
        return bool(np.all(self.counts > 0))


    @property
    def midpoint(self):
        """
        Mean slot time of the coils that delivered samples, the moment the
        frame as a whole describes.
        """
        times = self.slot_times[np.isfinite(self.slot_times)]
        return float(times.mean()) if len(times) else self.timestamp


    @property
    def missing(self):
        return [int(i) for i in np.flatnonzero(self.counts == 0)]


    def __repr__(self):
        return "Frame(timestamp={}, strengths={}, complete={}, sync_lost={})"\
            .format(self.timestamp, list(self.strengths), self.complete,
                self.sync_lost)



class ClockModel(object):
    """
    Error of the receiver clock against transmitter time, in ms.

    The error starts at offset_ms when the clock was last synchronized
    (synced_at_ms) and grows by drift_ppm.  Every resync_interval_ms (0 or
    None: never) a synchronization resets it to a residual no larger than
    jitter_ms.
    """


    def __init__(self, offset_ms=0.0, drift_ppm=0.0, resync_interval_ms=None,
            jitter_ms=0.0, synced_at_ms=0.0):
        if resync_interval_ms is not None and resync_interval_ms < 0:
            raise ParameterError("resync_interval_ms must be >= 0")
        if jitter_ms < 0:
            raise ParameterError("jitter_ms must be >= 0")
        self.offset_ms = float(offset_ms)
        self.drift_ppm = float(drift_ppm)
        self.resync_interval_ms = resync_interval_ms or None
        self.jitter_ms = float(jitter_ms)
        self.synced_at_ms = float(synced_at_ms)


    @property
    def drift_rate(self):
        return self.drift_ppm * 1e-6


    def errorAt(self, t):
        """
        Error at transmitter time t, assuming no resync happens before t.
        """
        return self.offset_ms + self.drift_rate * (t - self.synced_at_ms)


    def errorBound(self, t):
        """
        Worst-case magnitude of the error at time t, counting the periodic
        resyncs from synced_at_ms on.
        """
        elapsed = t - self.synced_at_ms
        interval = self.resync_interval_ms
        if interval and elapsed >= interval:
            return self.jitter_ms + abs(self.drift_rate) * (elapsed % interval)
        return abs(self.offset_ms) + abs(self.drift_rate) * max(elapsed, 0.0)


    def __repr__(self):
        return "ClockModel(offset_ms={}, drift_ppm={}, resync_interval_ms={}, "\
            "jitter_ms={}, synced_at_ms={})".format(self.offset_ms,
                self.drift_ppm, self.resync_interval_ms, self.jitter_ms,
                self.synced_at_ms)


def activeCoilAt(schedule, t):
    """
    Index of the coil driven at time t, or None inside a guard interval.
    """
    if t < 0:
        raise ParameterError("t must be >= 0, got {!r}".format(t))
    window = int(math.floor((t % schedule.cycle_ms) / schedule.window_ms))
    if (t % schedule.window_ms) < schedule.activation_ms:
        return window
    return None


def acceptedCoilAt(schedule, t):
    """
    Coil whose frame entry a sample stamped t would be averaged into, or None
    when the sample falls outside every aggregation window.
    """
    phase = t % schedule.cycle_ms
    coil = int(phase // schedule.window_ms)
    low, high = schedule.acceptWindow()
    if coil < schedule.n_coils and \
            low <= phase - coil * schedule.window_ms < high:
        return coil
    return None


def applyResync(clock, t, rng=None):
    """
    The clock after a synchronization at time t: the accumulated error is
    replaced by a residual drawn uniformly from [-jitter_ms, jitter_ms]
    (exactly 0 without jitter or without an rng).  The drift is unchanged.
    """
    residual = 0.0
    if rng is not None and clock.jitter_ms > 0:
        residual = float(rng.uniform(-clock.jitter_ms, clock.jitter_ms))
    debug("Clock resync at {:.1f} ms: error {:.4f} ms -> {:.4f} ms".format(
        t, clock.errorAt(t), residual), 3)
    return ClockModel(residual, clock.drift_ppm, clock.resync_interval_ms,
        clock.jitter_ms, synced_at_ms=t)


def _buildFrame(cycle, schedule, sums, counts, times, clock):
    timestamp = cycle * schedule.cycle_ms
    with np.errstate(invalid='ignore', divide='ignore'):
        strengths = np.where(counts > 0, sums / counts, np.nan)
        slot_times = np.where(counts > 0, times / counts, np.nan)
    sync_lost = False
    if clock is not None:
        bound = clock.errorBound(timestamp + schedule.cycle_ms)
        sync_lost = bound > schedule.tolerance_ms
    frame = Frame(timestamp, strengths, counts.copy(), slot_times, sync_lost)
    if not frame.complete:
        debug("Frame at {:.0f} ms incomplete, missing coils {}".format(
            timestamp, frame.missing), 2)
    if sync_lost:
        debug("Frame at {:.0f} ms: clock error bound {:.2f} ms exceeds "
            "{:.2f} ms, sync lost".format(timestamp, bound,
                schedule.tolerance_ms))
    return frame


def assembleFrames(samples, schedule, clock=None):
    """
    I turn a timestamp-ordered stream of RawSample into a stream of Frame, one
    per cycle.  Every cycle the stream has passed is emitted, incomplete ones
    included (flagged through Frame.complete); a trailing cycle is emitted
    only if it is complete.  When clock is given its error bound decides
    Frame.sync_lost.
    """
    n = schedule.n_coils
    current = None
    sums = np.zeros(n)
    counts = np.zeros(n, dtype=int)
    times = np.zeros(n)
    late = 0
    for sample in samples:
        t = float(sample.timestamp)
        cycle = int(math.floor(t / schedule.cycle_ms))
        if current is None:
            current = cycle
        elif cycle < current:
            # A resync can step the clock back across a cycle boundary
            late += 1
            continue
        elif cycle > current:
            yield _buildFrame(current, schedule, sums, counts, times, clock)
            for skipped in range(current + 1, cycle):
                yield _buildFrame(skipped, schedule, np.zeros(n),
                    np.zeros(n, dtype=int), np.zeros(n), clock)
            current = cycle
            sums[:] = 0.0
            counts[:] = 0
            times[:] = 0.0
        coil = acceptedCoilAt(schedule, t)
        if coil is not None:
            sums[coil] += sample.strength
            counts[coil] += 1
            times[coil] += t
    if current is not None and np.all(counts > 0):
        yield _buildFrame(current, schedule, sums, counts, times, clock)
    if late:
        debug("Dropped {} samples that arrived after their cycle".format(late))


def filterFrames(frames, hold_last=False):
    """
    Keep the frames the positioning pipeline can use.  Sync-lost frames are
    always dropped.  Incomplete frames are dropped, or with hold_last their
    missing entries are filled from the last usable frame (and Frame.held is
    set).
    """
    last = None
    for frame in frames:
        if frame.sync_lost:
            continue
        if frame.complete:
            last = frame
            yield frame
        elif hold_last and last is not None:
            strengths = np.where(frame.counts > 0, frame.strengths,
                last.strengths)
            filled = Frame(frame.timestamp, strengths,
                np.maximum(frame.counts, 1), frame.slot_times)
            filled.held = True
            yield filled



class TdmaSimulation(object):
    """
    Discrete-event simulation of the transmitters, the sync beacon and the
    receiver ADC.  Time in the simpy environment is transmitter time.

    The ADC oscillator runs drift_ppm fast, and every reading is labelled with
    the receiver clock, i.e. transmitter time plus the clock error.  run()
    returns, for every ADC tick, the transmitter time, the receiver
    timestamp and the coil actually driven (-1 for none).
    """


    def __init__(self, schedule, clock=None, rng=None):
        self.schedule = schedule
        self.clock = clock or ClockModel()
        self.rng = rng
        self.active = None
        self.resyncs = 0


    def _transmitters(self, env):
        schedule = self.schedule
        window = 0
        while True:
            self.active = window % schedule.n_coils
            yield env.timeout(schedule.activation_ms)
            self.active = None
            if schedule.guard_ms > 0:
                yield env.timeout(schedule.guard_ms)
            window += 1


    def _sync(self, env):
        interval = self.clock.resync_interval_ms
        while True:
            yield env.timeout(interval)
            self.clock = applyResync(self.clock, env.now, self.rng)
            self.resyncs += 1


    def _adc(self, env, ticks):
        period = self.schedule.sample_period_ms / (1.0 + self.clock.drift_rate)
        while True:
            active = -1 if self.active is None else self.active
            ticks.append((env.now, env.now + self.clock.errorAt(env.now),
                active))
            yield env.timeout(period)


    def run(self, duration_ms):
        env = simpy.Environment()
        ticks = []
        # Creation order is the order of same-time events: the transmitters
        # switch before the ADC reads
        env.process(self._transmitters(env))
        if self.clock.resync_interval_ms:
            env.process(self._sync(env))
        env.process(self._adc(env, ticks))
        env.run(until=duration_ms)
        debug("TDMA simulation: {} ticks, {} resyncs in {} ms".format(
            len(ticks), self.resyncs, duration_ms), 2)
        if not ticks:
            empty = np.zeros(0)
            return empty, empty, np.zeros(0, dtype=int)
        true_times, rx_times, coils = zip(*ticks)
        return (np.array(true_times), np.array(rx_times),
            np.array(coils, dtype=int))
