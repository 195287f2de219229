import unittest

import numpy as np

from magtrack.exceptions import ParameterError
from magtrack.receiver import RawSample
from magtrack.scheduler import (ClockModel, Frame, TdmaSchedule,
    TdmaSimulation, acceptedCoilAt, activeCoilAt, applyResync, assembleFrames,
    filterFrames)


def gridSamples(start, stop, step=6.0, strength=None):
    """
    Samples every step ms over [start, stop), each carrying coil id + 1 (or a
    fixed strength) as its value.
    """
    schedule = TdmaSchedule(6)
    samples = []
    for t in np.arange(start, stop, step):
        coil = activeCoilAt(schedule, t)
        value = strength if strength is not None else (coil or 0) + 1.0
        samples.append(RawSample(float(t), -1 if coil is None else coil,
            value))
    return samples


def misattributions(schedule, rx_times, true_coils):
    count = 0
    for rx, truth in zip(rx_times, true_coils):
        accepted = acceptedCoilAt(schedule, rx)
        if accepted is not None and accepted != truth:
            count += 1
    return count



class TestTdmaSchedule(unittest.TestCase):


    def test_defaults(self):
        """
        Six coils in 70 ms windows make a 420 ms cycle with a 20 ms guard
        """
        schedule = TdmaSchedule(6)
        self.assertEqual(schedule.cycle_ms, 420.0)
        self.assertEqual(schedule.guard_ms, 20.0)
        self.assertEqual(schedule.tolerance_ms, 10.0)
        self.assertEqual(schedule.acceptWindow(), (10.0, 40.0))
        self.assertAlmostEqual(schedule.sample_period_ms, 5.9988, places=4)


    def test_validation(self):
        """
        Impossible schedules are refused
        """
        self.assertRaises(ParameterError, TdmaSchedule, 0)
        self.assertRaises(ParameterError, TdmaSchedule, 6, 80.0, 70.0)
        self.assertRaises(ParameterError, TdmaSchedule, 6, adc_rate_hz=0)
        self.assertRaises(ParameterError, TdmaSchedule, 6, settle_ms=45.0)



class TestActiveCoil(unittest.TestCase):


    def test_activeCoilAt(self):
        """
        Coils take turns and guard intervals have no coil
        """
        schedule = TdmaSchedule(6)
        self.assertEqual(activeCoilAt(schedule, 0), 0)
        self.assertEqual(activeCoilAt(schedule, 49.9), 0)
        self.assertEqual(activeCoilAt(schedule, 50), None)
        self.assertEqual(activeCoilAt(schedule, 69.9), None)
        self.assertEqual(activeCoilAt(schedule, 70), 1)
        self.assertEqual(activeCoilAt(schedule, 355), 5)
        self.assertEqual(activeCoilAt(schedule, 420), 0)


    def test_negativeTime(self):
        """
        Time before the schedule starts is an error
        """
        self.assertRaises(ParameterError, activeCoilAt, TdmaSchedule(6), -1)


    def test_acceptedCoilAt(self):
        """
        Only the steady middle of an activation is accepted
        """
        schedule = TdmaSchedule(6)
        self.assertEqual(acceptedCoilAt(schedule, 5), None)
        self.assertEqual(acceptedCoilAt(schedule, 10), 0)
        self.assertEqual(acceptedCoilAt(schedule, 39.9), 0)
        self.assertEqual(acceptedCoilAt(schedule, 40), None)
        self.assertEqual(acceptedCoilAt(schedule, 95), 1)
        self.assertEqual(acceptedCoilAt(schedule, 420 + 360), 5)



class TestClock(unittest.TestCase):


    def test_errorBound(self):
        """
        The bound after a resync only counts the drift since the last one
        """
        clock = ClockModel(0, 100, 10000, 0)
        self.assertAlmostEqual(clock.errorBound(15000), 0.5)
        self.assertAlmostEqual(clock.errorBound(5000), 0.5)
        self.assertAlmostEqual(ClockModel(2.0, 100).errorBound(10000), 3.0)


    def test_errorAt(self):
        """
        The error grows linearly from the offset
        """
        clock = ClockModel(1.0, -50)
        self.assertAlmostEqual(clock.errorAt(20000), 0.0)


    def test_applyResync(self):
        """
        A resync clears the accumulated error down to the jitter
        """
        clock = ClockModel(3.0, 100, 10000, 0.2)
        synced = applyResync(clock, 10000)
        self.assertEqual(synced.offset_ms, 0.0)
        self.assertEqual(synced.synced_at_ms, 10000)
        self.assertEqual(synced.drift_ppm, 100)
        rng = np.random.default_rng(3)
        for _ in range(50):
            residual = applyResync(clock, 10000, rng).offset_ms
            self.assertLessEqual(abs(residual), 0.2)


    def test_validation(self):
        """
        Negative intervals and jitter are refused
        """
        self.assertRaises(ParameterError, ClockModel, resync_interval_ms=-1)
        self.assertRaises(ParameterError, ClockModel, jitter_ms=-1)



class TestAssembleFrames(unittest.TestCase):


    def setUp(self):
        self.schedule = TdmaSchedule(6)


    def test_twoCycles(self):
        """
        Two full cycles of samples make two complete frames
        """
        frames = list(assembleFrames(gridSamples(0, 840), self.schedule))
        self.assertEqual([f.timestamp for f in frames], [0.0, 420.0])
        for frame in frames:
            self.assertTrue(frame.complete)
            np.testing.assert_array_equal(frame.strengths,
                [1, 2, 3, 4, 5, 6])
            self.assertTrue(np.all(frame.counts >= 4))


    def test_slotTimes(self):
        """
        Slot times sit inside each coil's accepted window
        """
        frame = next(assembleFrames(gridSamples(0, 840), self.schedule))
        for coil, slot in enumerate(frame.slot_times):
            self.assertGreaterEqual(slot, coil * 70 + 10)
            self.assertLess(slot, coil * 70 + 40)
        self.assertAlmostEqual(frame.midpoint, frame.slot_times.mean())


    def test_incomplete(self):
        """
        A cycle the stream has passed is emitted even when a coil is missing
        """
        samples = [s for s in gridSamples(0, 840) if not (
            s.timestamp < 420 and s.coil_id == 5)]
        frames = list(assembleFrames(samples, self.schedule))
        self.assertEqual(len(frames), 2)
        self.assertFalse(frames[0].complete)
        self.assertEqual(frames[0].missing, [5])
        self.assertTrue(np.isnan(frames[0].strengths[5]))
        self.assertTrue(frames[1].complete)


    def test_trailingIncomplete(self):
        """
        An unfinished last cycle is held back
        """
        frames = list(assembleFrames(gridSamples(0, 600), self.schedule))
        self.assertEqual(len(frames), 1)


    def test_skippedCycles(self):
        """
        Cycles without any samples come out as empty frames
        """
        samples = gridSamples(0, 420) + gridSamples(1260, 1680)
        frames = list(assembleFrames(samples, self.schedule))
        self.assertEqual([f.timestamp for f in frames],
            [0.0, 420.0, 840.0, 1260.0])
        self.assertEqual(frames[1].missing, [0, 1, 2, 3, 4, 5])
        self.assertEqual(frames[2].missing, [0, 1, 2, 3, 4, 5])
        self.assertTrue(frames[3].complete)


    def test_lateSamples(self):
        """
        A sample stamped before the current cycle is dropped
        """
        samples = gridSamples(0, 840)
        samples.insert(75, RawSample(12.0, 0, 1000.0))
        frames = list(assembleFrames(samples, self.schedule))
        self.assertEqual(frames[0].strengths[0], 1.0)
        self.assertEqual(frames[1].strengths[0], 1.0)


    def test_empty(self):
        """
        No samples, no frames
        """
        self.assertEqual(list(assembleFrames([], self.schedule)), [])


    def test_syncLost(self):
        """
        A clock whose error bound exceeds the tolerance marks frames, one
        right at the tolerance doesn't
        """
        frames = list(assembleFrames(gridSamples(0, 840), self.schedule,
            ClockModel(offset_ms=12.0)))
        self.assertTrue(all(f.sync_lost for f in frames))
        frames = list(assembleFrames(gridSamples(0, 840), self.schedule,
            ClockModel(offset_ms=1.0)))
        self.assertFalse(any(f.sync_lost for f in frames))
        frames = list(assembleFrames(gridSamples(0, 840), self.schedule,
            ClockModel(offset_ms=10.0)))
        self.assertFalse(any(f.sync_lost for f in frames))



class TestFilterFrames(unittest.TestCase):


    def setUp(self):
        nan = float('nan')
        self.good = Frame(0, [1.0, 2.0, 3.0])
        self.partial = Frame(420, [4.0, nan, 6.0])
        self.lost = Frame(840, [1.0, 1.0, 1.0], sync_lost=True)


    def test_dropIncomplete(self):
        """
        By default only complete frames with a trusted clock survive
        """
        kept = list(filterFrames([self.good, self.partial, self.lost]))
        self.assertEqual(kept, [self.good])


    def test_holdLast(self):
        """
        hold_last fills the gaps from the previous usable frame
        """
        kept = list(filterFrames([self.good, self.partial, self.lost],
            hold_last=True))
        self.assertEqual(len(kept), 2)
        self.assertTrue(kept[1].held)
        self.assertTrue(kept[1].complete)
        np.testing.assert_array_equal(kept[1].strengths, [4.0, 2.0, 6.0])


    def test_holdLastWithoutHistory(self):
        """
        Nothing can be held before the first usable frame
        """
        self.assertEqual(list(filterFrames([self.partial], hold_last=True)),
            [])


    def test_midpointFallback(self):
        """
        A frame without slot times is placed at its timestamp
        """
        frame = Frame(840, [1.0, 2.0], slot_times=[float('nan')] * 2)
        self.assertEqual(frame.midpoint, 840.0)



class TestTdmaSimulation(unittest.TestCase):


    def test_driftWithResync(self):
        """
        Ten minutes at 100 ppm with a resync every 10 s never misattributes
        """
        schedule = TdmaSchedule(6)
        clock = ClockModel(0.0, 100.0, 10000.0, 0.0)
        simulation = TdmaSimulation(schedule, clock)
        true_times, rx_times, coils = simulation.run(605000)
        self.assertGreater(len(rx_times), 99000)
        self.assertEqual(simulation.resyncs, 60)
        self.assertEqual(misattributions(schedule, rx_times, coils), 0)
        samples = [RawSample(t, -1, 1.0) for t in rx_times]
        frames = list(assembleFrames(samples, schedule, clock))
        self.assertTrue(all(f.complete for f in frames))
        self.assertFalse(any(f.sync_lost for f in frames))
        self.assertTrue(np.all(np.diff([f.timestamp for f in frames]) ==
            420.0))


    def test_offsetBeyondTolerance(self):
        """
        A constant 15 ms clock error breaks attribution and is flagged
        """
        schedule = TdmaSchedule(6)
        clock = ClockModel(offset_ms=15.0)
        _, rx_times, coils = TdmaSimulation(schedule, clock).run(10000)
        self.assertGreater(misattributions(schedule, rx_times, coils), 0)
        samples = [RawSample(t, -1, 1.0) for t in rx_times]
        frames = list(assembleFrames(samples, schedule, clock))
        self.assertTrue(all(f.sync_lost for f in frames))


    def test_trueCoils(self):
        """
        The reported coil is the one driven at the tick's transmitter time
        """
        schedule = TdmaSchedule(6)
        true_times, _, coils = TdmaSimulation(schedule).run(2000)
        for t, coil in zip(true_times, coils):
            expected = activeCoilAt(schedule, t)
            self.assertEqual(coil, -1 if expected is None else expected)
