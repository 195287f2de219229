import os
import sys

import numpy as np

import magtrack.config as config
from magtrack import output
from magtrack.calibration import (CalibrationModel, collectPairs,
    frameToDistances, loadPairs, savePairs)
from magtrack.evaluation import (AXES, alignStreams, computeErrors,
    reportExport)
from magtrack.exceptions import (InsufficientDataError, MagtrackError,
    ParameterError, ScenarioLookupError)
from magtrack.output import Colors, MagStream, debug
from magtrack.positioning import (DistanceVector, geometryQuality,
    loadEstimates, saveEstimates, smoothTrajectory, solveStream)
from magtrack.process import runPool
from magtrack.receiver import ReceiverSpec
from magtrack.scheduler import (ClockModel, TdmaSchedule, assembleFrames,
    filterFrames)
from magtrack.simulation import (RANGE_COLUMNS, Trajectory, generateTrajectory,
    calibrationSweep, loadSamples, loadScenario, rangeRows, rangeSweep,
    simulateRun)
from magtrack import records

DISTANCE_COLUMNS = ['timestamp_ms', 'coil_id', 'distance_m', 'valid']
GEOMETRY_COLUMNS = ['scenario', 'axis', 'median', 'max', 'points',
    'degenerate_points', 'coplanar']


def buildScenario(args, name=None):
    scenario = loadScenario(name or args.scenario)
    if args.truth_sigma is not None:
        if not args.truth_sigma >= 0:
            raise ParameterError("--truth-sigma must be >= 0")
        scenario.truth_sigma = float(args.truth_sigma)
    return scenario


def buildReceiver(args):
    return ReceiverSpec(noise_sigma=args.noise_sigma)


def buildClock(args):
    return ClockModel(args.clock_offset_ms, args.drift_ppm,
        args.resync_interval_ms or None, args.jitter_ms)


def outPath(args, filename):
    if not os.path.isdir(args.out_dir):
        os.makedirs(args.out_dir)
    return os.path.join(args.out_dir, filename)


def distanceStream(model, frames):
    """
    A DistanceVector per frame.  Frames that can't be used (incomplete, sync
    lost) give a vector with every entry invalid, so the solve of that frame
    fails and shows up as a flagged row.
    """
    for frame in frames:
        if frame.sync_lost or not frame.complete:
            debug("Frame at {:.0f} ms unusable".format(frame.timestamp), 2)
            yield DistanceVector(np.full(frame.n_coils, np.nan),
                np.zeros(frame.n_coils, dtype=bool), frame.midpoint)
        else:
            yield frameToDistances(model, frame)


def fitModel(pairs, scenario, response):
    for coil_id in range(scenario.n_coils):
        if not pairs.get(coil_id):
            raise InsufficientDataError(
                "coil {}: no calibration pairs".format(coil_id))
    return CalibrationModel.fit(pairs, response)


def track(scenario, model, frames, window):
    """
    Distances, raw estimates and smoothed estimates for frames.
    """
    distances = list(distanceStream(model, frames))
    estimates = list(smoothTrajectory(solveStream(scenario.beacons(),
        distances, scenario.workspace_centre), window))
    return distances, estimates


def runPipeline(scenario, seed, duration_s, receiver, window=5,
        response='linear', clock=None, schedule=None):
    """
    simulate -> calibrate -> track -> evaluate in memory.  Returns the
    SimulatedRun, the CalibrationModel fitted on a calibration sweep, the
    smoothed estimates and the ErrorReport against the noisy ground truth.
    """
    schedule = schedule or TdmaSchedule(scenario.n_coils)
    trajectory_seed, run_seed, sweep_seed = np.random.SeedSequence(
        seed).spawn(3)
    trajectory = generateTrajectory(scenario, duration_s, trajectory_seed)
    run = simulateRun(scenario, trajectory, receiver, schedule, run_seed,
        clock)
    pairs = calibrationSweep(scenario, receiver, sweep_seed)
    model = fitModel(pairs, scenario, response)
    _, estimates = track(scenario, model, run.frames, window)
    alignment = alignStreams(estimates, run.truth, schedule.cycle_ms / 2.0)
    report = computeErrors(alignment, scenario.name)
    return run, model, estimates, report


def _simulateFrames(args):
    scenario = buildScenario(args)
    if not args.duration_s > 0:
        raise ParameterError("--duration-s must be > 0")
    schedule = TdmaSchedule(scenario.n_coils)
    trajectory_seed, run_seed, sweep_seed = np.random.SeedSequence(
        args.seed).spawn(3)
    trajectory = generateTrajectory(scenario, args.duration_s,
        trajectory_seed)
    run = simulateRun(scenario, trajectory, buildReceiver(args), schedule,
        run_seed, buildClock(args))
    return scenario, run, sweep_seed


def cmd_simulate(args, stream, colors):
    scenario, run, sweep_seed = _simulateFrames(args)
    run.saveSamples(outPath(args, 'samples.csv'))
    run.truth.save(outPath(args, 'truth.csv'))
    run.truth_clean.save(outPath(args, 'truth_clean.csv'))
    scenario.save(outPath(args, 'scenario.json'))
    pairs = calibrationSweep(scenario, buildReceiver(args), sweep_seed)
    savePairs(outPath(args, 'calibration_pairs.csv'), pairs)

    complete = sum(1 for f in run.frames if f.complete and not f.sync_lost)
    stream.writeln(colors.heading("Simulated {}".format(scenario.name)))
    rows = [
        ['duration_s', '{:g}'.format(args.duration_s)],
        ['samples', len(run.samples)],
        ['frames', len(run.frames)],
        ['usable frames', complete],
        ['saturated samples', run.saturated],
    ]
    if args.verbose > 1:
        rows.append(['misattributed samples', run.misattributions()])
    stream.table(['', ''], rows)
    if run.saturated:
        stream.writeln(stream.formatLine(colors.warning(
            "{} samples at the ADC limits".format(run.saturated)), 1))
    return 0


def cmd_calibrate(args, stream, colors):
    scenario = buildScenario(args)
    if args.pairs:
        pairs = loadPairs(args.pairs)
    elif args.sweep:
        _, _, sweep_seed = np.random.SeedSequence(args.seed).spawn(3)
        pairs = calibrationSweep(scenario, buildReceiver(args), sweep_seed)
    else:
        schedule = TdmaSchedule(scenario.n_coils)
        frames = filterFrames(assembleFrames(loadSamples(args.samples),
            schedule))
        pairs = collectPairs(frames, Trajectory.load(args.truth),
            scenario.coil_positions)
    model = fitModel(pairs, scenario, args.response)
    model.save(outPath(args, 'calibration.json'))

    stream.writeln(colors.heading("Calibration of {} coils ({})".format(
        len(model), args.response)))
    rows = []
    for coil_id in model.coil_ids:
        coil = model[coil_id]
        rows.append([coil_id, len(pairs[coil_id]), '{:.6g}'.format(coil.a),
            '{:.6g}'.format(coil.b), '{:.4f}'.format(coil.rms),
            '{:.4f}'.format(coil.r2)])

    def colorize(row, text):
        return colors.warning(text) if float(row[5]) < 0.95 else text
    stream.table(['coil', 'pairs', 'a', 'b', 'rms_m', 'r2'], rows,
        colorize=colorize)
    return 0


def cmd_track(args, stream, colors):
    scenario = buildScenario(args)
    model = CalibrationModel.load(args.calibration)
    schedule = TdmaSchedule(scenario.n_coils)
    frames = list(assembleFrames(loadSamples(args.samples), schedule))
    distances, estimates = track(scenario, model, frames, args.window)
    saveEstimates(outPath(args, 'estimates.csv'), estimates)
    records.writeCsv(outPath(args, 'distances.csv'), DISTANCE_COLUMNS,
        ([d.timestamp, coil_id, float(distance), bool(valid)]
            for d in distances for coil_id, (distance, valid) in
            enumerate(zip(d.distances, d.valid))))

    failed = sum(1 for e in estimates if not np.all(np.isfinite(e.position)))
    unconverged = sum(1 for e in estimates if not e.converged) - failed
    stream.writeln(colors.heading("Tracked {} frames".format(len(estimates))))
    stream.table(['', ''], [['solved', len(estimates) - failed],
        ['failed', failed], ['not converged', unconverged],
        ['window', args.window]])
    if failed:
        stream.writeln(stream.formatLine(colors.warning(
            "{} frames could not be solved".format(failed)), 1))
    return 0


def _reportRows(reports):
    rows = []
    for report in reports:
        reference = report.reference
        for index, row in enumerate(report.rows()):
            scenario, axis, mae, std, n = row
            note = ''
            if reference:
                note = '{:.3f}({:.3f})'.format(*reference[index])
            rows.append([scenario, axis, '{:.3f}'.format(mae),
                '{:.3f}'.format(std), n, note])
    return rows


def printReports(reports, stream, colors):

    def colorize(row, text):
        return colors.reference(text) if row[5] else text
    stream.table(['scenario', 'axis', 'mae_m', 'std_m', 'n', 'field trial'],
        _reportRows(reports), colorize=colorize)


def cmd_evaluate(args, stream, colors):
    scenario = buildScenario(args)
    estimates = loadEstimates(args.estimates)
    truth = Trajectory.load(args.truth)
    tolerance = args.tolerance_ms
    if tolerance is None:
        tolerance = TdmaSchedule(scenario.n_coils).cycle_ms / 2.0
    alignment = alignStreams(estimates, truth, tolerance)
    report = computeErrors(alignment, scenario.name)
    with open(outPath(args, 'report.' + args.format), 'w', newline='') as fh:
        fh.write(reportExport(report, args.format))

    stream.writeln(colors.heading("Tracking error, {} pairs ({} dropped)"
        .format(report.n, alignment.dropped)))
    printReports([report], stream, colors)
    return 0


def cmd_range_test(args, stream, colors):
    scenario = buildScenario(args)
    receiver = buildReceiver(args).withNoise(0.0)
    sweep = list(rangeSweep(scenario, receiver, args.sweep_start,
        args.sweep_stop, args.sweep_step))
    records.writeCsv(outPath(args, 'range_test.csv'), RANGE_COLUMNS,
        rangeRows(sweep))

    stream.writeln(colors.heading("Range test, {} coils".format(
        scenario.n_coils)))
    rows = []
    for coil_id in range(scenario.n_coils):
        curve = [(d, s) for c, d, s, _ in sweep if c == coil_id]
        reach = max([d for d, s in curve if s > 0] or [0.0])
        rows.append([coil_id, '{:.2f}'.format(reach), curve[0][1],
            curve[-1][1]])
    stream.table(['coil', 'reach_m', 'nearest', 'farthest'], rows)
    return 0


def layoutNames(args):
    names = [n.strip() for n in args.layouts.split(',') if n.strip()]
    if not names:
        raise ParameterError("--layouts names no layout")
    return names


def geometryWorker(item):
    name, grid = item
    scenario = loadScenario(name)
    return geometryQuality(scenario.beacons(), scenario.workspace, grid,
        scenario.name)


def cmd_geometry_study(args, stream, colors):
    if args.grid < 2:
        raise ParameterError("--grid must be >= 2")
    names = layoutNames(args)
    for name in names:
        loadScenario(name)
    reports = runPool(geometryWorker, [(n, args.grid) for n in names],
        args.processes)
    rows = []
    for report in reports:
        for index, axis in enumerate(AXES):
            rows.append([report.name, axis, float(report.median[index]),
                float(report.maximum[index]), report.points,
                report.degenerate_points, report.coplanar])
    records.writeCsv(outPath(args, 'geometry.csv'), GEOMETRY_COLUMNS, rows)

    stream.writeln(colors.heading("Noise amplification per axis"))
    shown = [[r[0], r[1], '{:.2f}'.format(r[2]), '{:.2f}'.format(r[3]),
        r[5], 'coplanar' if r[6] else ''] for r in rows]

    def colorize(row, text):
        return colors.warning(text) if row[4] or row[5] else text
    stream.table(['layout', 'axis', 'median', 'max', 'unresolved', ''], shown,
        colorize=colorize)
    return 0


def benchmarkWorker(item):
    name, seed, duration_s, noise_sigma, window, response = item
    scenario = loadScenario(name)
    _, _, _, report = runPipeline(scenario, seed, duration_s,
        ReceiverSpec(noise_sigma=noise_sigma), window, response)
    return report


def cmd_benchmark(args, stream, colors):
    if not args.duration_s > 0:
        raise ParameterError("--duration-s must be > 0")
    names = layoutNames(args)
    for name in names:
        loadScenario(name)
    reports = runPool(benchmarkWorker, [(n, args.seed, args.duration_s,
        args.noise_sigma, args.window, args.response) for n in names],
        args.processes)
    with open(outPath(args, 'benchmark.' + args.format), 'w',
            newline='') as fh:
        fh.write(reportExport(reports, args.format))

    stream.writeln(colors.heading("Benchmark, {} s per layout".format(
        args.duration_s)))
    printReports(reports, stream, colors)
    return 0


COMMAND_HANDLERS = {
    'simulate': cmd_simulate,
    'calibrate': cmd_calibrate,
    'track': cmd_track,
    'evaluate': cmd_evaluate,
    'range-test': cmd_range_test,
    'geometry-study': cmd_geometry_study,
    'benchmark': cmd_benchmark,
}


def main(argv=None):
    try:
        args = config.parseArguments(argv)
    except SystemExit as err:
        # argparse already printed the usage
        return err.code
    args = config.mergeConfig(args)

    if args.shouldExit:
        return args.exitCode

    if args.debug:
        output.debug_level = args.debug

    stream = MagStream(sys.stdout)
    colors = Colors(args.termcolor)

    # Location of shell completion file
    if args.completion_file:
        print(os.path.join(os.path.dirname(__file__), 'shell_completion.sh'))
        return 0

    # Option-completion for bash and zsh
    if args.options:
        print('\n'.join(sorted(args.store_opt.options)))
        return 0

    # Add debug logging for stuff that happened before this point here
    if config.files_loaded:
        debug("Loaded config file(s): {}".format(
            ', '.join(config.files_loaded)))

    try:
        return COMMAND_HANDLERS[args.command](args, stream, colors)
    except (ParameterError, ScenarioLookupError) as err:
        args.parser.print_usage(sys.stderr)
        sys.stderr.write("magtrack: error: {}\n".format(err))
        return 2
    except (MagtrackError, OSError) as err:
        sys.stderr.write("magtrack: {}\n".format(err))
        return 1



if __name__ == '__main__': # pragma: no cover
    sys.exit(main())
