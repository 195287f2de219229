"""
Configuration settings are read in this order:

1) ~/.magtrack
2) A config file specified by the environment variable $MAGTRACK_CONFIG
3) A config file specified by the command-line argument --config FILE
4) Command-line arguments.

Any arguments specified in more than one place will be overwritten by the value
of the last place the setting is seen.  So, for example, if a noise level is
set in ~/.magtrack and again on the command line, the command line wins.
"""

import argparse
import configparser
import copy
import logging
import os
import sys
from textwrap import dedent

# Used for debugging output in cmdline, since we can't do debug output here.
files_loaded = []

COMMANDS = ['simulate', 'calibrate', 'track', 'evaluate', 'range-test',
    'geometry-study', 'benchmark']

# Input files each command can't do without.  calibrate takes either a
# samples/truth pair, a pairs file or a simulated sweep.
REQUIRED_INPUTS = {
    'calibrate': [('samples', 'truth'), ('pairs',), ('sweep',)],
    'track': [('samples', 'calibration')],
    'evaluate': [('estimates', 'truth')],
}

# Set the defaults in a re-usable way
default_args = argparse.Namespace(
        command            = None,  # Not in configs
        scenario           = 'whiteboard',
        layouts            = 'whiteboard,table,shelf,waist_chest,waist_v1,'
                             'waist_v2,waist_v3',
        seed               = 42,
        duration_s         = 60.0,
        window             = 5,
        noise_sigma        = 5.0,
        truth_sigma        = None,  # None: the scenario's own value
        drift_ppm          = 0.0,
        clock_offset_ms    = 0.0,
        resync_interval_ms = 10000.0,
        jitter_ms          = 0.0,
        response           = 'linear',
        tolerance_ms       = None,  # None: half the frame period
        sweep_start        = 0.1,
        sweep_stop         = 2.5,
        sweep_step         = 0.05,
        sweep              = False,
        grid               = 5,
        samples            = None,
        truth              = None,
        calibration        = None,
        estimates          = None,
        pairs              = None,
        out_dir            = '.',
        format             = 'csv',
        processes          = 1,
        termcolor          = None,
        notermcolor        = None,
        help               = False, # Not in configs
        version            = False,
        logging            = False,
        debug              = 0,
        verbose            = 1,
        config             = None,  # Not in configs
        completion_file    = False,
        options            = False,
        # These are not really options, they are added later for convenience
        parser             = None,
        store_opt          = None,
        )


class StoreOpt():
    """
    Helper class for storing lists of the options themselves to hand out to the
    shell completion scripts.
    """


    def __init__(self):
        self.options = []


    def __call__(self, action):
        self.options.extend(action.option_strings[0:2])



def parseArguments(argv=None):
    """
    I parse arguments in argv (default sys.argv) and return the args object.
    The parser itself is available as args.parser.

    Adds the following members to args:
        parser    = the parser object
        store_opt = the StoreOpt object
    """
    store_opt = StoreOpt()
    parser = argparse.ArgumentParser(
            prog='magtrack',
            usage='%(prog)s [options] command',
            add_help=False,
            description=dedent(
                """
                Magtrack simulates, calibrates and evaluates 3D hand tracking
                with oscillating magnetic fields.
                """.rstrip()),
            epilog=dedent(
                """
                COMMANDS

                  simulate        Simulate a run and a calibration sweep: samples.csv,
                                  truth.csv, truth_clean.csv, scenario.json,
                                  calibration_pairs.csv
                  calibrate       Fit strength-to-distance lines: calibration.json
                  track           Estimate positions: estimates.csv, distances.csv
                  evaluate        Per-axis MAE(Std) of estimates against truth
                  range-test      Strength against distance along each coil axis
                  geometry-study  Noise amplification of coil layouts per axis
                  benchmark       simulate, calibrate, track and evaluate layouts

                ENABLING SHELL COMPLETION

                  To enable bash- or zsh-completion, add the line below to the end of your
                  .bashrc or .zshrc file (or equivalent config file):

                    which magtrack >& /dev/null && source "$( magtrack --completion-file )"

                CONFIG FILES

                  Magtrack will look for and process three config files if found:
                  1) $HOME/.magtrack
                  2) $MAGTRACK_CONFIG
                  3) A file specified with "--config FILE"

                  Config file format is simply "option = value" on separate lines.  "option" is
                  the same as the long options above, just without the "--".

                  Example:

                    scenario    = table
                    noise-sigma = 1.5
                    out-dir     = runs/table
                """.rstrip()),
            formatter_class=argparse.RawDescriptionHelpFormatter)

    parser.add_argument('command', action='store', nargs='?',
        metavar='command',
        help="One of: {}.".format(', '.join(COMMANDS)),
        default=argparse.SUPPRESS)

    scenario_args = parser.add_argument_group("Scenario Options")
    store_opt(scenario_args.add_argument('--scenario', action='store',
        metavar='NAME_OR_FILE', help="Builtin layout name or scenario JSON "
        "file.  Default is whiteboard.", default=argparse.SUPPRESS))
    store_opt(scenario_args.add_argument('--layouts', action='store',
        metavar='LIST', help="Comma-separated layouts for geometry-study and "
        "benchmark.  Default is every builtin layout.",
        default=argparse.SUPPRESS))
    store_opt(scenario_args.add_argument('--seed', action='store', type=int,
        metavar='NUM', help="Seed for every random draw.  Default is 42.",
        default=argparse.SUPPRESS))
    store_opt(scenario_args.add_argument('--duration-s', action='store',
        type=float, metavar='SECONDS', help="Length of a simulated run.  "
        "Default is 60.", default=argparse.SUPPRESS))
    store_opt(scenario_args.add_argument('--truth-sigma', action='store',
        type=float, metavar='METERS', help="Ground truth noise.  Default is "
        "the scenario's value (0.02).", default=argparse.SUPPRESS))

    receiver_args = parser.add_argument_group("Receiver and Schedule Options")
    store_opt(receiver_args.add_argument('--noise-sigma', action='store',
        type=float, metavar='DB', help="Amplifier input noise in dB.  "
        "Default is 5.0; 0 turns noise off.", default=argparse.SUPPRESS))
    store_opt(receiver_args.add_argument('--drift-ppm', action='store',
        type=float, metavar='PPM', help="Receiver clock drift.  Default is 0.",
        default=argparse.SUPPRESS))
    store_opt(receiver_args.add_argument('--clock-offset-ms', action='store',
        type=float, metavar='MS', help="Initial receiver clock offset.  "
        "Default is 0.", default=argparse.SUPPRESS))
    store_opt(receiver_args.add_argument('--resync-interval-ms',
        action='store', type=float, metavar='MS', help="Interval between "
        "clock synchronizations, 0 for never.  Default is 10000.",
        default=argparse.SUPPRESS))
    store_opt(receiver_args.add_argument('--jitter-ms', action='store',
        type=float, metavar='MS', help="Residual clock error after a "
        "synchronization.  Default is 0.", default=argparse.SUPPRESS))
    store_opt(receiver_args.add_argument('--tolerance-ms', action='store',
        type=float, metavar='MS', help="Largest time difference when pairing "
        "estimates with truth.  Default is half the frame period.",
        default=argparse.SUPPRESS))

    pipeline_args = parser.add_argument_group("Pipeline Options")
    store_opt(pipeline_args.add_argument('--window', action='store', type=int,
        metavar='NUM', help="Smoothing window in frames, 1 for none.  Default "
        "is 5.", default=argparse.SUPPRESS))
    store_opt(pipeline_args.add_argument('--response', action='store',
        choices=['linear', 'log'], help="Calibration response: linear "
        "(d = a*s + b) or log (ln d = a*s + b).  Default is linear.",
        default=argparse.SUPPRESS))
    store_opt(pipeline_args.add_argument('--sweep-start', action='store',
        type=float, metavar='METERS', help="range-test start.  Default 0.1.",
        default=argparse.SUPPRESS))
    store_opt(pipeline_args.add_argument('--sweep-stop', action='store',
        type=float, metavar='METERS', help="range-test stop.  Default 2.5.",
        default=argparse.SUPPRESS))
    store_opt(pipeline_args.add_argument('--sweep-step', action='store',
        type=float, metavar='METERS', help="range-test step.  Default 0.05.",
        default=argparse.SUPPRESS))
    store_opt(pipeline_args.add_argument('--sweep', action='store_true',
        help="calibrate: fit on a simulated calibration sweep of the scenario "
        "(0.2 to 2.0 m, 120 pairs per coil, --seed and --noise-sigma apply) "
        "instead of input files.", default=argparse.SUPPRESS))
    store_opt(pipeline_args.add_argument('--grid', action='store', type=int,
        metavar='NUM', help="geometry-study points per workspace axis.  "
        "Default is 5.", default=argparse.SUPPRESS))

    file_args = parser.add_argument_group("File Options")
    store_opt(file_args.add_argument('--samples', action='store',
        metavar='FILE', help="Sample CSV (timestamp_ms, coil_id, strength).",
        default=argparse.SUPPRESS))
    store_opt(file_args.add_argument('--truth', action='store',
        metavar='FILE', help="Ground truth CSV (timestamp_ms, x_m, y_m, z_m).",
        default=argparse.SUPPRESS))
    store_opt(file_args.add_argument('--calibration', action='store',
        metavar='FILE', help="Calibration JSON written by calibrate.",
        default=argparse.SUPPRESS))
    store_opt(file_args.add_argument('--estimates', action='store',
        metavar='FILE', help="Estimates CSV written by track.",
        default=argparse.SUPPRESS))
    store_opt(file_args.add_argument('--pairs', action='store',
        metavar='FILE', help="Calibration pairs CSV (coil_id, strength, "
        "distance_m).", default=argparse.SUPPRESS))
    store_opt(file_args.add_argument('--out-dir', action='store',
        metavar='DIR', help="Where output files go.  Default is the current "
        "directory.", default=argparse.SUPPRESS))
    store_opt(file_args.add_argument('--format', action='store',
        choices=['csv', 'json'], help="Report format.  Default is csv.",
        default=argparse.SUPPRESS))

    concurrency_args = parser.add_argument_group("Concurrency Options")
    store_opt(
        concurrency_args.add_argument('-s', '--processes', action='store',
            type=int, metavar='NUM',
            help="Number of processes benchmark and geometry-study use.  "
            "Default is 1.  0 means try to autodetect the number of CPUs in "
            "the system.  Output order does not depend on it.",
        default=argparse.SUPPRESS))

    format_args = parser.add_argument_group("Format Options")
    store_opt(format_args.add_argument('-t', '--termcolor', action='store_true',
        help="Force terminal colors on.  Default is to autodetect.",
        default=argparse.SUPPRESS))
    store_opt(
        format_args.add_argument('-T', '--notermcolor', action='store_true',
        help="Force terminal colors off.  Default is to autodetect.",
        default=argparse.SUPPRESS))

    out_args = parser.add_argument_group("Output Options")
    store_opt(out_args.add_argument('-h', '--help', action='store_true',
        help="Show this help message and exit.",
        default=argparse.SUPPRESS))
    store_opt(out_args.add_argument('-V', '--version', action='store_true',
        help="Print the version of Magtrack, NumPy, SciPy, SimPy and Python "
        "and exit.", default=argparse.SUPPRESS))
    store_opt(out_args.add_argument('-l', '--logging', action='store_true',
        help="Don't configure the root logger to redirect to /dev/null, "
        "enabling internal debugging output", default=argparse.SUPPRESS))
    store_opt(out_args.add_argument('-d', '--debug', action='count',
        help=("Enable internal debugging statements.  Implies --logging.  Can "
        "be specified up to three times for more debug output."),
        default=argparse.SUPPRESS))
    store_opt(out_args.add_argument('-v', '--verbose', action='count',
        help=("Verbose. Can be specified up to three times for more verbosity."),
        default=argparse.SUPPRESS))

    other_args = parser.add_argument_group("Other Options")
    store_opt(other_args.add_argument('-c', '--config', action='store',
        metavar='FILE', help="Use this config file instead of the one pointed "
        "to by environment variable MAGTRACK_CONFIG or the default ~/.magtrack",
        default=argparse.SUPPRESS))

    integration_args = parser.add_argument_group("Integration Options")
    store_opt(integration_args.add_argument('--completion-file',
        action='store_true', help=("Location of the bash- and zsh-completion "
            "file.  To enable bash- or zsh-completion, see ENABLING SHELL "
            "COMPLETION below."), default=argparse.SUPPRESS))
    store_opt(integration_args.add_argument('--options', action='store_true',
        help="Output all options.  Used by bash- and zsh-completion.",
        default=argparse.SUPPRESS))

    args = parser.parse_args(argv)

    # Add additional members
    args.parser    = parser
    args.store_opt = store_opt

    return args


class ConfigFile(object):
    """
    Filehandle wrapper that adds a "[magtrack]" section to the start of a
    config file so that users don't actually have to manually add a section.
    """


    def __init__(self, filepath):
        self.first = True
        with open(filepath) as fh:
            self.lines = fh.readlines()


    def __iter__(self):
        return self


    def __next__(self):
        if self.first:
            self.first = False
            return "[magtrack]\n"
        if self.lines:
            return self.lines.pop(0)
        raise StopIteration



def getConfig(filepath=None):
    """
    Get the Magtrack config file settings.

    All available config files are read.  If settings are in multiple configs,
    the last value encountered wins.  Values specified on the command-line take
    precedence over all config file settings.

    Returns: A ConfigParser object.
    """
    parser = configparser.ConfigParser()

    filepaths = []
    # Lowest priority goes first in the list
    home = os.getenv("HOME")
    if home:
        default_filepath = os.path.join(home, ".magtrack")
        if os.path.isfile(default_filepath):
            filepaths.append(default_filepath)

    # Medium priority
    env_filepath = os.getenv("MAGTRACK_CONFIG")
    if env_filepath and os.path.isfile(env_filepath):
        filepaths.append(env_filepath)

    # Highest priority
    if filepath and os.path.isfile(filepath):
        filepaths.append(filepath)

    if filepaths:
        global files_loaded
        files_loaded = filepaths
        for filepath in filepaths:
            parser.read_file(ConfigFile(filepath))

    return parser


def _usageError(args, message):
    if args.parser:
        args.parser.print_usage(sys.stderr)
    sys.stderr.write("magtrack: error: {}\n".format(message))
    args.shouldExit = True
    args.exitCode = 2
    return args


def checkInputs(args):
    """
    Return a message describing what is wrong with the input files and output
    directory args refers to, or None if they are usable.
    """
    for name in ('samples', 'truth', 'calibration', 'estimates', 'pairs'):
        path = getattr(args, name)
        if path and not os.path.isfile(path):
            return "--{} {}: no such file".format(name, path)
    options = REQUIRED_INPUTS.get(args.command)
    if options and not any(all(getattr(args, name) for name in names)
            for names in options):
        return "{} needs {}".format(args.command, ' or '.join(
            ' and '.join('--' + name for name in names) for names in options))
    out_dir = args.out_dir
    if os.path.exists(out_dir):
        if not os.path.isdir(out_dir) or not os.access(out_dir, os.W_OK):
            return "--out-dir {}: not a writable directory".format(out_dir)
    else:
        parent = os.path.dirname(os.path.abspath(out_dir))
        while not os.path.exists(parent):
            parent = os.path.dirname(parent)
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            return "--out-dir {}: can't be created".format(out_dir)
    return None


def mergeConfig(args):
    """
    I take in a namespace created by parseArguments() and merge in options
    from configuration files.  The config items only replace argument items
    that are set to default value.

    Returns: I return a new argparse.Namespace, adding members:
        shouldExit    = default False
        exitCode      = default 0
    """
    config = getConfig(getattr(args, 'config', default_args.config))
    new_args = copy.deepcopy(default_args) # Default by default!

    for name, default_value in dict(default_args._get_kwargs()).items():
        # Config options overwrite default options
        config_getter = None
        if name in ['termcolor', 'notermcolor', 'logging', 'version', 'sweep',
                'options', 'completion_file']:
            config_getter = config.getboolean
        elif name in ['seed', 'window', 'grid', 'processes', 'debug',
                'verbose']:
            config_getter = config.getint
        elif name in ['duration_s', 'noise_sigma', 'truth_sigma', 'drift_ppm',
                'clock_offset_ms', 'resync_interval_ms', 'jitter_ms',
                'tolerance_ms', 'sweep_start', 'sweep_stop', 'sweep_step']:
            config_getter = config.getfloat
        elif name in ['scenario', 'layouts', 'response', 'samples', 'truth',
                'calibration', 'estimates', 'pairs', 'out_dir', 'format']:
            config_getter = config.get
        elif name in ['command', 'help', 'config']:
            pass # Some options only make sense coming on the command-line.
        elif name in ['store_opt', 'parser']:
            pass # These are convenience objects, not actual settings
        else:
            raise NotImplementedError(name)

        if config_getter:
            try:
                config_value = config_getter('magtrack', name.replace('_','-'))
                setattr(new_args, name, config_value)
            except (configparser.NoSectionError, configparser.NoOptionError):
                pass
            except ValueError as err:
                new_args.parser = getattr(args, 'parser', None)
                return _usageError(new_args, "config setting {}: {}".format(
                    name.replace('_', '-'), err))

        # Command-line values overwrite defaults and config values when
        # specified
        args_value = getattr(args, name, 'unspecified')
        if args_value != 'unspecified':
            setattr(new_args, name, args_value)

    new_args.shouldExit = False
    new_args.exitCode = 0

    # Help?
    if new_args.help:
        new_args.parser.print_help()
        new_args.shouldExit = True
        return new_args

    # Did we just print the version?
    if new_args.version:
        from magtrack.version import pretty_version
        sys.stdout.write(pretty_version()+'\n')
        new_args.shouldExit = True
        return new_args

    # Handle logging options
    if new_args.debug:
        logging.basicConfig(
                level=logging.DEBUG,
                format="%(asctime)s %(levelname)9s %(message)s",
                datefmt="%Y-%m-%d %H:%M:%S")
    elif not new_args.logging:
        logging.basicConfig(filename=os.devnull)

    # Disable termcolor?
    if new_args.notermcolor:
        new_args.termcolor = False

    # Shell completion doesn't need a command
    if new_args.completion_file or new_args.options:
        return new_args

    if not new_args.command:
        return _usageError(new_args, "a command is required, one of: {}"
            .format(', '.join(COMMANDS)))
    if new_args.command not in COMMANDS:
        return _usageError(new_args, "unknown command {!r}, one of: {}".format(
            new_args.command, ', '.join(COMMANDS)))

    problem = checkInputs(new_args)
    if problem:
        return _usageError(new_args, problem)

    return new_args
