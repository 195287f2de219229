import configparser
import copy
from io import StringIO
import os
import shutil
import tempfile
import unittest

from magtrack import config
from magtrack.output import MagStream



class ParseArguments(unittest.TestCase):


    def test_command(self):
        """
        The command gets parsed
        """
        args = config.parseArguments(['simulate'])
        self.assertEqual(args.command, 'simulate')


    def test_absent(self):
        """
        Arguments not specified on the command-line are not present in the args
        object.
        """
        args = config.parseArguments(['--debug'])
        self.assertEqual(getattr(args, 'debug', 'not there'), True)
        self.assertEqual(getattr(args, 'verbose', 'not there'), 'not there')
        self.assertEqual(getattr(args, 'command', 'not there'), 'not there')
        self.assertEqual(getattr(args, 'noise_sigma', 'not there'), 'not there')


    def test_types(self):
        """
        Numeric options come back as numbers
        """
        args = config.parseArguments(['track', '--noise-sigma', '0.5',
            '--window', '3', '--seed', '7'])
        self.assertEqual(args.noise_sigma, 0.5)
        self.assertEqual(args.window, 3)
        self.assertEqual(args.seed, 7)


    def test_storeOpt(self):
        """
        Every long option is collected for shell completion
        """
        args = config.parseArguments([])
        self.assertIn('--noise-sigma', args.store_opt.options)
        self.assertIn('-s', args.store_opt.options)
        self.assertIn('--processes', args.store_opt.options)



class ModifiedEnvironment(object):
    """
    I am a context manager that sets up environment variables for a test case.
    """


    def __init__(self, **kwargs):
        self.prev = {}
        self.excur = kwargs
        for k in kwargs:
            self.prev[k] = os.getenv(k)


    def __enter__(self):
        self.update_environment(self.excur)


    def __exit__(self, type, value, traceback):
        self.update_environment(self.prev)


    def update_environment(self, d):
        for k in d:
            if d[k] is None:
                if k in os.environ:
                    del os.environ[k]
            else:
                os.environ[k] = d[k]



class ConfigBase(unittest.TestCase):
    """
    I am an abstract base class that creates and destroys configuration files
    in a temporary directory with known values attached to self.
    """


    def _write_file(self, path, lines):
        with open(path, 'w') as f:
            f.writelines([x + "\n" for x in lines])


    def setUp(self):
        self.tmpd = tempfile.mkdtemp()
        self.default_filename = os.path.join(self.tmpd, ".magtrack")
        self.default_logging = False
        self.default_version = False
        self.default_termcolor = True
        self.default_seed = 11
        self._write_file(self.default_filename,
                        ["# this is a test config file for magtrack",
                         "logging = {}".format(str(self.default_logging)),
                         "version = {}".format(str(self.default_version)),
                         "scenario = {}".format(self.default_filename),
                         "seed = {}".format(self.default_seed),
                         "termcolor = {}".format(str(self.default_termcolor)),
                         ])
        self.env_filename = os.path.join(self.tmpd, "magtrack.env")
        self.env_logging = True
        self.env_noise_sigma = 0.5
        self._write_file(self.env_filename,
                        ["# this is a test config file for magtrack",
                         "logging = {}".format(str(self.env_logging)),
                         "scenario = {}".format(self.env_filename),
                         "noise-sigma = {}".format(self.env_noise_sigma),
                         ])
        self.cmd_filename = os.path.join(self.tmpd, "magtrack.cmd")
        self.cmd_logging = False
        self.cmd_window = 3
        self._write_file(self.cmd_filename,
                        ["# this is a test config file for magtrack",
                         "logging = {}".format(str(self.cmd_logging)),
                         "scenario = {}".format(self.cmd_filename),
                         "window = {}".format(self.cmd_window),
                         ])
        saved_stderr = config.sys.stderr
        config.sys.stderr = StringIO()
        self.addCleanup(setattr, config.sys, 'stderr', saved_stderr)


    def tearDown(self):
        shutil.rmtree(self.tmpd)


    def commandArgs(self, **kwargs):
        args = copy.deepcopy(config.default_args)
        args.command = 'simulate'
        args.out_dir = self.tmpd
        for name, value in kwargs.items():
            setattr(args, name, value)
        return args



class TestConfig(ConfigBase):
    """
    All variations of config file parsing works as expected.
    """


    def test_cmd_env_def(self):
        """
        Setup: --config on cmd, $MAGTRACK_CONFIG is set, $HOME/.magtrack exists
        Result: load --config
        """
        with ModifiedEnvironment(MAGTRACK_CONFIG=self.env_filename,
                HOME=self.tmpd):
            cfg = config.getConfig(self.cmd_filename)
            ae = self.assertEqual
            ae(["magtrack"],            cfg.sections())
            ae(self.cmd_filename,       cfg.get("magtrack", "scenario"))
            ae(self.cmd_window,         cfg.getint("magtrack", "window"))
            ae(self.cmd_logging,        cfg.getboolean("magtrack", "logging"))
            ae(self.env_noise_sigma,    cfg.getfloat("magtrack", "noise-sigma"))
            ae(self.default_version,    cfg.getboolean("magtrack", "version"))


    def test_cmd_noenv_nodef(self):
        """
        Setup: --config on cmd, $MAGTRACK_CONFIG unset, $HOME/.magtrack does
            not exist
        Result: load --config
        """
        os.unlink(self.env_filename)
        os.unlink(self.default_filename)
        with ModifiedEnvironment(MAGTRACK_CONFIG=None, HOME=self.tmpd):
            cfg = config.getConfig(self.cmd_filename)
            ae = self.assertEqual
            ar = self.assertRaises
            ae(["magtrack"],               cfg.sections())
            ae(self.cmd_filename,          cfg.get("magtrack", "scenario"))
            ae(self.cmd_logging,           cfg.getboolean("magtrack", "logging"))
            ar(configparser.NoOptionError, cfg.getfloat, "magtrack",
                "noise-sigma")
            ar(configparser.NoOptionError, cfg.getboolean, "magtrack",
                "version")


    def test_nocmd_env_def(self):
        """
        Setup: no --config option, $MAGTRACK_CONFIG is set, $HOME/.magtrack
            exists
        Result: load $MAGTRACK_CONFIG
        """
        os.unlink(self.cmd_filename)
        with ModifiedEnvironment(MAGTRACK_CONFIG=self.env_filename,
                HOME=self.tmpd):
            cfg = config.getConfig()
            ae = self.assertEqual
            ar = self.assertRaises
            ae(["magtrack"],               cfg.sections())
            ae(self.env_filename,          cfg.get("magtrack", "scenario"))
            ar(configparser.NoOptionError, cfg.get, "magtrack", "window")
            ae(self.env_logging,           cfg.getboolean("magtrack", "logging"))
            ae(self.default_seed,          cfg.getint("magtrack", "seed"))


    def test_nocmd_noenv_def(self):
        """
        Setup: no --config option, $MAGTRACK_CONFIG unset, $HOME/.magtrack
            exists
        Result: load $HOME/.magtrack
        """
        os.unlink(self.cmd_filename)
        os.unlink(self.env_filename)
        with ModifiedEnvironment(MAGTRACK_CONFIG=None, HOME=self.tmpd):
            cfg = config.getConfig()
            ae = self.assertEqual
            ar = self.assertRaises
            ae(["magtrack"],               cfg.sections())
            ae(self.default_filename,      cfg.get("magtrack", "scenario"))
            ar(configparser.NoOptionError, cfg.get, "magtrack", "noise-sigma")
            ae(self.default_logging,       cfg.getboolean("magtrack", "logging"))


    def test_nocmd_noenv_nodef(self):
        """
        Setup: no --config option, $MAGTRACK_CONFIG unset, no $HOME/.magtrack
        Result: empty config
        """
        os.unlink(self.default_filename)
        os.unlink(self.env_filename)
        os.unlink(self.cmd_filename)
        with ModifiedEnvironment(MAGTRACK_CONFIG=None, HOME=self.tmpd):
            cfg = config.getConfig()
            ae = self.assertEqual
            ar = self.assertRaises
            ae([], cfg.sections())
            ar(configparser.NoSectionError, cfg.get, "magtrack", "scenario")
            ar(configparser.NoSectionError, cfg.get, "magtrack", "logging")



class TestMergeConfig(ConfigBase):
    """
    Merging config files and command-line arguments works as expected.
    """


    def test_overwrite(self):
        """
        Non-default command-line argument values overwrite config values.
        """
        s = StringIO()
        gs = MagStream(s)
        saved_stdout = config.sys.stdout
        config.sys.stdout = gs
        self.addCleanup(setattr, config.sys, 'stdout', saved_stdout)
        with ModifiedEnvironment(MAGTRACK_CONFIG=self.env_filename,
                HOME=self.tmpd):
            new_args = self.commandArgs(scenario='table', noise_sigma=1.0,
                window=7, logging=True, version=True)
            new_args.config = self.cmd_filename
            computed_args = config.mergeConfig(new_args)

            self.assertEqual(computed_args.scenario, 'table')
            self.assertEqual(computed_args.noise_sigma, 1.0)
            self.assertEqual(computed_args.window, 7)
            self.assertEqual(computed_args.logging, True)
            self.assertEqual(computed_args.version, True)
            self.assertTrue(computed_args.shouldExit)
            self.assertIn('Magtrack', s.getvalue())


    def test_no_overwrite(self):
        """
        Default unspecified command-line args do not overwrite config values.
        """
        with ModifiedEnvironment(MAGTRACK_CONFIG=self.env_filename, HOME=""):
            da = self.commandArgs()
            del(da.logging)
            del(da.noise_sigma)
            computed_args = config.mergeConfig(da)
            self.assertEqual(computed_args.logging, True)
            self.assertEqual(computed_args.noise_sigma, self.env_noise_sigma)
            self.assertFalse(computed_args.shouldExit)


    def test_specified_command_line(self):
        """
        Specified command-line arguments always overwrite config file values
        """
        with ModifiedEnvironment(MAGTRACK_CONFIG=None, HOME=self.tmpd):
            new_args = self.commandArgs()
            new_args.seed = 11 # same as config, for sanity
            new_args.logging = True # different than config, not default
            del(new_args.version) # Not in arguments, should get config value
            new_args.termcolor = False # override config, set back to default
            computed_args = config.mergeConfig(new_args)
            self.assertEqual(computed_args.seed, 11)
            self.assertEqual(computed_args.logging, True)
            self.assertEqual(computed_args.version, False)
            self.assertEqual(computed_args.termcolor, False)


    def test_badConfigValue(self):
        """
        A config value of the wrong type is a usage error
        """
        self._write_file(self.cmd_filename, ["window = wide"])
        with ModifiedEnvironment(MAGTRACK_CONFIG=None, HOME=""):
            args = self.commandArgs(config=self.cmd_filename)
            del(args.window)
            computed_args = config.mergeConfig(args)
            self.assertTrue(computed_args.shouldExit)
            self.assertEqual(computed_args.exitCode, 2)
            self.assertIn('window', config.sys.stderr.getvalue())


    def test_command(self):
        """
        The command passed in makes it through mergeConfig
        """
        with ModifiedEnvironment(MAGTRACK_CONFIG=None, HOME=""):
            args = config.parseArguments(['simulate', '--out-dir', self.tmpd])
            args = config.mergeConfig(args)
            self.assertEqual(args.command, 'simulate')
            self.assertFalse(args.shouldExit)


    def test_missingCommand(self):
        """
        Without a command there is nothing to do
        """
        with ModifiedEnvironment(MAGTRACK_CONFIG=None, HOME=""):
            args = config.mergeConfig(config.parseArguments([]))
            self.assertTrue(args.shouldExit)
            self.assertEqual(args.exitCode, 2)
            self.assertIn('command is required', config.sys.stderr.getvalue())


    def test_unknownCommand(self):
        """
        A command that doesn't exist is a usage error
        """
        with ModifiedEnvironment(MAGTRACK_CONFIG=None, HOME=""):
            args = config.mergeConfig(config.parseArguments(['fly']))
            self.assertEqual(args.exitCode, 2)
            self.assertIn("unknown command 'fly'",
                config.sys.stderr.getvalue())


    def test_forgotToUpdateMerge(self):
         """
         mergeConfig raises an exception for unknown cmdline args
         """
         orig_args = copy.deepcopy(config.default_args)
         self.addCleanup(setattr, config, 'default_args', orig_args)
         config.default_args.new_option = True

         new_args = copy.deepcopy(config.default_args)

         self.assertRaises(NotImplementedError, config.mergeConfig, new_args)



class TestCheckInputs(ConfigBase):


    def test_requiredInputs(self):
        """
        Commands name the files they can't do without
        """
        args = self.commandArgs(command='track')
        self.assertEqual(config.checkInputs(args),
            "track needs --samples and --calibration")
        args = self.commandArgs(command='calibrate')
        self.assertIn('--pairs', config.checkInputs(args))


    def test_alternativeInputs(self):
        """
        calibrate is happy with a pairs file alone, or with a sweep
        """
        pairs = os.path.join(self.tmpd, 'pairs.csv')
        self._write_file(pairs, ["coil_id,strength,distance_m"])
        args = self.commandArgs(command='calibrate', pairs=pairs)
        self.assertEqual(config.checkInputs(args), None)
        args = self.commandArgs(command='calibrate', sweep=True)
        self.assertEqual(config.checkInputs(args), None)


    def test_missingFile(self):
        """
        A named input file has to exist
        """
        args = self.commandArgs(command='evaluate',
            estimates=os.path.join(self.tmpd, 'nope.csv'), truth='x')
        self.assertIn('no such file', config.checkInputs(args))


    def test_outDir(self):
        """
        The output directory may be created later, but can't be a file
        """
        args = self.commandArgs(out_dir=os.path.join(self.tmpd, 'a', 'b'))
        self.assertEqual(config.checkInputs(args), None)
        args = self.commandArgs(out_dir=self.default_filename)
        self.assertIn('not a writable directory', config.checkInputs(args))
