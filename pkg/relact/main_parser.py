# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Helper functions for the main-program.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import os
import argparse

from relact.options import Options
from relact.commands.command import ArgParser, UsageError

# --- Wrapper class for argparser   ------------------------------------------

class MainArgParser:
  """ maintain defaults and parse arguments """

  def __init__(self):
    """ constructor """
    self._set_defaults()

  # --- query program defaults from environment   ----------------------------

  def _set_defaults(self):
    """ query defaults from the environment """

    try:
      self._seed = int(os.getenv('LAIR_SEED'))
    except:
      self._seed = None

    try:
      self._threads = int(os.getenv('RELACT_THREADS'))
    except:
      self._threads = 1

  # --- create parser for main program   -------------------------------------

  def create_parser(self):
    """ create and return parser """

    self._parser = ArgParser(
        prog="relact",
        usage="%(prog)s [options] command [args]",
        description="Interpretable action recognition from relation transitions.",
        epilog=("Commands: gen-data, train, eval, explain, ablate, help. "
                "LAIR_SEED overrides every configured seed, RELACT_THREADS "
                "sets the number of torch threads.")
    )

    self._parser.add_argument(
        "-f", "--file",
        dest="filename",
        help="Specifies a file of commands to process."
    )
    self._parser.add_argument(
        "-s", "--seed",
        dest="seed",
        type=int,
        help=f"Override the seed of data, training and ablation runs "
             f"(default: {self._seed})",
        default=self._seed
    )
    self._parser.add_argument(
        "-j", "--threads",
        dest="threads",
        type=int,
        help=f"Number of torch threads (default: {self._threads})",
        default=self._threads
    )
    self._parser.add_argument(
        '-V', '--version',
        dest='version',
        action='store_true',
        help='Report the version and exit.',
        default=False
    )
    self._parser.add_argument(
        "-v", "--verbose",
        dest="verbose",
        action="store_true",
        help="Be verbose",
        default=False
    )
    self._parser.add_argument(
        "-T", "--timing",
        dest="timing",
        action="store_true",
        help="Print timing information about each command",
        default=False
    )
    self._parser.add_argument(
        "-d", "--debug",
        dest="debug",
        action="store_true",
        help="Enable debug output",
        default=False
    )
    self._parser.add_argument(
        "cmd",
        nargs=argparse.REMAINDER,
        help="Command to execute"
    )
    return self._parser

  @property
  def usage(self):
    return self._parser.format_usage()

  # --- validate and fix options   -------------------------------------------

  def parse_and_check(self,argv=None):
    """ parse, validate and fix options """

    # parse commandline
    self.options = self._parser.parse_args(argv,namespace=Options.get())

    if self.options.threads < 1:
      raise UsageError("relact: --threads must be >= 1",self.usage)
    if (not self.options.version and not self.options.filename and
        not self.options.cmd):
      raise UsageError("relact: no command given",self.usage)

    if self.options.debug:
      print(f"filename    = {self.options.filename}")
      print(f"seed        = {self.options.seed}")
      print(f"threads     = {self.options.threads}")
      print(f"Timing      = {self.options.timing}")
      print(f"Verbose     = {self.options.verbose}")
      print(f"Debug       = {self.options.debug}")
      print(f"Cmd         = [{', '.join(self.options.cmd)}]")
    return self.options
