# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Main program: parse global options and delegate to the command shell.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

"""Train, evaluate and explain relation-transition action recognizers.

  Every subcommand is implemented by a class in relact.commands. To run
  relact from the git repository, cd into the top level directory and run:
    python3 -m relact.main
"""

import sys

from relact.version import __version__
from relact.options import Options
from . import utils
from .cmdshell import CmdShell, EXIT_OK, EXIT_USAGE
from .commands.command import UsageError

# --- run according to options   ---------------------------------------------

def run(options):
  """ run the command (or command file) of options, return exit status """
  if options.version:
    print(__version__)
    return EXIT_OK

  utils.set_threads(options.threads)
  shell = CmdShell(options)
  if options.filename:
    return shell.run_file(options.filename)
  return shell.run_args(options.cmd)

def cli(argv=None):
  """ parse argv (without program name), run, return exit status """
  from relact.main_parser import MainArgParser
  Options.reset()
  parser = MainArgParser()
  parser.create_parser()
  try:
    options = parser.parse_and_check(argv)
  except UsageError as err:
    utils.print_err(err)
    if err.usage:
      utils.print_err(err.usage,end='')
    return EXIT_USAGE
  except SystemExit as ex:
    return EXIT_OK if not ex.code else EXIT_USAGE
  return run(options)

# --- main-function   --------------------------------------------------------

def main():
  try:
    status = cli(sys.argv[1:])
  except KeyboardInterrupt:
    print()
    status = EXIT_USAGE
  sys.exit(status)

# --- main program   ---------------------------------------------------------

if __name__ == "__main__":
  # this indirection is necessary because of setuptools
  main()
