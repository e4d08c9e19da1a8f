# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Implementation of class CmdShell. Individual commands are delegated to
# command-classes, errors are mapped to exit codes.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import sys
import shlex
import itertools
import traceback

from . import utils
from .numerics import RelactError
from .commands.command import Command, UsageError

EXIT_OK    = 0
EXIT_USAGE = 1
EXIT_DATA  = 2

# --- Helper class for errors   ----------------------------------------------

class CmdShellError(RelactError):
  """Errors that we want to report to the user and stop."""
  pass

# --- command runner   -------------------------------------------------------

class CmdShell:
  """Runs command lines (argv or a command file) and returns exit codes."""

  def __init__(self,options,stdout=None):
    self._options = options
    self.stdout = stdout or sys.stdout
    self.filename = getattr(options,'filename',None)
    self.line_num = 0
    self.timing = getattr(options,'timing',False)

  def print(self,*args, end='\n', file=None):
    """Convenience function so you don't need to remember to put the \n
    at the end of the line.
    """
    if file is None:
      file = self.stdout
    s = ' '.join(str(arg) for arg in args) + end
    file.write(s)

  # --- parse line   ---------------------------------------------------------

  def line_to_args(self,line):
    """ split a line, quoted substrings stay together """
    try:
      return shlex.split(line)
    except ValueError as err:
      raise UsageError(str(err))

  def onecmd(self,line):
    """Strip comments, split on ';' and run each command.

      Stops at the first failing command and returns its exit code.
    """
    self.line_num += 1
    comment_idx = line.find("#")
    if comment_idx >= 0:
      line = line[0:comment_idx]
    line = line.strip()
    if not line:
      return EXIT_OK

    # hide escaped semicolon from lexer
    line = line.replace('\\;','\x00')
    lexer = shlex.shlex(line)
    lexer.whitespace = ''
    for issemicolon, group in itertools.groupby(lexer, lambda x: x == ";"):
      if not issemicolon:
        single_cmd = "".join(group).replace('\x00',';')
        status = self.run_args(self.line_to_args(single_cmd))
        if status != EXIT_OK:
          return status
    return EXIT_OK

  # --- execute a single command   -------------------------------------------

  def run_args(self,args):
    """ run one command given as argument list, return exit status """
    if not args:
      return EXIT_OK
    self._options.debug and print(f"DEBUG: run_args(): {args=}")
    try:
      with utils.Timer(args[0],enabled=self.timing):
        cmdinstance = Command.create(args[0],self)
        cmdinstance.run(args[1:])
      return EXIT_OK
    except SystemExit as ex:
      # -h/--help of a command parser
      return EXIT_OK if not ex.code else EXIT_USAGE
    except UsageError as err:
      utils.print_err(err)
      if err.usage:
        utils.print_err(err.usage,end='')
      return EXIT_USAGE
    except (RelactError,OSError,KeyError) as err:
      utils.print_err(f"error: {err}")
      self._options.debug and traceback.print_exc()
      return EXIT_DATA
    except Exception as err:
      utils.print_err(f"error: {err.__class__.__name__}: {err}")
      self._options.debug and traceback.print_exc()
      return EXIT_DATA

  # --- command files   ------------------------------------------------------

  def run_file(self,filename):
    """ run one command per line of a file """
    try:
      cmd_file = open(filename)
    except OSError as err:
      utils.print_err(f"error: {err}")
      return EXIT_DATA
    with cmd_file:
      for line in cmd_file:
        try:
          status = self.onecmd(line)
        except UsageError as err:
          utils.print_err(f"{filename}:{self.line_num}: {err}")
          return EXIT_USAGE
        if status != EXIT_OK:
          utils.print_err(f"{filename}:{self.line_num}: command failed")
          return status
    return EXIT_OK
