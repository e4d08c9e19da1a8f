# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Base class of all commands.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import argparse
import importlib

class UsageError(Exception):
  """Bad command line (exit status 1)."""

  def __init__(self,msg,usage=None):
    super().__init__(msg)
    self.usage = usage

class ArgParser(argparse.ArgumentParser):
  """ArgumentParser raising UsageError instead of exiting."""

  def error(self,message):
    raise UsageError(f"{self.prog}: {message}",self.format_usage())

class Command:

  # cache-objects
  _cmd_obj = {}
  _cmd_list = []

  # --- map command-names to modules and classes   ---------------------------

  @staticmethod
  def module_name(name):
    """ gen-data -> gen_data """
    return name.replace('-','_')

  @staticmethod
  def class_name(name):
    """ gen-data -> GenData """
    return ''.join(part.capitalize() for part in name.replace('_','-').split('-'))

  # --- return command-object (create if not already cached)    --------------

  @classmethod
  def create(cls,name,shell):
    """ create an instance of the command """
    if name not in Command.all_commands():
      raise UsageError(f"unknown command '{name}'")
    if not name in Command._cmd_obj:
      cmdmodule = importlib.import_module(
        f".{Command.module_name(name)}",__package__)
      obj = getattr(cmdmodule,Command.class_name(name))(shell)
      Command._cmd_obj[name] = obj
    obj = Command._cmd_obj[name]
    obj.shell = shell
    return obj

  # --- return list of all commands   ----------------------------------------

  @classmethod
  def all_commands(cls):
    """ return list of available commands """
    if not len(Command._cmd_list):
      from relact import commands
      import pkgutil
      Command._cmd_list = sorted(
         mod.name.replace('_','-') for mod in
             pkgutil.iter_modules(commands.__path__)
                if mod.name != "command")
    return Command._cmd_list

  # --- constructor   --------------------------------------------------------

  def __init__(self,shell,name):
    """ constructor """
    self.shell  = shell
    self._name  = name
    self._create_argparser()

  # --- create argparser from comments within run()   ------------------------

  def _create_argparser(self):
    doc_lines = getattr(self, "run").__doc__.expandtabs().splitlines()
    if not doc_lines[0]:
      doc_lines.pop(0)
      doc_lines[0] = "\n"+doc_lines[0]
    if '' in doc_lines:
      blank_idx = doc_lines.index('')
      usage = doc_lines[:blank_idx]
      description = doc_lines[blank_idx+1:]
    else:
      usage = doc_lines
      description = []
    self.parser = ArgParser(
        prog=self._name,
        usage='\n'.join(usage),
        description='\n'.join(description),
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    self.add_args()

  # --- add arguments to parser   --------------------------------------------

  def add_args(self):
    """ Add arguments to parser. Must be implemented by subclass """
    pass

  # --- parse arguments   ----------------------------------------------------

  def parse(self,args):
    return self.parser.parse_args(args)

  # --- run command   --------------------------------------------------------

  def run(self,args):
    """ Run command. Must be implemented by subclass """
    pass
