# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Implementation of class Options. This holds a global options-object
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

class Options:
  options = None

  # defaults for code running without the command line (library use, tests)
  verbose  = False
  debug    = False
  timing   = False
  seed     = None
  threads  = 1
  filename = None

  # --- return options-object (create if not already cached)   ------------

  @classmethod
  def get(cls):
    """ return the options-instance, create if necessary  """
    if not Options.options:
      Options.options = Options()
    return Options.options

  @classmethod
  def reset(cls):
    """ forget the cached instance """
    Options.options = None
