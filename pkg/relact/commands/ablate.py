# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Implement 'ablate' command.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

from relact.datagen import load_dataset
from relact.ablation import PRESETS, PRESET_ALIASES, DEFAULT_SEEDS, run_ablation

from .command import Command
from .train import load_config

class Ablate(Command):

  # --- constructor   --------------------------------------------------------

  def __init__(self,shell):
    """ constructor """
    super().__init__(shell,"ablate")

  # --- add arguments to parser   --------------------------------------------

  def add_args(self):
    """ Add arguments to parser. """

    self.parser.add_argument(
      '-c', '--config',
      dest='config',
      help='base training configuration (YAML, default: built-in defaults)',
      default='-'
    )
    self.parser.add_argument(
      '-S', '--seeds',
      dest='seeds',
      type=int,
      nargs='+',
      help=f"seeds per setting (default: {' '.join(map(str,DEFAULT_SEEDS))})",
      default=list(DEFAULT_SEEDS)
    )
    self.parser.add_argument(
      '-e', '--epochs',
      dest='epochs',
      type=int,
      help='override the number of epochs'
    )
    self.parser.add_argument(
      '-o', '--out',
      dest='out_dir',
      help='directory for ablation-PRESET.json/.txt',
      default='.'
    )
    self.parser.add_argument(
      'preset',
      metavar='PRESET',
      choices=sorted(PRESETS) + sorted(PRESET_ALIASES),
      help=f"one of {', '.join(sorted(PRESETS))}"
    )
    self.parser.add_argument(
      'data_dir',
      metavar='DATA_DIR',
      help='dataset directory'
    )

  # --- run command   --------------------------------------------------------

  def run(self,args):
    """
    ablate [-c CONFIG] [-S SEED...] [-e EPOCHS] [-o OUT_DIR] PRESET DATA_DIR

      Train every setting of an ablation preset once per seed and write a
      comparison report.
        selection  token selection paths (Num and accuracy)
        scheme     the six learning-scheme settings
        scenes     scene-held-out folds, average and variance
        relations  predicted vs ground-truth relations for the language branch
      table1, table2 and table3 name the first three presets as well.
    """
    args = self.parse(args)
    config = load_config(args.config,epochs=args.epochs)
    dataset = load_dataset(args.data_dir)
    report = run_ablation(args.preset,dataset,config,args.seeds,args.out_dir)
    self.shell.print(report.format_text())
