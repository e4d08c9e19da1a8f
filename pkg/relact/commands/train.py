# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Implement 'train' command.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

from relact.options import Options
from relact import utils
from relact.datagen import load_dataset
from relact.trainer import TrainConfig, train, format_epoch

from .command import Command

def load_config(path,**overrides):
  """ TrainConfig from YAML ('-' for defaults) plus command line overrides """
  config = TrainConfig() if path == '-' else TrainConfig.from_yaml(path)
  if path == '-':
    overrides.setdefault('seed',utils.env_seed(config.seed))
  seed = Options.get().seed
  if seed is not None:
    overrides['seed'] = seed
  overrides = {k: v for k, v in overrides.items() if v is not None}
  return config.with_overrides(**overrides)

class Train(Command):

  # --- constructor   --------------------------------------------------------

  def __init__(self,shell):
    """ constructor """
    super().__init__(shell,"train")

  # --- add arguments to parser   --------------------------------------------

  def add_args(self):
    """ Add arguments to parser. """

    self.parser.add_argument(
      '-e', '--epochs',
      dest='epochs',
      type=int,
      help='override the number of epochs of CONFIG'
    )
    self.parser.add_argument(
      '-p', '--precision',
      dest='precision',
      choices=['float32','float64'],
      help='override the precision of CONFIG'
    )
    self.parser.add_argument(
      'config',
      metavar='CONFIG',
      help="training configuration (YAML), '-' for defaults"
    )
    self.parser.add_argument(
      'data_dir',
      metavar='DATA_DIR',
      help='dataset directory created by gen-data'
    )
    self.parser.add_argument(
      'out_dir',
      metavar='OUT_DIR',
      help='directory for model.ckpt and metrics.jsonl'
    )

  # --- run command   --------------------------------------------------------

  def run(self,args):
    """
    train [-e EPOCHS] [-p PRECISION] CONFIG DATA_DIR OUT_DIR

      Train both branches end to end. Writes one metrics record per
      epoch to OUT_DIR/metrics.jsonl and the final OUT_DIR/model.ckpt.
    """
    args = self.parse(args)
    config = load_config(args.config,epochs=args.epochs,
                         precision=args.precision)
    dataset = load_dataset(args.data_dir)
    result = train(config,dataset,args.out_dir)
    if result.history:
      self.shell.print(format_epoch(result.history[-1]))
    self.shell.print(f"checkpoint: {result.checkpoint}")
