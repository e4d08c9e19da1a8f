# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Implement 'eval' command.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import json

from relact.datagen import load_dataset
from relact.trainer import evaluate, EVAL_MODES

from .command import Command

def format_report(report,actions=None):
  """ metrics as printable lines """
  lines = [f"mode:        {report.mode}",
           f"videos:      {report.n_videos}"]
  for name in ('accuracy','mAP','mAR','num','valid_tokens','key_recall',
               'joint_cosine'):
    value = getattr(report,name)
    if value is not None:
      lines.append(f"{name+':':12s} {value:.4f}")
  if report.per_class_ap:
    lines.append("per-class AP:")
    for c, ap in sorted(report.per_class_ap.items()):
      name = actions[c] if actions else str(c)
      lines.append(f"  {name:12s} {ap:.4f}")
  return lines

class Eval(Command):

  # --- constructor   --------------------------------------------------------

  def __init__(self,shell):
    """ constructor """
    super().__init__(shell,"eval")

  # --- add arguments to parser   --------------------------------------------

  def add_args(self):
    """ Add arguments to parser. """

    self.parser.add_argument(
      '--split',
      dest='split',
      help='dataset split (default: test)',
      default='test'
    )
    self.parser.add_argument(
      '-m', '--mode',
      dest='mode',
      choices=EVAL_MODES,
      help='video-only (default) or oracle-language',
      default='video-only'
    )
    self.parser.add_argument(
      '-o', '--out',
      dest='out',
      help='also write the report as JSON'
    )
    self.parser.add_argument(
      'checkpoint',
      metavar='CHECKPOINT',
      help='model checkpoint'
    )
    self.parser.add_argument(
      'data_dir',
      metavar='DATA_DIR',
      help='dataset directory'
    )

  # --- run command   --------------------------------------------------------

  def run(self,args):
    """
    eval [--split SPLIT] [-m MODE] [-o REPORT] CHECKPOINT DATA_DIR

      Evaluate a checkpoint on a dataset split with uniform frame sampling.
    """
    args = self.parse(args)
    dataset = load_dataset(args.data_dir)
    report = evaluate(args.checkpoint,dataset,args.split,args.mode)
    for line in format_report(report,dataset.meta.actions):
      self.shell.print(line)
    if args.out:
      with open(args.out,'w',encoding='utf-8') as out:
        json.dump(report.as_dict(),out,indent=1,sort_keys=True)
