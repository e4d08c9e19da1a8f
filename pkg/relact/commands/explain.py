# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Implement 'explain' command.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

from relact.numerics import InvalidArgumentError
from relact.datagen import load_dataset
from relact.trainer import load_model
from relact.explain import explain_video, save_trace, plot_trace

from .command import Command

def _context_videos(dataset,samples):
  """ training videos pool the bank context; all videos if there is no split """
  try:
    return dataset.split('train',samples) or samples
  except InvalidArgumentError:
    return samples

class Explain(Command):

  # --- constructor   --------------------------------------------------------

  def __init__(self,shell):
    """ constructor """
    super().__init__(shell,"explain")

  # --- add arguments to parser   --------------------------------------------

  def add_args(self):
    """ Add arguments to parser. """

    self.parser.add_argument(
      '-o', '--out',
      dest='out',
      help='trace file (JSON)'
    )
    self.parser.add_argument(
      '--plot',
      dest='plot',
      help='timeline of the selected tokens (svg, pdf or png)'
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
    self.parser.add_argument(
      'video_id',
      metavar='VIDEO_ID',
      help='id of the video to explain'
    )

  # --- run command   --------------------------------------------------------

  def run(self,args):
    """
    explain [-o TRACE] [--plot FILE] CHECKPOINT DATA_DIR VIDEO_ID

      Predict the actions of one video with the video branch and label
      each retained relation token with its nearest semantic triple.
    """
    args = self.parse(args)
    dataset = load_dataset(args.data_dir)
    samples = dataset.load_all()
    sample = dataset.get(args.video_id)
    model, _ = load_model(args.checkpoint)
    trace = explain_video(model,sample,meta=dataset.meta,
                          context_samples=_context_videos(dataset,samples))

    self.shell.print(f"{trace.video_id}: {', '.join(trace.predicted)}")
    for tok in trace.tokens:
      self.shell.print(f"  t={tok.t} k={tok.k} frame={tok.frame:3d}  "
                       f"{tok.label:40s} d={tok.distance:.3f}")
    for slot in trace.transitions:
      if len(slot['sequence']) > 1:
        self.shell.print(f"  slot {slot['k']}: {' -> '.join(slot['sequence'])}")
    if args.out:
      save_trace(args.out,trace)
    if args.plot:
      plot_trace(trace,args.plot,model.T,model.K)
