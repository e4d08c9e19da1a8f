# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Implement 'gen-data' command.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

from dataclasses import replace

from relact.options import Options
from relact.datagen import WorldSpec, generate_dataset
from relact import utils

from .command import Command, UsageError

DEFAULT_SPEC = '-'

class GenData(Command):

  # --- constructor   --------------------------------------------------------

  def __init__(self,shell):
    """ constructor """
    super().__init__(shell,"gen-data")

  # --- add arguments to parser   --------------------------------------------

  def add_args(self):
    """ Add arguments to parser. """

    self.parser.add_argument(
      '-n', '--videos',
      dest='n_videos',
      type=int,
      help='number of videos (default: 600)',
      default=600
    )
    self.parser.add_argument(
      '--split',
      dest='split',
      type=float,
      nargs=3,
      metavar=('TRAIN','VAL','TEST'),
      help='split fractions (default: 0.8 0.0 0.2)',
      default=[0.8,0.0,0.2]
    )
    self.parser.add_argument(
      'spec',
      metavar='SPEC',
      help="world specification (YAML), '-' for the standard benchmark"
    )
    self.parser.add_argument(
      'out_dir',
      metavar='OUT_DIR',
      help='output directory'
    )

  # --- run command   --------------------------------------------------------

  def run(self,args):
    """
    gen-data [-n N] [--split TRAIN VAL TEST] SPEC OUT_DIR

      Generate a seeded synthetic relation-transition dataset.
      Writes meta.json, videos.jsonl and manifest.json to OUT_DIR.
    """
    args = self.parse(args)
    if args.n_videos < 1:
      raise UsageError("gen-data: --videos must be >= 1",self.parser.format_usage())
    spec = WorldSpec() if args.spec == DEFAULT_SPEC else WorldSpec.from_yaml(args.spec)
    seed = Options.get().seed
    spec = replace(spec,seed=utils.env_seed(spec.seed) if seed is None else seed)
    manifest = generate_dataset(spec.validate(),args.n_videos,args.out_dir,
                                tuple(args.split))
    splits = ', '.join(f"{name} {len(ids)}"
                       for name, ids in manifest['splits'].items())
    self.shell.print(f"wrote {manifest['n_videos']} videos to {args.out_dir} "
                     f"({splits}); spec hash {manifest['spec_hash'][:12]}")
