# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Ablation presets: selection paths, learning-scheme losses, scene-held-out
# folds and the semantic source, each trained over several seeds and
# summarized in a comparison report.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import os
import json
from dataclasses import dataclass, field

import numpy as np

from .numerics import InvalidArgumentError
from .trainer import TrainConfig, train, evaluate_model
from . import utils

NO_SCHEME = {'use_sim': False,'use_tss': False,'use_xm': False}

PRESETS = {
  'selection': [
    ('DT-Former w/o S,T', {'spatial_select': False,'temporal_select': False}),
    ('DT-Former w/o S',   {'spatial_select': False}),
    ('DT-Former w/o T',   {'temporal_select': False}),
    ('DT-Former',         {}),
  ],
  'scheme': [
    ('none',        dict(NO_SCHEME)),
    ('sim',         dict(NO_SCHEME,use_sim=True)),
    ('tss',         dict(NO_SCHEME,use_tss=True)),
    ('xm',          dict(NO_SCHEME,use_xm=True)),
    ('sim+xm',      dict(NO_SCHEME,use_sim=True,use_xm=True)),
    ('sim+tss+xm',  {}),
  ],
  'scenes': [
    ('video-only baseline', dict(NO_SCHEME,train_language=False)),
    ('full scheme',         {}),
  ],
  'relations': [
    ('prediction', {'semantic_source': 'predicted'}),
    ('label',      {'semantic_source': 'ground_truth'}),
  ],
}

# older names of the first three presets
PRESET_ALIASES = {'table1': 'selection','table2': 'scheme','table3': 'scenes'}

DEFAULT_SEEDS = (0,1,2,3,4)

# --- report   ---------------------------------------------------------------

def summarize(values):
  """ mean, sample standard deviation and standard error """
  values = [v for v in values if v is not None]
  if not values:
    return {'mean': None,'std': None,'stderr': None,'n': 0}
  arr = np.asarray(values,dtype=np.float64)
  std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
  return {'mean': float(arr.mean()),'std': std,
          'stderr': std/np.sqrt(len(arr)),'n': len(arr)}

@dataclass
class AblationRow:
  name: str
  overrides: dict
  runs: list = field(default_factory=list)      # one metrics dict per seed

  def metric(self,name):
    return summarize([run.get(name) for run in self.runs])

@dataclass
class AblationReport:
  preset: str
  seeds: list
  columns: list
  rows: list = field(default_factory=list)

  def row(self,name):
    for row in self.rows:
      if row.name == name:
        return row
    raise KeyError(name)

  def to_dict(self):
    return {
      'preset': self.preset,
      'seeds': list(self.seeds),
      'columns': list(self.columns),
      'rows': [{'name': r.name,'overrides': r.overrides,'runs': r.runs,
                'summary': {c: r.metric(c) for c in self.columns}}
               for r in self.rows],
    }

  def format_text(self):
    width = max(len(r.name) for r in self.rows) + 2
    header = 'setting'.ljust(width) + ''.join(f"{c:>20s}" for c in self.columns)
    lines = [f"ablation {self.preset}, seeds {list(self.seeds)}",header,
             '-'*len(header)]
    for row in self.rows:
      cells = []
      for c in self.columns:
        s = row.metric(c)
        cells.append(f"{'-':>20s}" if s['mean'] is None else
                     f"{s['mean']:>11.4f} +-{s['stderr']:6.4f}")
      lines.append(row.name.ljust(width) + ''.join(cells))
    return '\n'.join(lines)

  def save(self,out_dir):
    utils.ensure_dir(out_dir)
    json_path = os.path.join(out_dir,f"ablation-{self.preset}.json")
    with open(json_path,'w',encoding='utf-8') as out:
      json.dump(self.to_dict(),out,indent=1,sort_keys=True)
    with open(os.path.join(out_dir,f"ablation-{self.preset}.txt"),'w',
              encoding='utf-8') as out:
      out.write(self.format_text() + '\n')
    return json_path

# --- runs   -----------------------------------------------------------------

def _run_metrics(report):
  return {'primary': report.primary,'accuracy': report.accuracy,
          'mAP': report.mAP,'mAR': report.mAR,'num': report.num,
          'key_recall': report.key_recall,'joint_cosine': report.joint_cosine}

def _fit_and_score(config,dataset,train_samples,test_samples):
  result = train(config,dataset,None,train_samples,eval_samples=[])
  return evaluate_model(result.model,test_samples,dataset.meta,
                        batch_size=config.eval_batch_size)

def run_split_preset(preset,dataset,config,seeds,samples):
  train_samples = dataset.split(config.train_split,samples)
  test_samples  = dataset.split(config.eval_split,samples)
  report = AblationReport(preset,seeds,
                          ['primary','mAR','num','key_recall','joint_cosine'])
  for name, overrides in PRESETS[preset]:
    row = AblationRow(name,overrides)
    for seed in seeds:
      cfg = config.with_overrides(seed=seed,**overrides)
      metrics = _run_metrics(_fit_and_score(cfg,dataset,train_samples,
                                            test_samples))
      metrics['seed'] = seed
      row.runs.append(metrics)
      utils.vprint(f"{preset} | {name} | seed {seed}: "
                   f"primary {metrics['primary']:.4f}  num {metrics['num']:.2f}")
    report.rows.append(row)
  return report

def run_fold_preset(preset,dataset,config,seeds,samples):
  """average and variance of the primary metric over scene-held-out folds"""
  folds = []
  for i, (train_s, test_s) in enumerate(dataset.folds(samples)):
    if train_s and test_s:
      folds.append((train_s,test_s))
    else:
      utils.warn(f"fold {i} has an empty train or test set, skipped")
  if not folds:
    raise InvalidArgumentError("no usable scene-held-out fold")
  report = AblationReport(preset,seeds,['average','variance'])
  for name, overrides in PRESETS[preset]:
    row = AblationRow(name,overrides)
    for seed in seeds:
      cfg = config.with_overrides(seed=seed,**overrides)
      scores = [_fit_and_score(cfg,dataset,train_s,test_s).primary
                for train_s, test_s in folds]
      row.runs.append({'seed': seed,'folds': scores,
                       'average': float(np.mean(scores)),
                       'variance': float(np.var(scores))})
      utils.vprint(f"{preset} | {name} | seed {seed}: average "
                   f"{row.runs[-1]['average']:.4f}  variance "
                   f"{row.runs[-1]['variance']:.5f}")
    report.rows.append(row)
  return report

def run_ablation(preset,dataset,config=None,seeds=DEFAULT_SEEDS,out_dir=None):
  """Train every setting of a preset once per seed and compare them."""
  preset = PRESET_ALIASES.get(preset,preset)
  if preset not in PRESETS:
    raise InvalidArgumentError(
      f"unknown preset '{preset}' (choose from {', '.join(PRESETS)})")
  if not seeds:
    raise InvalidArgumentError("ablation needs at least one seed")
  config = config or TrainConfig()
  samples = dataset.load_all()
  if preset == 'scenes':
    report = run_fold_preset(preset,dataset,config,list(seeds),samples)
  else:
    report = run_split_preset(preset,dataset,config,list(seeds),samples)
  if out_dir:
    report.save(out_dir)
  return report
