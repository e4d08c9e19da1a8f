import json

import numpy as np
import pytest

from relact.numerics import InvalidArgumentError
from relact.datagen import default_world, generate_dataset, load_dataset
from relact.trainer import TrainConfig, train, evaluate_model
from relact.explain import SemanticBank, explain_video
from relact.ablation import (PRESETS, PRESET_ALIASES, AblationReport,
                             AblationRow, summarize, run_ablation)

# --- reports   --------------------------------------------------------------

def test_summarize():
  s = summarize([1.0,2.0,3.0,None])
  assert s['mean'] == 2.0 and s['n'] == 3
  assert s['std'] == pytest.approx(1.0)
  assert s['stderr'] == pytest.approx(1/np.sqrt(3))
  assert summarize([0.5])['std'] == 0.0
  assert summarize([None])['mean'] is None

def test_report_text_and_files(tmp_path):
  report = AblationReport('scheme',[0,1],['primary','num'])
  report.rows.append(AblationRow('none',{},[{'primary': 0.5,'num': 3.0},
                                            {'primary': 0.7,'num': None}]))
  assert report.row('none').metric('primary')['mean'] == pytest.approx(0.6)
  with pytest.raises(KeyError):
    report.row('sim')
  text = report.format_text()
  assert text.splitlines()[0] == 'ablation scheme, seeds [0, 1]'
  assert '0.6000' in text
  path = report.save(str(tmp_path))
  data = json.loads(open(path).read())
  assert data['rows'][0]['summary']['num']['n'] == 1
  assert (tmp_path / 'ablation-scheme.txt').read_text() == text + '\n'

def test_presets():
  assert [name for name, _ in PRESETS['scheme']] == [
    'none','sim','tss','xm','sim+xm','sim+tss+xm']
  assert len(PRESETS['selection']) == 4
  assert [o['semantic_source'] for _, o in PRESETS['relations']] == [
    'predicted','ground_truth']
  baseline = dict(PRESETS['scenes'])['video-only baseline']
  assert baseline['train_language'] is False
  for preset in PRESETS.values():
    for _, overrides in preset:
      TrainConfig().with_overrides(**overrides)

def test_table_names_resolve_to_presets(tiny_data,tiny_config,tmp_path):
  assert PRESET_ALIASES == {'table1': 'selection','table2': 'scheme',
                            'table3': 'scenes'}
  config = tiny_config.with_overrides(epochs=1)
  report = run_ablation('table2',tiny_data,config,seeds=[0],
                        out_dir=str(tmp_path))
  assert report.preset == 'scheme'
  assert [row.name for row in report.rows] == [n for n, _ in PRESETS['scheme']]
  assert (tmp_path / 'ablation-scheme.json').exists()

def test_unknown_preset_and_empty_seeds(tiny_data):
  with pytest.raises(InvalidArgumentError):
    run_ablation('table9',tiny_data)
  with pytest.raises(InvalidArgumentError):
    run_ablation('selection',tiny_data,seeds=[])

def test_fold_preset_on_tiny_world(tiny_data,tiny_config):
  config = tiny_config.with_overrides(epochs=1)
  report = run_ablation('scenes',tiny_data,config,seeds=[0])
  assert report.columns == ['average','variance']
  for row in report.rows:
    run = row.runs[0]
    assert 1 <= len(run['folds']) <= 5
    assert run['average'] == pytest.approx(np.mean(run['folds']))
    assert run['variance'] == pytest.approx(np.var(run['folds']))

def test_selection_preset_counts_tokens(tiny_data,tiny_config):
  config = tiny_config.with_overrides(epochs=1)
  report = run_ablation('selection',tiny_data,config,seeds=[0])
  full = report.row('DT-Former w/o S,T').runs[0]
  pruned = report.row('DT-Former').runs[0]
  assert pruned['num'] <= full['num']

# --- trend checks on the standard benchmark   -------------------------------

def _benchmark(tmp_path_factory,name,**world):
  path = tmp_path_factory.mktemp(name)
  generate_dataset(default_world(**world),600,str(path),
                   split_ratios=(500/600,0.0,100/600))
  return load_dataset(str(path))

@pytest.fixture(scope='module')
def benchmark(tmp_path_factory):
  return _benchmark(tmp_path_factory,'benchmark',noise=0.2,corruption=0.1)

@pytest.fixture(scope='module')
def noiseless(tmp_path_factory):
  return _benchmark(tmp_path_factory,'noiseless',noise=0.0,corruption=0.0)

SLOW_CONFIG = dict(epochs=50,precision='float32')
SEEDS = [0,1,2,3,4]

def _interval(summary):
  return summary['mean'] - summary['stderr'], summary['mean'] + summary['stderr']

@pytest.mark.slow
def test_end_to_end_accuracy(benchmark):
  assert len(benchmark.split('train')) == 500
  assert len(benchmark.split('test')) == 100
  passed = 0
  for seed in range(3):
    result = train(TrainConfig(seed=seed,**SLOW_CONFIG),benchmark,eval_samples=[])
    report = evaluate_model(result.model,benchmark.split('test'))
    passed += report.accuracy >= 0.9
  assert passed >= 2

@pytest.mark.slow
def test_full_scheme_beats_none(benchmark):
  report = run_ablation('scheme',benchmark,TrainConfig(**SLOW_CONFIG),seeds=SEEDS)
  none = report.row('none').metric('primary')
  full = report.row('sim+tss+xm').metric('primary')
  assert full['mean'] > none['mean']
  assert _interval(full)[0] > _interval(none)[1]

@pytest.mark.slow
def test_selection_keeps_accuracy_with_fewer_tokens(benchmark):
  report = run_ablation('selection',benchmark,TrainConfig(**SLOW_CONFIG),
                        seeds=SEEDS)
  full = report.row('DT-Former w/o S,T')
  pruned = report.row('DT-Former')
  assert pruned.metric('num')['mean'] <= 0.75*full.metric('num')['mean']
  assert (pruned.metric('primary')['mean'] >=
          full.metric('primary')['mean'] - 0.02)

@pytest.mark.slow
def test_selected_tokens_cover_planted_keys(noiseless):
  recalls = []
  for seed in SEEDS:
    result = train(TrainConfig(seed=seed,**SLOW_CONFIG),noiseless,eval_samples=[])
    recalls.append(evaluate_model(result.model,noiseless.split('test')).key_recall)
  assert summarize(recalls)['mean'] >= 0.8

@pytest.mark.slow
def test_scene_folds_favour_full_scheme(benchmark):
  report = run_ablation('scenes',benchmark,TrainConfig(**SLOW_CONFIG),seeds=SEEDS)
  baseline = report.row('video-only baseline')
  full = report.row('full scheme')
  assert all(len(run['folds']) == 5 for run in baseline.runs + full.runs)
  assert full.metric('variance')['mean'] <= baseline.metric('variance')['mean']

@pytest.mark.slow
def test_explanations_recover_planted_transitions(noiseless):
  result = train(TrainConfig(**SLOW_CONFIG),noiseless,eval_samples=[])
  meta = noiseless.meta
  bank = SemanticBank.from_model(result.model,meta,noiseless.split('train'))
  rules = {rule.action: rule for rule in meta.rules}
  test = noiseless.split('test')
  with_rule, key_total, key_right = 0, 0, 0
  for sample in test:
    trace = explain_video(result.model,sample,bank,meta)
    rule = rules[meta.actions[sample.labels[0]]]
    with_rule += trace.has_transition(rule.before,rule.after)
    keys = {tuple(key) for key in sample.key_tokens}
    for tok in trace.tokens:
      if (tok.frame,tok.k) not in keys:
        continue
      key_total += 1
      f, k = tok.frame, tok.k
      key_right += (tok.subject == meta.categories[sample.subject_cat[f,k]] and
                    tok.relation == meta.relations[sample.gt_relation_cat[f,k]] and
                    tok.object == meta.categories[sample.object_cat[f,k]])
  assert with_rule / len(test) >= 0.8
  assert key_total > 0
  assert key_right / key_total >= 0.95
