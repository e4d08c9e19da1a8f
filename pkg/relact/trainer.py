# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Training and evaluation: configuration, frame sampling, the joint loss of
# both branches, the end-to-end training loop and video-only evaluation.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import os
from dataclasses import dataclass, field, asdict, replace, fields

import numpy as np
import torch
import yaml

from .numerics import (RelactError, InvalidArgumentError, NonFiniteError,
                       NoiseSource, get_dtype, stable_seed, save_checkpoint,
                       load_checkpoint, ParamStore)
from .datagen import DatasetMeta, collate
from .model import DualBranchModel, MODEL_DEFAULTS, build_model
from .heads import (cross_entropy, loss_cls, loss_sim, loss_tss, loss_xm,
                    loss_total, sample_sim_pairs)
from .metrics import (MetricsReport, mean_average_precision,
                      mean_average_recall, top1_accuracy, key_token_recall)
from . import utils

CHECKPOINT_FILE = 'model.ckpt'
LAST_GOOD_FILE  = 'last-good.ckpt'
METRICS_FILE    = 'metrics.jsonl'

class TrainingError(RelactError):
  """Training aborted; `checkpoint` holds the last good parameters."""

  def __init__(self,msg,checkpoint=None):
    super().__init__(msg)
    self.checkpoint = checkpoint

# --- configuration   --------------------------------------------------------

@dataclass
class TrainConfig:
  epochs: int = 50
  batch_size: int = 8
  lr: float = 1e-3
  grad_clip: float = 5.0
  delta: float = 0.1
  zeta: float = 1.0
  eta: float = 0.1
  use_sim: bool = True
  use_tss: bool = True
  use_xm: bool = True
  train_language: bool = True
  spatial_select: bool = True
  temporal_select: bool = True
  shared_weights: bool = True
  attention_exclusion: bool = True
  T: int = None
  seed: int = 0
  precision: str = 'float32'
  gumbel_tau: float = 1.0
  gumbel_tau_end: float = None
  anneal_epochs: int = 0
  sim_pairs: int = 256
  d_h: int = 32
  d_e: int = 16
  d_local: int = 64
  d: int = 64
  layers: int = 2
  heads: int = 4
  mlp_ratio: int = 2
  select_dim: int = 16
  box_resolution: int = 16
  semantic_source: str = 'predicted'
  selection_relaxation: str = 'hard'
  train_split: str = 'train'
  eval_split: str = 'test'
  eval_every: int = 1
  eval_batch_size: int = 32

  def validate(self):
    if self.epochs < 0 or self.batch_size < 1:
      raise InvalidArgumentError("epochs must be >= 0 and batch_size >= 1")
    if self.lr <= 0:
      raise InvalidArgumentError("learning rate must be positive")
    for name in ('delta','zeta','eta'):
      if getattr(self,name) < 0:
        raise InvalidArgumentError(f"loss weight {name} must be >= 0")
    get_dtype(self.precision)
    if self.gumbel_tau <= 0 or (self.gumbel_tau_end is not None and
                                self.gumbel_tau_end <= 0):
      raise InvalidArgumentError("Gumbel temperatures must be positive")
    if self.semantic_source not in ('predicted','ground_truth'):
      raise InvalidArgumentError(f"unknown semantic_source '{self.semantic_source}'")
    if self.selection_relaxation not in ('hard','soft'):
      raise InvalidArgumentError(
        f"unknown selection_relaxation '{self.selection_relaxation}'")
    if self.sim_pairs < 1:
      raise InvalidArgumentError("sim_pairs must be >= 1")
    if not self.train_language and (self.use_sim or self.use_tss or self.use_xm):
      raise InvalidArgumentError(
        "the sim, tss and xm losses need train_language enabled")
    return self

  @classmethod
  def from_dict(cls,data):
    data = dict(data or {})
    unknown = set(data) - {f.name for f in fields(cls)}
    if unknown:
      raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
    return cls(**data).validate()

  @classmethod
  def from_yaml(cls,path):
    with open(path) as src:
      config = cls.from_dict(yaml.safe_load(src))
    return replace(config,seed=utils.env_seed(config.seed))

  def to_dict(self):
    return asdict(self)

  def with_overrides(self,**changes):
    return replace(self,**changes).validate()

  def model_hparams(self,meta):
    hp = {name: getattr(self,name) for name in MODEL_DEFAULTS if name != 'T'}
    hp['T'] = self.T or meta.T
    return hp

  def tau_at(self,epoch):
    """ constant, or linear anneal over anneal_epochs """
    if self.gumbel_tau_end is None or self.anneal_epochs <= 0:
      return self.gumbel_tau
    frac = min(1.0,epoch / self.anneal_epochs)
    return self.gumbel_tau + frac*(self.gumbel_tau_end - self.gumbel_tau)

  @property
  def hard(self):
    return self.selection_relaxation == 'hard'

# --- frame sampling   -------------------------------------------------------

def sample_frames(video_length,T,mode='uniform',rng=None):
  """ascending frame indices of length T.

    random: sorted draw without replacement (with replacement when the
    video is shorter than T); uniform: floor(i*length/T).
  """
  if T < 1:
    raise InvalidArgumentError("T must be >= 1")
  if video_length < 1:
    raise InvalidArgumentError("video_length must be >= 1")
  if mode == 'uniform':
    return [(i*video_length) // T for i in range(T)]
  if mode != 'random':
    raise InvalidArgumentError(f"unknown sampling mode '{mode}'")
  rng = rng if rng is not None else np.random.default_rng()
  replace_ = video_length < T
  return sorted(int(i) for i in rng.choice(video_length,size=T,replace=replace_))

# --- losses   ---------------------------------------------------------------

def triple_ids(batch,meta,positions=None):
  """ one integer per (subject, relation, object) triple """
  n_cat, n_rel = len(meta.categories), len(meta.relations)
  ids = (batch.subject_cat*n_rel + batch.relation_cat)*n_cat + batch.object_cat
  if positions is None:
    return ids
  return ids[positions[:,0],positions[:,1],positions[:,2]]

def forward_losses(model,batch,config,noise=None,tau=None):
  """Run both branches and combine the enabled objectives.

    Returns (LossBreakdown, video BranchOutput, language BranchOutput).
    With train_language off the language branch is not run (None) and
    l_s is 0.
  """
  tau = config.gumbel_tau if tau is None else tau
  video = model.video_branch(batch,noise,tau,config.hard)
  if not config.train_language:
    l_v = cross_entropy(video.prediction,batch.labels)
    zero = torch.zeros((),dtype=l_v.dtype)
    return loss_total(l_v,zero,zero,zero,zero,0.0,0.0,0.0), video, None
  language = model.language_branch(batch,noise,tau,config.hard)
  l_v, l_s, _ = loss_cls(video.prediction,language.prediction,batch.labels)
  zero = torch.zeros((),dtype=l_v.dtype)

  l_sim = zero
  if config.use_sim:
    gen = None if noise is None else noise.generator('sim_pairs')
    pos = sample_sim_pairs(batch.valid,config.sim_pairs,gen)
    pick = lambda E: E[pos[:,0],pos[:,1],pos[:,2]]
    l_sim = loss_sim(pick(video.embeddings),pick(language.embeddings),
                     model.temperature,triple_ids(batch,model.meta,pos))
  l_tss = loss_tss(video.encoded.mask,language.encoded.mask) if config.use_tss else zero
  l_xm = loss_xm(language.prediction,video.estimate) if config.use_xm else zero

  parts = loss_total(l_v,l_s,l_sim,l_tss,l_xm,
                     config.delta if config.use_sim else 0.0,
                     config.zeta if config.use_tss else 0.0,
                     config.eta if config.use_xm else 0.0)
  return parts, video, language

# --- checkpoints   ----------------------------------------------------------

def checkpoint_meta(model,config,epochs_done):
  return {
    'model': model.hparams,
    'dataset': model.meta.to_dict(),
    'config': config.to_dict(),
    'precision': config.precision,
    'epochs': epochs_done,
  }

def load_model(path,precision=None):
  """ rebuild a model from a checkpoint file """
  meta, seed, tensors = load_checkpoint(path)
  try:
    ds_meta = DatasetMeta.from_dict(meta['dataset'])
    hparams = meta['model']
  except KeyError as err:
    raise InvalidArgumentError(f"{path}: checkpoint metadata lacks {err}")
  model = DualBranchModel(ds_meta,**hparams)
  model.to(get_dtype(precision or meta.get('precision','float32')))
  store = ParamStore(model,seed)
  store.load(tensors)
  model.eval()
  return model, meta

# --- training loop   --------------------------------------------------------

@dataclass
class TrainResult:
  model: object
  store: object
  history: list = field(default_factory=list)
  checkpoint: str = None

def _mean(values):
  return float(np.mean(values)) if values else None

def train(config,dataset,out_dir=None,train_samples=None,eval_samples=None):
  """Jointly train both branches end to end.

    Writes one metrics record per epoch to out_dir/metrics.jsonl and the
    final checkpoint to out_dir/model.ckpt. Deterministic for a fixed
    seed when torch runs single-threaded.
  """
  config.validate()
  meta = dataset.meta
  if train_samples is None:
    train_samples = dataset.split(config.train_split)
  if eval_samples is None and dataset.manifest and config.eval_split:
    eval_samples = dataset.split(config.eval_split)
  if not train_samples:
    raise InvalidArgumentError("training split is empty")

  dtype = get_dtype(config.precision)
  model, store = build_model(meta,config.model_hparams(meta),config.seed,
                             config.precision)
  T = model.T
  optimizer = torch.optim.Adam(model.parameters(),lr=config.lr)
  noise = NoiseSource(config.seed)
  order_rng = np.random.default_rng(stable_seed(config.seed,'order'))
  frame_rng = np.random.default_rng(stable_seed(config.seed,'frames'))
  metrics_path = None
  if out_dir:
    utils.ensure_dir(out_dir)
    metrics_path = os.path.join(out_dir,METRICS_FILE)
    if os.path.exists(metrics_path):
      os.remove(metrics_path)

  def abort(msg):
    path = None
    if out_dir:
      path = os.path.join(out_dir,LAST_GOOD_FILE)
      store.load(good)
      save_checkpoint(path,store,checkpoint_meta(model,config,epoch))
    raise TrainingError(f"{msg} (epoch {epoch+1}, step {noise.step}); "
                        f"last good parameters: {path}",path)

  history = []
  good = store.state()
  for epoch in range(config.epochs):
    model.train()
    tau = config.tau_at(epoch)
    order = order_rng.permutation(len(train_samples))
    sums = {}
    for start in range(0,len(order),config.batch_size):
      samples = [train_samples[i] for i in order[start:start+config.batch_size]]
      frames = [sample_frames(s.n_frames,T,'random',frame_rng) for s in samples]
      batch = collate(samples,frames,meta,dtype,config.semantic_source)
      try:
        parts, _, _ = forward_losses(model,batch,config,noise,tau)
        if not bool(torch.isfinite(parts.total)):
          raise NonFiniteError("non-finite loss")
        optimizer.zero_grad()
        parts.total.backward()
        grad_norm = torch.nn.utils.clip_grad_norm_(model.parameters(),
                                                   config.grad_clip)
        if not bool(torch.isfinite(grad_norm)):
          raise NonFiniteError("non-finite gradient")
      except NonFiniteError as err:
        abort(str(err))
      good = store.state()
      optimizer.step()
      noise.advance()
      for name, value in parts.as_dict().items():
        sums.setdefault(name,[]).append(value)

    report = MetricsReport(epoch=epoch + 1,
                           losses={k: _mean(v) for k, v in sums.items()})
    if eval_samples and ((epoch + 1) % config.eval_every == 0 or
                         epoch + 1 == config.epochs):
      evaluated = evaluate_model(model,eval_samples,meta,
                                 batch_size=config.eval_batch_size)
      evaluated.epoch, evaluated.losses = report.epoch, report.losses
      report = evaluated
    history.append(report)
    if metrics_path:
      utils.write_jsonl(metrics_path,[epoch_record(report)],mode='a')
    utils.vprint(format_epoch(report))

  checkpoint = None
  if out_dir:
    checkpoint = os.path.join(out_dir,CHECKPOINT_FILE)
    save_checkpoint(checkpoint,store,checkpoint_meta(model,config,config.epochs))
  model.eval()
  return TrainResult(model,store,history,checkpoint)

def epoch_record(report):
  record = {'epoch': report.epoch,'losses': report.losses}
  for name in ('mAP','mAR','accuracy','num','key_recall','joint_cosine'):
    value = getattr(report,name)
    if value is not None:
      record[name] = value
  return record

def format_epoch(report):
  items = [f"epoch {report.epoch:3d}"]
  if report.losses.get('total') is not None:
    items.append(f"loss {report.losses['total']:.4f}")
  for name in ('accuracy','mAP','mAR','num'):
    value = getattr(report,name)
    if value is not None:
      items.append(f"{name} {value:.4f}")
  return '  '.join(items)

# --- evaluation   -----------------------------------------------------------

EVAL_MODES = ('video-only','oracle-language')

@torch.no_grad()
def evaluate_model(model,samples,meta=None,mode='video-only',batch_size=32):
  """Uniform frame sampling, deterministic selection, metrics over samples.

    video-only scores come from P^v; oracle-language scores come from
    P^s fed with ground-truth relations.
  """
  if mode not in EVAL_MODES:
    raise InvalidArgumentError(f"unknown evaluation mode '{mode}'")
  if not samples:
    raise InvalidArgumentError("evaluation split is empty")
  meta = meta or model.meta
  model.eval()
  source = 'ground_truth' if mode == 'oracle-language' else 'predicted'
  scores, labels, num, valid_counts = [], [], [], []
  selected, keys, cosines = [], [], []
  for start in range(0,len(samples),batch_size):
    chunk = samples[start:start+batch_size]
    frames = [sample_frames(s.n_frames,model.T,'uniform') for s in chunk]
    batch = collate(chunk,frames,meta,model.dtype,source)
    if mode == 'video-only':
      branch = model.video_branch(batch)
    else:
      branch = model.language_branch(batch)
    mask = branch.encoded.mask.combined
    scores.append(branch.prediction.scores.double().numpy())
    labels.append(batch.labels.double().numpy())
    num.extend(mask.sum(dim=(1,2)).double().tolist())
    valid_counts.extend(batch.valid.sum(dim=(1,2)).double().tolist())
    selected.append(mask.double().numpy() > 0.5)
    keys.append(batch.key.numpy())
    if batch.has_semantics:
      other = (model.language_branch(batch) if mode == 'video-only'
               else model.video_branch(batch))
      cos = torch.nn.functional.cosine_similarity(
        branch.embeddings,other.embeddings,dim=-1)
      cosines.extend(cos[batch.valid].double().tolist())

  scores = np.concatenate(scores)
  labels = np.concatenate(labels)
  report = MetricsReport(mode=mode,n_videos=len(samples))
  report.mAP, report.per_class_ap = mean_average_precision(scores,labels)
  report.mAR, report.per_class_recall = mean_average_recall(
    scores,labels,meta.multi_label)
  if not meta.multi_label:
    report.accuracy = top1_accuracy(scores,labels)
  report.num = float(np.mean(num))
  report.valid_tokens = float(np.mean(valid_counts))
  report.key_recall = key_token_recall(np.concatenate(selected),
                                       np.concatenate(keys))
  report.joint_cosine = float(np.mean(cosines)) if cosines else None
  return report

def evaluate(checkpoint,dataset,split='test',mode='video-only',batch_size=32):
  """ load a checkpoint and evaluate it on a dataset split """
  model, _ = load_model(checkpoint)
  samples = dataset.split(split)
  return evaluate_model(model,samples,dataset.meta,mode,batch_size)
