# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Video-only inference and joint-space explanation: every retained token
# is labelled with its nearest semantic triple, and per-slot label
# sequences summarize the relation transitions behind a prediction.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import json
from dataclasses import dataclass, field, asdict

import numpy as np
import torch

from .numerics import InvalidArgumentError
from .datagen import collate
from .heads import ActionPrediction
from .metrics import predicted_sets
from .trainer import sample_frames, load_model

TRACE_SCHEMA_VERSION = 1

# --- semantic bank   --------------------------------------------------------

class SemanticBank:
  """One joint-space embedding per (subject, relation, object) triple.

    Triple ids follow (subject*n_relations + relation)*n_categories + object;
    rows are L2-normalized.
  """

  def __init__(self,embeddings,labels,triples=None):
    emb = torch.as_tensor(embeddings,dtype=torch.float64)
    if emb.dim() != 2 or emb.shape[0] != len(labels):
      raise InvalidArgumentError("bank needs one embedding row per label")
    if emb.shape[0] == 0:
      raise InvalidArgumentError("empty semantic bank")
    self.embeddings = torch.nn.functional.normalize(emb,dim=1)
    self.labels  = list(labels)
    self.triples = list(triples) if triples is not None else [None]*len(labels)

  def __len__(self):
    return len(self.labels)

  @classmethod
  @torch.no_grad()
  def from_model(cls,model,meta=None,context_samples=None,chunk=32):
    """Bank of every triple the vocabulary can form.

      `context_samples` (videos with semantic fields) supply the mean
      pooled context the triples are fused with; without them each
      triple is embedded as a one-token set.
    """
    meta = meta or model.meta
    n_cat, n_rel = len(meta.categories), len(meta.relations)
    ids = torch.arange(n_cat*n_rel*n_cat)
    obj = ids % n_cat
    rel = (ids // n_cat) % n_rel
    subj = ids // (n_cat*n_rel)
    was_training = model.training
    model.eval()
    context = None
    if context_samples:
      context = semantic_context(model,context_samples,meta,chunk)
    emb = model.embed_triples(subj,rel,obj,context)
    model.train(was_training)
    triples = list(zip(subj.tolist(),rel.tolist(),obj.tolist()))
    labels = [meta.triple_name(*t) for t in triples]
    return cls(emb,labels,triples)

  def nearest(self,queries):
    """(ids, cosine distances) per query row; ties go to the lowest id."""
    q = torch.as_tensor(queries,dtype=torch.float64)
    if q.shape[0] == 0:
      return np.zeros(0,dtype=int), np.zeros(0)
    q = torch.nn.functional.normalize(q.reshape(q.shape[0],-1),dim=1)
    dist = (1.0 - q @ self.embeddings.T).clamp(0.0,2.0).numpy()
    ids = dist.argmin(axis=1)
    return ids, dist[np.arange(len(ids)),ids]

@torch.no_grad()
def semantic_context(model,samples,meta=None,chunk=32):
  """ mean pooled f_s context over ground-truth relation tokens, [C] """
  meta = meta or model.meta
  samples = [s for s in samples if s.n_slots == model.K]
  if not samples:
    raise InvalidArgumentError("no context videos match the model's slot count")
  total = None
  for start in range(0,len(samples),chunk):
    part = samples[start:start+chunk]
    frames = [sample_frames(s.n_frames,model.T,'uniform') for s in part]
    batch = collate(part,frames,meta,model.dtype,'ground_truth')
    ctx = model.semantic_context(batch).sum(dim=0)
    total = ctx if total is None else total + ctx
  return total / len(samples)

# --- inference   ------------------------------------------------------------

@dataclass
class VideoInference:
  video_id: str
  prediction: ActionPrediction   # [C]
  mask: object                   # SelectionMask, [T, K]
  embeddings: torch.Tensor       # V, [T, K, D]
  frames: list

def _as_model(checkpoint):
  if isinstance(checkpoint,str):
    model, _ = load_model(checkpoint)
    return model
  return checkpoint

@torch.no_grad()
def infer_video(checkpoint,sample,meta=None,T=None):
  """Run the video branch alone on uniformly sampled frames.

    `checkpoint` is a path or a loaded model. Semantic fields of the
    sample are never read.
  """
  model = _as_model(checkpoint)
  meta = meta or model.meta
  if T is not None and T != model.T:
    raise InvalidArgumentError(f"T={T} does not match the checkpoint (T={model.T})")
  if sample.n_slots != model.K:
    raise InvalidArgumentError(
      f"video '{sample.video_id}' has K={sample.n_slots}, "
      f"the checkpoint expects K={model.K}")
  model.eval()
  frames = sample_frames(sample.n_frames,model.T,'uniform')
  batch = collate([sample.visual_only()],[frames],meta,model.dtype)
  out = model.video_branch(batch)
  pred = out.prediction.detach()
  return VideoInference(
    sample.video_id,
    ActionPrediction(pred.scores[0],pred.multi_label,
                     None if pred.logits is None else pred.logits[0]),
    out.encoded.mask.detach()[0],out.embeddings[0].detach(),frames)

# --- trace   ----------------------------------------------------------------

@dataclass
class TraceToken:
  t: int
  k: int
  frame: int
  triple_id: int
  label: str
  subject: str
  relation: str
  object: str
  distance: float

@dataclass
class ExplanationTrace:
  video_id: str
  predicted: list
  scores: dict
  tokens: list = field(default_factory=list)
  transitions: list = field(default_factory=list)
  schema_version: int = TRACE_SCHEMA_VERSION

  def to_dict(self):
    return asdict(self)

  @classmethod
  def from_dict(cls,data):
    data = dict(data)
    version = data.get('schema_version')
    if version != TRACE_SCHEMA_VERSION:
      raise InvalidArgumentError(f"unsupported trace schema version {version}")
    data['tokens'] = [TraceToken(**tok) for tok in data.get('tokens',[])]
    return cls(**data)

  def has_transition(self,before,after,k=None):
    """ True if some slot shows `before` directly followed by `after` """
    for slot in self.transitions:
      if k is not None and slot['k'] != k:
        continue
      seq = slot['sequence']
      if any(a == before and b == after for a, b in zip(seq,seq[1:])):
        return True
    return False

def summarize_transitions(tokens):
  """per slot, relation labels ordered by t with consecutive repeats collapsed"""
  by_slot = {}
  for tok in sorted(tokens,key=lambda tok: (tok.k,tok.t)):
    by_slot.setdefault(tok.k,[]).append(tok)
  summary = []
  for k, toks in sorted(by_slot.items()):
    sequence = []
    for tok in toks:
      if not sequence or sequence[-1] != tok.relation:
        sequence.append(tok.relation)
    summary.append({'k': k,'pair': [toks[0].subject,toks[0].object],
                    'sequence': sequence})
  return summary

def explain(inference,bank,meta=None):
  """Label every retained token with its nearest bank triple."""
  mask = inference.mask.combined
  positions = [(int(t),int(k)) for t, k in (mask > 0.5).nonzero().tolist()]
  queries = torch.stack([inference.embeddings[t,k] for t, k in positions]) \
              if positions else torch.zeros(0,inference.embeddings.shape[-1])
  ids, dists = bank.nearest(queries)
  tokens = []
  for (t, k), idx, dist in zip(positions,ids,dists):
    triple = bank.triples[idx]
    if triple is not None and meta is not None:
      subj, rel, obj = (meta.categories[triple[0]],meta.relations[triple[1]],
                        meta.categories[triple[2]])
    else:
      subj, rel, obj = None, bank.labels[idx], None
    tokens.append(TraceToken(t,k,inference.frames[t],int(idx),bank.labels[idx],
                             subj,rel,obj,float(dist)))

  scores = inference.prediction.scores.double().numpy()
  names = (meta.actions if meta is not None
           else [str(c) for c in range(len(scores))])
  chosen = predicted_sets(scores[None],inference.prediction.multi_label)[0]
  return ExplanationTrace(
    video_id=inference.video_id,
    predicted=[names[c] for c in np.flatnonzero(chosen)],
    scores={names[c]: float(s) for c, s in enumerate(scores)},
    tokens=tokens,
    transitions=summarize_transitions(tokens))

def explain_video(checkpoint,sample,bank=None,meta=None,context_samples=None):
  """ infer_video followed by explain, building the bank if needed """
  model = _as_model(checkpoint)
  meta = meta or model.meta
  bank = bank or SemanticBank.from_model(model,meta,context_samples)
  return explain(infer_video(model,sample,meta),bank,meta)

def save_trace(path,trace):
  with open(path,'w',encoding='utf-8') as out:
    json.dump(trace.to_dict(),out,indent=1)
    out.write('\n')

def load_trace(path):
  with open(path,encoding='utf-8') as src:
    return ExplanationTrace.from_dict(json.load(src))

# --- plot   -----------------------------------------------------------------

def plot_trace(trace,path,T=None,K=None):
  """Timeline of retained tokens: t on x, slot on y, labelled by relation.

    The output format follows the file extension (svg, pdf, png).
  """
  import matplotlib
  matplotlib.use('Agg')
  import matplotlib.pyplot as plt

  T = T or (max((tok.t for tok in trace.tokens),default=0) + 1)
  K = K or (max((tok.k for tok in trace.tokens),default=0) + 1)
  fig, ax = plt.subplots(figsize=(max(4,1.4*T),max(2,0.7*K)))
  relations = sorted({tok.relation for tok in trace.tokens})
  cmap = plt.get_cmap('tab10')
  color = {rel: cmap(i % 10) for i, rel in enumerate(relations)}
  for tok in trace.tokens:
    ax.scatter(tok.t,tok.k,s=120,color=color[tok.relation],zorder=2)
    ax.annotate(tok.relation,(tok.t,tok.k),textcoords='offset points',
                xytext=(0,8),ha='center',fontsize=7)
  ax.set_xlim(-0.5,T - 0.5)
  ax.set_ylim(-0.5,K - 0.5)
  ax.set_xticks(range(T))
  ax.set_yticks(range(K))
  ax.set_xlabel('sampled frame t')
  ax.set_ylabel('relation slot k')
  ax.grid(True,linestyle=':',zorder=1)
  ax.set_title(f"{trace.video_id}: {', '.join(trace.predicted)}",fontsize=9)
  fig.savefig(path,bbox_inches='tight')
  plt.close(fig)
  return path
