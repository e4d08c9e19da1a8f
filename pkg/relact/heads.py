# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Classification heads (video, language, video-estimates-language) and the
# training objectives: classification, contrastive joint embedding, token
# selection supervision and cross-modal KL.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import math
from dataclasses import dataclass, field

import torch
from torch import nn
import torch.nn.functional as F

from .numerics import InvalidArgumentError, NonFiniteError

PROB_MIN = 1e-12
HEADS = ('v','s','v2s')

# default weights of the total loss
DELTA, ZETA, ETA = 0.1, 1.0, 0.1

# --- data types   -----------------------------------------------------------

@dataclass
class ActionPrediction:
  """Per-class scores, [..., C].

    multi_label: independent sigmoids, otherwise a softmax simplex.
    `logits` is kept when available for numerically stable losses.
  """
  scores: torch.Tensor
  multi_label: bool
  logits: torch.Tensor = None

  @classmethod
  def from_scores(cls,scores,multi_label):
    return cls(torch.as_tensor(scores,dtype=torch.float64),multi_label)

  @property
  def num_classes(self):
    return self.scores.shape[-1]

  def log_scores(self):
    """ log p (and log(1-p) for multi-label) with clamping """
    if self.logits is not None:
      if self.multi_label:
        return F.logsigmoid(self.logits), F.logsigmoid(-self.logits)
      return torch.log_softmax(self.logits,dim=-1), None
    p = self.scores.clamp(PROB_MIN,1.0)
    if self.multi_label:
      return torch.log(p), torch.log((1 - self.scores).clamp(PROB_MIN,1.0))
    return torch.log(p), None

  def detach(self):
    return ActionPrediction(self.scores.detach(),self.multi_label,
                            None if self.logits is None else self.logits.detach())

@dataclass
class LossBreakdown:
  l_v: torch.Tensor
  l_s: torch.Tensor
  l_cls: torch.Tensor
  l_sim: torch.Tensor
  l_tss: torch.Tensor
  l_xm: torch.Tensor
  total: torch.Tensor
  weights: dict = field(default_factory=dict)

  def as_dict(self):
    """ plain floats for metrics records """
    return {name: float(getattr(self,name)) for name in
              ('l_v','l_s','l_cls','l_sim','l_tss','l_xm','total')}

# --- heads   ----------------------------------------------------------------

class ClassificationHeads(nn.Module):
  """Linear D -> C heads P^v, P^s and P^{v2s}."""

  def __init__(self,dim,num_classes,multi_label=False):
    super().__init__()
    self.multi_label = multi_label
    self.v   = nn.Linear(dim,num_classes)
    self.s   = nn.Linear(dim,num_classes)
    self.v2s = nn.Linear(dim,num_classes)

  def forward(self,z,head):
    return classify(z,head,self)

def classify(z,head,heads):
  """ linear map, then sigmoid (multi-label) or softmax """
  if head not in HEADS:
    raise InvalidArgumentError(f"unknown head '{head}' (expected one of {HEADS})")
  if not bool(torch.isfinite(z).all()):
    raise NonFiniteError(f"non-finite representation fed to head '{head}'")
  logits = getattr(heads,head)(z)
  if heads.multi_label:
    scores = torch.sigmoid(logits)
  else:
    scores = torch.softmax(logits,dim=-1)
  return ActionPrediction(scores,heads.multi_label,logits)

# --- classification loss   --------------------------------------------------

def _check_labels(labels,pred):
  labels = torch.as_tensor(labels,dtype=pred.scores.dtype)
  if labels.shape != pred.scores.shape:
    raise InvalidArgumentError(
      f"labels of shape {tuple(labels.shape)} do not match "
      f"{pred.num_classes} classes")
  if not bool(((labels == 0) | (labels == 1)).all()):
    raise InvalidArgumentError("labels must be 0 or 1")
  if not pred.multi_label and not bool((labels.sum(dim=-1) == 1).all()):
    raise InvalidArgumentError("single-label mode needs exactly one positive class")
  return labels

def cross_entropy(pred,labels):
  """BCE averaged over classes (multi-label) or categorical CE, batch mean."""
  labels = _check_labels(labels,pred)
  log_p, log_not_p = pred.log_scores()
  if pred.multi_label:
    per_item = -(labels*log_p + (1 - labels)*log_not_p).mean(dim=-1)
  else:
    per_item = -(labels*log_p).sum(dim=-1)
  return per_item.mean()

def loss_cls(P_v,P_s,labels):
  """ (l_v, l_s, l_cls = l_v + l_s) """
  l_v = cross_entropy(P_v,labels)
  l_s = cross_entropy(P_s,labels)
  return l_v, l_s, l_v + l_s

# --- contrastive joint embedding loss   -------------------------------------

class Temperature(nn.Module):
  """Learned logit scale t, kept in log space and clamped to [1, 100]."""

  def __init__(self):
    super().__init__()
    self.logit_scale = nn.Parameter(torch.tensor(math.log(10.0)))

  def forward(self):
    return self.logit_scale.clamp(0.0,math.log(100.0)).exp()

def loss_sim(V,S,temperature,groups=None):
  """Symmetric InfoNCE over aligned pairs (V[i], S[i]), [N, D] each.

    Vectors are L2-normalized here. With `groups`, negatives sharing the
    anchor's group (same semantic triple) are left out of its
    denominator.
  """
  if V.dim() != 2 or V.shape != S.shape:
    raise InvalidArgumentError("loss_sim needs two aligned [N, D] batches")
  if V.shape[0] < 1:
    raise InvalidArgumentError("loss_sim needs at least one pair")
  norm_v = V.norm(dim=-1,keepdim=True)
  norm_s = S.norm(dim=-1,keepdim=True)
  if bool((norm_v == 0).any()) or bool((norm_s == 0).any()):
    raise InvalidArgumentError("loss_sim got a zero-norm vector")
  x, y = V / norm_v, S / norm_s
  t = temperature() if callable(temperature) else temperature
  logits = t * (x @ y.T)
  if groups is not None:
    groups = torch.as_tensor(groups)
    same = groups[:,None] == groups[None,:]
    same.fill_diagonal_(False)
    logits = logits.masked_fill(same,-math.inf)
  v2s = torch.log_softmax(logits,dim=1).diagonal()
  s2v = torch.log_softmax(logits,dim=0).diagonal()
  return -(v2s + s2v).sum() / (2*V.shape[0])

def sample_sim_pairs(valid,max_pairs,generator=None):
  """Uniformly choose up to max_pairs valid (b,t,k) positions."""
  positions = valid.nonzero(as_tuple=False)
  if positions.shape[0] > max_pairs:
    pick = torch.randperm(positions.shape[0],generator=generator)[:max_pairs]
    positions = positions[pick.sort().values]
  return positions

# --- token selection supervision   ------------------------------------------

def loss_tss(U_v,U_s):
  """mean over (t,k) of (u_v - u_s)^2 + |u_s|, batch mean"""
  u_v = getattr(U_v,'combined',U_v)
  u_s = getattr(U_s,'combined',U_s)
  if u_v.shape != u_s.shape:
    raise InvalidArgumentError(
      f"selection masks differ in shape: {tuple(u_v.shape)} vs {tuple(u_s.shape)}")
  per_token = (u_v - u_s)**2 + u_s.abs()
  return per_token.mean(dim=(-2,-1)).mean()

# --- cross-modal loss   -----------------------------------------------------

def loss_xm(P_s,P_v2s):
  """KL(P^s || P^{v2s}) with P^s held constant, batch mean.

    Multi-label predictions use the mean per-class Bernoulli KL.
  """
  if P_s.scores.shape != P_v2s.scores.shape or P_s.multi_label != P_v2s.multi_label:
    raise InvalidArgumentError("loss_xm needs predictions of equal shape and mode")
  p = P_s.scores.detach().clamp(PROB_MIN,1.0)
  log_q, log_not_q = P_v2s.log_scores()
  log_q = log_q.clamp_min(math.log(PROB_MIN))
  if P_s.multi_label:
    not_p = (1 - P_s.scores.detach()).clamp(PROB_MIN,1.0)
    log_not_q = log_not_q.clamp_min(math.log(PROB_MIN))
    kl = (p*(torch.log(p) - log_q) + not_p*(torch.log(not_p) - log_not_q))
    per_item = kl.mean(dim=-1)
  else:
    per_item = (p*(torch.log(p) - log_q)).sum(dim=-1)
  return per_item.clamp_min(0.0).mean()

# --- total   ----------------------------------------------------------------

def loss_total(l_v,l_s,l_sim,l_tss,l_xm,delta=DELTA,zeta=ZETA,eta=ETA):
  """total = l_cls + delta*l_sim + zeta*l_tss + eta*l_xm"""
  for name, w in (('delta',delta),('zeta',zeta),('eta',eta)):
    if w < 0:
      raise InvalidArgumentError(f"loss weight {name} must be >= 0, got {w}")
  parts = [torch.as_tensor(p,dtype=torch.float64) if not torch.is_tensor(p) else p
           for p in (l_v,l_s,l_sim,l_tss,l_xm)]
  for name, p in zip(('l_v','l_s','l_sim','l_tss','l_xm'),parts):
    if not bool(torch.isfinite(p).all()):
      raise NonFiniteError(f"loss term {name} is not finite")
  l_v, l_s, l_sim, l_tss, l_xm = parts
  l_cls = l_v + l_s
  total = l_cls + delta*l_sim + zeta*l_tss + eta*l_xm
  return LossBreakdown(l_v,l_s,l_cls,l_sim,l_tss,l_xm,total,
                       {'delta': delta,'zeta': zeta,'eta': eta})
