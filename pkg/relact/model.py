# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Dual-branch model: the video branch (visual relation tokens) and the
# language branch (semantic relation tokens) share one DT-Former.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

from dataclasses import dataclass

import torch
from torch import nn

from .numerics import InvalidArgumentError, ParamStore
from .relation_encoding import (VisualRelationEncoder, SemanticRelationEncoder,
                                JointEncoder)
from .dtformer import DTFormer
from .heads import ClassificationHeads, Temperature, classify

# hyper-parameters stored in checkpoints to rebuild the model
MODEL_DEFAULTS = {
  'T': 8,
  'd_h': 32,
  'd_e': 16,
  'd_local': 64,
  'd': 64,
  'layers': 2,
  'heads': 4,
  'mlp_ratio': 2,
  'select_dim': 16,
  'box_resolution': 16,
  'spatial_select': True,
  'temporal_select': True,
  'shared_weights': True,
  'attention_exclusion': True,
}

@dataclass
class BranchOutput:
  embeddings: torch.Tensor   # V or S, [B, T, K, D]
  encoded: object            # EncodedVideo
  prediction: object         # ActionPrediction (P^v or P^s)
  estimate: object = None    # P^{v2s}, video branch only

class DualBranchModel(nn.Module):

  def __init__(self,meta,**hparams):
    super().__init__()
    unknown = set(hparams) - set(MODEL_DEFAULTS)
    if unknown:
      raise InvalidArgumentError(f"unknown model settings: {sorted(unknown)}")
    hp = dict(MODEL_DEFAULTS,**hparams)
    self.hparams = hp
    self.meta = meta
    self.T, self.K = hp['T'], meta.K

    self.visual = VisualRelationEncoder(meta.d_v,meta.d_u,hp['d_h'],
                                        hp['box_resolution'])
    self.semantic = SemanticRelationEncoder(len(meta.categories),
                                            len(meta.relations),hp['d_e'])
    max_tokens = self.T*self.K
    self.f_v = JointEncoder(self.visual.out_dim,hp['d_local'],hp['d'],max_tokens)
    self.f_s = JointEncoder(self.semantic.out_dim,hp['d_local'],hp['d'],max_tokens)
    make_former = lambda: DTFormer(
      self.T,self.K,hp['d'],hp['layers'],hp['heads'],hp['mlp_ratio'],
      hp['select_dim'],hp['spatial_select'],hp['temporal_select'],
      hp['attention_exclusion'])
    self.dtformer = make_former()
    self.dtformer_s = None if hp['shared_weights'] else make_former()
    self.heads = ClassificationHeads(hp['d'],meta.num_classes,meta.multi_label)
    self.temperature = Temperature()

  @property
  def language_former(self):
    return self.dtformer if self.dtformer_s is None else self.dtformer_s

  @property
  def dtype(self):
    return self.heads.v.weight.dtype

  # --- features   -----------------------------------------------------------

  def _check_batch(self,batch):
    if tuple(batch.valid.shape[1:]) != (self.T,self.K):
      raise InvalidArgumentError(
        f"batch has T={batch.valid.shape[1]}, K={batch.valid.shape[2]} but "
        f"the model expects T={self.T}, K={self.K}")

  def visual_features(self,batch):
    return self.visual(batch.subject_feat,batch.object_feat,batch.union_feat,
                       batch.subject_box,batch.object_box)

  def semantic_features(self,batch):
    if not batch.has_semantics:
      raise InvalidArgumentError("batch carries no semantic relation fields")
    return self.semantic(batch.subject_cat,batch.relation_cat,batch.object_cat)

  # --- branches   -----------------------------------------------------------

  def video_branch(self,batch,noise=None,tau=1.0,hard=True):
    """ visual relation features -> f_v -> DT-Former -> P^v, P^{v2s} """
    self._check_batch(batch)
    V = self.f_v(self.visual_features(batch),batch.valid)
    encoded = self.dtformer(V,batch.valid,noise,'video',tau,hard)
    return BranchOutput(V,encoded,classify(encoded.z,'v',self.heads),
                        classify(encoded.z,'v2s',self.heads))

  def language_branch(self,batch,noise=None,tau=1.0,hard=True):
    """ semantic relation features -> f_s -> DT-Former -> P^s """
    self._check_batch(batch)
    S = self.f_s(self.semantic_features(batch),batch.valid)
    encoded = self.language_former(S,batch.valid,noise,'language',tau,hard)
    return BranchOutput(S,encoded,classify(encoded.z,'s',self.heads))

  def semantic_context(self,batch):
    """ pooled f_s global context of each video's semantic tokens, [B, C] """
    self._check_batch(batch)
    return self.f_s.context(self.semantic_features(batch),batch.valid)[1]

  def embed_triples(self,subject_cat,relation_cat,object_cat,context=None):
    """Joint-space embedding of each triple, [N, D].

      With a context [C] every triple is fused with that pooled global
      vector, as if it sat in a video of that context. Without one each
      triple is a one-token set.
    """
    feats = self.semantic(subject_cat,relation_cat,object_cat)
    n = feats.shape[0]
    if context is None:
      return self.f_s(feats.reshape(n,1,1,-1),
                      torch.ones(n,1,1,dtype=torch.bool)).reshape(n,-1)
    local = self.f_s.local(feats)
    glob = torch.as_tensor(context,dtype=local.dtype).reshape(1,-1).expand_as(local)
    return self.f_s.fuse_with(local[:,None,:],glob).reshape(n,-1)

def build_model(meta,hparams=None,seed=0,precision='float32'):
  """ construct, cast and deterministically initialize a model """
  from .numerics import get_dtype
  model = DualBranchModel(meta,**(hparams or {}))
  model.to(get_dtype(precision))
  store = ParamStore(model,seed).initialize()
  return model, store
