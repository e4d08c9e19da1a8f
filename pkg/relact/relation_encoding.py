# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Relation features: visual relation features from appearance, box layout
# and union features, semantic relation features from category triples,
# and the two encoders mapping both into the joint embedding space.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .numerics import InvalidArgumentError

# --- data types   -----------------------------------------------------------

@dataclass
class RelationToken:
  """One human-object relation at frame t, slot k."""
  t: int
  k: int
  subject_feat: np.ndarray
  object_feat: np.ndarray
  union_feat: np.ndarray
  subject_box: np.ndarray
  object_box: np.ndarray
  subject_cat: int
  relation_cat: int
  object_cat: int
  valid: bool = True

@dataclass
class JointEmbeddings:
  """Aligned visual (V) and semantic (S) embeddings, [..., T, K, D]."""
  V: torch.Tensor
  S: torch.Tensor
  valid_mask: torch.Tensor

def check_box(box,what='box'):
  """ boxes are normalized [x1,y1,x2,y2] with x1<x2 and y1<y2 """
  box = np.asarray(box,dtype=np.float64)
  if box.shape != (4,):
    raise InvalidArgumentError(f"{what} must have 4 coordinates")
  if box.min() < 0 or box.max() > 1:
    raise InvalidArgumentError(f"{what} {box.tolist()} is not normalized")
  if not (box[0] < box[2] and box[1] < box[3]):
    raise InvalidArgumentError(f"{what} {box.tolist()} is not well-ordered")
  return box

# --- spatial configuration map   --------------------------------------------

def _rasterize(box,centers):
  x1, y1, x2, y2 = box.unbind(-1)
  inside_x = (centers >= x1[...,None]) & (centers <= x2[...,None])
  inside_y = (centers >= y1[...,None]) & (centers <= y2[...,None])
  return inside_y[...,:,None] & inside_x[...,None,:]

def box_config_map(b_i,b_j,resolution=16,dtype=torch.float64):
  """Two-channel binary map of a box pair, [..., 2, R, R].

    Cell (r,c) is set iff its center ((c+0.5)/R, (r+0.5)/R) lies inside
    the box, boundaries included.
  """
  if resolution < 1:
    raise InvalidArgumentError("configuration map resolution must be >= 1")
  b_i = torch.as_tensor(b_i,dtype=torch.float64)
  b_j = torch.as_tensor(b_j,dtype=torch.float64)
  centers = (torch.arange(resolution,dtype=torch.float64) + 0.5) / resolution
  channels = torch.stack([_rasterize(b_i,centers),_rasterize(b_j,centers)],
                         dim=-3)
  return channels.to(dtype)

# --- visual relation feature   ----------------------------------------------

class VisualRelationEncoder(nn.Module):
  """[W_s v_i, W_o v_j, W_u (u_ij + f_box(map(b_i,b_j)))]"""

  def __init__(self,d_v=32,d_u=32,d_h=32,resolution=16):
    super().__init__()
    self.d_v, self.d_u, self.d_h = d_v, d_u, d_h
    self.resolution = resolution
    self.W_s   = nn.Linear(d_v,d_h)
    self.W_o   = nn.Linear(d_v,d_h)
    self.W_u   = nn.Linear(d_u,d_h)
    self.f_box = nn.Linear(2*resolution*resolution,d_u)

  @property
  def out_dim(self):
    return 3*self.d_h

  def forward(self,subject_feat,object_feat,union_feat,subject_box,object_box):
    for name, feat, dim in (('subject_feat',subject_feat,self.d_v),
                            ('object_feat',object_feat,self.d_v),
                            ('union_feat',union_feat,self.d_u)):
      if feat.shape[-1] != dim:
        raise InvalidArgumentError(
          f"{name} has dimension {feat.shape[-1]}, expected {dim}")
    dtype = self.W_s.weight.dtype
    cmap = box_config_map(subject_box,object_box,self.resolution,dtype)
    boxes = self.f_box(cmap.flatten(start_dim=-3))
    return torch.cat([self.W_s(subject_feat.to(dtype)),
                      self.W_o(object_feat.to(dtype)),
                      self.W_u(union_feat.to(dtype) + boxes)],dim=-1)

def build_visual_relation_feature(tok,encoder):
  """ visual relation feature of a single valid token """
  if not tok.valid:
    raise InvalidArgumentError(
      f"token ({tok.t},{tok.k}) is invalid and has no relation feature")
  check_box(tok.subject_box,'subject_box')
  check_box(tok.object_box,'object_box')
  as_t = lambda a: torch.as_tensor(np.asarray(a),dtype=torch.float64)
  return encoder(as_t(tok.subject_feat),as_t(tok.object_feat),
                 as_t(tok.union_feat),as_t(tok.subject_box),
                 as_t(tok.object_box))

# --- semantic relation feature   --------------------------------------------

class SemanticRelationEncoder(nn.Module):
  """[s_i, r_ij, s_j] from two learned embedding tables."""

  def __init__(self,n_categories,n_relations,d_e=16):
    super().__init__()
    self.n_categories = n_categories
    self.n_relations  = n_relations
    self.d_e = d_e
    self.categories = nn.Embedding(n_categories,d_e)
    self.relations  = nn.Embedding(n_relations,d_e)

  @property
  def out_dim(self):
    return 3*self.d_e

  def _check(self,ids,size,what):
    if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= size):
      raise InvalidArgumentError(
        f"{what} id out of vocabulary (range 0..{size-1})")

  def forward(self,subject_cat,relation_cat,object_cat):
    subject_cat  = torch.as_tensor(subject_cat,dtype=torch.long)
    relation_cat = torch.as_tensor(relation_cat,dtype=torch.long)
    object_cat   = torch.as_tensor(object_cat,dtype=torch.long)
    self._check(subject_cat,self.n_categories,'subject category')
    self._check(object_cat,self.n_categories,'object category')
    self._check(relation_cat,self.n_relations,'relation category')
    return torch.cat([self.categories(subject_cat),
                      self.relations(relation_cat),
                      self.categories(object_cat)],dim=-1)

def build_semantic_relation_feature(subject_cat,relation_cat,object_cat,
                                    encoder):
  return encoder(subject_cat,relation_cat,object_cat)

# --- generalized pooling   --------------------------------------------------

def gpo_weights(logits,counts,n_ranks):
  """Pooling weights per rank, [B, n_ranks].

    The learned logits cover a fixed maximum length; a set of n tokens
    reads them at n evenly spaced, linearly interpolated positions.
    Ranks >= n get weight 0, the others sum to 1.
  """
  m = logits.shape[0]
  ranks = torch.arange(n_ranks,dtype=logits.dtype)
  span = (counts.to(logits.dtype) - 1).clamp_min(1)[:,None]
  pos = (ranks[None,:] * (m - 1) / span).clamp(max=m-1)
  lo = pos.floor().long()
  hi = (lo + 1).clamp(max=m-1)
  frac = pos - lo.to(pos.dtype)
  interp = (1 - frac)*logits[lo] + frac*logits[hi]
  active = ranks[None,:] < counts[:,None]
  interp = interp.masked_fill(~active,-math.inf)
  return torch.softmax(interp,dim=-1)

def generalized_pool(local,valid,logits):
  """Rank-weighted pooling over the valid tokens of each set.

    local: [B, N, C], valid: [B, N] -> [B, C]. Values are sorted per
    channel in descending order before weighting.
  """
  counts = valid.sum(dim=-1)
  if bool((counts == 0).any()):
    raise InvalidArgumentError("generalized pooling needs at least one valid token")
  n = local.shape[1]
  masked = local.masked_fill(~valid[...,None],-math.inf)
  ordered, _ = masked.sort(dim=1,descending=True)
  active = (torch.arange(n)[None,:] < counts[:,None])[...,None]
  ordered = torch.where(active,ordered,torch.zeros_like(ordered))
  weights = gpo_weights(logits,counts,n)
  return (ordered * weights[...,None]).sum(dim=1)

# --- joint encoders f_v and f_s   -------------------------------------------

class JointEncoder(nn.Module):
  """Local projection, pooled global context, fusion to dimension D."""

  def __init__(self,in_dim,d_local=64,d=64,max_tokens=64):
    super().__init__()
    self.in_dim = in_dim
    self.local = nn.Linear(in_dim,d_local)
    self.gpo_logits = nn.Parameter(torch.zeros(max_tokens))
    self.fuse = nn.Linear(2*d_local,d)

  def context(self,feats,valid):
    """ local projections [B, T*K, C] and pooled global context [B, C] """
    if feats.shape[-1] != self.in_dim:
      raise InvalidArgumentError(
        f"encoder input has dimension {feats.shape[-1]}, expected {self.in_dim}")
    B, T, K = valid.shape
    valid = valid.bool()
    feats = torch.where(valid[...,None],feats,torch.zeros_like(feats))
    local = self.local(feats).reshape(B,T*K,-1)
    return local, generalized_pool(local,valid.reshape(B,T*K),self.gpo_logits)

  def fuse_with(self,local,glob):
    """ local [..., N, C] fused with one global vector [..., C] per set """
    return self.fuse(torch.cat([local,glob[...,None,:].expand_as(local)],dim=-1))

  def forward(self,feats,valid):
    """ feats: [B, T, K, in_dim], valid: [B, T, K] -> [B, T, K, D] """
    B, T, K = valid.shape
    local, glob = self.context(feats,valid)
    fused = self.fuse_with(local,glob)
    flat_valid = valid.bool().reshape(B,T*K)
    fused = torch.where(flat_valid[...,None],fused,torch.zeros_like(fused))
    return fused.reshape(B,T,K,-1)

def encode_joint(visual_feats,semantic_feats,valid_mask,f_v,f_s):
  """Map aligned visual and semantic relation features into the joint space.

    Either feature grid may be None to run one encoder only.
  """
  valid_mask = valid_mask.bool()
  if bool((valid_mask.flatten(start_dim=1).sum(dim=1) == 0).any()):
    raise InvalidArgumentError("every video needs at least one valid token")
  V = None if visual_feats is None else f_v(visual_feats,valid_mask)
  S = None if semantic_feats is None else f_s(semantic_feats,valid_mask)
  if V is not None and S is not None and V.shape != S.shape:
    raise InvalidArgumentError("visual and semantic grids are not aligned")
  return JointEmbeddings(V,S,valid_mask)
