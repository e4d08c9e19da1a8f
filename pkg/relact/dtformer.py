# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Dynamic-token transformer: class token and positional embeddings,
# temporal-then-spatial token selection, masked space-time encoding.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import math
from dataclasses import dataclass

import torch
from torch import nn

from .numerics import (InvalidArgumentError, TransformerBlock,
                       attention_block, gumbel_softmax, layer_norm, LN_EPS)

DROP, KEEP = 0, 1

# --- data types   -----------------------------------------------------------

@dataclass
class SelectionMask:
  """Temporal, spatial and combined keep-masks, each [B, T, K].

    Values are exactly binary in hard mode; they carry straight-through
    gradients to the selectors.
  """
  temporal: torch.Tensor
  spatial: torch.Tensor
  combined: torch.Tensor

  @property
  def num_retained(self):
    return self.combined.sum(dim=(-2,-1))

  def detach(self):
    return SelectionMask(self.temporal.detach(),self.spatial.detach(),
                         self.combined.detach())

  def __getitem__(self,index):
    return SelectionMask(self.temporal[index],self.spatial[index],
                         self.combined[index])

@dataclass
class EncodedVideo:
  z: torch.Tensor              # [B, D]
  mask: SelectionMask
  token_outputs: torch.Tensor  # [B, 1+T*K, D]

# --- token selector   -------------------------------------------------------

KEEP_INIT = 3.0

class TokenSelector(nn.Module):
  """u = GSM(sigma([W1 x, W2 x_class])) with two-way (drop, keep) logits.

    The final layer starts with a keep-logit bias of KEEP_INIT, so a fresh
    selector keeps about 95% of the tokens under unit-temperature noise
    and every token without noise.
  """

  def __init__(self,dim,select_dim=16,hidden=None):
    super().__init__()
    hidden = hidden or 2*select_dim
    self.W1 = nn.Linear(dim,select_dim,bias=False)
    self.W2 = nn.Linear(dim,select_dim,bias=False)
    self.sigma = nn.Sequential(
      nn.Linear(2*select_dim,hidden),
      nn.GELU(),
      nn.Linear(hidden,2))
    self.init_parameters()

  def init_parameters(self):
    with torch.no_grad():
      self.sigma[-1].bias.zero_()
      self.sigma[-1].bias[KEEP] = KEEP_INIT

  def logits(self,tokens,class_token):
    """ tokens [..., n, D], class_token [..., D] -> [..., n, 2] """
    ctx = self.W2(class_token).unsqueeze(-2).expand(
      *tokens.shape[:-1],self.W2.out_features)
    return self.sigma(torch.cat([self.W1(tokens),ctx],dim=-1))

  def forward(self,tokens,class_token,generator=None,tau=1.0,hard=True,
              with_margin=False):
    logits = self.logits(tokens,class_token)
    noise = None if generator is not None else torch.zeros_like(logits)
    keep = gumbel_softmax(logits,tau,hard,generator,noise)[...,KEEP]
    if with_margin:
      return keep, (logits[...,KEEP] - logits[...,DROP]).detach()
    return keep

def token_select(token_sequence,class_token,selector,generator=None,tau=1.0,
                 hard=True,with_margin=False):
  """ binary keep-decision per token """
  if token_sequence.dim() < 2 or token_sequence.shape[-2] < 1:
    raise InvalidArgumentError("token selection needs at least one token")
  if token_sequence.shape[-1] != class_token.shape[-1]:
    raise InvalidArgumentError("token and class token dimensions differ")
  return selector(token_sequence,class_token,generator,tau,hard,with_margin)

def _select_where(selector,tokens,cls,where,generator,tau,hard):
  """Run a selector on the positions in `where` only.

    tokens [B, ..., D], cls [B, D], where [B, ...] (bool). Returns keep
    values and keep-minus-drop logit margins, both zero elsewhere.
  """
  index = where.flatten().nonzero().squeeze(1)
  picked = tokens.reshape(-1,tokens.shape[-1])[index]
  owner = cls.reshape(cls.shape[0],*([1]*(where.dim()-1)),cls.shape[-1]).expand(
    *where.shape,cls.shape[-1]).reshape(-1,cls.shape[-1])[index]
  keep, margin = token_select(picked[:,None,:],owner,selector,generator,tau,
                              hard,with_margin=True)
  flat = torch.zeros(where.numel(),dtype=tokens.dtype)
  values = flat.index_put((index,),keep[:,0]).reshape(where.shape)
  margins = flat.index_put((index,),margin[:,0]).reshape(where.shape)
  return values, margins

def _keep_one(temporal,spatial,validf,margin):
  """Force the best valid token of every video left with an empty mask.

    The forced token's frame and slot are set to 1 in both paths, so
    U = temporal*spatial*valid still holds. Gradients keep flowing to
    the selectors through the unforced soft values.
  """
  B = validf.shape[0]
  empty = (temporal*spatial*validf).flatten(start_dim=1).sum(dim=1) == 0
  if not bool(empty.any()):
    return temporal, spatial
  score = margin.masked_fill(validf == 0,-math.inf).flatten(start_dim=1)
  best = score.argmax(dim=1,keepdim=True)
  force = torch.zeros_like(score).scatter_(1,best,1.0).reshape(validf.shape)
  force = force * empty.to(force.dtype)[:,None,None]
  frames = force.amax(dim=2,keepdim=True).expand_as(force)
  temporal = temporal + (1 - temporal).detach()*frames
  spatial = spatial + (1 - spatial).detach()*force
  return temporal, spatial

# --- DT-Former   ------------------------------------------------------------

class DTFormer(nn.Module):

  def __init__(self,T,K,dim=64,layers=2,heads=4,mlp_ratio=2,select_dim=16,
               spatial_select=True,temporal_select=True,
               attention_exclusion=True):
    super().__init__()
    self.T, self.K, self.dim = T, K, dim
    self.spatial_select  = spatial_select
    self.temporal_select = temporal_select
    self.attention_exclusion = attention_exclusion
    self.class_token = nn.Parameter(torch.zeros(dim))
    self.pos_embed   = nn.Parameter(torch.zeros(T,K,dim))
    self.temporal_selector = TokenSelector(dim,select_dim)
    self.spatial_selector  = TokenSelector(dim,select_dim)
    self.blocks = nn.ModuleList(
      TransformerBlock(dim,heads,mlp_ratio) for _ in range(layers))
    self.norm = nn.LayerNorm(dim,eps=LN_EPS)

  # --- embedding   ----------------------------------------------------------

  def embed_tokens(self,embeddings):
    """ [B, T, K, D] -> [B, 1+T*K, D], class token first """
    if tuple(embeddings.shape[-3:]) != (self.T,self.K,self.dim):
      raise InvalidArgumentError(
        f"embeddings of shape {tuple(embeddings.shape[-3:])} do not match "
        f"T={self.T}, K={self.K}, D={self.dim}")
    B = embeddings.shape[0]
    x = (embeddings + self.pos_embed).reshape(B,self.T*self.K,self.dim)
    cls = self.class_token.expand(B,1,self.dim)
    return torch.cat([cls,x],dim=1)

  # --- selection   ----------------------------------------------------------

  def spatiotemporal_mask(self,embedded,valid,noise=None,site='video',
                          tau=1.0,hard=True):
    """Temporal path on frame-pooled tokens, spatial path per frame.

      U = U_temporal * U_spatial * valid; the class token is not part
      of the mask and is always retained. Only valid slots, and frames
      holding at least one, go through the selectors. A video whose
      mask comes out empty keeps its best-scoring valid token.
    """
    B = embedded.shape[0]
    validf = valid.to(embedded.dtype)
    if bool((validf.flatten(start_dim=1).sum(dim=1) == 0).any()):
      raise InvalidArgumentError("token selection on an all-invalid grid")
    tokens = embedded[:,1:].reshape(B,self.T,self.K,self.dim)
    cls = embedded[:,0]
    gen = lambda path: None if noise is None else noise.generator(f"{site}/{path}")
    margin = torch.zeros_like(validf)

    if self.temporal_select:
      counts = validf.sum(dim=2)
      frames = (tokens*validf[...,None]).sum(dim=2) / counts.clamp_min(1)[...,None]
      u_t, m_t = _select_where(self.temporal_selector,frames,cls,counts > 0,
                               gen('temporal'),tau,hard)
      temporal = u_t[...,None].expand(B,self.T,self.K)
      margin = margin + m_t[...,None]
    else:
      temporal = torch.ones_like(validf)

    if self.spatial_select:
      spatial, m_s = _select_where(self.spatial_selector,tokens,cls,valid.bool(),
                                   gen('spatial'),tau,hard)
      margin = margin + m_s
    else:
      spatial = torch.ones_like(validf)

    if hard:
      temporal, spatial = _keep_one(temporal,spatial,validf,margin)
    return SelectionMask(temporal,spatial,temporal*spatial*validf)

  # --- encoding   -----------------------------------------------------------

  def keep_weights(self,mask):
    B = mask.combined.shape[0]
    ones = torch.ones(B,1,dtype=mask.combined.dtype)
    return torch.cat([ones,mask.combined.reshape(B,self.T*self.K)],dim=1)

  def encode_sequence(self,embedded,mask):
    """ y = u*x, L masked blocks, z = LN(class token state) """
    keep = self.keep_weights(mask).to(embedded.dtype)
    y = embedded * keep[...,None]
    attend = keep if self.attention_exclusion else None
    for block in self.blocks:
      y = attention_block(y,attend,block)
    z = layer_norm(y[:,0],self.norm)
    return EncodedVideo(z,mask,y)

  def forward(self,embeddings,valid,noise=None,site='video',tau=1.0,
              hard=True):
    embedded = self.embed_tokens(embeddings)
    mask = self.spatiotemporal_mask(embedded,valid,noise,site,tau,hard)
    return self.encode_sequence(embedded,mask)
