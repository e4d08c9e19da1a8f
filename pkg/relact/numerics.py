# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Differentiable primitives: errors, replayable noise, Gumbel-Softmax,
# masked attention blocks, parameter store, gradient checks and checkpoints.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import json
import math
import struct
import hashlib
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

# --- errors   ---------------------------------------------------------------

class RelactError(Exception):
  """Errors that we want to report to the user (exit status 2)."""
  pass

class InvalidArgumentError(RelactError, ValueError):
  """A pre-condition of an operation is violated."""
  pass

class NonFiniteError(RelactError):
  """A forward pass produced NaN or Inf."""
  pass

class CheckpointError(RelactError):
  """Checkpoint file is unreadable."""
  pass

# --- precision   ------------------------------------------------------------

DTYPES = {
  'float32': torch.float32,
  'float64': torch.float64,
}

def get_dtype(precision):
  """ map precision name to torch dtype """
  if precision not in DTYPES:
    raise InvalidArgumentError(f"unsupported precision '{precision}'")
  return DTYPES[precision]

# --- replayable noise   -----------------------------------------------------

def stable_seed(*parts):
  """Derive a 63-bit seed from arbitrary parts. Independent of PYTHONHASHSEED."""
  digest = hashlib.sha256(
    '/'.join(str(p) for p in parts).encode('utf-8')).digest()
  return int.from_bytes(digest[:8],'little') & 0x7fffffffffffffff

class NoiseSource:
  """Hands out torch generators keyed by (site, step).

    Asking twice for the same site and step returns generators in the
    same state, so a forward pass can be replayed with identical noise.
  """

  def __init__(self,seed,step=0):
    self.seed = int(seed)
    self.step = int(step)

  def generator(self,site):
    gen = torch.Generator()
    gen.manual_seed(stable_seed(self.seed,site,self.step))
    return gen

  def numpy_rng(self,site):
    return np.random.default_rng(stable_seed(self.seed,site,self.step))

  def advance(self):
    self.step += 1

# --- Gumbel-Softmax   -------------------------------------------------------

def sample_gumbel(shape,generator=None,dtype=torch.float64):
  """ standard Gumbel noise, -log(E) with E ~ Exp(1) """
  expo = torch.empty(shape,dtype=dtype).exponential_(generator=generator)
  return -torch.log(expo.clamp_min(torch.finfo(dtype).tiny))

def gumbel_softmax(logits,temperature=1.0,hard=True,generator=None,noise=None):
  """Gumbel-Softmax over the last dimension.

    With hard=True the forward value is an exact one-hot vector and the
    gradient is the one of the soft relaxation (straight-through). Pass
    `noise` to reuse a previously drawn Gumbel sample.
  """
  if temperature <= 0:
    raise InvalidArgumentError(
      f"Gumbel-Softmax temperature must be positive, got {temperature}")
  if logits.dim() == 0 or logits.shape[-1] < 1:
    raise InvalidArgumentError("Gumbel-Softmax needs at least one logit")

  if noise is None:
    noise = sample_gumbel(logits.shape,generator,logits.dtype)
  y_soft = torch.softmax((logits + noise)/temperature,dim=-1)
  if not hard:
    return y_soft
  index = y_soft.argmax(dim=-1,keepdim=True)
  y_hard = torch.zeros_like(y_soft).scatter_(-1,index,1.0)
  # forward: exactly y_hard, backward: d y_soft
  return y_hard + (y_soft - y_soft.detach())

# --- normalization   --------------------------------------------------------

LN_EPS = 1e-12

def layer_norm(x,module=None):
  """ LayerNorm over the last dimension, optionally with affine terms """
  if module is None:
    return F.layer_norm(x,(x.shape[-1],),eps=LN_EPS)
  return F.layer_norm(x,(x.shape[-1],),module.weight,module.bias,LN_EPS)

def keep_bias(keep):
  """Additive attention bias: log(u) for u > 0, -inf for u == 0.

    For binary keep-weights this is the usual attention mask, for soft
    weights it is smooth in u.
  """
  positive = keep > 0
  safe = torch.where(positive,keep,torch.ones_like(keep))
  return torch.where(positive,torch.log(safe),
                     torch.full_like(keep,-math.inf))

EXP_CAP = 60.0

def masked_softmax(logits,keep=None):
  """softmax(logits + log u) over the last dimension.

    The value is taken from the log-bias form, so an all-ones mask gives
    exactly torch.softmax(logits). The gradient in u comes from the
    equivalent form e_j*u_j / sum(e*u), which stays defined at u_j = 0.
  """
  if keep is None:
    return torch.softmax(logits,dim=-1)
  keep = keep[...,None,None,:]
  exact = torch.softmax(logits + keep_bias(keep.detach()),dim=-1)
  if not keep.requires_grad:
    return exact
  held = logits.detach()
  top = held.masked_fill(keep.detach() <= 0,-math.inf).amax(dim=-1,keepdim=True)
  w = torch.exp((held - top).clamp(max=EXP_CAP)) * keep
  policy = w / w.sum(dim=-1,keepdim=True)
  return exact + (policy - policy.detach())

# --- transformer block   ----------------------------------------------------

class TransformerBlock(nn.Module):
  """Pre-norm block: y' = MSA(LN(y)) + y, y = MLP(LN(y')) + y'."""

  def __init__(self,dim,heads=4,mlp_ratio=2):
    super().__init__()
    if dim % heads:
      raise InvalidArgumentError(
        f"model dimension {dim} is not divisible by {heads} heads")
    self.heads = heads
    self.norm1 = nn.LayerNorm(dim,eps=LN_EPS)
    self.qkv   = nn.Linear(dim,3*dim)
    self.proj  = nn.Linear(dim,dim)
    self.norm2 = nn.LayerNorm(dim,eps=LN_EPS)
    self.mlp   = nn.Sequential(
      nn.Linear(dim,mlp_ratio*dim),
      nn.GELU(),
      nn.Linear(mlp_ratio*dim,dim))

  def attention(self,x,keep=None):
    """ multi-head self-attention, returns (output, weights) """
    *lead, P, D = x.shape
    hd = D // self.heads
    qkv = self.qkv(x).reshape(*lead,P,3,self.heads,hd)
    q, k, v = qkv.unbind(dim=-3)                   # [..., P, H, hd]
    q, k, v = (t.transpose(-3,-2) for t in (q,k,v)) # [..., H, P, hd]
    logits = q @ k.transpose(-1,-2) / math.sqrt(hd)
    weights = masked_softmax(logits,keep)
    out = (weights @ v).transpose(-3,-2).reshape(*lead,P,D)
    return self.proj(out), weights

  def forward(self,x,keep=None,return_weights=False):
    attn, weights = self.attention(layer_norm(x,self.norm1),keep)
    x = x + attn
    x = x + self.mlp(layer_norm(x,self.norm2))
    if return_weights:
      return x, weights
    return x

def check_attend_mask(keep):
  """ every sequence needs at least one retained key """
  if keep is not None and not bool((keep > 0).any(dim=-1).all()):
    raise InvalidArgumentError(
      "attention mask retains no position (the class token must be kept)")

def attention_block(tokens,attend_mask,block,return_weights=False):
  """Apply one TransformerBlock with keys restricted to `attend_mask`.

    tokens: [..., P, D], attend_mask: [..., P] with entries in [0,1].
  """
  if tokens.dim() < 2 or tokens.shape[-2] < 1:
    raise InvalidArgumentError("attention_block needs at least one token")
  if attend_mask is not None:
    attend_mask = attend_mask.to(tokens.dtype)
    if attend_mask.shape != tokens.shape[:-1]:
      raise InvalidArgumentError(
        f"mask shape {tuple(attend_mask.shape)} does not match "
        f"tokens {tuple(tokens.shape[:-1])}")
  check_attend_mask(attend_mask)
  return block(tokens,attend_mask,return_weights=return_weights)

# --- parameter store   ------------------------------------------------------

INIT_SCHEME = 'trunc_normal(std=0.02)/zero-bias/zero-pos/keep-biased-selectors'
INIT_STD = 0.02

class ParamStore:
  """Named parameters of a module plus their initialization metadata."""

  def __init__(self,module,seed=0,scheme=INIT_SCHEME):
    self.module = module
    self.seed   = int(seed)
    self.scheme = scheme

  def named(self):
    return dict(self.module.named_parameters())

  def names(self):
    return list(self.named().keys())

  def __getitem__(self,name):
    return self.named()[name]

  def __len__(self):
    return len(self.named())

  def initialize(self):
    """ deterministic initialization from the store seed """
    layer_norms = {
      name for name, mod in self.module.named_modules()
        if isinstance(mod,nn.LayerNorm)}
    with torch.random.fork_rng(devices=[]):
      torch.manual_seed(self.seed)
      with torch.no_grad():
        for name, param in self.module.named_parameters():
          owner, _, leaf = name.rpartition('.')
          if owner in layer_norms:
            param.fill_(1.0 if leaf == 'weight' else 0.0)
          elif leaf == 'bias' or leaf in ('pos_embed','gpo_logits'):
            param.zero_()
          elif leaf == 'logit_scale':
            param.fill_(math.log(10.0))
          else:
            nn.init.trunc_normal_(param,std=INIT_STD,
                                  a=-2*INIT_STD,b=2*INIT_STD)
        # modules with their own starting values, e.g. token selectors
        for mod in self.module.modules():
          if mod is not self.module and hasattr(mod,'init_parameters'):
            mod.init_parameters()
    return self

  def state(self):
    return {name: p.detach().clone() for name, p in self.named().items()}

  def load(self,tensors,strict=True):
    """ copy tensors into the parameters """
    named = self.named()
    if strict:
      missing = set(named) - set(tensors)
      unknown = set(tensors) - set(named)
      if missing or unknown:
        raise CheckpointError(
          f"parameter mismatch: missing {sorted(missing)}, "
          f"unknown {sorted(unknown)}")
    with torch.no_grad():
      for name, value in tensors.items():
        if name not in named:
          continue
        if tuple(value.shape) != tuple(named[name].shape):
          raise CheckpointError(
            f"shape mismatch for '{name}': {tuple(value.shape)} vs "
            f"{tuple(named[name].shape)}")
        named[name].copy_(value.to(named[name].dtype))

  def metadata(self):
    return {'seed': self.seed, 'scheme': self.scheme}

# --- gradient check   -------------------------------------------------------

GRAD_EPS = 1e-12

def relative_error(a,f):
  return abs(a-f) / max(abs(a),abs(f),GRAD_EPS)

@dataclass
class GradRow:
  name: str
  index: tuple
  analytic: float
  numeric: float
  rel_error: float

@dataclass
class GradReport:
  rows: list = field(default_factory=list)

  @property
  def max_rel_error(self):
    return max((r.rel_error for r in self.rows),default=0.0)

  def worst(self,n=10):
    return self.rows[:n]

  def format(self,n=10):
    lines = [f"{'parameter':30s} {'index':>12s} {'analytic':>14s} "
             f"{'numeric':>14s} {'rel.err':>10s}"]
    for r in self.worst(n):
      lines.append(f"{r.name:30s} {str(r.index):>12s} {r.analytic:14.6e} "
                   f"{r.numeric:14.6e} {r.rel_error:10.2e}")
    return '\n'.join(lines)

def _loss_value(loss_fn,name):
  value = loss_fn()
  scalar = float(value.detach()) if torch.is_tensor(value) else float(value)
  if not math.isfinite(scalar):
    raise NonFiniteError(f"non-finite loss while perturbing '{name}'")
  return value, scalar

def grad_check(loss_fn,params,eps=1e-6,coords_per_param=None,seed=0):
  """Compare autograd gradients with central finite differences.

    loss_fn() must be deterministic (replay its noise). With
    coords_per_param set, that many coordinates per parameter are
    checked, chosen with `seed`. Rows are sorted by relative error,
    largest first.
  """
  named = params.named()
  loss, _ = _loss_value(loss_fn,'<base point>')
  tensors = list(named.values())
  if torch.is_tensor(loss) and loss.requires_grad:
    grads = torch.autograd.grad(loss,tensors,allow_unused=True)
  else:
    grads = [None]*len(tensors)

  rng = np.random.default_rng(seed)
  report = GradReport()
  with torch.no_grad():
    for (name, param), grad in zip(named.items(),grads):
      flat = param.view(-1)
      n = flat.numel()
      if coords_per_param is None or coords_per_param >= n:
        picks = range(n)
      else:
        picks = sorted(rng.choice(n,size=coords_per_param,replace=False))
      for i in picks:
        saved = flat[i].item()
        flat[i] = saved + eps
        _, plus = _loss_value(loss_fn,name)
        flat[i] = saved - eps
        _, minus = _loss_value(loss_fn,name)
        flat[i] = saved
        numeric = (plus - minus) / (2*eps)
        analytic = 0.0 if grad is None else grad.reshape(-1)[i].item()
        index = tuple(int(j) for j in np.unravel_index(i,tuple(param.shape)))
        report.rows.append(GradRow(name,index,analytic,numeric,
                                   relative_error(analytic,numeric)))
  report.rows.sort(key=lambda r: r.rel_error,reverse=True)
  return report

# --- checkpoints   ----------------------------------------------------------

MAGIC = b'LAIR'
FORMAT_VERSION = 1

def save_checkpoint(path,params,meta=None):
  """Write header, JSON metadata and all named tensors as <f4."""
  meta = dict(meta or {})
  meta['init'] = params.metadata()
  meta_bytes = json.dumps(meta,sort_keys=True).encode('utf-8')
  named = params.named()
  with open(path,'wb') as out:
    out.write(MAGIC)
    out.write(struct.pack('<IQ',FORMAT_VERSION,params.seed))
    out.write(struct.pack('<I',len(meta_bytes)))
    out.write(meta_bytes)
    out.write(struct.pack('<I',len(named)))
    for name in sorted(named):
      data = named[name].detach().cpu().numpy().astype('<f4')
      name_bytes = name.encode('utf-8')
      out.write(struct.pack('<I',len(name_bytes)))
      out.write(name_bytes)
      out.write(struct.pack('<I',data.ndim))
      out.write(struct.pack(f'<{data.ndim}I',*data.shape))
      out.write(data.tobytes())

def _read(src,size,path):
  buf = src.read(size)
  if len(buf) != size:
    raise CheckpointError(f"{path}: truncated checkpoint")
  return buf

def load_checkpoint(path):
  """ return (meta, seed, {name: float32 tensor}) """
  try:
    src = open(path,'rb')
  except OSError as err:
    raise CheckpointError(f"cannot open checkpoint '{path}': {err}")
  with src:
    if _read(src,4,path) != MAGIC:
      raise CheckpointError(f"{path}: not a relact checkpoint (bad magic)")
    version, seed = struct.unpack('<IQ',_read(src,12,path))
    if version != FORMAT_VERSION:
      raise CheckpointError(
        f"{path}: unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack('<I',_read(src,4,path))
    meta = json.loads(_read(src,meta_len,path).decode('utf-8'))
    (count,) = struct.unpack('<I',_read(src,4,path))
    tensors = {}
    for _ in range(count):
      (name_len,) = struct.unpack('<I',_read(src,4,path))
      name = _read(src,name_len,path).decode('utf-8')
      (ndim,) = struct.unpack('<I',_read(src,4,path))
      shape = struct.unpack(f'<{ndim}I',_read(src,4*ndim,path))
      size = int(np.prod(shape,dtype=np.int64))
      data = np.frombuffer(_read(src,4*size,path),dtype='<f4').reshape(shape)
      tensors[name] = torch.from_numpy(data.astype(np.float32))
  return meta, seed, tensors
