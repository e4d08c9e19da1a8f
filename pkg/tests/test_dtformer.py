import pytest
import torch

from relact.numerics import (InvalidArgumentError, NoiseSource,
                              TransformerBlock, attention_block, layer_norm)
from relact.dtformer import (DTFormer, SelectionMask, TokenSelector,
                             token_select, KEEP_INIT)

T, K, D = 4, 3, 8

def _former(**kw):
  torch.manual_seed(0)
  return DTFormer(T,K,dim=D,layers=2,heads=2,select_dim=4,**kw)

def _inputs(B=2):
  torch.manual_seed(1)
  embeddings = torch.randn(B,T,K,D)
  valid = torch.ones(B,T,K,dtype=torch.bool)
  valid[0,3] = False
  valid[1,:,2] = False
  return embeddings, valid

def _saturate(selector,keep=True):
  last = selector.sigma[-1]
  with torch.no_grad():
    last.weight.zero_()
    last.bias.copy_(torch.tensor([-100.0,100.0] if keep else [100.0,-100.0]))

def test_mask_composition_and_binary_values():
  former = _former()
  embeddings, valid = _inputs()
  out = former(embeddings,valid,NoiseSource(0))
  mask = out.mask
  assert mask.combined.shape == (2,T,K)
  for part in (mask.temporal,mask.spatial,mask.combined):
    assert bool(((part == 0) | (part == 1)).all())
  assert torch.equal(mask.combined,mask.temporal*mask.spatial*valid.double())
  assert bool((mask.combined[~valid] == 0).all())
  # temporal decisions are shared by all slots of a frame
  assert torch.equal(mask.temporal,mask.temporal[:,:,:1].expand(2,T,K))

def test_saturated_selectors_keep_every_valid_token():
  former = _former()
  _saturate(former.temporal_selector)
  _saturate(former.spatial_selector)
  embeddings, valid = _inputs()
  out = former(embeddings,valid,NoiseSource(5))
  assert torch.equal(out.mask.combined,valid.double())
  assert out.mask.num_retained.tolist() == [9.0,8.0]

def test_saturated_drop_keeps_one_token_per_video():
  former = _former()
  _saturate(former.spatial_selector,keep=False)
  embeddings, valid = _inputs()
  out = former(embeddings,valid,NoiseSource(5))
  mask = out.mask
  assert mask.num_retained.tolist() == [1.0,1.0]
  assert bool((mask.combined[~valid] == 0).all())
  assert torch.equal(mask.combined,mask.temporal*mask.spatial*valid.double())
  assert out.z.shape == (2,D)
  assert bool(torch.isfinite(out.z).all())

def test_forced_token_still_passes_gradient():
  former = _former()
  _saturate(former.temporal_selector,keep=False)
  embeddings, valid = _inputs()
  out = former(embeddings,valid,NoiseSource(1))
  assert bool((out.mask.num_retained >= 1).all())
  out.z.sum().backward()
  assert float(former.spatial_selector.W1.weight.grad.abs().sum()) > 0

def test_selection_without_noise_is_deterministic():
  former = _former()
  embeddings, valid = _inputs()
  a = former(embeddings,valid)
  b = former(embeddings,valid)
  assert torch.equal(a.mask.combined,b.mask.combined)
  assert torch.equal(a.z,b.z)

def test_noise_replay_and_sites():
  former = _former()
  embeddings, valid = _inputs()
  a = former(embeddings,valid,NoiseSource(3,step=7))
  b = former(embeddings,valid,NoiseSource(3,step=7))
  assert torch.equal(a.mask.combined,b.mask.combined)
  assert torch.equal(a.z,b.z)

def test_dropped_tokens_do_not_influence_output():
  former = _former()
  embeddings, valid = _inputs()
  embedded = former.embed_tokens(embeddings)
  mask = former.spatiotemporal_mask(embedded,valid,NoiseSource(2))
  before = former.encode_sequence(embedded,mask)

  dropped = torch.cat([torch.zeros(2,1,dtype=torch.bool),
                       (mask.combined == 0).reshape(2,T*K)],dim=1)
  changed = embedded.clone()
  changed[dropped] += 25.0*torch.randn(int(dropped.sum()),D)
  after = former.encode_sequence(changed,mask)
  assert torch.equal(before.z,after.z)
  kept = ~dropped
  assert torch.equal(before.token_outputs[kept],after.token_outputs[kept])

def test_without_selection_every_valid_token_is_kept():
  former = _former(spatial_select=False,temporal_select=False)
  embeddings, valid = _inputs()
  out = former(embeddings,valid,NoiseSource(0))
  assert torch.equal(out.mask.combined,valid.double())
  assert out.mask.num_retained.tolist() == [float(v) for v in valid.sum(dim=(1,2))]

def test_soft_relaxation_gives_fractional_mask():
  former = _former()
  embeddings, valid = _inputs()
  out = former(embeddings,valid,NoiseSource(0),hard=False)
  values = out.mask.spatial
  assert bool(((values[valid] > 0) & (values[valid] < 1)).all())
  assert bool((values[~valid] == 0).all())

def test_straight_through_reaches_selectors():
  former = _former()
  embeddings, valid = _inputs()
  former(embeddings,valid,NoiseSource(0)).z.sum().backward()
  assert former.spatial_selector.W1.weight.grad is not None
  assert float(former.temporal_selector.W1.weight.grad.abs().sum()) > 0

def test_shape_errors():
  former = _former()
  with pytest.raises(InvalidArgumentError):
    former(torch.randn(1,T+1,K,D),torch.ones(1,T+1,K,dtype=torch.bool))
  with pytest.raises(InvalidArgumentError):
    former(torch.randn(1,T,K,D),torch.zeros(1,T,K,dtype=torch.bool))
  selector = TokenSelector(D,4)
  with pytest.raises(InvalidArgumentError):
    token_select(torch.randn(3,D),torch.randn(D+1),selector)

def test_selection_mask_helpers():
  ones = torch.ones(2,T,K)
  mask = SelectionMask(ones,ones,ones)
  assert mask.num_retained.tolist() == [12.0,12.0]
  assert mask[1].combined.shape == (T,K)

# --- starting values and invalid slots   ------------------------------------

def test_fresh_selectors_keep_every_valid_token(tiny_model,tiny_batch):
  for selector in (tiny_model.dtformer.temporal_selector,
                   tiny_model.dtformer.spatial_selector):
    assert selector.sigma[-1].bias.tolist() == [0.0,KEEP_INIT]
  with torch.no_grad():
    out = tiny_model.video_branch(tiny_batch)
  assert torch.equal(out.encoded.mask.combined,tiny_batch.valid.double())

def test_invalid_slots_never_reach_the_selectors():
  former = _former()
  embeddings, valid = _inputs()
  seen = {}
  for name in ('temporal','spatial'):
    selector = getattr(former,f"{name}_selector")
    selector.register_forward_hook(
      lambda mod,args,out,name=name: seen.setdefault(name,args[0].shape[0]))
  former(embeddings,valid,NoiseSource(0))
  assert seen == {'temporal': 7,'spatial': 17}

def test_invalid_slot_contents_do_not_matter():
  former = _former()
  embeddings, valid = _inputs()
  changed = embeddings.clone()
  changed[~valid] = 50.0*torch.randn(int((~valid).sum()),D)
  a = former(embeddings,valid,NoiseSource(4))
  b = former(changed,valid,NoiseSource(4))
  assert torch.equal(a.mask.combined,b.mask.combined)
  assert torch.equal(a.z,b.z)

# --- keep-bias sweep and full-mask equivalence   ----------------------------

def test_retained_count_falls_with_keep_bias():
  former = _former()
  embeddings, valid = _inputs()
  base = [sel.sigma[-1].bias.detach().clone()
          for sel in (former.temporal_selector,former.spatial_selector)]
  means = []
  for shift in (3.0,0.0,-3.0,-6.0):
    with torch.no_grad():
      for sel, bias in zip((former.temporal_selector,former.spatial_selector),base):
        sel.sigma[-1].bias.copy_(bias)
        sel.sigma[-1].bias[1] += shift
      counts = [former(embeddings,valid,NoiseSource(seed)).mask.num_retained.sum()
                for seed in range(100)]
    means.append(float(torch.stack(counts).mean()))
  assert all(a >= b for a, b in zip(means,means[1:]))
  assert means[0] > means[-1]

def test_full_mask_matches_plain_attention():
  torch.manual_seed(2)
  block = TransformerBlock(D,heads=2)
  x = torch.randn(2,5,D)
  ones = torch.ones(2,5)
  assert torch.equal(attention_block(x,ones,block),block(x))
  assert torch.equal(attention_block(x,ones.clone().requires_grad_(),block),block(x))

def test_all_kept_former_matches_unmasked_reference():
  former = _former(spatial_select=False,temporal_select=False)
  embeddings = torch.randn(2,T,K,D)
  valid = torch.ones(2,T,K,dtype=torch.bool)
  out = former(embeddings,valid)
  y = former.embed_tokens(embeddings)
  for block in former.blocks:
    y = block(y)
  assert torch.equal(out.token_outputs,y)
  assert torch.equal(out.z,layer_norm(y[:,0],former.norm))
