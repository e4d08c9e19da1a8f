import math

import pytest
import torch

from relact.numerics import InvalidArgumentError, NonFiniteError, NoiseSource
from relact.heads import (ActionPrediction, ClassificationHeads, classify,
                          cross_entropy, loss_cls, loss_sim, sample_sim_pairs,
                          loss_tss, loss_xm, loss_total, Temperature)

LN2 = math.log(2.0)

def _zero_heads(C,multi_label):
  heads = ClassificationHeads(6,C,multi_label)
  with torch.no_grad():
    for p in heads.parameters():
      p.zero_()
  return heads

# --- heads   ----------------------------------------------------------------

def test_zero_heads_single_label_are_uniform():
  pred = classify(torch.randn(2,6),'v',_zero_heads(4,False))
  assert pred.num_classes == 4
  assert torch.allclose(pred.scores,torch.full((2,4),0.25),atol=1e-15)

def test_zero_heads_multi_label_give_half():
  pred = classify(torch.randn(6),'v2s',_zero_heads(3,True))
  assert torch.equal(pred.scores,torch.full((3,),0.5))

def test_classify_rejects_unknown_head_and_non_finite_input():
  heads = _zero_heads(3,False)
  with pytest.raises(InvalidArgumentError):
    classify(torch.randn(6),'x',heads)
  with pytest.raises(NonFiniteError):
    classify(torch.tensor([math.nan]*6),'s',heads)

# --- classification loss   --------------------------------------------------

def test_bce_of_half_is_ln2():
  pred = ActionPrediction.from_scores([[0.5]],multi_label=True)
  assert float(cross_entropy(pred,[[1.0]])) == pytest.approx(LN2,abs=1e-12)

def test_perfect_predictions_have_tiny_loss():
  labels = torch.tensor([[1.0,0.0,1.0]])
  pred = ActionPrediction.from_scores(labels.clone(),multi_label=True)
  assert float(cross_entropy(pred,labels)) <= 1e-6

def test_cls_is_sum_of_branches():
  torch.manual_seed(0)
  heads = ClassificationHeads(6,3,False)
  labels = torch.eye(3)[[0,2]]
  P_v = classify(torch.randn(2,6),'v',heads)
  P_s = classify(torch.randn(2,6),'s',heads)
  l_v, l_s, l_cls = loss_cls(P_v,P_s,labels)
  assert float(l_cls) == float(l_v + l_s)

def test_label_validation():
  pred = ActionPrediction.from_scores([[0.3,0.7]],multi_label=False)
  with pytest.raises(InvalidArgumentError):
    cross_entropy(pred,[[1.0,1.0]])
  with pytest.raises(InvalidArgumentError):
    cross_entropy(pred,[[1.0,0.0,0.0]])
  with pytest.raises(InvalidArgumentError):
    cross_entropy(pred,[[0.5,0.5]])

# --- contrastive loss   -----------------------------------------------------

def test_sim_single_pair_is_zero():
  V = torch.randn(1,5)
  assert float(loss_sim(V,torch.randn(1,5),10.0)) == 0.0

def test_sim_orthonormal_pairs():
  I = torch.eye(2)
  loss = float(loss_sim(I,I,1.0))
  assert loss == pytest.approx(math.log(1 + math.exp(-1)),abs=1e-9)

def test_sim_identical_pairs_is_ln2():
  V = torch.ones(2,3)
  assert float(loss_sim(V,V,7.0)) == pytest.approx(LN2,abs=1e-12)

def test_sim_is_scale_invariant():
  V, S = torch.randn(5,4), torch.randn(5,4)
  assert float(loss_sim(V,S,3.0)) == pytest.approx(
    float(loss_sim(4.0*V,0.25*S,3.0)),abs=1e-12)

def test_sim_masks_same_group_negatives():
  I = torch.eye(2)
  assert float(loss_sim(I,I,1.0,groups=[4,4])) == pytest.approx(0.0,abs=1e-12)

def test_sim_errors():
  with pytest.raises(InvalidArgumentError):
    loss_sim(torch.randn(2,3),torch.randn(3,3),1.0)
  with pytest.raises(InvalidArgumentError):
    loss_sim(torch.zeros(2,3),torch.randn(2,3),1.0)

def test_temperature_is_clamped():
  t = Temperature()
  assert float(t()) == pytest.approx(10.0)
  with torch.no_grad():
    t.logit_scale.fill_(10.0)
  assert float(t()) == pytest.approx(100.0)

def test_sample_sim_pairs():
  valid = torch.ones(2,4,3,dtype=torch.bool)
  valid[1,2:] = False
  positions = sample_sim_pairs(valid,5,NoiseSource(0).generator('sim'))
  assert positions.shape == (5,3)
  assert bool(valid[tuple(positions.T)].all())
  assert sample_sim_pairs(valid,100).shape == (18,3)

# --- selection supervision   ------------------------------------------------

def test_tss_hand_cases():
  zeros, ones = torch.zeros(1,1,1), torch.ones(1,1,1)
  assert float(loss_tss(zeros,zeros)) == 0.0
  assert float(loss_tss(zeros,ones)) == 2.0
  assert float(loss_tss(torch.ones(2,3,4),torch.ones(2,3,4))) == 1.0

def test_tss_with_silent_language_is_mean_square():
  u_v = torch.rand(2,3,4)
  assert float(loss_tss(u_v,torch.zeros(2,3,4))) == pytest.approx(
    float((u_v**2).mean()),abs=1e-12)
  with pytest.raises(InvalidArgumentError):
    loss_tss(u_v,torch.zeros(2,3,3))

# --- cross-modal loss   -----------------------------------------------------

def test_xm_identities():
  p = ActionPrediction.from_scores([[0.2,0.3,0.5]],False)
  assert float(loss_xm(p,p)) == pytest.approx(0.0,abs=1e-12)
  onehot = ActionPrediction.from_scores([[1.0,0.0]],False)
  half = ActionPrediction.from_scores([[0.5,0.5]],False)
  assert float(loss_xm(onehot,half)) == pytest.approx(LN2,abs=1e-9)

def test_xm_is_non_negative():
  torch.manual_seed(3)
  for multi_label in (False,True):
    for _ in range(20):
      a, b = torch.randn(4,5), torch.randn(4,5)
      act = torch.sigmoid if multi_label else (lambda x: torch.softmax(x,-1))
      P_s = ActionPrediction(act(a),multi_label,a)
      P_v2s = ActionPrediction(act(b),multi_label,b)
      assert float(loss_xm(P_s,P_v2s)) >= 0.0

def test_xm_does_not_train_language_branch(tiny_model,tiny_batch):
  noise = NoiseSource(0)
  video = tiny_model.video_branch(tiny_batch,noise)
  language = tiny_model.language_branch(tiny_batch,noise)
  loss_xm(language.prediction,video.estimate).backward()
  for name, param in tiny_model.named_parameters():
    if name.startswith(('semantic.','f_s.','heads.s.')):
      assert param.grad is None or float(param.grad.abs().sum()) == 0.0, name
  assert float(tiny_model.heads.v2s.weight.grad.abs().sum()) > 0

# --- total   ----------------------------------------------------------------

def test_total_with_default_weights():
  parts = loss_total(0.5,0.5,1.0,1.0,1.0)
  assert float(parts.l_cls) == 1.0
  assert float(parts.total) == pytest.approx(2.2,abs=1e-12)
  assert parts.weights == {'delta': 0.1,'zeta': 1.0,'eta': 0.1}
  assert float(loss_total(0,0,0,0,0).total) == 0.0

def test_total_rejects_bad_inputs():
  with pytest.raises(InvalidArgumentError):
    loss_total(1,1,1,1,1,delta=-0.1)
  with pytest.raises(NonFiniteError):
    loss_total(1,math.inf,1,1,1)
