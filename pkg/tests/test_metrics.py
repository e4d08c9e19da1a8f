import itertools

import numpy as np
import pytest

from relact.metrics import (average_precision, mean_average_precision,
                            mean_average_recall, predicted_sets, top1_accuracy,
                            key_token_recall, MetricsReport)

def brute_force_ap(scores,labels):
  """ mean over positives of the precision at their score threshold """
  precisions = []
  for s, y in zip(scores,labels):
    if y:
      ranked = [l for t, l in zip(scores,labels) if t >= s]
      precisions.append(sum(ranked) / len(ranked))
  return sum(precisions) / len(precisions)

def test_ap_examples():
  assert average_precision([0.9,0.8],[1,0]) == pytest.approx(1.0)
  assert average_precision([0.8,0.9],[1,0]) == pytest.approx(0.5)
  assert average_precision([0.3,0.2],[0,0]) is None

def test_ap_matches_brute_force_on_small_instances():
  levels = (0.1,0.5,0.9)
  for n in range(1,5):
    for labels in itertools.product((0,1),repeat=n):
      if not any(labels):
        continue
      for scores in itertools.product(levels,repeat=n):
        assert average_precision(scores,labels) == pytest.approx(
          brute_force_ap(scores,labels),abs=1e-12), (scores,labels)

def test_perfect_ranking_gives_map_one():
  labels = np.array([[1,0],[1,0],[0,1],[0,1]])
  scores = np.array([[0.9,0.1],[0.8,0.3],[0.2,0.7],[0.4,0.6]])
  mAP, per_class = mean_average_precision(scores,labels)
  assert mAP == pytest.approx(1.0)
  assert set(per_class) == {0,1}

def test_map_skips_classes_without_positives():
  labels = np.array([[1,0,0],[0,1,0]])
  scores = np.array([[0.9,0.2,0.5],[0.1,0.7,0.6]])
  mAP, per_class = mean_average_precision(scores,labels)
  assert set(per_class) == {0,1}
  assert mAP == pytest.approx(1.0)
  assert mean_average_precision(scores,np.zeros((2,3))) == (None,{})

def test_recall_matches_counting():
  rng = np.random.default_rng(0)
  for multi_label in (False,True):
    for _ in range(25):
      scores = rng.random((6,3))
      if multi_label:
        labels = rng.random((6,3)) < 0.5
        labels[0] = True
      else:
        labels = np.eye(3,dtype=bool)[rng.integers(0,3,6)]
        labels[:3] = np.eye(3,dtype=bool)
      pred = predicted_sets(scores,multi_label)
      mAR, per_class = mean_average_recall(scores,labels,multi_label)
      for c, value in per_class.items():
        assert value == pytest.approx((pred[:,c] & labels[:,c]).sum() / labels[:,c].sum())
      assert mAR == pytest.approx(np.mean(list(per_class.values())))

def test_predicted_sets():
  scores = np.array([[0.2,0.7,0.6]])
  assert predicted_sets(scores,False).tolist() == [[False,True,False]]
  assert predicted_sets(scores,True).tolist() == [[False,True,True]]

def test_top1_accuracy():
  labels = np.eye(3)[[0,1,2,0]]
  scores = np.array([[0.8,0.1,0.1],[0.1,0.8,0.1],[0.5,0.3,0.2],[0.2,0.3,0.5]])
  assert top1_accuracy(scores,labels) == 0.5
  assert top1_accuracy(np.zeros((0,3)),np.zeros((0,3))) is None

def test_key_token_recall():
  key = np.array([[True,True],[False,True]])
  selected = np.array([[True,False],[True,True]])
  assert key_token_recall(selected,key) == pytest.approx(2/3)
  assert key_token_recall(selected,np.zeros((2,2),dtype=bool)) is None

def test_primary_metric():
  assert MetricsReport(accuracy=0.7,mAP=0.4).primary == 0.7
  assert MetricsReport(mAP=0.4).primary == 0.4
