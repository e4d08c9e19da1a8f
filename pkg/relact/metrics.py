# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Evaluation metrics: mean average precision (multi-label), mean average
# recall and top-1 accuracy (single-label), retained-token statistics.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics import average_precision_score, recall_score

from . import utils

@dataclass
class MetricsReport:
  mAP: float = None
  mAR: float = None
  accuracy: float = None
  num: float = None
  valid_tokens: float = None
  per_class_ap: dict = field(default_factory=dict)
  per_class_recall: dict = field(default_factory=dict)
  key_recall: float = None
  joint_cosine: float = None
  losses: dict = field(default_factory=dict)
  epoch: int = None
  mode: str = 'video-only'
  n_videos: int = 0

  @property
  def primary(self):
    """ top-1 accuracy for single-label data, mAP for multi-label data """
    return self.accuracy if self.accuracy is not None else self.mAP

  def as_dict(self):
    return {k: v for k, v in self.__dict__.items()}

# --- average precision   ----------------------------------------------------

def average_precision(scores,labels):
  """AP of one class over a ranked set; items with equal scores share a rank."""
  labels = np.asarray(labels).astype(int)
  if labels.sum() == 0:
    return None
  return float(average_precision_score(labels,np.asarray(scores,dtype=np.float64)))

def _present_classes(labels,what):
  labels = np.asarray(labels)
  present, missing = [], []
  for c in range(labels.shape[1]):
    (present if labels[:,c].sum() > 0 else missing).append(c)
  if missing:
    utils.warn(f"classes {missing} have no positive video; excluded from {what}")
  return present

def mean_average_precision(scores,labels):
  """ (mAP, {class: AP}) over classes with at least one positive """
  scores = np.asarray(scores,dtype=np.float64)
  labels = np.asarray(labels)
  per_class = {c: average_precision(scores[:,c],labels[:,c])
               for c in _present_classes(labels,'mAP')}
  if not per_class:
    return None, {}
  return float(np.mean(list(per_class.values()))), per_class

# --- recall and accuracy   --------------------------------------------------

def predicted_sets(scores,multi_label,threshold=0.5):
  """ argmax for single-label, scores >= threshold for multi-label """
  scores = np.asarray(scores,dtype=np.float64)
  pred = np.zeros(scores.shape,dtype=bool)
  if multi_label:
    pred = scores >= threshold
  else:
    pred[np.arange(scores.shape[0]),scores.argmax(axis=1)] = True
  return pred

def mean_average_recall(scores,labels,multi_label=False):
  """ (mAR, {class: recall}) of the predicted label sets """
  labels = np.asarray(labels).astype(bool)
  pred = predicted_sets(scores,multi_label)
  per_class = {}
  for c in _present_classes(labels,'mAR'):
    per_class[c] = float(recall_score(labels[:,c],pred[:,c],zero_division=0))
  if not per_class:
    return None, {}
  return float(np.mean(list(per_class.values()))), per_class

def top1_accuracy(scores,labels):
  scores = np.asarray(scores)
  labels = np.asarray(labels)
  if scores.shape[0] == 0:
    return None
  hits = labels[np.arange(scores.shape[0]),scores.argmax(axis=1)] > 0
  return float(hits.mean())

def key_token_recall(selected,key):
  """ fraction of planted key tokens that were retained """
  selected = np.asarray(selected).astype(bool)
  key = np.asarray(key).astype(bool)
  if key.sum() == 0:
    return None
  return float((selected & key).sum() / key.sum())
