# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Utility functions.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import os
import sys
import json
import time

import torch

from .options import Options

def print_err(*args, end='\n'):
  """Similar to print, but prints to stderr.
  """
  print(*args, end=end, file=sys.stderr)
  sys.stderr.flush()

def warn(*args):
  print_err('warning:',*args)

def vprint(*args, **kwargs):
  """ print only in verbose mode """
  if Options.get().verbose:
    print(*args, **kwargs)

def dprint(*args, **kwargs):
  """ print only in debug mode """
  if Options.get().debug:
    print(*args, **kwargs)

class Timer:
  """Context manager reporting 'took N seconds' like the --timing option."""

  def __init__(self,what=None,enabled=True):
    self.what = what
    self.enabled = enabled

  def __enter__(self):
    self.start = time.time()
    return self

  def __exit__(self,*exc):
    self.elapsed = time.time() - self.start
    if self.enabled:
      prefix = f"{self.what}: " if self.what else ''
      print(f"{prefix}took {self.elapsed:.3f} seconds")
    return False

def env_seed(default):
  """LAIR_SEED overrides configured seeds."""
  value = os.getenv('LAIR_SEED')
  if value is None or value == '':
    return default
  try:
    return int(value)
  except ValueError:
    warn(f"ignoring non-integer LAIR_SEED='{value}'")
    return default

def set_threads(threads=None):
  """ torch intra-op threads, RELACT_THREADS is the default """
  if threads is None:
    try:
      threads = int(os.getenv('RELACT_THREADS',1))
    except ValueError:
      threads = 1
  threads = max(1,int(threads))
  torch.set_num_threads(threads)
  return threads

def write_jsonl(path,records,mode='w'):
  with open(path,mode,encoding='utf-8') as out:
    for record in records:
      out.write(json.dumps(record,sort_keys=True) + '\n')

def read_jsonl(path):
  with open(path,encoding='utf-8') as src:
    return [json.loads(line) for line in src if line.strip()]

def ensure_dir(path):
  if path:
    os.makedirs(path,exist_ok=True)
  return path
