# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Shared fixtures: 64-bit defaults, a tiny synthetic world and model.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import pytest
import torch

from relact.options import Options
from relact.datagen import default_world, generate_dataset, load_dataset, collate
from relact.model import build_model
from relact.trainer import TrainConfig, sample_frames
from relact import utils

TINY_WORLD = dict(T=4,K=3,num_classes=3,n_scenes=5,frames_min=4,frames_max=6,
                  d_v=6,d_u=6,seed=0)
TINY_MODEL = dict(T=4,d_h=4,d_e=4,d_local=8,d=8,layers=1,heads=2,mlp_ratio=2,
                  select_dim=4,box_resolution=4)

# --- slow marker   ----------------------------------------------------------

def pytest_addoption(parser):
  parser.addoption("--runslow",action="store_true",default=False,
                   help="run the long training trend checks")

def pytest_configure(config):
  config.addinivalue_line("markers","slow: long training runs (need --runslow)")

def pytest_collection_modifyitems(config,items):
  if config.getoption("--runslow"):
    return
  skip = pytest.mark.skip(reason="needs --runslow")
  for item in items:
    if "slow" in item.keywords:
      item.add_marker(skip)

# --- defaults   -------------------------------------------------------------

@pytest.fixture(autouse=True)
def float64_single_thread(monkeypatch):
  monkeypatch.delenv('LAIR_SEED',raising=False)
  old = torch.get_default_dtype()
  torch.set_default_dtype(torch.float64)
  utils.set_threads(1)
  Options.reset()
  yield
  torch.set_default_dtype(old)
  Options.reset()

# --- tiny world   -----------------------------------------------------------

@pytest.fixture
def tiny_spec():
  return default_world(**TINY_WORLD)

@pytest.fixture(scope='session')
def tiny_data_dir(tmp_path_factory):
  path = tmp_path_factory.mktemp('tiny-data')
  generate_dataset(default_world(**TINY_WORLD),30,str(path))
  return str(path)

@pytest.fixture
def tiny_data(tiny_data_dir):
  return load_dataset(tiny_data_dir)

@pytest.fixture
def tiny_samples(tiny_data):
  return tiny_data.load_all()

@pytest.fixture
def tiny_model(tiny_data):
  model, _ = build_model(tiny_data.meta,TINY_MODEL,seed=0,precision='float64')
  return model

@pytest.fixture
def tiny_store(tiny_data):
  return build_model(tiny_data.meta,TINY_MODEL,seed=0,precision='float64')

def make_batch(samples,meta,T=4,source='predicted'):
  frames = [sample_frames(s.n_frames,T,'uniform') for s in samples]
  return collate(samples,frames,meta,torch.float64,source)

@pytest.fixture
def tiny_batch(tiny_data,tiny_samples):
  return make_batch(tiny_samples[:4],tiny_data.meta)

@pytest.fixture
def tiny_config():
  return TrainConfig(epochs=2,batch_size=4,precision='float64',sim_pairs=32,
                     eval_batch_size=8,**TINY_MODEL)
