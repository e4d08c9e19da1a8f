# ----------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Synthetic relation-transition datasets: world specification, seeded
# generator, dataset file format, streaming loader and batch collation.
#
# A dataset directory holds
#   meta.json       vocabularies, T, K, C, feature sizes, label mode
#   videos.jsonl    one video per line
#   manifest.json   splits, scene-held-out folds, spec hash, seed
#
# License: MIT
#
# Website: https://github.com/relact/relact
# ----------------------------------------------------------------------------

import os
import json
import math
import hashlib
from dataclasses import dataclass, field, asdict, replace

import numpy as np
import torch
import yaml

from .numerics import RelactError, InvalidArgumentError, stable_seed

SCHEMA_VERSION = 1
META_FILE     = 'meta.json'
VIDEOS_FILE   = 'videos.jsonl'
MANIFEST_FILE = 'manifest.json'
N_FOLDS = 5

SLOT_FIELDS = ('subject_feat','object_feat','union_feat','subject_box',
               'object_box','subject_cat','relation_cat','object_cat','valid')

class ParseError(RelactError):
  """Dataset file violates the schema."""

  def __init__(self,path,line,field,msg):
    super().__init__(f"{path}:{line}: field '{field}': {msg}")
    self.path  = path
    self.line  = line
    self.field = field

# --- world specification   --------------------------------------------------

@dataclass
class ActionRule:
  """An action is the transition before -> after on a (person, object) pair."""
  action: str
  object: str
  before: str
  after: str

DEFAULT_CATEGORIES = ['person','cup','phone','book','chair','door','laptop',
                      'food','bag','blanket']
DEFAULT_RELATIONS  = ['not_contacting','holding','not_holding','touching',
                      'sitting_on','looking_at','eating','lying_on',
                      'talking_on','opening']
DEFAULT_RULES = [
  ActionRule('place',    'cup',    'holding',       'not_holding'),
  ActionRule('take',     'cup',    'not_holding',   'holding'),
  ActionRule('sit_down', 'chair',  'not_contacting','sitting_on'),
  ActionRule('stand_up', 'chair',  'sitting_on',    'not_contacting'),
  ActionRule('open',     'door',   'touching',      'opening'),
  ActionRule('use',      'laptop', 'touching',      'looking_at'),
  ActionRule('eat',      'food',   'holding',       'eating'),
  ActionRule('read',     'book',   'holding',       'looking_at'),
  ActionRule('lie_down', 'blanket','not_contacting','lying_on'),
  ActionRule('call',     'phone',  'holding',       'talking_on'),
]

@dataclass
class WorldSpec:
  categories: list = field(default_factory=lambda: list(DEFAULT_CATEGORIES))
  relations: list  = field(default_factory=lambda: list(DEFAULT_RELATIONS))
  rules: list      = field(default_factory=lambda: list(DEFAULT_RULES))
  n_scenes: int    = 10
  T: int           = 8
  K: int           = 5
  num_classes: int = 10
  frames_min: int  = 8
  frames_max: int  = 16
  noise: float     = 0.2
  corruption: float = 0.1
  scene_shift: float = 0.5
  multi_label: bool = False
  d_v: int = 32
  d_u: int = 32
  seed: int = 0

  def validate(self):
    if not self.categories or not self.relations:
      raise InvalidArgumentError("vocabularies must not be empty")
    if self.num_classes < 1 or self.num_classes > len(self.rules):
      raise InvalidArgumentError(
        f"{self.num_classes} classes requested but only "
        f"{len(self.rules)} action rules defined")
    actions = [r.action for r in self.rules[:self.num_classes]]
    if len(set(actions)) != len(actions):
      raise InvalidArgumentError("every action needs exactly one rule")
    for rule in self.rules:
      if rule.object not in self.categories:
        raise InvalidArgumentError(f"rule '{rule.action}': unknown object '{rule.object}'")
      for rel in (rule.before,rule.after):
        if rel not in self.relations:
          raise InvalidArgumentError(f"rule '{rule.action}': unknown relation '{rel}'")
      if rule.before == rule.after:
        raise InvalidArgumentError(f"rule '{rule.action}' has no transition")
    for name in ('noise','corruption'):
      value = getattr(self,name)
      if not 0 <= value <= 1:
        raise InvalidArgumentError(f"{name} must lie in [0,1], got {value}")
    max_rules = 3 if self.multi_label else 1
    if self.K < min(max_rules,self.num_classes) + 1:
      raise InvalidArgumentError(f"K={self.K} leaves no room for distractor slots")
    if self.n_scenes < 1 or self.T < 1:
      raise InvalidArgumentError("n_scenes and T must be >= 1")
    if self.frames_min < 2:
      raise InvalidArgumentError("frames_min must be >= 2 to hold a transition")
    if self.frames_max < self.frames_min:
      raise InvalidArgumentError("frames_max must be >= frames_min")
    return self

  @property
  def active_rules(self):
    return self.rules[:self.num_classes]

  def to_dict(self):
    return asdict(self)

  @classmethod
  def from_dict(cls,data):
    data = dict(data)
    unknown = set(data) - set(cls.__dataclass_fields__)
    if unknown:
      raise InvalidArgumentError(f"unknown world spec keys: {sorted(unknown)}")
    if 'rules' in data:
      data['rules'] = [r if isinstance(r,ActionRule) else ActionRule(**r)
                       for r in data['rules']]
    return cls(**data)

  @classmethod
  def from_yaml(cls,path):
    with open(path) as src:
      return cls.from_dict(yaml.safe_load(src) or {})

  def spec_hash(self):
    canon = json.dumps(self.to_dict(),sort_keys=True).encode('utf-8')
    return hashlib.sha256(canon).hexdigest()

def default_world(**overrides):
  """ the standard synthetic benchmark, optionally modified """
  return replace(WorldSpec(),**overrides).validate()

# --- metadata and samples   -------------------------------------------------

@dataclass
class DatasetMeta:
  categories: list
  relations: list
  actions: list
  T: int
  K: int
  num_classes: int
  d_v: int
  d_u: int
  multi_label: bool
  rules: list = field(default_factory=list)
  schema_version: int = SCHEMA_VERSION

  def to_dict(self):
    return asdict(self)

  @classmethod
  def from_dict(cls,data,path='<meta>'):
    data = dict(data)
    version = data.get('schema_version',SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
      raise ParseError(path,1,'schema_version',f"unsupported version {version}")
    for name in ('categories','relations','actions','T','K','num_classes',
                 'd_v','d_u','multi_label'):
      if name not in data:
        raise ParseError(path,1,name,"missing")
    data['rules'] = [r if isinstance(r,ActionRule) else ActionRule(**r)
                     for r in data.get('rules',[])]
    return cls(**data)

  def triple_name(self,subject_cat,relation_cat,object_cat):
    return (f"{self.categories[subject_cat]} {self.relations[relation_cat]} "
            f"{self.categories[object_cat]}")

@dataclass
class VideoSample:
  """F x K grid of relation tokens plus labels.

    Semantic arrays are None for samples stripped to the visual stream.
  """
  video_id: str
  labels: list
  subject_feat: np.ndarray
  object_feat: np.ndarray
  union_feat: np.ndarray
  subject_box: np.ndarray
  object_box: np.ndarray
  valid: np.ndarray
  subject_cat: np.ndarray = None
  relation_cat: np.ndarray = None
  object_cat: np.ndarray = None
  gt_relation_cat: np.ndarray = None
  scene: int = None
  key_tokens: list = field(default_factory=list)

  @property
  def n_frames(self):
    return self.valid.shape[0]

  @property
  def n_slots(self):
    return self.valid.shape[1]

  def token(self,f,k):
    from .relation_encoding import RelationToken
    cat = lambda a: None if a is None else int(a[f,k])
    return RelationToken(f,k,self.subject_feat[f,k],self.object_feat[f,k],
                         self.union_feat[f,k],self.subject_box[f,k],
                         self.object_box[f,k],cat(self.subject_cat),
                         cat(self.relation_cat),cat(self.object_cat),
                         bool(self.valid[f,k]))

  def visual_only(self):
    """ copy without any semantic field """
    return replace(self,subject_cat=None,relation_cat=None,object_cat=None,
                   gt_relation_cat=None)

  def to_record(self):
    frames = []
    for f in range(self.n_frames):
      slots = []
      for k in range(self.n_slots):
        slot = {
          'subject_feat': self.subject_feat[f,k].tolist(),
          'object_feat':  self.object_feat[f,k].tolist(),
          'union_feat':   self.union_feat[f,k].tolist(),
          'subject_box':  self.subject_box[f,k].tolist(),
          'object_box':   self.object_box[f,k].tolist(),
          'subject_cat':  int(self.subject_cat[f,k]),
          'relation_cat': int(self.relation_cat[f,k]),
          'object_cat':   int(self.object_cat[f,k]),
          'valid':        bool(self.valid[f,k]),
        }
        if self.gt_relation_cat is not None:
          slot['gt_relation_cat'] = int(self.gt_relation_cat[f,k])
        slots.append(slot)
      frames.append(slots)
    record = {'video_id': self.video_id,'labels': list(self.labels),
              'frames': frames}
    if self.scene is not None:
      record['scene'] = self.scene
    if self.key_tokens:
      record['key_tokens'] = [list(ft) for ft in self.key_tokens]
    return record

# --- record validation   ----------------------------------------------------

def _vector(slot,name,dim,where):
  path, line = where
  value = slot.get(name)
  if not isinstance(value,list) or len(value) != dim:
    raise ParseError(path,line,name,f"expected a list of {dim} numbers")
  try:
    return np.asarray(value,dtype=np.float64)
  except (TypeError,ValueError):
    raise ParseError(path,line,name,"non-numeric entry")

def _category(slot,name,size,where):
  value = slot.get(name)
  if not isinstance(value,int) or isinstance(value,bool) or not 0 <= value < size:
    raise ParseError(where[0],where[1],name,f"expected an id in 0..{size-1}")
  return value

def sample_from_record(record,meta,path='<record>',line=0):
  """ validate a decoded record and build a VideoSample """
  where = (path,line)
  if not isinstance(record,dict):
    raise ParseError(path,line,'<record>',"expected an object")
  for name in ('video_id','labels','frames'):
    if name not in record:
      raise ParseError(path,line,name,"missing")
  labels = record['labels']
  if (not isinstance(labels,list) or not labels or
      any(not isinstance(c,int) or not 0 <= c < meta.num_classes for c in labels)):
    raise ParseError(path,line,'labels',f"expected class ids in 0..{meta.num_classes-1}")
  if not meta.multi_label and len(labels) != 1:
    raise ParseError(path,line,'labels',"single-label data needs exactly one label")
  frames = record['frames']
  if not isinstance(frames,list) or not frames:
    raise ParseError(path,line,'frames',"expected a non-empty list of frames")

  F, K = len(frames), meta.K
  arrays = {
    'subject_feat': np.zeros((F,K,meta.d_v)),
    'object_feat':  np.zeros((F,K,meta.d_v)),
    'union_feat':   np.zeros((F,K,meta.d_u)),
    'subject_box':  np.zeros((F,K,4)),
    'object_box':   np.zeros((F,K,4)),
  }
  cats = {name: np.zeros((F,K),dtype=np.int64) for name in
            ('subject_cat','relation_cat','object_cat','gt_relation_cat')}
  valid = np.zeros((F,K),dtype=bool)
  n_cat, n_rel = len(meta.categories), len(meta.relations)
  for f, slots in enumerate(frames):
    if not isinstance(slots,list) or len(slots) != K:
      raise ParseError(path,line,'frames',f"frame {f} must have {K} slots")
    for k, slot in enumerate(slots):
      if not isinstance(slot,dict):
        raise ParseError(path,line,'frames',f"slot ({f},{k}) is not an object")
      for name in SLOT_FIELDS:
        if name not in slot:
          raise ParseError(path,line,name,f"missing in slot ({f},{k})")
      valid[f,k] = bool(slot['valid'])
      for name, dim in (('subject_feat',meta.d_v),('object_feat',meta.d_v),
                        ('union_feat',meta.d_u),('subject_box',4),
                        ('object_box',4)):
        arrays[name][f,k] = _vector(slot,name,dim,where)
      cats['subject_cat'][f,k]  = _category(slot,'subject_cat',n_cat,where)
      cats['object_cat'][f,k]   = _category(slot,'object_cat',n_cat,where)
      cats['relation_cat'][f,k] = _category(slot,'relation_cat',n_rel,where)
      cats['gt_relation_cat'][f,k] = (
        _category(slot,'gt_relation_cat',n_rel,where)
          if 'gt_relation_cat' in slot else cats['relation_cat'][f,k])
      if valid[f,k]:
        for name in ('subject_box','object_box'):
          box = arrays[name][f,k]
          if box.min() < 0 or box.max() > 1 or not (box[0] < box[2] and box[1] < box[3]):
            raise ParseError(path,line,name,
                             f"slot ({f},{k}) box is not normalized and well-ordered")
  key_tokens = [tuple(ft) for ft in record.get('key_tokens',[])]
  for f, k in key_tokens:
    if not (0 <= f < F and 0 <= k < K and valid[f,k]):
      raise ParseError(path,line,'key_tokens',f"({f},{k}) is not a valid token")
  return VideoSample(record['video_id'],list(labels),valid=valid,
                     scene=record.get('scene'),key_tokens=key_tokens,
                     **arrays,**cats)

# --- loader   ---------------------------------------------------------------

class Dataset:
  """Streaming view of a dataset directory."""

  def __init__(self,path,meta,manifest=None):
    self.path = path
    self.meta = meta
    self.manifest = manifest

  @property
  def videos_path(self):
    return os.path.join(self.path,VIDEOS_FILE)

  def __iter__(self):
    if not os.path.exists(self.videos_path):
      return
    with open(self.videos_path,encoding='utf-8') as src:
      for line_num, line in enumerate(src,start=1):
        if not line.strip():
          continue
        try:
          record = json.loads(line)
        except json.JSONDecodeError as err:
          raise ParseError(self.videos_path,line_num,'<json>',str(err))
        yield sample_from_record(record,self.meta,self.videos_path,line_num)

  def load_all(self):
    return list(self)

  def get(self,video_id):
    for sample in self:
      if sample.video_id == video_id:
        return sample
    raise InvalidArgumentError(f"video '{video_id}' not found in {self.path}")

  def split(self,name,samples=None):
    """ samples of a manifest split ('train', 'val', 'test' or 'all') """
    samples = self.load_all() if samples is None else samples
    if name == 'all':
      return samples
    if not self.manifest or name not in self.manifest.get('splits',{}):
      raise InvalidArgumentError(f"split '{name}' not found in {self.path}")
    wanted = set(self.manifest['splits'][name])
    return [s for s in samples if s.video_id in wanted]

  def folds(self,samples=None):
    """ list of (train, test) sample lists with disjoint scenes """
    samples = self.load_all() if samples is None else samples
    if not self.manifest or not self.manifest.get('folds'):
      raise InvalidArgumentError(f"no scene-held-out folds in {self.path}")
    result = []
    for fold in self.manifest['folds']:
      train, test = set(fold['train']), set(fold['test'])
      result.append(([s for s in samples if s.video_id in train],
                     [s for s in samples if s.video_id in test]))
    return result

def load_dataset(path):
  """ open a dataset directory, validating the sidecar metadata """
  meta_path = os.path.join(path,META_FILE)
  try:
    with open(meta_path,encoding='utf-8') as src:
      meta_data = json.load(src)
  except FileNotFoundError:
    raise ParseError(meta_path,0,'<file>',"metadata file missing")
  except json.JSONDecodeError as err:
    raise ParseError(meta_path,err.lineno,'<json>',str(err))
  meta = DatasetMeta.from_dict(meta_data,meta_path)
  manifest = None
  manifest_path = os.path.join(path,MANIFEST_FILE)
  if os.path.exists(manifest_path):
    with open(manifest_path,encoding='utf-8') as src:
      manifest = json.load(src)
  return Dataset(path,meta,manifest)

# --- generator   ------------------------------------------------------------

class World:
  """Prototypes and geometry drawn once from the spec seed."""

  def __init__(self,spec):
    self.spec = spec.validate()
    rng = np.random.default_rng(stable_seed(spec.seed,'world'))
    n_cat, n_rel, S = len(spec.categories), len(spec.relations), spec.n_scenes
    base_cat = rng.standard_normal((n_cat,spec.d_v))
    base_rel = rng.standard_normal((n_rel,spec.d_u))
    # prototypes per (scene, label)
    self.cat_proto = base_cat[None] + spec.scene_shift*rng.standard_normal((S,n_cat,spec.d_v))
    self.rel_proto = base_rel[None] + spec.scene_shift*rng.standard_normal((S,n_rel,spec.d_u))
    # object box offset from the person per relation
    self.rel_offset = rng.uniform(-0.3,0.3,size=(n_rel,2))
    self.cat_index = {name: i for i, name in enumerate(spec.categories)}
    self.rel_index = {name: i for i, name in enumerate(spec.relations)}
    self.meta = DatasetMeta(
      categories=list(spec.categories),relations=list(spec.relations),
      actions=[r.action for r in spec.active_rules],T=spec.T,K=spec.K,
      num_classes=spec.num_classes,d_v=spec.d_v,d_u=spec.d_u,
      multi_label=spec.multi_label,rules=list(spec.active_rules))

  def _box(self,cx,cy,w,h):
    x1 = min(max(cx - w/2,0.0),0.98)
    y1 = min(max(cy - h/2,0.0),0.98)
    x2 = max(min(cx + w/2,1.0),x1 + 0.02)
    y2 = max(min(cy + h/2,1.0),y1 + 0.02)
    return np.round([x1,y1,x2,y2],4)

  def generate_video(self,index,actions,scene):
    """ one video whose labels are `actions` (rule indices) """
    spec = self.spec
    rng = np.random.default_rng(stable_seed(spec.seed,'video',index))
    F, K = int(rng.integers(spec.frames_min,spec.frames_max + 1)), spec.K
    n_valid = int(rng.integers(len(actions) + 1,K + 1))
    slots = rng.permutation(K)
    person = self.cat_index.get('person',0)

    rel = np.zeros((F,K),dtype=np.int64)
    obj = np.zeros((F,K),dtype=np.int64)
    valid = np.zeros((F,K),dtype=bool)
    key_tokens = []
    for i in range(n_valid):
      k = int(slots[i])
      valid[:,k] = True
      if i < len(actions):
        rule = spec.rules[actions[i]]
        lo = max(1,math.ceil(F/3))
        switch = int(rng.integers(lo,max(lo,min((2*F)//3,F - 1)) + 1))
        obj[:,k] = self.cat_index[rule.object]
        rel[:,k] = self.rel_index[rule.before]
        rel[switch:,k] = self.rel_index[rule.after]
        key_tokens.extend((f,k) for f in range(F))
      else:
        # distractor: a static relation, never a transition
        obj[:,k] = rng.integers(0,len(spec.categories))
        if obj[0,k] == person:
          obj[:,k] = (person + 1) % len(spec.categories)
        rel[:,k] = rng.integers(0,len(spec.relations))

    sem_rel = rel.copy()
    if spec.corruption > 0:
      flip = (rng.random((F,K)) < spec.corruption) & valid
      shift = rng.integers(1,len(spec.relations),size=(F,K))
      sem_rel[flip] = (rel[flip] + shift[flip]) % len(spec.relations)

    noise = lambda shape: spec.noise * rng.standard_normal(shape)
    subject_feat = np.zeros((F,K,spec.d_v))
    object_feat  = np.zeros((F,K,spec.d_v))
    union_feat   = np.zeros((F,K,spec.d_u))
    subject_box  = np.zeros((F,K,4))
    object_box   = np.zeros((F,K,4))
    for f in range(F):
      for k in range(K):
        if not valid[f,k]:
          continue
        subject_feat[f,k] = self.cat_proto[scene,person] + noise(spec.d_v)
        object_feat[f,k]  = self.cat_proto[scene,obj[f,k]] + noise(spec.d_v)
        union_feat[f,k]   = self.rel_proto[scene,rel[f,k]] + noise(spec.d_u)
        jitter = 0.05*spec.noise*rng.standard_normal(4)
        pcx, pcy = 0.4 + jitter[0], 0.5 + jitter[1]
        subject_box[f,k] = self._box(pcx,pcy,0.3,0.6)
        dx, dy = self.rel_offset[rel[f,k]]
        object_box[f,k] = self._box(pcx + dx + jitter[2],pcy + dy + jitter[3],
                                    0.2,0.2)

    round4 = lambda a: np.round(a,4)
    cats = np.where(valid,person,0)
    return VideoSample(
      video_id=f"v{index:05d}",labels=sorted(int(a) for a in actions),
      subject_feat=round4(subject_feat),object_feat=round4(object_feat),
      union_feat=round4(union_feat),subject_box=subject_box,
      object_box=object_box,valid=valid,subject_cat=cats,
      relation_cat=np.where(valid,sem_rel,0),object_cat=np.where(valid,obj,0),
      gt_relation_cat=np.where(valid,rel,0),scene=int(scene),
      key_tokens=key_tokens)

  def assign_actions(self,n_videos):
    """ balanced primary labels, plus 0-2 extra labels in multi-label mode """
    spec = self.spec
    rng = np.random.default_rng(stable_seed(spec.seed,'labels'))
    primary = rng.permutation(np.arange(n_videos) % spec.num_classes)
    scenes = rng.integers(0,spec.n_scenes,size=n_videos)
    result = []
    for i in range(n_videos):
      actions = [int(primary[i])]
      if spec.multi_label:
        extra = int(rng.integers(0,3))
        others = [c for c in range(spec.num_classes) if c != actions[0]]
        actions += [int(c) for c in rng.choice(others,size=min(extra,len(others)),
                                               replace=False)]
      result.append((actions,int(scenes[i])))
    return result

def _normalize_ratios(split_ratios):
  if isinstance(split_ratios,dict):
    ratios = [float(split_ratios.get(n,0.0)) for n in ('train','val','test')]
  else:
    ratios = [float(r) for r in split_ratios]
    ratios += [0.0]*(3 - len(ratios))
  if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
    raise InvalidArgumentError(f"split ratios {ratios} must be >= 0 and sum to 1")
  return ratios

def make_manifest(spec,samples,split_ratios):
  """ random splits plus scene-held-out folds """
  ratios = _normalize_ratios(split_ratios)
  rng = np.random.default_rng(stable_seed(spec.seed,'splits'))
  ids = [s.video_id for s in samples]
  order = [ids[i] for i in rng.permutation(len(ids))]
  n_train = int(round(ratios[0]*len(ids)))
  n_val = int(round(ratios[1]*len(ids)))
  splits = {'train': sorted(order[:n_train]),
            'val':   sorted(order[n_train:n_train + n_val]),
            'test':  sorted(order[n_train + n_val:])}

  n_folds = min(N_FOLDS,spec.n_scenes)
  scene_order = rng.permutation(spec.n_scenes)
  groups = [sorted(int(s) for s in scene_order[i::n_folds]) for i in range(n_folds)]
  folds = []
  for test_scenes in groups:
    folds.append({
      'test_scenes': test_scenes,
      'train_scenes': sorted(set(range(spec.n_scenes)) - set(test_scenes)),
      'train': sorted(s.video_id for s in samples if s.scene not in test_scenes),
      'test':  sorted(s.video_id for s in samples if s.scene in test_scenes),
    })
  return {'seed': spec.seed,'spec_hash': spec.spec_hash(),
          'n_videos': len(samples),'splits': splits,'folds': folds}

def _dump(obj):
  return json.dumps(obj,sort_keys=True,separators=(',',':'))

def generate_dataset(spec,n_videos,out_dir,split_ratios=(0.8,0.0,0.2)):
  """Write meta.json, videos.jsonl and manifest.json to out_dir.

    Each video is drawn from its own seeded stream, so the output only
    depends on the spec and the video index.
  """
  if n_videos < 1:
    raise InvalidArgumentError("n_videos must be >= 1")
  world = World(spec)
  _normalize_ratios(split_ratios)
  os.makedirs(out_dir,exist_ok=True)
  samples = [world.generate_video(i,actions,scene)
             for i, (actions,scene) in enumerate(world.assign_actions(n_videos))]
  with open(os.path.join(out_dir,META_FILE),'w',encoding='utf-8') as out:
    out.write(_dump(world.meta.to_dict()) + '\n')
  with open(os.path.join(out_dir,VIDEOS_FILE),'w',encoding='utf-8') as out:
    for sample in samples:
      out.write(_dump(sample.to_record()) + '\n')
  manifest = make_manifest(spec,samples,split_ratios)
  manifest['spec'] = spec.to_dict()
  with open(os.path.join(out_dir,MANIFEST_FILE),'w',encoding='utf-8') as out:
    out.write(json.dumps(manifest,sort_keys=True,indent=1) + '\n')
  return manifest

# --- batches   --------------------------------------------------------------

@dataclass
class Batch:
  """Tensors of B videos after frame sampling, [B, T, K, ...]."""
  video_ids: list
  subject_feat: torch.Tensor
  object_feat: torch.Tensor
  union_feat: torch.Tensor
  subject_box: torch.Tensor
  object_box: torch.Tensor
  valid: torch.Tensor
  labels: torch.Tensor
  frames: list
  subject_cat: torch.Tensor = None
  relation_cat: torch.Tensor = None
  object_cat: torch.Tensor = None
  key: torch.Tensor = None

  @property
  def has_semantics(self):
    return self.relation_cat is not None

def collate(samples,frame_indices,meta,dtype=torch.float32,
            semantic_source='predicted'):
  """Stack samples at the given frame indices into a Batch.

    semantic_source 'ground_truth' feeds gt_relation_cat to the language
    branch. Samples without semantic fields give a visual-only batch.
  """
  if semantic_source not in ('predicted','ground_truth'):
    raise InvalidArgumentError(f"unknown semantic source '{semantic_source}'")
  pick = lambda name: torch.as_tensor(np.stack(
    [getattr(s,name)[idx] for s, idx in zip(samples,frame_indices)]))
  labels = np.zeros((len(samples),meta.num_classes))
  key = np.zeros((len(samples),len(frame_indices[0]),meta.K),dtype=bool)
  for b, (s, idx) in enumerate(zip(samples,frame_indices)):
    labels[b,s.labels] = 1.0
    keys = set(s.key_tokens)
    for t, f in enumerate(idx):
      for k in range(meta.K):
        key[b,t,k] = (f,k) in keys
  batch = Batch(
    video_ids=[s.video_id for s in samples],
    subject_feat=pick('subject_feat').to(dtype),
    object_feat=pick('object_feat').to(dtype),
    union_feat=pick('union_feat').to(dtype),
    subject_box=pick('subject_box').to(torch.float64),
    object_box=pick('object_box').to(torch.float64),
    valid=pick('valid').bool(),
    labels=torch.as_tensor(labels,dtype=dtype),
    frames=[list(map(int,idx)) for idx in frame_indices],
    key=torch.as_tensor(key))
  if all(s.relation_cat is not None for s in samples):
    rel_name = 'gt_relation_cat' if semantic_source == 'ground_truth' else 'relation_cat'
    batch.subject_cat  = pick('subject_cat').long()
    batch.relation_cat = pick(rel_name).long()
    batch.object_cat   = pick('object_cat').long()
  return batch
