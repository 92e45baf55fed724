import time
from collections import OrderedDict, namedtuple
from dataclasses import dataclass, asdict, fields

import numpy as np

from .numerics import Tensor, Graph, backward
from .exceptions import ConfigError, DataError, DivergenceError, ChecksumDriftError
from .logging import log_info, log_debug, log_warn
from .jsonlines import append_jsonl
from .checkpoint import params_checksum
from .transducer import TransducerModel, forward, rnnt_loss
from .adapters import ContextualAdapters, Catalog, encode_catalog, adapted_lattice
from .data import sample_catalog, mixed_epoch

'''
Pretraining, adapter training with the base frozen, and full
fine-tuning.  One graph per utterance; a batch's gradients are summed
in batch order and divided by the batch size before the Adam step.
'''

MODES = ('pretrain', 'adapter', 'full-finetune')


@dataclass
class TrainConfig:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    mix_ratio: float = 1.5
    max_epochs: int = 20
    patience: int = 5
    clip_norm: float = 5.0
    mode: str = 'pretrain'
    catalog_size: int = 8
    train_fraction: float = 1.0
    seed: int = 0

    def validate(self):
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.mix_ratio <= 0:
            raise ConfigError("mix_ratio must be > 0")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 0 or self.catalog_size < 1:
            raise ConfigError("batch_size and catalog_size must be >= 1, max_epochs >= 0")
        if self.clip_norm <= 0:
            raise ConfigError("clip_norm must be > 0")
        if not (0.0 < self.train_fraction <= 1.0):
            raise ConfigError("train_fraction must lie in (0, 1]")
        if self.mode not in MODES:
            raise ConfigError("Unknown training mode {}; expected one of {}".format(self.mode, ', '.join(MODES)))
        return self

    @classmethod
    def from_dict(cls, d):
        known = set(f.name for f in fields(cls))
        unknown = set(d) - known
        if unknown:
            raise ConfigError("Unknown TrainConfig keys: {}".format(', '.join(sorted(unknown))))
        return cls(**d).validate()

    def to_dict(self):
        return asdict(self)


class ParamGroups(object):
    '''
    base and adapter parameter dicts plus the set of names the current
    mode may update.
    '''
    def __init__(self, base, adapter, mode):
        self.base = base
        self.adapter = adapter if adapter is not None else OrderedDict()
        overlap = set(self.base) & set(self.adapter)
        if overlap:
            raise ConfigError("Parameter groups overlap: {}".format(', '.join(sorted(overlap))))
        if mode == 'pretrain':
            self.trainable = set(self.base)
        elif mode == 'adapter':
            self.trainable = set(self.adapter)
        elif mode == 'full-finetune':
            self.trainable = set(self.base) | set(self.adapter)
        else:
            raise ConfigError("Unknown training mode {}".format(mode))

    def all(self):
        p = OrderedDict(self.base)
        p.update(self.adapter)
        return p

    def trainable_params(self):
        return OrderedDict((n, t) for n, t in self.all().items() if n in self.trainable)

    def trainable_count(self):
        return int(sum(t.size for t in self.trainable_params().values()))


class AdamState(object):
    __slots__ = ['m', 'v', 't', 'skipped']

    def __init__(self):
        self.m = {}
        self.v = {}
        self.t = 0
        self.skipped = 0


def adam_step(params, grads, state, cfg, trainable=None):
    '''
    One Adam update with bias correction, after clipping the global
    gradient norm to cfg.clip_norm.  Only names in trainable (default:
    all) change.  A non-finite gradient skips the step and bumps
    state.skipped.  Returns True if the step was applied.
    '''
    names = [n for n in params if (trainable is None or n in trainable)]
    gs = {}
    for n in names:
        g = grads.get(n)
        gs[n] = np.zeros(params[n].shape) if g is None else np.asarray(g, dtype=np.float64)
        if gs[n].shape != params[n].shape:
            raise ConfigError("Gradient for {} has shape {}, parameter has {}".format(n, gs[n].shape, params[n].shape))
    sq = sum(float(np.sum(g * g)) for g in gs.values())
    if not np.isfinite(sq):
        state.skipped += 1
        log_warn("Non-finite gradient; skipping step ({} skipped so far)".format(state.skipped))
        return False
    norm = np.sqrt(sq)
    if norm > cfg.clip_norm:
        scale = cfg.clip_norm / norm
        gs = dict((n, g * scale) for n, g in gs.items())
    state.t += 1
    c1 = 1.0 - cfg.beta1 ** state.t
    c2 = 1.0 - cfg.beta2 ** state.t
    for n in names:
        g = gs[n]
        m = state.m.get(n)
        v = state.v.get(n)
        m = (1.0 - cfg.beta1) * g if m is None else cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = (1.0 - cfg.beta2) * g * g if v is None else cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        state.m[n] = m
        state.v[n] = v
        params[n].data -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return True


TrainResult = namedtuple('TrainResult', ['model', 'adapters', 'history', 'best_dev_loss', 'skipped'])


def copy_params(params):
    return OrderedDict((n, Tensor(t.data.copy(), requires_grad=True, name=n)) for n, t in params.items())


def utterance_loss(model, adapters, utt, catalog=None, vocab=None):
    '''rnnt_loss of utt under the (optionally adapted) model.'''
    if adapters is None:
        lattice = forward(model, utt.features, utt.ids)
    else:
        Ce = encode_catalog(adapters, catalog if catalog is not None else Catalog(), vocab)
        lattice, _ = adapted_lattice(model, adapters, utt.features, utt.ids, Ce)
    return rnnt_loss(lattice, utt.ids)


def dev_loss(model, adapters, utts, catalogs=None, vocab=None):
    '''Mean rnnt_loss over utts, computed without recording a graph.'''
    if not utts:
        raise DataError("Empty dev set")
    total = 0.0
    for i, utt in enumerate(utts):
        cat = catalogs[i] if catalogs is not None else None
        total += utterance_loss(model, adapters, utt, cat, vocab).item()
    return total / len(utts)


def _subsample(utts, fraction, seed):
    if fraction >= 1.0:
        return list(utts)
    n = max(1, int(round(fraction * len(utts))))
    keep = np.sort(np.random.RandomState([seed, 1]).permutation(len(utts))[:n])
    return [utts[i] for i in keep]


def _fit(cfg, model, adapters, groups, train, dev, lexicons=None, vocab=None, log_path=None):
    '''
    Shared loop: epoch-0 dev loss, then up to max_epochs epochs with
    early stopping on dev loss (restore-best).  In adapter mode the
    base checksum is asserted after every epoch.
    '''
    params = groups.all()
    trainable = groups.trainable
    for n, t in params.items():
        t.requires_grad = n in trainable
    state = AdamState()
    use_catalogs = adapters is not None
    dev_catalogs = None
    # typed adapters train on catalogs that mix every type
    catalog_types = sorted(lexicons) if use_catalogs and adapters.config.use_types else None
    if use_catalogs:
        dev_catalogs = [sample_catalog(u, lexicons, max(cfg.catalog_size, len(u.spans)), [cfg.seed, 999983, i],
                                       catalog_types)
                        for i, u in enumerate(dev)]
    base_sum = params_checksum(groups.base)
    best = dev_loss(model, adapters, dev, dev_catalogs, vocab)
    best_params = dict((n, params[n].data.copy()) for n in trainable)
    history = [{'epoch': 0, 'train_loss': None, 'dev_loss': best, 'lr': cfg.lr, 'frozen_checksum': base_sum,
                'skipped_steps': 0, 'seconds': 0.0, 'trainable_params': groups.trainable_count()}]
    log_info("Epoch 0: dev loss {:.4f} ({} trainable parameters)".format(best, groups.trainable_count()))
    if log_path is not None:
        append_jsonl(log_path, history[0])
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        start = time.time()
        rng = np.random.RandomState([cfg.seed, epoch])
        if use_catalogs:
            order = mixed_epoch(train, cfg.mix_ratio, rng)
        else:
            order = [train[i] for i in rng.permutation(len(train))]
        total = 0.0
        for b in range(0, len(order), cfg.batch_size):
            batch = order[b:b + cfg.batch_size]
            for t in params.values():
                t.zero_grad()
            for i, utt in enumerate(batch):
                cat = None
                if use_catalogs:
                    K = max(cfg.catalog_size, len(utt.spans))
                    cat = sample_catalog(utt, lexicons, K, [cfg.seed, epoch, b + i], catalog_types)
                with Graph() as g:
                    loss = utterance_loss(model, adapters, utt, cat, vocab)
                if not np.isfinite(loss.item()):
                    raise DivergenceError("Training loss went non-finite at epoch {} on {}".format(epoch, utt.utt_id),
                                          {'epoch': epoch, 'utt_id': utt.utt_id, 'best_dev_loss': best,
                                           'history': history})
                total += loss.item()
                backward(g, loss)
            grads = dict((n, params[n].grad / len(batch)) for n in trainable if params[n].grad is not None)
            adam_step(params, grads, state, cfg, trainable)
        for t in params.values():
            t.zero_grad()
        checksum = params_checksum(groups.base)
        if cfg.mode == 'adapter' and checksum != base_sum:
            raise ChecksumDriftError("Frozen base parameters changed during adapter training (epoch {})".format(epoch))
        dl = dev_loss(model, adapters, dev, dev_catalogs, vocab)
        rec = {'epoch': epoch, 'train_loss': total / len(order), 'dev_loss': dl, 'lr': cfg.lr,
               'frozen_checksum': checksum, 'skipped_steps': state.skipped,
               'seconds': round(time.time() - start, 3), 'trainable_params': groups.trainable_count()}
        history.append(rec)
        if log_path is not None:
            append_jsonl(log_path, rec)
        log_info("Epoch {}: train loss {:.4f}, dev loss {:.4f}".format(epoch, rec['train_loss'], dl))
        if dl < best:
            best = dl
            best_params = dict((n, params[n].data.copy()) for n in trainable)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log_info("Early stop after epoch {} (no dev improvement in {} epochs)".format(epoch, stale))
                break
    for n, data in best_params.items():
        params[n].data[...] = data
    for t in params.values():
        t.requires_grad = True
    log_debug("Restored best parameters (dev loss {:.4f})".format(best))
    return history, best, state.skipped


def pretrain(cfg, model_cfg, train, dev, log_path=None):
    '''Train a fresh TransducerModel on general-only data.'''
    cfg.validate()
    if cfg.mode != 'pretrain':
        raise ConfigError("pretrain needs mode 'pretrain', got '{}'".format(cfg.mode))
    if any(u.split == 'specific' for u in train):
        raise DataError("Pretraining data must be general-only")
    model = TransducerModel(model_cfg, seed=cfg.seed)
    groups = ParamGroups(model.params, None, 'pretrain')
    history, best, skipped = _fit(cfg, model, None, groups, _subsample(train, cfg.train_fraction, cfg.seed),
                                  dev, log_path=log_path)
    return TrainResult(model, None, history, best, skipped)


def train_adapters(cfg, model, adapter_cfg, train, dev, lexicons, vocab, log_path=None):
    '''Adapters from scratch on the mixed set; the base stays bit-identical.'''
    cfg.validate()
    if cfg.mode != 'adapter':
        raise ConfigError("train_adapters needs mode 'adapter', got '{}'".format(cfg.mode))
    adapters = ContextualAdapters(adapter_cfg, model.config.vocab_size, model.config.joint_dim, seed=cfg.seed)
    groups = ParamGroups(model.params, adapters.params, 'adapter')
    history, best, skipped = _fit(cfg, model, adapters, groups, _subsample(train, cfg.train_fraction, cfg.seed),
                                  dev, lexicons, vocab, log_path)
    return TrainResult(model, adapters, history, best, skipped)


def full_finetune(cfg, model, adapter_cfg, train, dev, lexicons, vocab, log_path=None):
    '''
    Same pipeline as train_adapters with every parameter trainable.
    Works on a copy of the base model.
    '''
    cfg.validate()
    if cfg.mode != 'full-finetune':
        raise ConfigError("full_finetune needs mode 'full-finetune', got '{}'".format(cfg.mode))
    model = TransducerModel(model.config, copy_params(model.params))
    adapters = ContextualAdapters(adapter_cfg, model.config.vocab_size, model.config.joint_dim, seed=cfg.seed)
    groups = ParamGroups(model.params, adapters.params, 'full-finetune')
    history, best, skipped = _fit(cfg, model, adapters, groups, _subsample(train, cfg.train_fraction, cfg.seed),
                                  dev, lexicons, vocab, log_path)
    return TrainResult(model, adapters, history, best, skipped)
