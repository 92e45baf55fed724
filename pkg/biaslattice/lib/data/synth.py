from dataclasses import dataclass, asdict, fields, field

import numpy as np

from ..exceptions import ConfigError, DataError
from ..tokenizer import DEFAULT_VOCAB_SIZE

'''
Pseudo-audio.  Every word piece owns a fixed template of feature
frames; an utterance is the concatenation of its pieces' templates
(optionally time-jittered) plus Gaussian noise.  Entity pieces are
placed acoustically close to a general piece so a model that rarely
saw them confuses the two.
'''

__all__ = ['SynthConfig', 'GENERAL_LETTERS', 'ENTITY_LETTERS', 'is_entity_piece',
           'piece_templates', 'synth_audio']

GENERAL_LETTERS = frozenset('acefhilmnoprstuw')
ENTITY_LETTERS = frozenset('bdgjkqvxyz')


@dataclass
class SynthConfig:
    seed: int = 1234
    feature_dim: int = 8
    frames_per_piece: list = field(default_factory=lambda: [2, 4])
    jitter: bool = True
    noise: float = 0.1
    template_scale: float = 1.0
    confusion: float = 0.3
    vocab_size: int = DEFAULT_VOCAB_SIZE
    mix_ratio: float = 1.5
    rare_word_rate: float = 0.02
    propername_count: int = 300
    appliance_count: int = 100
    location_count: int = 100
    pretrain_count: int = 600
    mixed_general_count: int = 100
    dev_count: int = 60
    dev_mixed_count: int = 60
    test_general_count: int = 100
    test_specific_count: int = 100
    test_per_type_count: int = 50

    def validate(self):
        lo, hi = self.frames_per_piece
        if lo < 1 or hi < lo:
            raise ConfigError("frames_per_piece must be a range [lo, hi] with 1 <= lo <= hi")
        if self.noise < 0:
            raise ConfigError("noise sigma must be >= 0")
        if self.mix_ratio <= 0:
            raise ConfigError("mix_ratio must be > 0")
        if not (0.0 <= self.rare_word_rate < 1.0):
            raise ConfigError("rare_word_rate must lie in [0, 1)")
        for f in fields(self):
            if f.name.endswith('_count') and getattr(self, f.name) < 1:
                raise ConfigError("SynthConfig.{} must be >= 1".format(f.name))
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        return self

    @classmethod
    def from_dict(cls, d):
        known = set(f.name for f in fields(cls))
        unknown = set(d) - known
        if unknown:
            raise ConfigError("Unknown SynthConfig keys: {}".format(', '.join(sorted(unknown))))
        d = dict(d)
        if 'frames_per_piece' in d:
            d['frames_per_piece'] = list(d['frames_per_piece'])
        return cls(**d).validate()

    def to_dict(self):
        return asdict(self)


def is_entity_piece(piece):
    return any(ch in ENTITY_LETTERS for ch in piece)


def piece_templates(vocab, cfg):
    '''
    (V, max_frames, feature_dim) array drawn from the corpus seed.
    Reserved ids get zero templates; an entity piece is a general
    piece's template plus a confusion offset.
    '''
    hi = cfg.frames_per_piece[1]
    rng = np.random.RandomState([cfg.seed, 7])
    V = len(vocab)
    templates = rng.normal(0.0, cfg.template_scale, size=(V, hi, cfg.feature_dim))
    templates[:2] = 0.0
    general = [i for i in range(2, V) if not is_entity_piece(vocab.id_to_piece(i))]
    if not general:
        raise DataError("Vocab has no general pieces to anchor entity templates")
    for i in range(2, V):
        if is_entity_piece(vocab.id_to_piece(i)):
            anchor = general[rng.randint(len(general))]
            templates[i] = templates[anchor] + rng.normal(0.0, cfg.confusion, size=(hi, cfg.feature_dim))
    return templates


def _frames(template, n):
    idx = np.round(np.linspace(0, template.shape[0] - 1, n)).astype(np.int64) if n > 1 else np.array([0])
    return template[idx]


def synth_audio(vocab, ids, cfg, utt_seed, templates=None):
    '''
    Features (T, feature_dim) for a token id sequence.  With jitter off
    every piece lasts frames_per_piece[0] frames.
    '''
    if len(ids) == 0:
        raise DataError("Can't synthesize audio for an empty token sequence")
    if templates is None:
        templates = piece_templates(vocab, cfg)
    lo, hi = cfg.frames_per_piece
    rng = np.random.RandomState([cfg.seed, int(utt_seed)])
    chunks = []
    for i in ids:
        i = int(i)
        if i < 2 or i >= templates.shape[0]:
            raise DataError("Token id {} has no audio template".format(i))
        n = rng.randint(lo, hi + 1) if cfg.jitter else lo
        chunks.append(_frames(templates[i], n))
    feats = np.concatenate(chunks, axis=0)
    if cfg.noise > 0:
        feats = feats + rng.normal(0.0, cfg.noise, size=feats.shape)
    return feats
