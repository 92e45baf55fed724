import base64
import json
import os
from collections import namedtuple

import numpy as np

from ..exceptions import DataError, CatalogError, MissingFileError
from ..jsonlines import write_jsonl, read_jsonl
from ..logging import log_info, log_debug
from ..tokenizer import Vocab, build_vocab, encode, word_starts, WORD_START
from ..adapters import Catalog, Entity, EntityType
from .synth import GENERAL_LETTERS, ENTITY_LETTERS, piece_templates, synth_audio

'''
Synthetic voice-assistant corpus: carrier templates per domain, entity
lexicons per EntityType, general and specific utterances, and the
splits the experiments need.
'''

__all__ = ['Span', 'Utterance', 'Corpus', 'TEMPLATES', 'FILLERS', 'SPLITS', 'make_lexicons',
           'gen_corpus', 'sample_catalog', 'random_catalog', 'word_spans', 'entity_piece_rate',
           'mixed_epoch', 'save_corpus', 'save_dataset', 'load_dataset', 'load_lexicons',
           'load_vocab', 'entity_texts']

Span = namedtuple('Span', ['start', 'end', 'type', 'entity'])


class Utterance(object):
    __slots__ = ['utt_id', 'features', 'text', 'ids', 'spans', 'split', 'domain']

    def __init__(self, utt_id, features, text, ids, spans=(), split='general', domain=None):
        self.utt_id = utt_id
        self.features = np.asarray(features, dtype=np.float64)
        self.text = text
        self.ids = list(ids)
        self.spans = [s if isinstance(s, Span) else Span(*s) for s in spans]
        self.split = split
        self.domain = domain
        for s in self.spans:
            if not (0 <= s.start < s.end <= len(self.ids)):
                raise DataError("Span {} out of range in utterance {}".format(s, utt_id))
        if (split == 'specific') != bool(self.spans):
            raise DataError("Utterance {} is tagged {} but has {} spans".format(utt_id, split, len(self.spans)))
        if not np.all(np.isfinite(self.features)):
            raise DataError("Utterance {} has non-finite features".format(utt_id))

    @property
    def words(self):
        return self.text.split()

    def to_dict(self):
        feats = np.ascontiguousarray(self.features, dtype='<f8')
        return {
            'utt_id': self.utt_id,
            'text': self.text,
            'ids': [int(i) for i in self.ids],
            'spans': [{'start': s.start, 'end': s.end, 'type': s.type.name, 'entity': s.entity}
                      for s in self.spans],
            'split': self.split,
            'domain': self.domain,
            'shape': list(feats.shape),
            'features': base64.b64encode(feats.tobytes()).decode('ascii'),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            raw = base64.b64decode(d['features'])
            feats = np.frombuffer(raw, dtype='<f8').reshape(d['shape']).astype(np.float64)
            spans = [Span(s['start'], s['end'], EntityType.parse(s['type']), s['entity']) for s in d['spans']]
            return cls(d['utt_id'], feats, d['text'], d['ids'], spans, d['split'], d.get('domain'))
        except (KeyError, ValueError, TypeError) as e:
            raise DataError("Malformed utterance record {}: {}".format(d.get('utt_id'), e))

    def __repr__(self):
        return 'Utterance({}, "{}")'.format(self.utt_id, self.text)


Corpus = namedtuple('Corpus', ['config', 'vocab', 'lexicons', 'splits'])

# {slot} names an EntityType; [name] a general filler list
TEMPLATES = {
    'Communications': [
        'call {ProperName}',
        'please call {ProperName}',
        'call {ProperName} on the phone',
        'share the photo with {ProperName}',
        'share this with {ProperName} please',
    ],
    'SmartHome': [
        'turn on the {Appliance}',
        'turn off the {Appliance}',
        'turn on the {Appliance} in the {DeviceLocation}',
        'turn off the {DeviceLocation} {Appliance}',
        'is the {Appliance} on',
        'set the {DeviceLocation} to [heat]',
    ],
    'Weather': [
        'what is the weather [when]',
        'will it rain [when]',
        'is it [heat] [when]',
        'how hot is it in the sun',
    ],
    'Timer': [
        'set a timer for [number] minutes',
        'set an alarm at [number]',
        'stop the alarm',
        'what time is it',
        'turn off the alarm',
    ],
    'Music': [
        'put on [genre] music',
        'resume the music',
        'stop the music',
        'shuffle the music',
        'turn up the music',
    ],
    'GeneralHome': [
        'turn on the [thing]',
        'turn off the [thing]',
        'is the [thing] on',
        'call me later',
        'open the [thing] menu',
    ],
}

FILLERS = {
    'heat': ['warm', 'hot', 'cool'],
    'when': ['tomorrow', 'at noon', 'this afternoon', 'soon', 'later'],
    'number': ['one', 'two', 'three', 'four', 'nine', 'ten', 'fifteen'],
    'genre': ['soft', 'slow', 'fast', 'fun', 'calm'],
    'thing': ['fan', 'heater', 'lamp', 'toaster', 'monitor', 'shower'],
}

GENERAL_DOMAINS = ('Weather', 'Timer', 'Music', 'GeneralHome')
SPECIFIC_DOMAINS = ('Communications', 'SmartHome')

SPLITS = ('pretrain', 'dev', 'mixed', 'dev-mixed', 'test-general', 'test-specific') + \
    tuple('test-specific-{}'.format(t.name) for t in EntityType)


def _lexicon_size(cfg, etype):
    return {EntityType.ProperName: cfg.propername_count,
            EntityType.Appliance: cfg.appliance_count,
            EntityType.DeviceLocation: cfg.location_count}[etype]


def _entity_word(rng, lo, hi):
    letters = sorted(ENTITY_LETTERS)
    n = rng.randint(lo, hi + 1)
    return ''.join(letters[rng.randint(len(letters))] for _ in range(n))


def make_lexicons(cfg, rng):
    '''
    Lexicons per EntityType plus a pool of rare non-lexicon words, all
    spelled from the entity letters and mutually distinct.
    '''
    seen = set()
    lexicons = {}

    def fresh(lo, hi):
        while True:
            w = _entity_word(rng, lo, hi)
            if w not in seen:
                seen.add(w)
                return w
    for etype in EntityType:
        lexicons[etype] = [fresh(3, 5) for _ in range(_lexicon_size(cfg, etype))]
    rare = [fresh(3, 5) for _ in range(50)]
    return lexicons, rare


def _template_words():
    words = set()
    for templates in TEMPLATES.values():
        for t in templates:
            for w in t.split():
                if not (w.startswith('{') or w.startswith('[')):
                    words.add(w)
    for fill in FILLERS.values():
        for phrase in fill:
            words.update(phrase.split())
    return words


def _check_templates(lexicons):
    words = _template_words()
    for w in words:
        if not set(w) <= GENERAL_LETTERS:
            raise DataError("Template word '{}' uses letters outside the general alphabet".format(w))
    for etype, lex in lexicons.items():
        clash = words.intersection(lex)
        if clash:
            raise DataError("{} lexicon entries appear in general templates: {}".format(
                etype.name, ', '.join(sorted(clash))))


def _fill(template, rng, lexicons):
    '''Returns (words, entity slots) where a slot is (word index, EntityType, entity).'''
    words = []
    slots = []
    for tok in template.split():
        if tok.startswith('{'):
            etype = EntityType[tok[1:-1]]
            lex = lexicons[etype]
            entity = lex[rng.randint(len(lex))]
            slots.append((len(words), etype, entity))
            words.extend(entity.split())
        elif tok.startswith('['):
            fill = FILLERS[tok[1:-1]]
            words.extend(fill[rng.randint(len(fill))].split())
        else:
            words.append(tok)
    return words, slots


def _general_text(rng, lexicons, rare, rare_rate):
    domain = GENERAL_DOMAINS[rng.randint(len(GENERAL_DOMAINS))]
    templates = TEMPLATES[domain]
    words, _ = _fill(templates[rng.randint(len(templates))], rng, lexicons)
    if rare_rate > 0 and rng.uniform() < rare_rate:
        words.insert(rng.randint(len(words) + 1), rare[rng.randint(len(rare))])
    return domain, words, []


def _specific_text(rng, lexicons, etype=None):
    if etype is None:
        domain = SPECIFIC_DOMAINS[rng.randint(len(SPECIFIC_DOMAINS))]
        templates = TEMPLATES[domain]
    else:
        domain = 'Communications' if etype == EntityType.ProperName else 'SmartHome'
        templates = [t for t in TEMPLATES[domain] if '{' + etype.name + '}' in t]
    words, slots = _fill(templates[rng.randint(len(templates))], rng, lexicons)
    return domain, words, slots


def _token_spans(vocab, words, slots):
    '''Encode word by word, returning ids and token spans for the slots.'''
    ids = []
    offsets = []
    for w in words:
        offsets.append(len(ids))
        ids.extend(encode(vocab, w).ids)
    offsets.append(len(ids))
    spans = []
    for index, etype, entity in slots:
        nwords = len(entity.split())
        spans.append(Span(offsets[index], offsets[index + nwords], etype, entity))
    return ids, spans


def gen_corpus(cfg):
    '''
    Generate every split.  Text comes first so the vocab can be built
    over all of it (entity lexicons included); audio is synthesized
    afterwards with one seed per utterance.
    '''
    cfg.validate()
    rng = np.random.RandomState(cfg.seed)
    lexicons, rare = make_lexicons(cfg, rng)
    _check_templates(lexicons)

    plan = []

    def general(split, n, prefix, rare_rate=0.0):
        for _ in range(n):
            plan.append((split, prefix, 'general') + _general_text(rng, lexicons, rare, rare_rate))

    def specific(split, n, prefix, etype=None):
        for _ in range(n):
            plan.append((split, prefix, 'specific') + _specific_text(rng, lexicons, etype))

    general('pretrain', cfg.pretrain_count, 'pt', cfg.rare_word_rate)
    general('dev', cfg.dev_count, 'dv')
    general('mixed', cfg.mixed_general_count, 'mx')
    specific('mixed', int(round(cfg.mix_ratio * cfg.mixed_general_count)), 'mx')
    ndev_gen = int(round(cfg.dev_mixed_count / (1.0 + cfg.mix_ratio)))
    general('dev-mixed', ndev_gen, 'dm')
    specific('dev-mixed', cfg.dev_mixed_count - ndev_gen, 'dm')
    general('test-general', cfg.test_general_count, 'tg')
    specific('test-specific', cfg.test_specific_count, 'ts')
    for etype in EntityType:
        specific('test-specific-{}'.format(etype.name), cfg.test_per_type_count, 't' + etype.name[0].lower(), etype)

    texts = [' '.join(words) for (_, _, _, _, words, _) in plan]
    vocab_corpus = texts + [e for lex in lexicons.values() for e in lex]
    vocab = build_vocab(vocab_corpus, cfg.vocab_size)
    log_info("Built a vocab of {} pieces".format(len(vocab)))
    templates = piece_templates(vocab, cfg)

    splits = dict((s, []) for s in SPLITS)
    counters = {}
    for seed, (split, prefix, tag, domain, words, slots) in enumerate(plan):
        ids, spans = _token_spans(vocab, words, slots)
        n = counters.get(prefix, 0)
        counters[prefix] = n + 1
        feats = synth_audio(vocab, ids, cfg, seed, templates)
        splits[split].append(Utterance('{}-{:05d}'.format(prefix, n), feats, ' '.join(words),
                                       ids, spans, tag, domain))
    corpus = Corpus(cfg, vocab, lexicons, splits)
    rate = entity_piece_rate(splits['pretrain'], vocab, lexicons)
    log_debug("Entity piece rate in pretraining data: {:.4f}".format(rate))
    if rate >= 0.01:
        raise DataError("Entity pieces make up {:.2%} of pretraining tokens; lower rare_word_rate".format(rate))
    return corpus


def entity_texts(utt):
    seen = []
    for s in utt.spans:
        if (s.entity, s.type) not in seen:
            seen.append((s.entity, s.type))
    return seen


def sample_catalog(utt, lexicons, K, seed, types=None):
    '''
    Catalog of K entities for utt: every true entity plus distractors
    drawn without replacement from the lexicons of the utterance's
    entity types (all lexicons for a general utterance), shuffled.
    With types given, only entities of those types are kept and the
    distractors come from all of their lexicons.
    '''
    if K < 1:
        raise CatalogError("Catalog size must be >= 1")
    true = entity_texts(utt)
    if types is not None:
        types = sorted(set(types))
        true = [(e, t) for e, t in true if t in types]
    if K < len(true):
        raise CatalogError("Catalog size {} is smaller than the {} entities of {}".format(K, len(true), utt.utt_id))
    rng = np.random.RandomState(seed)
    if types is None:
        types = sorted(set(t for _, t in true)) if true else sorted(lexicons)
    taken = set(e for e, _ in true)
    pool = [(e, t) for t in types for e in lexicons[t] if e not in taken]
    need = min(K - len(true), len(pool))
    picks = [pool[i] for i in rng.choice(len(pool), need, replace=False)] if need else []
    entities = [Entity(e, t) for e, t in true + picks]
    order = rng.permutation(len(entities))
    return Catalog([entities[i] for i in order])


def random_catalog(vocab, K, seed, types=True):
    '''
    K entities spelled from random word pieces: one word-initial piece
    followed by one or two continuation pieces.
    '''
    rng = np.random.RandomState(seed)
    starts = [p for p in vocab.pieces[2:] if p.startswith(WORD_START) and len(p) > 1]
    conts = [p for p in vocab.pieces[2:] if not p.startswith(WORD_START)]
    if not starts or not conts:
        raise CatalogError("Vocab can't spell random catalog entries")
    kinds = list(EntityType)
    ents = []
    for _ in range(K):
        word = starts[rng.randint(len(starts))][1:]
        for _ in range(rng.randint(1, 3)):
            word += conts[rng.randint(len(conts))]
        etype = kinds[rng.randint(len(kinds))] if types else None
        ents.append(Entity(word, etype))
    return Catalog(ents)


def word_spans(utt, vocab):
    '''Entity spans converted from token to word indices.'''
    index = word_starts(vocab, utt.ids)
    out = []
    for s in utt.spans:
        out.append(Span(index[s.start], index[s.end - 1] + 1, s.type, s.entity))
    return out


def entity_piece_rate(utts, vocab, lexicons):
    '''Fraction of tokens in utts that are pieces of some lexicon entity.'''
    pieces = set()
    for lex in lexicons.values():
        for e in lex:
            pieces.update(encode(vocab, e).ids)
    total = sum(len(u.ids) for u in utts)
    if total == 0:
        return 0.0
    hits = sum(1 for u in utts for i in u.ids if i in pieces)
    return hits / float(total)


def mixed_epoch(utts, ratio, rng):
    '''
    One epoch's worth of utterances with specific:general honoring
    ratio:1 (within rounding), shuffled together.
    '''
    spec = [u for u in utts if u.split == 'specific']
    gen = [u for u in utts if u.split != 'specific']
    if not spec or not gen:
        order = rng.permutation(len(utts))
        return [utts[i] for i in order]
    n_gen = len(gen)
    n_spec = int(round(ratio * n_gen))
    if n_spec > len(spec):
        n_spec = len(spec)
        n_gen = max(1, int(round(n_spec / ratio)))
    spec = [spec[i] for i in rng.permutation(len(spec))[:n_spec]]
    gen = [gen[i] for i in rng.permutation(len(gen))[:n_gen]]
    both = spec + gen
    return [both[i] for i in rng.permutation(len(both))]


def save_dataset(path, utts):
    write_jsonl(path, (u.to_dict() for u in utts))


def load_dataset(path):
    return [Utterance.from_dict(d) for d in read_jsonl(path)]


def save_corpus(corpus, outdir):
    '''dataset files per split, vocab.json, lexicons/<type>.json, synth_config.json'''
    os.makedirs(os.path.join(outdir, 'lexicons'), exist_ok=True)
    corpus.vocab.save(os.path.join(outdir, 'vocab.json'))
    for etype, lex in corpus.lexicons.items():
        with open(os.path.join(outdir, 'lexicons', '{}.json'.format(etype.name)), 'w') as outf:
            json.dump(lex, outf)
    with open(os.path.join(outdir, 'synth_config.json'), 'w') as outf:
        json.dump(corpus.config.to_dict(), outf, indent=2, sort_keys=True)
    for split, utts in corpus.splits.items():
        save_dataset(os.path.join(outdir, '{}.jsonl'.format(split)), utts)


def load_lexicons(datadir):
    lexicons = {}
    for etype in EntityType:
        path = os.path.join(datadir, 'lexicons', '{}.json'.format(etype.name))
        if not os.path.exists(path):
            raise MissingFileError(path, "lexicon file")
        with open(path) as inf:
            lexicons[etype] = json.load(inf)
    return lexicons


def load_vocab(datadir):
    return Vocab.load(os.path.join(datadir, 'vocab.json'))
