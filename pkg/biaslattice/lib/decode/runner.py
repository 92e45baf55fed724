from collections import namedtuple

from ..exceptions import CatalogError, ConfigError
from ..logging import log_debug, log_info
from ..adapters import Catalog, EntityType, encode_catalog, attention_dump
from ..data import sample_catalog, random_catalog
from .trie import build_boost_trie
from .search import Hypothesis, greedy_decode, beam_decode, nbest_record

__all__ = ['DecodeSettings', 'decode_settings', 'parse_types', 'utterance_catalog', 'decode_utterance',
           'decode_dataset', 'top_hypotheses']


DecodeSettings = namedtuple('DecodeSettings', ['beam', 'greedy', 'sf_lambda', 'catalog_size',
                                               'random_catalog', 'types', 'seed'])
DecodeSettings.__new__.__defaults__ = (4, False, None, 8, False, None, 0)


def utterance_catalog(utt, index, vocab, settings, lexicons=None, catalog=None, typed=True):
    '''
    The catalog utt is decoded with.  A fixed catalog wins; otherwise a
    random word-piece catalog (ablation) or one sampled from the
    lexicons around the utterance's true entities.  Without either, the
    catalog is empty.
    '''
    if catalog is not None:
        if settings.types is None:
            return catalog
        return Catalog([e for e in catalog if e.type in settings.types])
    seed = [settings.seed, index]
    if settings.random_catalog:
        return random_catalog(vocab, settings.catalog_size, seed, types=typed)
    if lexicons is not None:
        K = max(settings.catalog_size, len(utt.spans))
        return sample_catalog(utt, lexicons, K, seed, settings.types)
    return Catalog()


def decode_utterance(model, vocab, utt, cat, settings, adapters=None, dump=False):
    '''Returns (n-best record, attention record or None).'''
    Ce = encode_catalog(adapters, cat, vocab) if adapters is not None else None
    sf = build_boost_trie(cat, vocab, settings.sf_lambda) if settings.sf_lambda is not None else None
    if settings.greedy:
        if sf is not None:
            raise CatalogError("Shallow fusion needs beam search; drop --greedy")
        # greedy hypotheses carry no score
        hyps = [Hypothesis(tuple(greedy_decode(model, utt.features, adapters, Ce)), 0.0)]
    else:
        hyps = beam_decode(model, utt.features, adapters, Ce, sf, settings.beam)
    rec = nbest_record(utt.utt_id, hyps, vocab)
    rec['catalog'] = cat.texts()
    att = None
    if dump and adapters is not None:
        att = attention_dump(model, adapters, utt.features, list(hyps[0].tokens) if hyps else [], Ce)
        att['utt_id'] = utt.utt_id
    return rec, att


def decode_dataset(model, vocab, utts, settings, adapters=None, lexicons=None, catalog=None, dump=False):
    '''
    Decode every utterance in order.  Returns (n-best records,
    attention records); the latter is empty unless dump is set.
    '''
    typed = adapters.config.use_types if adapters is not None else True
    records = []
    dumps = []
    for i, utt in enumerate(utts):
        cat = utterance_catalog(utt, i, vocab, settings, lexicons, catalog, typed)
        rec, att = decode_utterance(model, vocab, utt, cat, settings, adapters, dump)
        records.append(rec)
        if att is not None:
            dumps.append(att)
        log_debug("{}: {}".format(utt.utt_id, rec['hyps'][0]['text'] if rec['hyps'] else ''))
    log_info("Decoded {} utterance(s)".format(len(records)))
    return records, dumps


def top_hypotheses(records):
    '''{utt_id: best hypothesis text} from n-best records.'''
    return dict((r['utt_id'], r['hyps'][0]['text'] if r['hyps'] else '') for r in records)


def parse_types(value):
    if value is None:
        return None
    if isinstance(value, str):
        value = [v for v in value.split(',') if v.strip()]
    return [EntityType.parse(v.strip()) for v in value]


def decode_settings(exp):
    '''DecodeSettings from an [experiment]-style dict.'''
    known = set(DecodeSettings._fields)
    kw = dict((k, v) for k, v in exp.items() if k in known and v is not None)
    if 'types' in kw:
        kw['types'] = parse_types(kw['types'])
    settings = DecodeSettings(**kw)
    if settings.beam < 1:
        raise ConfigError("Beam width must be >= 1")
    if settings.catalog_size < 1:
        raise ConfigError("Catalog size must be >= 1")
    if settings.sf_lambda is not None and settings.sf_lambda < 0:
        raise ConfigError("Shallow-fusion weight must be >= 0")
    return settings
