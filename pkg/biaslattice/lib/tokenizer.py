import json
import os
from collections import Counter, namedtuple

from .exceptions import TokenizerError, MissingFileError

'''
Deterministic frequency-BPE word pieces.  A leading WORD_START marks the
first piece of every word; ids 0 and 1 are reserved for blank and unk.
'''

WORD_START = '▁'
BLANK = '<blank>'
UNK = '<unk>'
BLANK_ID = 0
UNK_ID = 1
# desk-scale target; synthetic corpora and the transducer share it
DEFAULT_VOCAB_SIZE = 64

Encoding = namedtuple('Encoding', ['ids', 'unk_positions'])


class Vocab(object):
    __slots__ = ['_pieces', '_piece_to_id', '_maxlen']

    def __init__(self, pieces):
        pieces = list(pieces)
        if len(pieces) < 2 or pieces[BLANK_ID] != BLANK or pieces[UNK_ID] != UNK:
            raise TokenizerError("Vocab must start with the reserved {} and {} pieces".format(BLANK, UNK))
        if len(set(pieces)) != len(pieces):
            raise TokenizerError("Duplicate pieces in vocab")
        self._pieces = tuple(pieces)
        self._piece_to_id = dict((p, i) for i, p in enumerate(pieces))
        self._maxlen = max(len(p) for p in pieces[2:]) if len(pieces) > 2 else 1

    @classmethod
    def from_pieces(cls, pieces):
        '''Build a vocab from corpus pieces only; reserved ids are prepended.'''
        return cls([BLANK, UNK] + [p for p in pieces if p not in (BLANK, UNK)])

    @property
    def pieces(self):
        return self._pieces

    def __len__(self):
        return len(self._pieces)

    def __contains__(self, piece):
        return piece in self._piece_to_id

    def __eq__(self, other):
        return isinstance(other, Vocab) and self._pieces == other._pieces

    def __hash__(self):
        return hash(self._pieces)

    def piece_to_id(self, piece):
        return self._piece_to_id[piece]

    def id_to_piece(self, i):
        return self._pieces[i]

    def alphabet(self):
        '''Set of single characters (marker stripped) the vocab can spell.'''
        chars = set()
        for p in self._pieces[2:]:
            chars.update(p.replace(WORD_START, ''))
        return chars

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as outf:
            json.dump(list(self._pieces), outf, ensure_ascii=False)

    @classmethod
    def load(cls, path):
        if not os.path.exists(path):
            raise MissingFileError(path, "vocab file")
        with open(path, 'r', encoding='utf-8') as inf:
            return cls(json.load(inf))


def _word_symbols(word):
    return (WORD_START + word[0],) + tuple(word[1:])


def _merge_word(symbols, pair, merged):
    out = []
    i = 0
    while i < len(symbols):
        if i < len(symbols) - 1 and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def build_vocab(corpus, target_size):
    '''
    Greedy BPE: start from every corpus character in both its marked
    (word-initial) and unmarked form, so any in-alphabet text encodes
    without unk, and repeatedly merge the most frequent adjacent pair, ties
    broken lexicographically, until target_size pieces exist or no pair
    occurs more than once.
    '''
    wordfreq = Counter()
    for line in corpus:
        for w in line.lower().split():
            wordfreq[w] += 1
    if not wordfreq:
        raise TokenizerError("Can't build a vocab from an empty corpus")

    words = dict((w, _word_symbols(w)) for w in wordfreq)
    alphabet = set()
    for w in words:
        for ch in w:
            alphabet.update((ch, WORD_START + ch))
    if target_size < len(alphabet) + 2:
        raise TokenizerError("Target vocab size {} is smaller than the alphabet ({}) "
                             "plus reserved ids".format(target_size, len(alphabet)))

    pieces = sorted(alphabet)
    while len(pieces) + 2 < target_size:
        pairs = Counter()
        for w, symbols in words.items():
            for a, b in zip(symbols, symbols[1:]):
                pairs[(a, b)] += wordfreq[w]
        if not pairs:
            break
        best = min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))
        (pair, count) = best
        if count < 2:
            break
        merged = pair[0] + pair[1]
        if merged in pieces:
            # two different splits spelling the same string; just fuse them
            words = dict((w, _merge_word(s, pair, merged)) for w, s in words.items())
            continue
        pieces.append(merged)
        words = dict((w, _merge_word(s, pair, merged)) for w, s in words.items())
    return Vocab.from_pieces(pieces)


def encode(vocab, text):
    '''
    Greedy longest match, left to right within each word.  Characters
    the vocab can't spell come out as unk, and their token positions are
    listed in the returned Encoding.
    '''
    ids = []
    unks = []
    for word in text.lower().split():
        s = WORD_START + word
        i = 0
        while i < len(s):
            found = None
            for n in range(min(vocab._maxlen, len(s) - i), 0, -1):
                cand = s[i:i + n]
                if cand == WORD_START:
                    continue
                pid = vocab._piece_to_id.get(cand)
                if pid is not None and pid > UNK_ID:
                    found = (pid, n)
                    break
            if found is None:
                unks.append(len(ids))
                ids.append(UNK_ID)
                i += 2 if i == 0 else 1
            else:
                ids.append(found[0])
                i += found[1]
    return Encoding(ids, unks)


def encode_ids(vocab, text):
    return encode(vocab, text).ids


def decode(vocab, ids):
    '''Join pieces, rendering word-start markers as separating spaces.'''
    out = []
    for i in ids:
        i = int(i)
        if i == BLANK_ID:
            raise TokenizerError("Blank id in sequence to decode")
        if i < 0 or i >= len(vocab):
            raise TokenizerError("Token id {} out of range for vocab of size {}".format(i, len(vocab)))
        piece = vocab.id_to_piece(i)
        if piece.startswith(WORD_START):
            if out:
                out.append(' ')
            out.append(piece[1:])
        else:
            out.append(piece)
    return ''.join(out)


def word_starts(vocab, ids):
    '''Word index of each token (a new word starts at every marked piece).'''
    index = []
    w = -1
    for i in ids:
        piece = vocab.id_to_piece(int(i))
        if piece.startswith(WORD_START) or w < 0:
            w += 1
        index.append(w)
    return index
