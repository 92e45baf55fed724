import itertools
import os
import tempfile
import unittest

from biaslattice.lib.tokenizer import *
from biaslattice.lib.exceptions import TokenizerError, MissingFileError


class TokenizerTests(unittest.TestCase):
    def setUp(self):
        self.vocab = build_vocab(['aa aa aa'], 10)

    def testReservedIds(self):
        self.assertEqual(self.vocab.id_to_piece(BLANK_ID), BLANK)
        self.assertEqual(self.vocab.id_to_piece(UNK_ID), UNK)
        with self.assertRaises(TokenizerError):
            Vocab(['a', UNK, 'b'])

    def testMerges(self):
        self.assertEqual(list(self.vocab.pieces), [BLANK, UNK, 'a', WORD_START + 'a', WORD_START + 'aa'])

    def testEncodeLongestMatch(self):
        self.assertEqual(encode(self.vocab, 'aa').ids, [4])
        self.assertEqual(encode(self.vocab, 'aaa').ids, [4, 2])
        self.assertEqual(encode(self.vocab, 'aa a').ids, [4, 3])

    def testUnkFlagged(self):
        enc = encode(self.vocab, 'ab')
        self.assertEqual(enc.ids, [3, UNK_ID])
        self.assertEqual(enc.unk_positions, [1])
        enc = encode(self.vocab, 'b')
        self.assertEqual(enc.ids, [UNK_ID])
        self.assertEqual(enc.unk_positions, [0])

    def testDecode(self):
        self.assertEqual(decode(self.vocab, [4, 2, 3]), 'aaa a')
        with self.assertRaises(TokenizerError):
            decode(self.vocab, [4, BLANK_ID])
        with self.assertRaises(TokenizerError):
            decode(self.vocab, [99])

    def testRoundTripOverCorpus(self):
        corpus = ['turn on the fan', 'set a timer for ten minutes', 'what is the weather tomorrow']
        vocab = build_vocab(corpus, 40)
        for line in corpus:
            enc = encode(vocab, line)
            self.assertEqual(enc.unk_positions, [])
            self.assertEqual(decode(vocab, enc.ids), line)

    def testEveryCharacterEncodes(self):
        vocab = build_vocab(['ab'], 6)
        self.assertEqual(encode(vocab, 'ba').unk_positions, [])
        corpus = ['call bob', 'turn on']
        vocab = build_vocab(corpus, 40)
        chars = sorted(set(''.join(corpus).replace(' ', '')))
        for perm in itertools.permutations(chars[:6]):
            word = ''.join(perm)
            for text in (word, ' '.join(perm), word[::-1] + ' ' + word):
                enc = encode(vocab, text)
                self.assertEqual(enc.unk_positions, [], msg=text)
                self.assertEqual(decode(vocab, enc.ids), text)

    def testDeterministic(self):
        corpus = ['call mom', 'call home', 'turn on the lamp']
        self.assertEqual(build_vocab(corpus, 30), build_vocab(list(corpus), 30))

    def testBuildErrors(self):
        with self.assertRaises(TokenizerError):
            build_vocab([], 10)
        with self.assertRaises(TokenizerError):
            build_vocab(['abc'], 4)

    def testWordStarts(self):
        self.assertEqual(word_starts(self.vocab, [4, 2, 3]), [0, 0, 1])

    def testSaveLoad(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'vocab.json')
            self.vocab.save(path)
            self.assertEqual(Vocab.load(path), self.vocab)
            with self.assertRaises(MissingFileError):
                Vocab.load(os.path.join(d, 'nope.json'))


if __name__ == '__main__':
    unittest.main()
