import csv
import functools
import os
import tempfile
import unittest
from collections import namedtuple, OrderedDict

import numpy as np

from biaslattice.lib.eval import *
from biaslattice.lib.adapters import EntityType
from biaslattice.lib.data import Utterance, Span
from biaslattice.lib.tokenizer import build_vocab, encode
from biaslattice.lib.exceptions import EvalError, MissingFileError

WordSpan = namedtuple('WordSpan', ['start', 'end', 'type'])


@functools.lru_cache(maxsize=None)
def brute_distance(ref, hyp):
    '''Minimum edit cost by trying every operation at every step (tuples in).'''
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    return min(brute_distance(ref[1:], hyp[1:]) + (0 if ref[0] == hyp[0] else 1),
               brute_distance(ref[1:], hyp) + 1,
               brute_distance(ref, hyp[1:]) + 1)


def all_alignments(ref, hyp, i=0, j=0):
    '''Every alignment of ref[i:] with hyp[j:] as (op, ref index, hyp index) lists.'''
    if i == len(ref) and j == len(hyp):
        yield []
        return
    if i < len(ref) and j < len(hyp):
        op = 'C' if ref[i] == hyp[j] else 'S'
        for rest in all_alignments(ref, hyp, i + 1, j + 1):
            yield [(op, i, j)] + rest
    if i < len(ref):
        for rest in all_alignments(ref, hyp, i + 1, j):
            yield [('D', i, None)] + rest
    if j < len(hyp):
        for rest in all_alignments(ref, hyp, i, j + 1):
            yield [('I', None, j)] + rest


def oracle_entity_errors(ref, hyp, spans):
    '''
    Pick the optimal alignment the scorer's tie rule picks (read from the
    end: match/substitution before deletion before insertion), then
    count entity errors straight from the span definition.
    '''
    rank = {'C': 0, 'S': 0, 'D': 1, 'I': 2}
    found = list(all_alignments(ref, hyp))
    best = min(sum(1 for op, _, _ in a if op != 'C') for a in found)
    chosen = min((a for a in found if sum(1 for op, _, _ in a if op != 'C') == best),
                 key=lambda a: [rank[op] for op, _, _ in reversed(a)])

    def inside(r):
        for s in spans:
            if r is not None and s.start <= r < s.end:
                return s
        return None
    counts = {}
    for k, (op, r, _) in enumerate(chosen):
        owner = None
        if op in ('S', 'D'):
            owner = inside(r)
        elif op == 'I':
            left = [x[1] for x in chosen[:k] if x[1] is not None]
            right = [x[1] for x in chosen[k + 1:] if x[1] is not None]
            if left and right and inside(left[-1]) is not None and inside(left[-1]) is inside(right[0]):
                owner = inside(left[-1])
        if owner is not None:
            counts[owner.type] = counts.get(owner.type, 0) + 1
    return counts


def replay(alignment, ref, hyp):
    r = [ref[a.ref] for a in alignment if a.ref is not None]
    h = [hyp[a.hyp] for a in alignment if a.hyp is not None]
    return r == list(ref) and h == list(hyp)


class WerTests(unittest.TestCase):
    def testAgainstExhaustiveSearch(self):
        rng = np.random.RandomState(0)
        words = ['a', 'b', 'c']
        for _ in range(300):
            ref = [words[i] for i in rng.randint(3, size=rng.randint(1, 7))]
            hyp = [words[i] for i in rng.randint(3, size=rng.randint(0, 7))]
            r = wer(ref, hyp)
            self.assertEqual(r.S + r.I + r.D, brute_distance(tuple(ref), tuple(hyp)))
            self.assertAlmostEqual(r.wer, brute_distance(tuple(ref), tuple(hyp)) / float(len(ref)), places=12)
            self.assertTrue(replay(r.alignment, ref, hyp))

    def testHandExamples(self):
        r = wer('a b c'.split(), 'a x c d'.split())
        self.assertEqual((r.S, r.I, r.D), (1, 1, 0))
        self.assertAlmostEqual(r.wer, 2 / 3.0, places=12)
        r = wer('a b'.split(), [])
        self.assertEqual((r.S, r.I, r.D, r.wer), (0, 0, 2, 1.0))
        self.assertEqual(wer('a'.split(), 'a'.split()).wer, 0.0)
        with self.assertRaises(EvalError):
            wer([], ['a'])

    def testTiesPreferSubstitution(self):
        r = wer(['a'], ['b'])
        self.assertEqual([a.op for a in r.alignment], ['S'])


class EntityErrorTests(unittest.TestCase):
    def setUp(self):
        self.ref = 'call bob smith now'.split()
        self.spans = [WordSpan(1, 3, EntityType.ProperName)]

    def rate(self, hyp):
        return ne_wer([(self.ref, hyp.split(), self.spans)])[EntityType.ProperName]

    def testSubstitution(self):
        e = self.rate('call rob smith now')
        self.assertEqual((e.errors, e.tokens), (1, 2))
        self.assertAlmostEqual(e.rate, 0.5, places=12)

    def testInsertionInsideSpan(self):
        self.assertEqual(self.rate('call bob x smith now').errors, 1)

    def testInsertionAtBoundary(self):
        self.assertEqual(self.rate('call x bob smith now').errors, 0)
        self.assertEqual(self.rate('call bob smith x now').errors, 0)

    def testErrorsOutsideSpanIgnored(self):
        self.assertEqual(self.rate('hall bob smith').errors, 0)
        self.assertEqual(self.rate('call').errors, 2)

    def testAgainstExhaustiveAlignment(self):
        rng = np.random.RandomState(4)
        words = ['a', 'b', 'c']
        types = [EntityType.ProperName, EntityType.Appliance]
        for _ in range(50):
            ref = [words[i] for i in rng.randint(3, size=rng.randint(2, 6))]
            hyp = [words[i] for i in rng.randint(3, size=rng.randint(0, 6))]
            cut = sorted(rng.choice(np.arange(len(ref) + 1), 2, replace=False))
            spans = [WordSpan(int(cut[0]), int(cut[1]), types[0])]
            if cut[1] < len(ref):
                spans.append(WordSpan(int(cut[1]), len(ref), types[1]))
            got = ne_wer([(ref, hyp, spans)])
            expected = oracle_entity_errors(ref, hyp, spans)
            for s in spans:
                self.assertEqual(got[s.type].errors, expected.get(s.type, 0),
                                 msg='{} / {} / {}'.format(ref, hyp, spans))
                self.assertEqual(got[s.type].tokens, s.end - s.start)

    def testBadSpan(self):
        with self.assertRaises(EvalError):
            ne_wer([(self.ref, self.ref, [WordSpan(3, 6, EntityType.ProperName)])])

    def testRelativeReduction(self):
        self.assertAlmostEqual(werr(0.2, 0.1), 0.5, places=12)
        self.assertAlmostEqual(werr(0.2, 0.3), -0.5, places=12)
        with self.assertRaises(EvalError):
            werr(0.0, 0.1)


class ReportTests(unittest.TestCase):
    def setUp(self):
        self.vocab = build_vocab(['call bob', 'call dave', 'turn on the fan', 'stop the music'], 40)
        ids = encode(self.vocab, 'call bob').ids
        head = len(encode(self.vocab, 'call').ids)
        self.refs = [Utterance('s', np.zeros((1, 1)), 'call bob', ids,
                               [Span(head, len(ids), EntityType.ProperName, 'bob')], 'specific'),
                     Utterance('g', np.zeros((1, 1)), 'stop the music', encode(self.vocab, 'stop the music').ids)]

    def testEvaluate(self):
        report = evaluate('sys', 'test', self.refs, {'s': 'call dave', 'g': 'stop the music'}, self.vocab)
        self.assertEqual(report.splits['test']['N'], 5)
        self.assertAlmostEqual(report.splits['test']['wer'], 0.2, places=12)
        self.assertEqual(report.splits['test/specific']['S'], 1)
        self.assertEqual(report.splits['test/general']['wer'], 0.0)
        self.assertEqual(report.ne_wer['ProperName'], {'ne_wer': 1.0, 'errors': 1, 'tokens': 1})
        with self.assertRaises(EvalError):
            evaluate('sys', 'test', self.refs, {'s': 'call bob'}, self.vocab)

    def testCompare(self):
        base = evaluate('base', 'test', self.refs, {'s': 'call dave', 'g': 'stop music'}, self.vocab)
        model = evaluate('ad', 'test', self.refs, {'s': 'call bob', 'g': 'stop music'}, self.vocab)
        compare(model, base)
        self.assertEqual(model.baseline, 'base')
        self.assertAlmostEqual(model.werr['test'], 0.5, places=12)
        self.assertAlmostEqual(model.ne_werr['ProperName'], 1.0, places=12)
        self.assertAlmostEqual(model.werr['test/specific'], 1.0, places=12)
        # zero baseline error leaves the reduction empty
        swapped = compare(base, model)
        self.assertIsNone(swapped.werr['test/specific'])
        self.assertIsNone(swapped.ne_werr['ProperName'])

    def testJson(self):
        report = evaluate('sys', 'test', self.refs, {'s': 'call dave', 'g': 'stop the music'}, self.vocab)
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'report.json')
            report.to_json(path)
            self.assertEqual(EvalReport.from_json(path).to_dict(), report.to_dict())
            with self.assertRaises(MissingFileError):
                EvalReport.from_json(os.path.join(d, 'nope.json'))

    def testRenderTable(self):
        rows = [{'system': 'base', 'WER': 12.5, 'WERR': ''}, {'system': 'adapters', 'WER': 10.0, 'WERR': -3.25}]
        table = render_table(rows, ['system', 'WER', 'WERR'], title='demo')
        lines = table.split('\n')
        self.assertEqual(lines[0], 'demo')
        self.assertIn('12.50', table)
        self.assertIn('-3.25', table)
        self.assertEqual(len(set(len(l) for l in lines[1:])), 1)

    def testCsvAndSvg(self):
        rows = [{'system': 'a', 'catalog_size': 4, 'WERR': 1.5}, {'system': 'a', 'catalog_size': 16, 'WERR': 2.5}]
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'results.csv')
            write_csv(path, ['system', 'catalog_size', 'WERR'], rows)
            with open(path) as inf:
                got = list(csv.DictReader(inf))
            self.assertEqual([r['catalog_size'] for r in got], ['4', '16'])
            svg = os.path.join(d, 'plot.svg')
            write_svg_lines(svg, OrderedDict([('a', [(4, 1.5), (16, 2.5)]), ('b <&>', [(4, -1.0)])]),
                            'title', 'catalog size', 'WERR (%)')
            with open(svg) as inf:
                text = inf.read()
            self.assertTrue(text.startswith('<svg'))
            self.assertEqual(text.count('<polyline'), 2)
            self.assertIn('b &lt;&amp;&gt;', text)
            with self.assertRaises(EvalError):
                write_svg_lines(svg, {})


if __name__ == '__main__':
    unittest.main()
