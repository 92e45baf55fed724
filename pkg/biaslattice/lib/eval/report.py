import csv
import json
import math
import os
from xml.sax.saxutils import escape

from ..exceptions import EvalError, MissingFileError
from ..data import word_spans
from ..logging import log_warn
from .metrics import wer, ne_wer, werr

__all__ = ['EvalReport', 'evaluate', 'compare', 'render_table', 'write_csv', 'write_svg_lines']


class EvalReport(object):
    '''
    Error rates for one model on one reference set.  splits maps a
    split name to {wer, S, I, D, N}; ne_wer maps an entity type name to
    {ne_wer, errors, tokens}.  werr / ne_werr are filled by compare().
    '''
    def __init__(self, name, splits=None, ne_wer=None, werr=None, ne_werr=None, baseline=None):
        self.name = name
        self.splits = splits or {}
        self.ne_wer = ne_wer or {}
        self.werr = werr or {}
        self.ne_werr = ne_werr or {}
        self.baseline = baseline

    def to_dict(self):
        return {'name': self.name, 'splits': self.splits, 'ne_wer': self.ne_wer,
                'werr': self.werr, 'ne_werr': self.ne_werr, 'baseline': self.baseline}

    def to_json(self, path):
        with open(path, 'w') as outf:
            json.dump(self.to_dict(), outf, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, path):
        if not os.path.exists(path):
            raise MissingFileError(path, "report")
        with open(path) as inf:
            try:
                d = json.load(inf)
            except ValueError as e:
                raise EvalError("Unreadable report {}: {}".format(path, e))
        return cls(d['name'], d.get('splits'), d.get('ne_wer'), d.get('werr'), d.get('ne_werr'), d.get('baseline'))

    def __str__(self):
        return 'EvalReport({})'.format(self.name)


def _counts(pairs):
    S = I = D = N = 0
    for ref, hyp in pairs:
        r = wer(ref, hyp)
        S, I, D, N = S + r.S, I + r.I, D + r.D, N + len(ref)
    if N == 0:
        raise EvalError("No reference words to score")
    return {'wer': (S + I + D) / float(N), 'S': S, 'I': I, 'D': D, 'N': N}


def evaluate(name, split, refs, hyps, vocab):
    '''
    refs: utterances (with entity spans); hyps: {utt_id: hypothesis
    text}.  Scores the whole set under split, plus its general and
    specific subsets when both are present.
    '''
    missing = [u.utt_id for u in refs if u.utt_id not in hyps]
    if missing:
        raise EvalError("No hypothesis for {} reference utterance(s), e.g. {}".format(len(missing), missing[0]))
    pairs = [(u.words, hyps[u.utt_id].split()) for u in refs]
    splits = {split: _counts(pairs)}
    tags = set(u.split for u in refs)
    if len(tags) > 1:
        for tag in sorted(tags):
            splits['{}/{}'.format(split, tag)] = _counts([p for p, u in zip(pairs, refs) if u.split == tag])
    items = [(u.words, hyps[u.utt_id].split(), word_spans(u, vocab)) for u in refs if u.spans]
    per_type = ne_wer(items)
    ne = dict((t.name, {'ne_wer': e.rate, 'errors': e.errors, 'tokens': e.tokens}) for t, e in per_type.items())
    return EvalReport(name, splits, ne)


def _relative(b, a, what):
    if b == 0:
        log_warn("Baseline {} is zero; relative reduction left empty".format(what))
        return None
    return werr(b, a)


def compare(report, baseline):
    '''Fill report.werr / report.ne_werr relative to baseline.'''
    report.baseline = baseline.name
    for split, s in report.splits.items():
        b = baseline.splits.get(split)
        if b is not None:
            report.werr[split] = _relative(b['wer'], s['wer'], '{} WER'.format(split))
    for t, e in report.ne_wer.items():
        b = baseline.ne_wer.get(t)
        if b is not None:
            report.ne_werr[t] = _relative(b['ne_wer'], e['ne_wer'], '{} NE-WER'.format(t))
    return report


def _fmt(v):
    if isinstance(v, float):
        return '{:+.2f}'.format(v) if v < 0 else '{:.2f}'.format(v)
    return str(v)


def render_table(rows, columns, title=None):
    '''
    Fixed-width text table.  rows are dicts keyed by column name;
    floats print with two decimals.
    '''
    cells = [[str(c) for c in columns]] + [[_fmt(r.get(c, '')) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    sep = '+' + '+'.join('-' * (w + 2) for w in widths) + '+'
    lines = []
    if title:
        lines.append(title)
    lines.append(sep)
    for k, row in enumerate(cells):
        lines.append('| ' + ' | '.join(c.ljust(w) if i == 0 else c.rjust(w)
                                       for i, (c, w) in enumerate(zip(row, widths))) + ' |')
        if k == 0:
            lines.append(sep)
    lines.append(sep)
    return '\n'.join(lines)


def write_csv(path, columns, rows):
    with open(path, 'w', newline='') as outf:
        writer = csv.DictWriter(outf, fieldnames=list(columns), extrasaction='ignore')
        writer.writeheader()
        for r in rows:
            writer.writerow(r)


_PALETTE = ('#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e')


def write_svg_lines(path, series, title='', xlabel='', ylabel='', width=480, height=320):
    '''
    Minimal SVG line plot.  series maps a label to a list of (x, y)
    points; x is plotted on a log2 axis when every x is positive.
    '''
    pts = [p for s in series.values() for p in s]
    if not pts:
        raise EvalError("Nothing to plot")
    logx = all(x > 0 for x, _ in pts)
    fx = (lambda x: math.log2(x)) if logx else (lambda x: float(x))
    xs = [fx(x) for x, _ in pts]
    ys = [y for _, y in pts] + [0.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = 60, 20, 30, 45

    def px(x):
        return left + (fx(x) - x0) / (x1 - x0) * (width - left - right)

    def py(y):
        return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom)
    out = ['<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">'.format(width, height),
           '<rect width="100%" height="100%" fill="white"/>',
           '<text x="{}" y="18" font-size="14" text-anchor="middle">{}</text>'.format(width // 2, escape(title)),
           '<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>'.format(left, height - bottom, width - right),
           '<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>'.format(left, top, height - bottom),
           '<line x1="{0}" y1="{1:.1f}" x2="{2}" y2="{1:.1f}" stroke="#bbbbbb" stroke-dasharray="4"/>'.format(
               left, py(0.0), width - right),
           '<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>'.format(
               width // 2, height - 8, escape(xlabel)),
           '<text x="14" y="{0}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>'.format(
               height // 2, escape(ylabel))]
    for x in sorted(set(x for x, _ in pts)):
        out.append('<text x="{:.1f}" y="{}" font-size="10" text-anchor="middle">{}</text>'.format(
            px(x), height - bottom + 14, x))
    for k, (label, s) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        s = sorted(s)
        path_pts = ' '.join('{:.1f},{:.1f}'.format(px(x), py(y)) for x, y in s)
        out.append('<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>'.format(color, path_pts))
        for x, y in s:
            out.append('<circle cx="{:.1f}" cy="{:.1f}" r="3" fill="{}"/>'.format(px(x), py(y), color))
        out.append('<text x="{}" y="{}" font-size="11" fill="{}">{}</text>'.format(
            width - right - 110, top + 14 * (k + 1), color, escape(label)))
    out.append('</svg>')
    with open(path, 'w') as outf:
        outf.write('\n'.join(out) + '\n')
