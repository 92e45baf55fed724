from collections import namedtuple

from ..exceptions import EvalError

'''
Word error rate with an explicit alignment, entity-span error rate,
and relative reductions.
'''

__all__ = ['Alignment', 'WerResult', 'EntityErrors', 'edit_table', 'wer', 'ne_wer', 'werr']

# op is one of 'C' (correct), 'S', 'D', 'I'; ref/hyp are word indices or None
Alignment = namedtuple('Alignment', ['op', 'ref', 'hyp'])
WerResult = namedtuple('WerResult', ['wer', 'S', 'I', 'D', 'alignment'])
EntityErrors = namedtuple('EntityErrors', ['rate', 'errors', 'tokens'])


def edit_table(ref, hyp):
    '''Levenshtein DP table over words, unit costs.'''
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = d[i - 1][j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            d[i][j] = min(sub, d[i - 1][j] + 1, d[i][j - 1] + 1)
    return d


def wer(ref, hyp):
    '''
    (S + I + D) / len(ref) and one optimal alignment.  Walking back from
    the end, ties prefer substitution (or match), then deletion, then
    insertion.
    '''
    ref, hyp = list(ref), list(hyp)
    if not ref:
        raise EvalError("Reference must be non-empty")
    d = edit_table(ref, hyp)
    i, j = len(ref), len(hyp)
    ops = []
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1):
            ops.append(Alignment('C' if ref[i - 1] == hyp[j - 1] else 'S', i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and d[i][j] == d[i - 1][j] + 1:
            ops.append(Alignment('D', i - 1, None))
            i -= 1
        else:
            ops.append(Alignment('I', None, j - 1))
            j -= 1
    ops.reverse()
    S = sum(1 for a in ops if a.op == 'S')
    D = sum(1 for a in ops if a.op == 'D')
    I = sum(1 for a in ops if a.op == 'I')
    return WerResult((S + D + I) / float(len(ref)), S, I, D, ops)


def _span_of(spans, r):
    for k, s in enumerate(spans):
        if s.start <= r < s.end:
            return k
    return None


def _attribute(alignment, spans):
    '''(span index or None) per alignment op.'''
    owner = [None if a.ref is None else _span_of(spans, a.ref) for a in alignment]
    out = list(owner)
    for k, a in enumerate(alignment):
        if a.op != 'I':
            continue
        left = next((owner[j] for j in range(k - 1, -1, -1) if alignment[j].ref is not None), None)
        right = next((owner[j] for j in range(k + 1, len(alignment)) if alignment[j].ref is not None), None)
        out[k] = left if (left is not None and left == right) else None
    return out


def ne_wer(items):
    '''
    items: iterable of (ref words, hyp words, word spans), spans having
    start/end word indices and a type.  Entity-token errors are the
    substitutions and deletions of reference words inside a span, plus
    insertions whose alignment neighbours on both sides sit inside the
    same span.  Returns {EntityType: EntityErrors}.
    '''
    errors = {}
    tokens = {}
    for ref, hyp, spans in items:
        spans = list(spans)
        for s in spans:
            if not (0 <= s.start < s.end <= len(ref)):
                raise EvalError("Entity span {} outside a {}-word reference".format(s, len(ref)))
            tokens[s.type] = tokens.get(s.type, 0) + (s.end - s.start)
            errors.setdefault(s.type, 0)
        if not spans:
            continue
        result = wer(ref, hyp)
        for a, k in zip(result.alignment, _attribute(result.alignment, spans)):
            if k is not None and a.op in ('S', 'D', 'I'):
                errors[spans[k].type] += 1
    return dict((t, EntityErrors(errors[t] / float(tokens[t]), errors[t], tokens[t])) for t in tokens)


def werr(baseline, model):
    '''(WER_B - WER_A) / WER_B; negative means the model is worse.'''
    if baseline == 0:
        raise EvalError("Relative reduction is undefined for a zero baseline error rate")
    return (baseline - model) / float(baseline)
