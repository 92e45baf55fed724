import os
import re
from collections import namedtuple, OrderedDict
from dataclasses import dataclass, field, fields
from multiprocessing import Pool

import numpy as np
import psutil

from biaslattice import __version__
from biaslattice.lib.logging import log_info, log_debug
from biaslattice.lib.exceptions import ConfigError, MissingFileError
from biaslattice.lib.config import section, write_run_manifest
from biaslattice.lib.jsonlines import write_jsonl
from biaslattice.lib.data import load_dataset, load_lexicons
from biaslattice.lib.checkpoint import load_model, load_adapters
from biaslattice.lib.decode import DecodeSettings, decode_dataset, parse_types, top_hypotheses
from biaslattice.lib.eval import EvalReport, evaluate, compare, render_table, write_csv, write_svg_lines

'''
Experiment sweeps.  An experiment spec is a config file whose
[experiment] table names the base checkpoint, the corpus directory, the
test splits, the catalog sizes, the seeds and a list of systems (adapters
and/or shallow fusion).  Checkpoint paths may carry a {seed} placeholder
so every seed decodes with its own trained models.  Every (system,
split, catalog size, seed) decode+eval is an independent job writing its
own files; jobs run in a process pool.
'''


@dataclass
class SystemSpec:
    label: str
    adapters: str = None
    base: str = None
    sf_lambda: float = None
    sf_lambdas: list = None
    random_catalog: bool = False
    types: list = None

    @classmethod
    def from_dict(cls, d):
        known = set(f.name for f in fields(cls))
        unknown = set(d) - known
        if unknown:
            raise ConfigError("Unknown system keys: {}".format(', '.join(sorted(unknown))))
        if 'label' not in d:
            raise ConfigError("Every system needs a label")
        return cls(**d)

    @property
    def uses_catalog(self):
        return self.adapters is not None or self.sf_lambda is not None or bool(self.sf_lambdas)

    def lambdas(self):
        if self.sf_lambdas:
            return [float(x) for x in self.sf_lambdas]
        return [self.sf_lambda]


@dataclass
class ExperimentSpec:
    name: str
    base: str
    data: str
    out: str
    systems: list
    tests: list = field(default_factory=lambda: ['test-general', 'test-specific'])
    catalog_sizes: list = field(default_factory=lambda: [8])
    baseline: str = None
    beam: int = 4
    seed: int = 0
    seeds: list = None

    @classmethod
    def from_dict(cls, d):
        known = set(f.name for f in fields(cls))
        unknown = set(d) - known
        if unknown:
            raise ConfigError("Unknown experiment keys: {}".format(', '.join(sorted(unknown))))
        for key in ('name', 'base', 'data', 'out', 'systems'):
            if key not in d:
                raise ConfigError("Experiment spec needs '{}'".format(key))
        d = dict(d)
        d['systems'] = [SystemSpec.from_dict(s) for s in d['systems']]
        return cls(**d).validate()

    def validate(self):
        if not self.systems:
            raise ConfigError("Experiment {} has no systems".format(self.name))
        labels = [s.label for s in self.systems]
        if len(set(labels)) != len(labels):
            raise ConfigError("System labels must be unique")
        if self.baseline is None:
            plain = [s.label for s in self.systems if not s.uses_catalog]
            if not plain:
                raise ConfigError("Experiment {} needs a baseline system (no adapters, no shallow fusion)".format(self.name))
            self.baseline = plain[0]
        if self.baseline not in labels:
            raise ConfigError("Baseline {} is not one of the systems".format(self.baseline))
        if self.beam < 1 or any(k < 1 for k in self.catalog_sizes) or not self.catalog_sizes:
            raise ConfigError("beam and catalog sizes must be >= 1")
        if self.seeds is not None:
            if not self.seeds or any(not isinstance(s, int) for s in self.seeds):
                raise ConfigError("seeds must be a non-empty list of integers")
            if len(set(self.seeds)) != len(self.seeds):
                raise ConfigError("seeds must be distinct")
        return self

    def run_seeds(self):
        return list(self.seeds) if self.seeds else [self.seed]

    def check_paths(self):
        '''Referenced checkpoints (for every seed), corpus and test sets must exist.'''
        paths = [self.data] + [os.path.join(self.data, '{}.jsonl'.format(t)) for t in self.tests]
        for seed in self.run_seeds():
            paths.append(for_seed(self.base, seed))
            for s in self.systems:
                paths.extend(for_seed(p, seed) for p in (s.adapters, s.base) if p is not None)
        for p in paths:
            if not os.path.exists(p):
                raise MissingFileError(p, "experiment input")


# catalog_size is None for jobs that don't look at a catalog
Job = namedtuple('Job', ['label', 'split', 'catalog_size', 'sf_lambda', 'base', 'adapters', 'data',
                         'random_catalog', 'types', 'beam', 'seed', 'outdir'])


def for_seed(path, seed):
    return None if path is None else path.replace('{seed}', str(seed))


def _slug(*parts):
    return re.sub(r'[^A-Za-z0-9.+-]+', '_', '-'.join(str(p) for p in parts if p is not None)).strip('_')


def plan_jobs(spec):
    '''Jobs keyed by (label, split, catalog size, seed).'''
    jobs = OrderedDict()
    for s in spec.systems:
        for lam in s.lambdas():
            label = s.label if not s.sf_lambdas else '{} (lambda={:g})'.format(s.label, lam)
            for split in spec.tests:
                sizes = spec.catalog_sizes if s.uses_catalog else [None]
                for K in sizes:
                    for seed in spec.run_seeds():
                        outdir = os.path.join(spec.out, 'jobs', _slug(label, split, 'K{}'.format(K) if K else None,
                                                                      's{}'.format(seed)))
                        job = Job(label, split, K, lam, for_seed(s.base or spec.base, seed),
                                  for_seed(s.adapters, seed), spec.data, s.random_catalog, s.types,
                                  spec.beam, seed, outdir)
                        jobs[(label, split, K, seed)] = job
    return jobs


def run_job(job):
    '''Decode and score one job; returns the report as a dict.'''
    model, vocab, _ = load_model(job.base)
    adapters = load_adapters(job.adapters)[0] if job.adapters is not None else None
    lexicons = load_lexicons(job.data)
    utts = load_dataset(os.path.join(job.data, '{}.jsonl'.format(job.split)))
    settings = DecodeSettings(beam=job.beam, sf_lambda=job.sf_lambda, catalog_size=job.catalog_size or 1,
                              random_catalog=job.random_catalog, types=parse_types(job.types), seed=job.seed)
    records, _ = decode_dataset(model, vocab, utts, settings, adapters, lexicons if job.catalog_size else None)
    os.makedirs(job.outdir, exist_ok=True)
    write_jsonl(os.path.join(job.outdir, 'nbest.jsonl'), records)
    report = evaluate(job.label, job.split, utts, top_hypotheses(records), vocab)
    report.to_json(os.path.join(job.outdir, 'report.json'))
    log_info("{} on {} (K={}): WER {:.4f}".format(job.label, job.split, job.catalog_size, report.splits[job.split]['wer']))
    return report.to_dict()


def _report(d):
    return EvalReport(d['name'], d['splits'], d['ne_wer'], d['werr'], d['ne_werr'], d['baseline'])


def _pct(v):
    return '' if v is None else 100.0 * v


def collect_rows(spec, jobs, reports):
    '''
    One row per (system, split, catalog size, seed), relative numbers
    against the baseline decoded with the same seed.
    '''
    rows = []
    for split in spec.tests:
        for K in spec.catalog_sizes:
            for seed in spec.run_seeds():
                bkey = (spec.baseline, split, None, seed)
                if bkey not in reports:
                    bkey = (spec.baseline, split, K, seed)
                base = _report(reports[bkey])
                for (label, jsplit, jK, jseed), job in jobs.items():
                    if jsplit != split or jK not in (K, None) or jseed != seed:
                        continue
                    report = compare(_report(reports[(label, jsplit, jK, jseed)]), base)
                    row = {'system': label, 'split': split, 'catalog_size': K,
                           'sf_lambda': '' if job.sf_lambda is None else job.sf_lambda, 'seed': seed,
                           'WER': 100.0 * report.splits[split]['wer'], 'WERR': _pct(report.werr.get(split))}
                    for t, e in sorted(report.ne_wer.items()):
                        row['NE-WER {}'.format(t)] = 100.0 * e['ne_wer']
                        row['NE-WERR {}'.format(t)] = _pct(report.ne_werr.get(t))
                    rows.append(row)
    return rows


def majority(values, n):
    '''
    Direction a relative reduction takes on more than half of n seeds:
    'better k/n', 'worse k/n', or 'mixed k/n' with k the seeds that improved.
    '''
    better = sum(1 for v in values if v > 0)
    worse = sum(1 for v in values if v < 0)
    if 2 * better > n:
        return 'better {}/{}'.format(better, n)
    if 2 * worse > n:
        return 'worse {}/{}'.format(worse, n)
    return 'mixed {}/{}'.format(better, n)


def trend_rows(rows):
    '''
    Folds per-seed rows into one row per (system, split, catalog size,
    weight): seed means of every number plus a majority column for every
    relative reduction.
    '''
    groups = OrderedDict()
    for r in rows:
        groups.setdefault((r['system'], r['split'], r['catalog_size'], r['sf_lambda']), []).append(r)
    out = []
    for (system, split, K, lam), group in groups.items():
        row = {'system': system, 'split': split, 'catalog_size': K, 'sf_lambda': lam, 'seeds': len(group)}
        for col in _columns(group):
            if col in row or col == 'seed':
                continue
            values = [r[col] for r in group if r.get(col, '') != '']
            row[col] = float(np.mean(values)) if values else ''
            if 'WERR' in col:
                row[col + ' trend'] = majority(values, len(group))
        out.append(row)
    return out


def _columns(rows, head=('system', 'split', 'catalog_size', 'sf_lambda', 'seed', 'WER', 'WERR')):
    cols = list(head)
    for r in rows:
        cols.extend(c for c in r if c not in cols)
    return cols


def _plots(spec, rows):
    written = []
    for split in spec.tests:
        if len(spec.catalog_sizes) > 1:
            series = OrderedDict()
            for r in rows:
                if r['split'] == split and r['system'] != spec.baseline and r['WERR'] != '':
                    series.setdefault(r['system'], []).append((r['catalog_size'], r['WERR']))
            series = OrderedDict((k, v) for k, v in series.items() if len(set(x for x, _ in v)) > 1)
            if series:
                path = os.path.join(spec.out, 'werr_vs_catalog_size_{}.svg'.format(_slug(split)))
                write_svg_lines(path, series, '{}: {}'.format(spec.name, split), 'catalog size', 'WERR (%)')
                written.append(path)
        lam = OrderedDict()
        for s in spec.systems:
            if s.sf_lambdas:
                pts = [(float(r['sf_lambda']), r['WERR']) for r in rows
                       if r['split'] == split and r['system'].startswith(s.label + ' (') and r['WERR'] != ''
                       and r['catalog_size'] == spec.catalog_sizes[0]]
                if pts:
                    lam[s.label] = pts
        if lam:
            path = os.path.join(spec.out, 'werr_vs_sf_lambda_{}.svg'.format(_slug(split)))
            write_svg_lines(path, lam, '{}: {}'.format(spec.name, split), 'shallow-fusion weight', 'WERR (%)')
            written.append(path)
    return written


def run_sweep(cfg, argv, jobs=None):
    '''
    Run every job of the experiment in cfg ([experiment] table), then
    write results.csv (per seed), trends.csv (seed means and majority
    directions), results.txt and the line plots of the seed means to the
    output directory.  Returns the trend rows.
    '''
    spec = ExperimentSpec.from_dict(section(cfg, 'experiment'))
    spec.check_paths()
    os.makedirs(spec.out, exist_ok=True)
    write_run_manifest(spec.out, 'sweep', argv, cfg, __version__)
    planned = plan_jobs(spec)
    workers = jobs or psutil.cpu_count(logical=False) or 1
    workers = max(1, min(workers, len(planned)))
    log_info("Experiment {}: {} job(s) on {} worker(s)".format(spec.name, len(planned), workers))
    if workers == 1:
        results = [run_job(j) for j in planned.values()]
    else:
        with Pool(processes=workers) as pool:
            results = pool.map(run_job, list(planned.values()))
    reports = dict(zip(planned.keys(), results))
    rows = collect_rows(spec, planned, reports)
    columns = _columns(rows)
    write_csv(os.path.join(spec.out, 'results.csv'), columns, rows)
    trends = trend_rows(rows)
    trend_columns = _columns(trends, ('system', 'split', 'catalog_size', 'sf_lambda', 'seeds',
                                      'WER', 'WERR', 'WERR trend'))
    write_csv(os.path.join(spec.out, 'trends.csv'), trend_columns, trends)
    table = render_table(trends, trend_columns, title='{} ({} seed(s))'.format(spec.name, len(spec.run_seeds())))
    with open(os.path.join(spec.out, 'results.txt'), 'w') as outf:
        outf.write(render_table(rows, columns, title='{}, per seed'.format(spec.name)) + '\n\n')
        outf.write(table + '\n')
    for path in _plots(spec, trends):
        log_debug("Wrote {}".format(path))
    print(table)
    return trends
