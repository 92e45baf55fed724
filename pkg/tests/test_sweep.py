import os
import tempfile
import unittest

from biaslattice.sweep import *
from biaslattice.sweep import _plots
from biaslattice.lib.exceptions import ConfigError, MissingFileError


def spec_dict(**kw):
    d = {'name': 'demo', 'base': 'runs/base', 'data': 'runs/data', 'out': 'runs/out',
         'tests': ['test-specific'], 'catalog_sizes': [4, 16],
         'systems': [{'label': 'base'},
                     {'label': 'adapters', 'adapters': 'runs/ad'},
                     {'label': 'sf', 'sf_lambdas': [0.5, 2.0]}]}
    d.update(kw)
    return d


def fake_report(label, split, wer, ne):
    return {'name': label, 'splits': {split: {'wer': wer, 'S': 0, 'I': 0, 'D': 0, 'N': 10}},
            'ne_wer': {'ProperName': {'ne_wer': ne, 'errors': 0, 'tokens': 10}},
            'werr': {}, 'ne_werr': {}, 'baseline': None}


class ExperimentSpecTests(unittest.TestCase):
    def testBaselineDefaultsToPlainSystem(self):
        spec = ExperimentSpec.from_dict(spec_dict())
        self.assertEqual(spec.baseline, 'base')
        self.assertFalse(spec.systems[0].uses_catalog)
        self.assertEqual(spec.systems[2].lambdas(), [0.5, 2.0])

    def testInvalid(self):
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict(spec_dict(systems=[{'label': 'ad', 'adapters': 'x'}]))
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict(spec_dict(systems=[{'label': 'a'}, {'label': 'a'}]))
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict(spec_dict(catalog_sizes=[0]))
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict(spec_dict(decoder='x'))
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict(spec_dict(systems=[{'adapters': 'x'}]))
        with self.assertRaises(ConfigError):
            ExperimentSpec.from_dict(spec_dict(baseline='nobody'))

    def testCheckPaths(self):
        with tempfile.TemporaryDirectory() as d:
            spec = ExperimentSpec.from_dict(spec_dict(base=d, data=d, systems=[{'label': 'base'}]))
            with self.assertRaises(MissingFileError):
                spec.check_paths()
            open(os.path.join(d, 'test-specific.jsonl'), 'w').close()
            spec.check_paths()
            per_seed = ExperimentSpec.from_dict(spec_dict(base=os.path.join(d, 'base-s{seed}'), data=d,
                                                          seeds=[0, 1], systems=[{'label': 'base'}]))
            os.makedirs(os.path.join(d, 'base-s0'))
            with self.assertRaises(MissingFileError):
                per_seed.check_paths()
            os.makedirs(os.path.join(d, 'base-s1'))
            per_seed.check_paths()


class PlanTests(unittest.TestCase):
    def setUp(self):
        self.spec = ExperimentSpec.from_dict(spec_dict())
        self.jobs = plan_jobs(self.spec)

    def testJobGrid(self):
        keys = list(self.jobs)
        self.assertIn(('base', 'test-specific', None, 0), keys)
        self.assertIn(('adapters', 'test-specific', 4, 0), keys)
        self.assertIn(('sf (lambda=2)', 'test-specific', 16, 0), keys)
        self.assertEqual(len(keys), 1 + 2 + 2 * 2)
        outdirs = [j.outdir for j in self.jobs.values()]
        self.assertEqual(len(set(outdirs)), len(outdirs))
        self.assertEqual(self.jobs[('sf (lambda=0.5)', 'test-specific', 4, 0)].sf_lambda, 0.5)

    def testSeedGrid(self):
        spec = ExperimentSpec.from_dict(spec_dict(seeds=[0, 1, 2], base='runs/base-s{seed}',
                                                  systems=[{'label': 'base'},
                                                           {'label': 'adapters', 'adapters': 'runs/ad-s{seed}'}]))
        jobs = plan_jobs(spec)
        self.assertEqual(len(jobs), 3 * (1 + 2))
        job = jobs[('adapters', 'test-specific', 16, 2)]
        self.assertEqual((job.seed, job.base, job.adapters), (2, 'runs/base-s2', 'runs/ad-s2'))
        self.assertEqual(len(set(j.outdir for j in jobs.values())), len(jobs))
        self.assertEqual(ExperimentSpec.from_dict(spec_dict()).run_seeds(), [0])

    def testRows(self):
        reports = {}
        for key in self.jobs:
            label, split, K, seed = key
            wer = {'base': 0.2, 'adapters': 0.1}.get(label, 0.15)
            reports[key] = fake_report(label, split, wer, 2 * wer)
        rows = collect_rows(self.spec, self.jobs, reports)
        self.assertEqual(len(rows), 2 * 4)
        ad = [r for r in rows if r['system'] == 'adapters' and r['catalog_size'] == 4][0]
        self.assertAlmostEqual(ad['WER'], 10.0, places=9)
        self.assertAlmostEqual(ad['WERR'], 50.0, places=9)
        self.assertAlmostEqual(ad['NE-WERR ProperName'], 50.0, places=9)
        self.assertEqual(ad['seed'], 0)
        base = [r for r in rows if r['system'] == 'base'][0]
        self.assertEqual(base['WERR'], 0.0)
        with tempfile.TemporaryDirectory() as d:
            self.spec.out = d
            written = _plots(self.spec, trend_rows(rows))
            self.assertEqual(sorted(os.path.basename(p) for p in written),
                             ['werr_vs_catalog_size_test-specific.svg', 'werr_vs_sf_lambda_test-specific.svg'])


class TrendTests(unittest.TestCase):
    def testMajority(self):
        self.assertEqual(majority([1.0, 2.0, -1.0], 3), 'better 2/3')
        self.assertEqual(majority([-1.0, -2.0, 0.5], 3), 'worse 2/3')
        self.assertEqual(majority([1.0, 0.0, -1.0], 3), 'mixed 1/3')
        self.assertEqual(majority([0.0, 0.0, 0.0], 3), 'mixed 0/3')
        # seeds without a reduction count against both directions
        self.assertEqual(majority([1.0], 3), 'mixed 1/3')

    def testSeedMajorityRows(self):
        spec = ExperimentSpec.from_dict(spec_dict(seeds=[0, 1, 2], catalog_sizes=[4],
                                                  systems=[{'label': 'base'}, {'label': 'adapters', 'adapters': 'x'}]))
        jobs = plan_jobs(spec)
        # adapters beat the baseline on seeds 0 and 2, lose on seed 1
        ad_wer = {0: 0.1, 1: 0.3, 2: 0.15}
        reports = {}
        for label, split, K, seed in jobs:
            wer = 0.2 if label == 'base' else ad_wer[seed]
            reports[(label, split, K, seed)] = fake_report(label, split, wer, 0.4 if label == 'base' else 0.2)
        rows = collect_rows(spec, jobs, reports)
        self.assertEqual(len(rows), 3 * 2)
        trends = trend_rows(rows)
        self.assertEqual(len(trends), 2)
        ad = [r for r in trends if r['system'] == 'adapters'][0]
        self.assertEqual(ad['seeds'], 3)
        self.assertEqual(ad['WERR trend'], 'better 2/3')
        self.assertAlmostEqual(ad['WER'], 100.0 * (0.1 + 0.3 + 0.15) / 3, places=9)
        self.assertAlmostEqual(ad['WERR'], (50.0 - 50.0 + 25.0) / 3, places=9)
        self.assertEqual(ad['NE-WERR ProperName trend'], 'better 3/3')
        base = [r for r in trends if r['system'] == 'base'][0]
        self.assertEqual(base['WERR trend'], 'mixed 0/3')
        self.assertNotIn('seed', ad)

    def testInvalidSeeds(self):
        for bad in ([], [0, 0], ['a']):
            with self.assertRaises(ConfigError):
                ExperimentSpec.from_dict(spec_dict(seeds=bad))


if __name__ == '__main__':
    unittest.main()
