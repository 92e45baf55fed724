import json
import os
import tempfile
import unittest

import numpy as np

from biaslattice.lib.checkpoint import *
from biaslattice.lib.checkpoint import MANIFEST, BLOB
from biaslattice.lib.adapters import QueryVariant
from biaslattice.lib.exceptions import CheckpointVersionError, MissingFileError

from test_adapters import tiny_setup, randomize_wout


class CheckpointTests(unittest.TestCase):
    def setUp(self):
        self.vocab, self.model, self.adapters = tiny_setup(variant='joint', use_types=True)
        randomize_wout(self.adapters)
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def testModelRoundTrip(self):
        path = os.path.join(self.dir, 'base')
        save_model(path, self.model, self.vocab, {'note': 'x'})
        model, vocab, manifest = load_model(path)
        self.assertEqual(vocab, self.vocab)
        self.assertEqual(manifest['extra']['note'], 'x')
        self.assertEqual(manifest['checksum'], params_checksum(self.model.params))
        self.assertEqual(params_checksum(model.params), params_checksum(self.model.params))
        self.assertEqual(model.config, self.model.config)

    def testAdapterRoundTrip(self):
        path = os.path.join(self.dir, 'ad')
        save_adapters(path, self.adapters)
        adapters, manifest = load_adapters(path)
        self.assertEqual(adapters.variant, QueryVariant.JointQuery)
        self.assertTrue(adapters.config.use_types)
        for name, t in self.adapters.params.items():
            self.assertTrue(np.array_equal(adapters[name].data, t.data))

    def testChecksumSeesEveryByte(self):
        before = params_checksum(self.model.params)
        self.model['joint.b'].data[0] += 1e-300
        self.assertNotEqual(params_checksum(self.model.params), before)

    def testKindAndVersion(self):
        path = os.path.join(self.dir, 'ad')
        save_adapters(path, self.adapters)
        with self.assertRaises(CheckpointVersionError):
            load_model(path)
        with open(os.path.join(path, MANIFEST)) as inf:
            manifest = json.load(inf)
        manifest['version'] = 99
        with open(os.path.join(path, MANIFEST), 'w') as outf:
            json.dump(manifest, outf)
        with self.assertRaises(CheckpointVersionError):
            load_adapters(path)

    def testLayoutMismatch(self):
        path = os.path.join(self.dir, 'base')
        save_model(path, self.model, self.vocab)
        with open(os.path.join(path, MANIFEST)) as inf:
            manifest = json.load(inf)
        manifest['config']['joint_dim'] = 7
        with open(os.path.join(path, MANIFEST), 'w') as outf:
            json.dump(manifest, outf)
        with self.assertRaises(CheckpointVersionError):
            load_model(path)

    def testTruncatedBlob(self):
        path = os.path.join(self.dir, 'base')
        save_model(path, self.model, self.vocab)
        with open(os.path.join(path, BLOB), 'r+b') as f:
            f.truncate(16)
        with self.assertRaises(CheckpointVersionError):
            load_model(path)

    def testMissing(self):
        with self.assertRaises(MissingFileError):
            load_model(os.path.join(self.dir, 'nothing'))
        path = os.path.join(self.dir, 'base')
        save_model(path, self.model, self.vocab)
        os.remove(os.path.join(path, BLOB))
        with self.assertRaises(MissingFileError):
            load_model(path)


if __name__ == '__main__':
    unittest.main()
