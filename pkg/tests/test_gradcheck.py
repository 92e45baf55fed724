import unittest
from collections import OrderedDict

import numpy as np

from biaslattice.lib.numerics import Tensor, grad_check_params, ops
from biaslattice.lib.transducer import TransducerModel, forward, join, rnnt_loss
from biaslattice.lib.adapters import QueryVariant, Catalog, ContextualAdapters, encode_catalog, adapted_lattice

from test_adapters import tiny_setup, randomize_wout

SEEDS = range(5)


class JointGradientTests(unittest.TestCase):
    def testJointNetwork(self):
        _, base, _ = tiny_setup()
        for seed in SEEDS:
            model = TransducerModel(base.config, seed=seed)
            rng = np.random.RandomState(seed)
            D, V = model.config.joint_dim, model.config.vocab_size
            p = OrderedDict([('H_enc', Tensor(rng.normal(size=(3, D)))), ('H_pre', Tensor(rng.normal(size=(2, D)))),
                             ('joint.W', model['joint.W']), ('joint.b', model['joint.b'])])
            w = Tensor(rng.normal(size=(3, 2, V)))

            def f():
                z = join(model, p['H_enc'], p['H_pre'])
                return ops.sum(ops.mul(ops.log_softmax(z), w))
            err, errors = grad_check_params(f, p, 1e-5)
            self.assertLess(err, 1e-4, msg='seed {}'.format(seed))
            self.assertEqual(set(errors), set(p))


class ModelGradientTests(unittest.TestCase):
    '''
    End-to-end gradients of the transducer loss, checked on a subsample
    of coordinates of every parameter tensor.
    '''
    def setUp(self):
        self.target = [2, 3]

    def testBaseModel(self):
        _, base, _ = tiny_setup()
        for seed in SEEDS:
            model = TransducerModel(base.config, seed=seed)
            feats = np.random.RandomState(seed).normal(size=(4, 3))

            def f():
                return rnnt_loss(forward(model, feats, self.target), self.target)
            err, errors = grad_check_params(f, model.params, 1e-5, max_coords=3, seed=seed)
            self.assertLess(err, 1e-4, msg='seed {}'.format(seed))
            self.assertEqual(set(errors), set(model.params))

    def testAdapterVariants(self):
        catalog = Catalog([('bob', 'ProperName'), ('fan', 'Appliance')])
        for variant in QueryVariant:
            for seed in SEEDS:
                use_types = seed % 2 == 1
                vocab, base, tiny = tiny_setup(variant=variant.value, use_types=use_types)
                model = TransducerModel(base.config, seed=seed)
                adapters = ContextualAdapters(tiny.config, len(vocab), model.config.joint_dim, seed=seed)
                randomize_wout(adapters, seed=seed)
                feats = np.random.RandomState(seed).normal(size=(4, 3))

                def f():
                    Ce = encode_catalog(adapters, catalog, vocab)
                    lattice, _ = adapted_lattice(model, adapters, feats, self.target, Ce)
                    return rnnt_loss(lattice, self.target)
                params = OrderedDict(adapters.params)
                params['joint.W'] = model['joint.W']
                params['enc.lstm0.W'] = model['enc.lstm0.W']
                err, errors = grad_check_params(f, params, 1e-5, max_coords=3, seed=seed)
                self.assertLess(err, 1e-4, msg='{} seed={} types={}'.format(variant.value, seed, use_types))
                self.assertIn('cat.fwd.W', errors)
                self.assertIn('cat.nobias', errors)
                if use_types:
                    self.assertIn('cat.type', errors)


if __name__ == '__main__':
    unittest.main()
