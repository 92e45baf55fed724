import unittest

import numpy as np

from biaslattice.lib.numerics import Tensor
from biaslattice.lib.transducer import *
from biaslattice.lib.exceptions import TransducerError, ConfigError


def tiny_config(**kw):
    d = dict(feature_dim=3, enc_layers=2, enc_units=4, time_reduction_layer=1, time_reduction_factor=2,
             pred_layers=1, pred_units=4, pred_embed_dim=3, joint_dim=5, vocab_size=6)
    d.update(kw)
    return TransducerConfig(**d)


class TransducerTests(unittest.TestCase):
    def setUp(self):
        self.model = TransducerModel(tiny_config(), seed=0)
        self.feats = np.random.RandomState(1).normal(size=(5, 3))

    def testShapes(self):
        H = encode_audio(self.model, self.feats)
        self.assertEqual(H.shape, (3, 5))
        P = predict(self.model, [2, 3])
        self.assertEqual(P.shape, (3, 5))
        z = forward(self.model, self.feats, [2, 3])
        self.assertEqual(z.shape, (3, 3, 6))
        self.assertEqual(reduced_length(5, 2), 3)
        self.assertEqual(reduced_length(4, 2), 2)

    def testPosteriorSumsToOne(self):
        z = forward(self.model, self.feats, [2, 3])
        for t in range(3):
            for u in range(3):
                p = posterior(z, t, u)
                self.assertAlmostEqual(p.sum(), 1.0, places=12)
        with self.assertRaises(TransducerError):
            posterior(z, 3, 0)

    def testEncoderIsCausal(self):
        H1 = encode_audio(self.model, self.feats).data
        changed = self.feats.copy()
        changed[4] += 10.0
        H2 = encode_audio(self.model, changed).data
        # frames 0..3 feed reduced rows 0 and 1 only
        self.assertTrue(np.array_equal(H1[:2], H2[:2]))
        self.assertFalse(np.array_equal(H1[2], H2[2]))

    def testReductionAfterLastLayer(self):
        model = TransducerModel(tiny_config(enc_layers=1, time_reduction_layer=1), seed=0)
        self.assertEqual(encode_audio(model, self.feats).shape, (3, 5))
        self.assertEqual(parameter_count(model.config), model.census())

    def testIncrementalPrediction(self):
        P = predict(self.model, [2, 3, 4]).data
        state = pred_initial_state(self.model)
        row, state = pred_step(self.model, None, state)
        rows = [row.data]
        for y in [2, 3, 4]:
            row, state = pred_step(self.model, y, state)
            rows.append(row.data)
        self.assertTrue(np.array_equal(P, np.stack(rows)))

    def testJoinMatchesCells(self):
        H = encode_audio(self.model, self.feats)
        P = predict(self.model, [2])
        J = joint_cells(H, P).data
        self.assertTrue(np.array_equal(J[1, 0], H.data[1] + P.data[0]))
        z = join(self.model, H, P).data
        expect = np.tanh(J[2, 1]) @ self.model['joint.W'].data + self.model['joint.b'].data
        self.assertTrue(np.allclose(z[2, 1], expect, rtol=0, atol=1e-14))

    def testCensus(self):
        self.assertEqual(parameter_count(self.model.config), self.model.census())

    def testErrors(self):
        with self.assertRaises(TransducerError):
            predict(self.model, [0])
        with self.assertRaises(TransducerError):
            predict(self.model, [6])
        with self.assertRaises(TransducerError):
            encode_audio(self.model, np.zeros((0, 3)))
        with self.assertRaises(TransducerError):
            encode_audio(self.model, np.zeros((4, 2)))
        with self.assertRaises(ConfigError):
            tiny_config(time_reduction_layer=3).validate()
        with self.assertRaises(ConfigError):
            TransducerConfig.from_dict({'bogus': 1})

    def testForgetBiasStartsAtOne(self):
        b = self.model['enc.lstm0.b'].data
        units = self.model.config.enc_units
        self.assertTrue(np.all(b[units:2 * units] == 1.0))
        self.assertTrue(np.all(b[:units] == 0.0))

    def testSeededInit(self):
        other = TransducerModel(tiny_config(), seed=0)
        for name, t in self.model.params.items():
            self.assertTrue(np.array_equal(t.data, other[name].data))


if __name__ == '__main__':
    unittest.main()
