import time
import unittest

import numpy as np

from biaslattice.lib.numerics import Tensor, grad_check
from biaslattice.lib.transducer import rnnt_loss, rnnt_loss_brute, path_count, enumerate_paths
from biaslattice.lib.exceptions import TransducerError, InstanceTooLarge


def random_instance(seed, V=5):
    rng = np.random.RandomState(seed)
    T = rng.randint(1, 5)
    U = rng.randint(0, 4)
    z = rng.normal(0.0, 2.0, size=(T, U + 1, V))
    target = list(rng.randint(1, V, size=U))
    return z, target


class RnntLossTests(unittest.TestCase):
    def testMatchesBruteForce(self):
        start = time.time()
        for seed in range(60):
            z, target = random_instance(seed)
            fast = rnnt_loss(z, target).item()
            brute = rnnt_loss_brute(z, target)
            self.assertLess(abs(fast - brute), 1e-10, msg='seed {}'.format(seed))
        self.assertLess(time.time() - start, 5.0)

    def testAllSmallShapes(self):
        rng = np.random.RandomState(11)
        for T in range(1, 5):
            for U in range(0, 4):
                z = rng.normal(size=(T, U + 1, 4))
                target = list(rng.randint(1, 4, size=U))
                self.assertLess(abs(rnnt_loss(z, target).item() - rnnt_loss_brute(z, target)), 1e-10)

    def testBlankOnly(self):
        z = np.random.RandomState(2).normal(size=(3, 1, 4))
        logp = z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
        self.assertAlmostEqual(rnnt_loss(z, []).item(), -np.sum(logp[:, 0, 0]), places=12)

    def testGradient(self):
        for seed in range(5):
            z, target = random_instance(seed + 100)
            err = grad_check(lambda t: rnnt_loss(t, target), Tensor(z), 1e-5)
            self.assertLess(err, 1e-6)

    def testPathCounts(self):
        self.assertEqual(path_count(1, 0), 1)
        self.assertEqual(path_count(2, 1), 2)
        self.assertEqual(path_count(3, 2), 6)
        for T in range(1, 4):
            for U in range(0, 3):
                paths = list(enumerate_paths(T, U))
                self.assertEqual(len(paths), path_count(T, U))
                for steps in paths:
                    self.assertEqual(steps[-1], (T - 1, U, True))

    def testTooLarge(self):
        with self.assertRaises(InstanceTooLarge):
            rnnt_loss_brute(np.zeros((30, 31, 3)), [1] * 30)

    def testErrors(self):
        with self.assertRaises(TransducerError):
            rnnt_loss(np.zeros((0, 1, 3)), [])
        with self.assertRaises(TransducerError):
            rnnt_loss(np.zeros((2, 2, 3)), [0])
        with self.assertRaises(TransducerError):
            rnnt_loss(np.zeros((2, 2, 3)), [3])
        with self.assertRaises(TransducerError):
            rnnt_loss(np.zeros((2, 3, 3)), [1])


if __name__ == '__main__':
    unittest.main()
