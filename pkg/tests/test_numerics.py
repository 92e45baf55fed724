import threading
import unittest

import numpy as np

from biaslattice.lib.numerics import Tensor, Graph, backward, current_graph, grad_check, grad_check_params, ops, layers
from biaslattice.lib.exceptions import ShapeError, GraphError, NonFiniteError


class TensorOpTests(unittest.TestCase):
    def testAdd(self):
        out = ops.add(Tensor([1, 2]), Tensor([3, 4]))
        self.assertEqual(out.data.tolist(), [4.0, 6.0])

    def testAddShapeMismatch(self):
        with self.assertRaises(ShapeError) as cm:
            ops.add(Tensor([1, 2]), Tensor([1, 2, 3]))
        self.assertIn('add', str(cm.exception))
        self.assertIn('(2,)', str(cm.exception))
        self.assertIn('(3,)', str(cm.exception))

    def testNoImplicitBroadcast(self):
        with self.assertRaises(ShapeError):
            ops.mul(Tensor(np.ones((2, 3))), Tensor(np.ones(3)))
        tiled = ops.expand(Tensor([1.0, 2.0, 3.0]), 2)
        self.assertEqual(tiled.shape, (2, 3))

    def testSoftmaxUniform(self):
        out = ops.softmax(Tensor([0.0, 0.0, 0.0]))
        for v in out.data:
            self.assertAlmostEqual(v, 1.0 / 3, places=15)

    def testSoftmaxRows(self):
        x = Tensor(np.random.RandomState(3).normal(0, 5, size=(6, 7)))
        y = ops.softmax(x, axis=-1).data
        self.assertTrue(np.all(y >= 0))
        self.assertTrue(np.all(np.abs(y.sum(axis=-1) - 1.0) <= 1e-12))

    def testMatmulOnes(self):
        out = ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 1))))
        self.assertEqual(out.data.tolist(), [[3.0], [3.0]])
        with self.assertRaises(ShapeError):
            ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 1))))

    def testReshapeCount(self):
        with self.assertRaises(ShapeError):
            ops.reshape(Tensor(np.ones(6)), (4, 2))

    def testGatherRowsRange(self):
        table = Tensor(np.arange(6.0).reshape(3, 2))
        self.assertEqual(ops.gather_rows(table, [2, 0]).data.tolist(), [[4.0, 5.0], [0.0, 1.0]])
        with self.assertRaises(ShapeError):
            ops.gather_rows(table, [3])


class BackwardTests(unittest.TestCase):
    def testSumGrad(self):
        x = Tensor([1.0, -2.0, 5.0], requires_grad=True)
        with Graph() as g:
            loss = ops.sum(x)
        backward(g, loss)
        self.assertEqual(x.grad.tolist(), [1.0, 1.0, 1.0])

    def testTanhAtZero(self):
        x = Tensor(0.0, requires_grad=True)
        with Graph() as g:
            loss = ops.tanh(x)
        backward(g, loss)
        self.assertEqual(float(x.grad), 1.0)

    def testSoftmaxCrossEntropy(self):
        x = Tensor([0.0, 0.0], requires_grad=True)
        with Graph() as g:
            loss = ops.scale(ops.slice(ops.log_softmax(x), 0), -1.0)
        backward(g, loss)
        self.assertAlmostEqual(x.grad[0], -0.5, places=15)
        self.assertAlmostEqual(x.grad[1], 0.5, places=15)

    def testDiamondFanOut(self):
        data = np.array([0.3, -0.7, 1.1])
        x1 = Tensor(data, requires_grad=True)
        with Graph() as g:
            y = ops.tanh(x1)
            loss = ops.sum(ops.add(ops.mul(y, y), y))
        backward(g, loss)

        x2 = Tensor(data, requires_grad=True)
        with Graph() as g:
            loss = ops.sum(ops.add(ops.mul(ops.tanh(x2), ops.tanh(x2)), ops.tanh(x2)))
        backward(g, loss)
        self.assertTrue(np.allclose(x1.grad, x2.grad, rtol=0, atol=1e-15))

    def testLossNotScalar(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Graph() as g:
            y = ops.tanh(x)
        with self.assertRaises(GraphError):
            backward(g, y)

    def testLossNotInGraph(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Graph() as g1:
            ops.tanh(x)
        with Graph():
            loss = ops.sum(x)
        with self.assertRaises(GraphError):
            backward(g1, loss)

    def testInferenceModeRecordsNothing(self):
        self.assertIsNone(current_graph())
        with Graph() as g:
            ops.tanh(Tensor([1.0]))
        ops.tanh(Tensor([1.0]))
        self.assertEqual(len(g), 1)

    def testGraphValidates(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with Graph() as g:
            ops.sum(ops.matmul(ops.tanh(x), x))
        g.validate()
        dg = g.to_networkx()
        self.assertEqual(dg.number_of_nodes(), 3)

    def testGraphsArePerThread(self):
        seen = []

        def worker():
            seen.append(current_graph())
        with Graph():
            t = threading.Thread(target=worker)
            t.start()
            t.join()
        self.assertEqual(seen, [None])


class GradCheckTests(unittest.TestCase):
    def testSumOfSquares(self):
        x = Tensor(np.random.RandomState(0).normal(size=5))
        err = grad_check(lambda t: ops.sum(ops.mul(t, t)), x, 1e-5)
        self.assertLess(err, 1e-6)

    def testConstant(self):
        x = Tensor(np.random.RandomState(0).normal(size=3))
        err = grad_check(lambda t: Tensor(4.0), x, 1e-5)
        self.assertEqual(err, 0.0)

    def testEpsRange(self):
        x = Tensor([1.0])
        with self.assertRaises(ValueError):
            grad_check(lambda t: ops.sum(t), x, 1e-2)

    def testNonFinite(self):
        x = Tensor([1.0])
        with self.assertRaises(NonFiniteError):
            grad_check(lambda t: ops.scale(ops.sum(t), float('inf')), x, 1e-5)

    def testLstmStep(self):
        for seed in range(5):
            rng = np.random.RandomState(seed)
            p = layers.lstm_params(rng, 3, 4, 'l')
            x = Tensor(rng.normal(size=3))
            h = Tensor(rng.normal(size=4))
            c = Tensor(rng.normal(size=4))

            def f():
                h2, c2 = layers.lstm_step(p['l.W'], p['l.b'], x, h, c)
                return ops.sum(ops.mul(h2, c2))
            err, _ = grad_check_params(f, p, 1e-5)
            self.assertLess(err, 1e-4)

    def testBiLstm(self):
        for seed in range(5):
            rng = np.random.RandomState(seed)
            p = layers.lstm_params(rng, 2, 3, 'f')
            p.update(layers.lstm_params(rng, 2, 3, 'b'))
            xs = [Tensor(rng.normal(size=2)) for _ in range(4)]

            def f():
                out = layers.bilstm_final((p['f.W'], p['f.b']), (p['b.W'], p['b.b']), xs, 3)
                return ops.sum(ops.tanh(out))
            err, _ = grad_check_params(f, p, 1e-5)
            self.assertLess(err, 1e-4)

    def testAttention(self):
        for seed in range(5):
            rng = np.random.RandomState(seed)
            p = {'q': Tensor(rng.normal(size=(3, 4))), 'k': Tensor(rng.normal(size=(5, 4))),
                 'v': Tensor(rng.normal(size=(5, 2)))}

            def f():
                alpha = ops.softmax(ops.scale(ops.matmul(p['q'], ops.transpose(p['k'])), 0.5), axis=-1)
                return ops.sum(ops.tanh(ops.matmul(alpha, p['v'])))
            err, errors = grad_check_params(f, p, 1e-5)
            self.assertLess(err, 1e-4)
            self.assertEqual(set(errors), {'q', 'k', 'v'})

    def testLinearTilesBias(self):
        rng = np.random.RandomState(1)
        W = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
        b = Tensor(rng.normal(size=2), requires_grad=True)
        x = Tensor(rng.normal(size=(4, 3)))
        err, _ = grad_check_params(lambda: ops.sum(ops.tanh(layers.linear(x, W, b))), {'W': W, 'b': b})
        self.assertLess(err, 1e-6)


if __name__ == '__main__':
    unittest.main()
