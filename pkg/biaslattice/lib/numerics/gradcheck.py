import numpy as np

from .tensor import Graph, backward
from ..exceptions import NonFiniteError


__all__ = ['grad_check', 'grad_check_params']


def _check_eps(eps):
    if not (1e-7 <= eps <= 1e-3):
        raise ValueError("eps must lie in [1e-7, 1e-3], got {}".format(eps))


def _analytic(f, tensors):
    for t in tensors:
        t.requires_grad = True
        t.grad = None
    with Graph() as g:
        loss = f()
    if loss.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    if loss in g:
        backward(g, loss)
    return [np.zeros(t.shape) if t.grad is None else t.grad.copy() for t in tensors]


def _central(f, t, i, eps):
    flat = t.data.reshape(-1)
    orig = flat[i]
    flat[i] = orig + eps
    fp = f().item()
    flat[i] = orig - eps
    fm = f().item()
    flat[i] = orig
    return (fp - fm) / (2.0 * eps)


def _rel_error(analytic, numeric):
    if not (np.isfinite(analytic) and np.isfinite(numeric)):
        raise NonFiniteError("Non-finite gradient (analytic {}, numeric {})".format(analytic, numeric))
    return abs(analytic - numeric) / max(1.0, abs(analytic))


def grad_check(f, x, eps=1e-5):
    '''
    Compare the reverse-mode gradient of scalar f at x against central
    differences.  f takes the tensor x and returns a scalar Tensor.
    Returns max over coordinates of |analytic - numeric| / max(1, |analytic|).
    '''
    _check_eps(eps)
    analytic = _analytic(lambda: f(x), [x])[0].reshape(-1)
    worst = 0.0
    for i in range(x.size):
        numeric = _central(lambda: f(x), x, i, eps)
        worst = max(worst, _rel_error(analytic[i], numeric))
    return worst


def grad_check_params(f, params, eps=1e-5, max_coords=None, seed=0):
    '''
    grad_check over a dict of named parameter tensors.  f takes no
    arguments and reads the parameters itself.  If max_coords is given,
    at most that many coordinates (seeded subsample) are checked per
    tensor.  Returns (max error, {name: error}).
    '''
    _check_eps(eps)
    names = list(params)
    tensors = [params[n] for n in names]
    analytic = _analytic(f, tensors)
    rng = np.random.RandomState(seed)
    errors = {}
    for name, t, a in zip(names, tensors, analytic):
        a = a.reshape(-1)
        coords = np.arange(t.size)
        if max_coords is not None and t.size > max_coords:
            coords = np.sort(rng.choice(t.size, max_coords, replace=False))
        worst = 0.0
        for i in coords:
            worst = max(worst, _rel_error(a[i], _central(f, t, i, eps)))
        errors[name] = worst
    return max(errors.values()) if errors else 0.0, errors
