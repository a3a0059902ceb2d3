"""Shared test harnesses: finite-difference gradient checking."""

import numpy as np

from cevae import autodiff as ad
from cevae.autodiff import Value, backward

REL_TOL = 1e-4
ABS_TOL = 1e-7
FD_STEP = 1e-5


def fd_gradients(fn, arrays, step=FD_STEP):
    """Central finite differences of scalar fn(list of arrays) per entry."""
    grads = []
    for k, arr in enumerate(arrays):
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = fn(arrays)
            flat[i] = orig - step
            down = fn(arrays)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def check_gradients(build, arrays):
    """Compare reverse-mode gradients of build(values) against FD."""
    values = [Value(a.copy(), op="param") for a in arrays]
    root = build(values)
    backward(root)

    def eval_fn(arrs):
        vals = [Value(a, op="param") for a in arrs]
        return float(build(vals).data)

    fd = fd_gradients(eval_fn, [a.copy() for a in arrays])
    for v, g in zip(values, fd):
        err = np.abs(v.grad - g)
        bound = REL_TOL * np.maximum(np.abs(v.grad), np.abs(g)) + ABS_TOL
        assert (err <= bound).all(), f"max err {err.max()} exceeds bound"


def _sq_sum(v):
    return ad.square(v).sum()


# (name, builder, input sampler) for every differentiable operation
OP_CASES = {
    "add": (lambda vs: _sq_sum(vs[0] + vs[1]),
            lambda r: [r.normal(size=(3, 4)), r.normal(size=(3, 4))]),
    "add_broadcast": (lambda vs: _sq_sum(vs[0] + vs[1]),
                      lambda r: [r.normal(size=(3, 4)), r.normal(size=(4,))]),
    "sub": (lambda vs: _sq_sum(vs[0] - vs[1]),
            lambda r: [r.normal(size=(3, 4)), r.normal(size=(3, 4))]),
    "mul": (lambda vs: _sq_sum(vs[0] * vs[1]),
            lambda r: [r.normal(size=(3, 4)), r.normal(size=(3, 4))]),
    "mul_broadcast": (lambda vs: _sq_sum(vs[0] * vs[1]),
                      lambda r: [r.normal(size=(3, 1)), r.normal(size=(3, 4))]),
    "div": (lambda vs: _sq_sum(vs[0] / vs[1]),
            lambda r: [r.normal(size=(3, 4)),
                       r.uniform(0.5, 2.0, size=(3, 4)) * r.choice([-1, 1], (3, 4))]),
    "neg": (lambda vs: _sq_sum(-vs[0]), lambda r: [r.normal(size=(5,))]),
    "matmul": (lambda vs: _sq_sum(ad.matmul(vs[0], vs[1])),
               lambda r: [r.normal(size=(3, 4)), r.normal(size=(4, 2))]),
    "exp": (lambda vs: _sq_sum(ad.exp(vs[0])),
            lambda r: [r.uniform(-2, 2, size=(3, 3))]),
    "log": (lambda vs: _sq_sum(ad.log(vs[0])),
            lambda r: [r.uniform(0.2, 3.0, size=(3, 3))]),
    "sqrt": (lambda vs: _sq_sum(ad.sqrt(vs[0])),
             lambda r: [r.uniform(0.2, 3.0, size=(3, 3))]),
    "square": (lambda vs: ad.square(vs[0]).sum(),
               lambda r: [r.normal(size=(3, 3))]),
    "pow": (lambda vs: _sq_sum(ad.pow_const(vs[0], 3.0)),
            lambda r: [r.uniform(0.3, 2.0, size=(3, 3))]),
    "sigmoid": (lambda vs: _sq_sum(ad.sigmoid(vs[0])),
                lambda r: [r.uniform(-4, 4, size=(3, 3))]),
    "softplus": (lambda vs: _sq_sum(ad.softplus(vs[0])),
                 lambda r: [r.uniform(-4, 4, size=(3, 3))]),
    # keep elu inputs off the origin: its second derivative jumps there,
    # which degrades the central-difference reference
    "elu": (lambda vs: _sq_sum(ad.elu(vs[0])),
            lambda r: [r.uniform(0.01, 3.0, size=(3, 3))
                       * r.choice([-1, 1], (3, 3))]),
    "clip": (lambda vs: _sq_sum(ad.clip(vs[0], -0.5, 0.5)),
             lambda r: [r.uniform(0.05, 1.0, size=(4, 4))
                        * r.choice([-1, 1], (4, 4))]),
    "sum_all": (lambda vs: ad.square(vs[0].sum()),
                lambda r: [r.normal(size=(3, 4))]),
    "sum_axis": (lambda vs: _sq_sum(vs[0].sum(axis=1, keepdims=True)),
                 lambda r: [r.normal(size=(3, 4))]),
    "concat": (lambda vs: _sq_sum(ad.concat(vs, axis=1)),
               lambda r: [r.normal(size=(3, 2)), r.normal(size=(3, 3))]),
    "cols": (lambda vs: _sq_sum(ad.cols(vs[0], 1, 3)),
             lambda r: [r.normal(size=(3, 4))]),
}


