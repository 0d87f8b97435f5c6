"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_grad(fn: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar-valued fn w.r.t. every element of param."""
    g = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = fn().item()
        flat[i] = orig - h
        lo = fn().item()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * h)
    return g


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(fn: Callable[[], Tensor], params: Sequence[Tensor],
                    h: float = 1e-5, tol: float = 1e-4) -> float:
    """Assert analytic grads of scalar fn match central differences; returns worst rel. err."""
    for p in params:
        p.zero_grad()
    fn().backward()
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numerical_grad(fn, p, h=h)
        err = max_rel_error(analytic, numeric)
        worst = max(worst, err)
        if err > tol:
            raise AssertionError(f"gradient check failed: rel. err {err:.3e} > {tol:.1e}")
    return worst
