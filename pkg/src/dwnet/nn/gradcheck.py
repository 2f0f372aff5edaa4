"""Central finite-difference gradient oracle.

Used by the test suite to check every analytic backward pass; slow by
design (one function evaluation pair per scalar input).
"""

from __future__ import annotations

from typing import Callable

import numpy as np


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                       step: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function, elementwise over ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = f(x)
        flat[i] = orig - step
        f_minus = f(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """norm(a - b) / max(norm(a), norm(b)); 0 when both vanish."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def check_gradient(f: Callable[[np.ndarray], float], analytic: np.ndarray,
                   x: np.ndarray, step: float = 1e-5) -> float:
    """Relative error between ``analytic`` and the finite-difference gradient."""
    return relative_error(analytic, numerical_gradient(f, x, step=step))
