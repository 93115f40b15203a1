"""Quadrature rules on the reference triangle and on intervals.

Triangle rules are collapsed (Duffy/Stroud) products of a Gauss-Jacobi rule
and a Gauss-Legendre rule, which makes them exact for any requested
polynomial degree without tabulated constants.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the reference triangle {(x, y): x, y >= 0, x + y <= 1}.

    Parameters
    ----------
    degree : int
        Polynomial degree integrated exactly.

    Returns
    -------
    points : ndarray, shape (nq, 2)
    weights : ndarray, shape (nq,)
        Weights sum to 1/2, the reference area.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n = degree // 2 + 1
    # Jacobi(1, 0) absorbs the (1 - s) Jacobian of the collapse map.
    s, ws = roots_jacobi(n, 1.0, 0.0)
    t, wt = np.polynomial.legendre.leggauss(n)
    s = (s + 1.0) / 2.0
    ws = ws / 4.0
    t = (t + 1.0) / 2.0
    wt = wt / 2.0
    S, T = np.meshgrid(s, t, indexing="ij")
    x = S.ravel()
    y = ((1.0 - S) * T).ravel()
    w = np.outer(ws, wt).ravel()
    pts = np.column_stack([x, y])
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


@lru_cache(maxsize=None)
def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes and weights mapped to [a, b]."""
    t, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (b - a) * t + 0.5 * (b + a)
    w = 0.5 * (b - a) * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def square_rule(n: int, x0=0.0, x1=1.0, y0=0.0, y1=1.0):
    """Tensor Gauss-Legendre rule with n points per direction on a rectangle."""
    x, wx = gauss_legendre(n, x0, x1)
    y, wy = gauss_legendre(n, y0, y1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()]), np.outer(wx, wy).ravel()
