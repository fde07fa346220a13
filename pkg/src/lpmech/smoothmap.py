"""Smooth maps between coordinate spaces with exact forward-mode derivatives.

A :class:`SmoothMap` wraps a pure Python body that must accept both plain
float arrays and object arrays of dual numbers (see :mod:`lpmech._dual`).
Derivatives computed by :func:`jacobian` are exact up to rounding; the
independent check is :func:`fd_jacobian`, a central-difference estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _dual
from .errors import DimensionMismatch

__all__ = ["SmoothMap", "eval_map", "jacobian", "fd_jacobian"]


@dataclass(frozen=True)
class SmoothMap:
    """A smooth map from R^in_dim to R^out_dim.

    ``body`` receives a length-``in_dim`` array and returns a scalar (when
    ``out_dim == 1``), a length-``out_dim`` vector, or an array of shape
    ``out_shape`` when one was given (used for matrix- and tensor-valued
    coefficient functions; ``out_dim`` is then the product of the shape).
    Bodies must be pure and evaluable on dual-number object arrays.
    """

    in_dim: int
    out_dim: int
    body: Callable
    out_shape: tuple = field(default=None)
    name: str = ""

    def __post_init__(self):
        if self.in_dim < 0 or self.out_dim < 0:
            raise ValueError("dimensions must be nonnegative")
        if self.out_shape is None:
            object.__setattr__(self, "out_shape", (self.out_dim,))
        elif int(np.prod(self.out_shape)) != self.out_dim:
            raise ValueError(
                f"out_shape {self.out_shape} is incompatible with out_dim {self.out_dim}"
            )

    def __call__(self, x):
        return eval_map(self, x)


def _check_input(m, x):
    x = np.asarray(x)
    if x.shape != (m.in_dim,):
        raise DimensionMismatch(
            f"map {m.name or '<anonymous>'} expects input of length {m.in_dim}, "
            f"got shape {x.shape}"
        )
    return x


def _shape_output(m, y):
    y = np.asarray(y)
    if y.size != m.out_dim:
        raise DimensionMismatch(
            f"map {m.name or '<anonymous>'} returned {y.size} values, "
            f"expected {m.out_dim}"
        )
    return y.reshape(m.out_shape)


def eval_map(m: SmoothMap, x) -> np.ndarray:
    """Evaluate ``m`` at ``x``; the result has shape ``m.out_shape``."""
    x = _check_input(m, x)
    return _shape_output(m, m.body(x))


def jacobian(m: SmoothMap, x) -> np.ndarray:
    """Exact Jacobian of ``m`` at ``x``, shape (out_dim, in_dim).

    One dual-number pass per input direction.  Rows follow the C-order
    flattening of ``out_shape``.  Works when ``x`` itself contains duals
    (nested differentiation); the entries of the result then carry the outer
    perturbations.
    """
    x = _check_input(m, np.asarray(x, dtype=object))
    cols = []
    for j in range(m.in_dim):
        dx = np.zeros(m.in_dim, dtype=object)
        dx[j] = 1.0
        _, tan = _dual.directional(lambda z: _shape_output(m, m.body(z)), x, dx)
        cols.append(np.asarray(tan, dtype=object).reshape(m.out_dim))
    if not cols:
        return np.zeros((m.out_dim, 0))
    J = np.empty((m.out_dim, m.in_dim), dtype=object)
    for j, col in enumerate(cols):
        J[:, j] = col
    if _dual.contains_dual(J):
        return J
    return J.astype(float)


def fd_jacobian(m: SmoothMap, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian estimate, the derivative oracle.

    The step for direction j is ``h * (1 + |x_j|)``.  Accurate to O(h^2) on
    smooth bodies and exact (up to rounding) on affine ones.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    x = np.asarray(_check_input(m, x), dtype=float)
    J = np.zeros((m.out_dim, m.in_dim))
    for j in range(m.in_dim):
        step = h * (1.0 + abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        fp = eval_map(m, xp).reshape(m.out_dim)
        fm = eval_map(m, xm).reshape(m.out_dim)
        J[:, j] = (fp.astype(float) - fm.astype(float)) / (2.0 * step)
    return J
