"""Uniform step-function representatives of BV functions on [0, 1]."""

from dataclasses import dataclass
import io

import numpy as np

DIV_FLOOR = 1e-14
DEFAULT_CELLS = 4096


def _check_cells(n):
    n = int(n)
    if n < 2 or n & (n - 1):
        raise ValueError(f"n_cells must be a power of two >= 2, got {n}")
    return n


@dataclass(frozen=True)
class BVStats:
    variation: float
    sup: float
    inf: float
    lebesgue_integral: float
    bv_norm: float


class GridFunction:
    """Piecewise constant function, value v[i] on the cell [i/n, (i+1)/n)."""

    __slots__ = ("values",)
    __array_priority__ = 100

    def __init__(self, values):
        v = np.array(values, dtype=float)
        if v.ndim != 1:
            raise ValueError("values must be one-dimensional")
        _check_cells(v.size)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        self.values = v

    @property
    def n_cells(self):
        return self.values.size

    def midpoints(self):
        return cell_midpoints(self.n_cells)

    def __call__(self, x):
        """Evaluate the step function pointwise (the cell containing x)."""
        return self.values[cell_index(x, self.n_cells)]

    def __repr__(self):
        return f"GridFunction(n_cells={self.n_cells})"

    # arithmetic -------------------------------------------------------
    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.n_cells != self.n_cells:
                raise ValueError("grid functions live on different grids")
            return other.values
        return float(other)

    def __add__(self, other):
        return GridFunction(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(-self.values)

    def __truediv__(self, other):
        d = self._other(other)
        if np.min(np.abs(d)) < DIV_FLOOR:
            raise ZeroDivisionError("denominator below 1e-14 on some cell")
        return GridFunction(self.values / d)

    def __abs__(self):
        return GridFunction(np.abs(self.values))

    def positive_part(self):
        return GridFunction(np.maximum(self.values, 0.0))

    def negative_part(self):
        return GridFunction(np.maximum(-self.values, 0.0))

    def allclose(self, other, atol):
        return bool(np.max(np.abs(self.values - self._other(other))) <= atol)


def cell_midpoints(n):
    return (np.arange(n) + 0.5) / n


def cell_index(x, n):
    """Index of the cell containing x; x = 1 goes to the last cell."""
    idx = np.floor(np.asarray(x, dtype=float) * n).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def grid_function(source, n_cells=DEFAULT_CELLS):
    """Build a GridFunction from a constant, an array of samples or a callable.

    Callables are evaluated at the cell midpoints and must accept arrays.
    """
    n = _check_cells(n_cells)
    if isinstance(source, GridFunction):
        if source.n_cells != n:
            raise ValueError("grid mismatch")
        return source
    if callable(source):
        vals = np.broadcast_to(np.asarray(source(cell_midpoints(n)), dtype=float), (n,))
        return GridFunction(vals)
    arr = np.asarray(source, dtype=float)
    if arr.ndim == 0:
        return GridFunction(np.full(n, float(arr)))
    if arr.size != n:
        raise ValueError(f"expected {n} samples, got {arr.size}")
    return GridFunction(arr)


def indicator(a, b, n_cells=DEFAULT_CELLS):
    """Indicator of [a, b) sampled at cell midpoints."""
    return grid_function(lambda x: ((x >= a) & (x < b)).astype(float), n_cells)


def variation(f):
    v = f.values if isinstance(f, GridFunction) else np.asarray(f)
    return float(np.sum(np.abs(np.diff(v))))


def bv_stats(f):
    v = f.values
    var = variation(f)
    sup = float(np.max(v))
    return BVStats(variation=var, sup=sup, inf=float(np.min(v)),
                   lebesgue_integral=float(np.mean(v)),
                   bv_norm=var + float(np.max(np.abs(v))))


def sup_norm(f):
    return float(np.max(np.abs(f.values)))


def integral(f):
    return float(np.mean(f.values))


def to_csv(f):
    """Rows (cell_index, left_endpoint, value)."""
    buf = io.StringIO()
    buf.write("cell_index,left_endpoint,value\n")
    n = f.n_cells
    for i, v in enumerate(f.values):
        buf.write(f"{i},{i / n!r},{float(v)!r}\n")
    return buf.getvalue()
