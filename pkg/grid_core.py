"""
Uniform-grid function representation for the pwlab numerical laboratory.

A Grid covers the half-open interval [-T, T) with spacing h. Every function
the laboratory handles (signals, kernels, windows) is a GridFunction on such
a grid. Integrals are left-endpoint Riemann sums, which are exact for the
step functions used as partitions of unity.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import fftconvolve

from errors import GridMismatchError, PWLabError, ResolutionError, SizeCapError

# Tolerance for deciding that a real number is an integer multiple of h.
ALIGN_TOL = 1e-9

# Largest zero-padded convolution length accepted.
MAX_PADDED_LENGTH = 1 << 24


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_j = -T + j*h, j = 0..count-1."""

    half_width: float
    spacing: float

    def __post_init__(self):
        if not (self.half_width > 0 and self.spacing > 0):
            raise PWLabError(
                f"grid needs T > 0 and h > 0, got T={self.half_width}, h={self.spacing}",
                'T > 0 and h > 0'
            )
        ratio = 2 * self.half_width / self.spacing
        count = round(ratio)
        if abs(ratio - count) > ALIGN_TOL * max(1.0, ratio) or count % 2:
            raise PWLabError(
                f"2T/h must be an even integer, got {ratio}",
                '2T/h even integer'
            )

    @property
    def count(self):
        return int(round(2 * self.half_width / self.spacing))

    @property
    def nyquist(self):
        return 0.5 / self.spacing

    def points(self):
        return -self.half_width + np.arange(self.count) * self.spacing

    def frequencies(self):
        return np.fft.fftfreq(self.count, self.spacing)

    def lags(self):
        """All pairwise differences x_i - x_j, from -(N-1)h to (N-1)h."""
        n = self.count
        return np.arange(-(n - 1), n) * self.spacing

    def contains(self, x):
        return -self.half_width <= x < self.half_width

    def steps(self, length):
        """Number of grid steps in `length`; raises if not an integer."""
        ratio = length / self.spacing
        steps = round(ratio)
        if abs(ratio - steps) > ALIGN_TOL * max(1.0, abs(ratio)):
            raise ResolutionError(
                f"{length} is not an integer multiple of h={self.spacing}"
            )
        return int(steps)

    def index_of(self, x):
        j = self.steps(x + self.half_width)
        if not 0 <= j < self.count:
            raise ResolutionError(f"point {x} lies outside the grid", 'point inside grid')
        return j


class GridFunction:
    """Complex samples of a function on a Grid. Immutable."""

    def __init__(self, grid, values):
        values = np.array(values, dtype=complex)
        if values.shape != (grid.count,):
            raise PWLabError(
                f"expected {grid.count} samples, got shape {values.shape}",
                'values length equals grid count'
            )
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @classmethod
    def from_callable(cls, grid, fn):
        return cls(grid, fn(grid.points()))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.count))

    def _check(self, other):
        if self.grid != other.grid:
            raise GridMismatchError()

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return GridFunction(self.grid, self.values * other.values)
        return GridFunction(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def magnitude(self):
        return GridFunction(self.grid, np.abs(self.values))

    def conj(self):
        return GridFunction(self.grid, np.conj(self.values))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.values)))

    def at(self, x):
        return self.values[self.grid.index_of(x)]

    def __repr__(self):
        return f"GridFunction(T={self.grid.half_width}, h={self.grid.spacing})"


@dataclass(frozen=True)
class Weight:
    """Symmetric submultiplicative weight: constant one or (1+|x|)^a."""

    kind: str = 'constant_one'
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind not in ('constant_one', 'polynomial'):
            raise PWLabError(f"unknown weight kind {self.kind!r}", 'weight kind')
        if self.kind == 'polynomial' and not self.exponent >= 0:
            raise PWLabError(f"weight exponent must be >= 0, got {self.exponent}", 'a >= 0')

    @classmethod
    def constant_one(cls):
        return cls('constant_one', 0.0)

    @classmethod
    def polynomial(cls, a):
        return cls('polynomial', float(a))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == 'constant_one':
            return np.ones_like(x)
        return (1.0 + np.abs(x)) ** self.exponent

    def sup_on(self, q_half):
        """sup of w over the cube [-q_half, q_half]."""
        return float(self(q_half))

    def describe(self):
        if self.kind == 'constant_one':
            return 'constant_one'
        return f"polynomial({self.exponent:g})"


def parse_exponent(value):
    """Parse an exponent given as number, 'inf' or a fraction string like '4/3'.

    Rational inputs come back as Fraction so that exponent identities can be
    checked exactly. math.inf stands for infinity.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise PWLabError(f"invalid exponent {value!r}", 'exponent is a number')
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ('inf', 'infinity', '∞'):
            return math.inf
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise PWLabError(f"invalid exponent {value!r}", 'exponent is a number')
    value = float(value)
    if math.isinf(value):
        return math.inf
    return value


def conjugate_exponent(p):
    """r' with 1/r + 1/r' = 1."""
    if p == 1:
        return math.inf
    if p == math.inf:
        return 1
    return p / (p - 1)


@dataclass(frozen=True)
class ExponentTriple:
    """Exponents with 1 + 1/p = 1/q + 1/r (Young's relation)."""

    p: object
    q: object
    r: object

    def __post_init__(self):
        for name in ('p', 'q', 'r'):
            value = parse_exponent(getattr(self, name))
            if not value >= 1:
                raise PWLabError(f"{name} must lie in [1, inf], got {value}", 'exponents in [1, inf]')
            object.__setattr__(self, name, value)
        lhs = 1 + _inv(self.p)
        rhs = _inv(self.q) + _inv(self.r)
        if all(isinstance(v, Fraction) for v in (lhs, rhs)):
            ok = lhs == rhs
        else:
            ok = abs(float(lhs) - float(rhs)) <= 1e-12
        if not ok:
            raise PWLabError(
                f"1 + 1/p = 1/q + 1/r fails for (p, q, r) = ({self.p}, {self.q}, {self.r})",
                '1 + 1/p = 1/q + 1/r'
            )

    def as_floats(self):
        return tuple(float(v) for v in (self.p, self.q, self.r))


def _inv(p):
    if p == math.inf:
        return Fraction(0)
    return 1 / p


def box(grid, a, b):
    """Half-open indicator of [a, b) sampled on the grid."""
    x = grid.points()
    return GridFunction(grid, ((x >= a) & (x < b)).astype(float))


def _validate_p(p):
    p = parse_exponent(p)
    if not p >= 1:
        raise PWLabError(f"lp_norm needs p >= 1, got {p}", 'p >= 1')
    return float(p)


def _weighted_abs(f, w):
    if not f.is_finite():
        raise PWLabError("function has non-finite values", 'finite values')
    values = np.abs(f.values)
    if w is not None:
        values = values * w(f.grid.points())
    return values


def _norm_of(values, p, h):
    if values.size == 0:
        return 0.0
    if p == math.inf:
        return float(values.max())
    scale = values.max()
    if scale == 0:
        return 0.0
    return float(scale * (np.sum((values / scale) ** p) * h) ** (1.0 / p))


def lp_norm(f, p, w=None):
    """Weighted L_p norm by left-endpoint quadrature.

    Args:
        f: GridFunction
        p: Exponent in [1, inf]
        w: Optional Weight (defaults to constant one)

    Returns:
        float: (sum_j |w(x_j) f(x_j)|^p h)^(1/p), or the grid max for p = inf
    """
    p = _validate_p(p)
    return _norm_of(_weighted_abs(f, w), p, f.grid.spacing)


def lp_norm_on(f, p, w=None, lo=-math.inf, hi=math.inf):
    """Weighted L_p norm restricted to grid points in [lo, hi]."""
    p = _validate_p(p)
    x = f.grid.points()
    mask = (x >= lo) & (x <= hi)
    return _norm_of(_weighted_abs(f, w)[mask], p, f.grid.spacing)


def seq_norm(values, p, weights=None):
    """Weighted l_p norm of a finite sequence."""
    p = _validate_p(p)
    values = np.abs(np.asarray(values, dtype=complex))
    if weights is not None:
        values = values * np.asarray(weights, dtype=float)
    return _norm_of(values, p, 1.0)


def tail_bound(A, T, p):
    """L_p mass of the envelope A/(1+|y|) over |y| > T.

    Returns the p-th root of 2 A^p (1+T)^(1-p) / (p-1), the sup A/(1+T) for
    p = inf and inf for p <= 1.
    """
    p = float(p)
    if p == math.inf:
        return A / (1.0 + T)
    if p <= 1:
        return math.inf
    return (2.0 * A ** p * (1.0 + T) ** (1.0 - p) / (p - 1.0)) ** (1.0 / p)


def convolve(f, g, method='fft', max_padded=MAX_PADDED_LENGTH):
    """Linear convolution h * sum_j f(x_j) g(x - x_j), restricted to the grid.

    Args:
        f, g: GridFunctions on the same grid
        method: 'fft' (zero-padded FFT) or 'direct' (O(N^2) quadrature)
        max_padded: Largest accepted padded length

    Returns:
        GridFunction on the common grid
    """
    if f.grid != g.grid:
        raise GridMismatchError()
    n = f.grid.count
    padded = 2 * n - 1
    if padded > max_padded:
        raise SizeCapError(
            f"padded length {padded} exceeds cap {max_padded}", 'padded length within cap'
        )
    if method == 'fft':
        full = fftconvolve(f.values, g.values)
    elif method == 'direct':
        full = np.convolve(f.values, g.values)
    else:
        raise PWLabError(f"unknown convolution method {method!r}", 'method in {fft, direct}')
    # x_i - x_j = (i - j)h is grid index i - j + N/2 of g
    start = n // 2
    return GridFunction(f.grid, full[start:start + n] * f.grid.spacing)


def lag_convolve(seq, lag_values):
    """sum_j seq_j k(x_i - x_j) for every grid index i.

    Args:
        seq: Array of N grid samples (often a sparse impulse train)
        lag_values: The kernel at every lag -(N-1)h..(N-1)h (see Grid.lags)

    Returns:
        numpy array of N values; no factor h is applied
    """
    seq = np.asarray(seq)
    n = seq.size
    if lag_values.size != 2 * n - 1:
        raise GridMismatchError("lag table does not match the sequence length")
    full = fftconvolve(seq, lag_values)
    return full[n - 1:2 * n - 1]


def kernel_convolve(f, kernel):
    """f * K with K evaluated in closed form at every lag (no kernel truncation)."""
    lag_values = kernel(f.grid.lags())
    return GridFunction(f.grid, lag_convolve(f.values, lag_values) * f.grid.spacing)


def translate(f, b):
    """(lambda(b) f)(x) = f(x - b) with zero fill; b must be a multiple of h."""
    shift = f.grid.steps(b)
    n = f.grid.count
    out = np.zeros(n, dtype=complex)
    if shift >= 0:
        if shift < n:
            out[shift:] = f.values[:n - shift]
    elif -shift < n:
        out[:n + shift] = f.values[-shift:]
    return GridFunction(f.grid, out)


def modulate(f, xi):
    """x -> exp(2 pi i xi x) f(x)."""
    x = f.grid.points()
    return GridFunction(f.grid, f.values * np.exp(2j * np.pi * xi * x))


def is_moderate(m, w, grid, max_points=512):
    """Check m(x+y) <= w(x) m(y) on pairs of grid points.

    Uses an evenly strided subset of at most max_points points.
    """
    x = grid.points()
    stride = max(1, x.size // max_points)
    x = x[::stride]
    xs, ys = np.meshgrid(x, x, indexing='ij')
    lhs = m(xs + ys)
    rhs = w(xs) * m(ys)
    return bool(np.all(lhs <= rhs * (1 + 1e-12)))


def young_margin(f, g, triple, m, w):
    """Ratio |f*g|_{p,m} / (|g|_{r,w} |f|_{q,m}) for the weighted Young inequality.

    Returns:
        tuple: (margin, zero_flag); zero_flag is True when f or g vanishes and
        the margin is 0 by convention
    """
    if not isinstance(triple, ExponentTriple):
        triple = ExponentTriple(*triple)
    if not is_moderate(m, w, f.grid):
        raise PWLabError(
            f"weight {m.describe()} is not {w.describe()}-moderate", 'm is w-moderate'
        )
    p, q, r = triple.as_floats()
    denominator = lp_norm(g, r, w) * lp_norm(f, q, m)
    if denominator == 0:
        return 0.0, True
    return lp_norm(convolve(f, g), p, m) / denominator, False
