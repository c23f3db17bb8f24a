"""
Closed-form reproducing kernels, the smooth auxiliary window and the local
oscillation and maximal functions.

The kernel of a spectrum Omega (a finite union of frequency intervals) is
K = F^-1 chi_Omega. It is evaluated exactly at any real point, so atom sums
never interpolate.
"""

import math
from dataclasses import dataclass

import numpy as np

from errors import NyquistError, PWLabError, ResolutionError
from grid_core import GridFunction


def _sinpi(t):
    """sin(pi t) with exact zeros at integers and exact +-1 at half-integers."""
    t = np.asarray(t, dtype=float)
    r = np.remainder(t, 2.0)
    out = np.sin(np.pi * r)
    out = np.where((r == 0.0) | (r == 1.0), 0.0, out)
    out = np.where(r == 0.5, 1.0, out)
    out = np.where(r == 1.5, -1.0, out)
    return out


def normalized_sinc(t):
    """sin(pi t)/(pi t), equal to 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    safe = np.where(t == 0.0, 1.0, t)
    return np.where(t == 0.0, 1.0, _sinpi(safe) / (np.pi * safe))


@dataclass(frozen=True)
class Spectrum:
    """Sorted, pairwise disjoint frequency intervals (a_i, b_i)."""

    intervals: tuple

    def __post_init__(self):
        intervals = tuple((a, b) for a, b in self.intervals)
        if not intervals:
            raise PWLabError("spectrum has no intervals", 'non-empty spectrum')
        for a, b in intervals:
            if not a < b:
                raise PWLabError(f"interval ({a}, {b}) is empty", 'a_i < b_i')
        for (_, b), (a, _) in zip(intervals, intervals[1:]):
            if not b <= a:
                raise PWLabError("intervals overlap or are unsorted", 'b_i <= a_(i+1)')
        object.__setattr__(self, 'intervals', intervals)

    @classmethod
    def symmetric(cls, omega):
        if not omega > 0:
            raise PWLabError(f"omega must be positive, got {omega}", 'omega > 0')
        return cls(((-omega, omega),))

    def float_intervals(self):
        return [(float(a), float(b)) for a, b in self.intervals]

    def measure(self):
        return sum(b - a for a, b in self.intervals)

    def sup_abs(self):
        return max(max(abs(float(a)), abs(float(b))) for a, b in self.intervals)

    def contains(self, xi):
        xi = np.asarray(xi, dtype=float)
        inside = np.zeros(xi.shape, dtype=bool)
        for a, b in self.float_intervals():
            inside |= (xi >= a) & (xi <= b)
        return inside

    def shifted(self, offset):
        """The spectrum translated by offset (modulation in time)."""
        return Spectrum(tuple((a + offset, b + offset) for a, b in self.intervals))

    def distance(self, xi):
        xi = np.asarray(xi, dtype=float)
        dist = np.full(xi.shape, np.inf)
        for a, b in self.float_intervals():
            d = np.maximum(np.maximum(a - xi, xi - b), 0.0)
            dist = np.minimum(dist, d)
        return dist


class AnalyticKernel:
    """K = F^-1 chi_Omega evaluated in closed form.

    Args:
        spectrum: The Spectrum Omega
        omega: Set for the symmetric band [-omega, omega] (sinc form)
    """

    def __init__(self, spectrum, omega=None):
        self.spectrum = spectrum
        self.omega = omega

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.omega is not None:
            return 2.0 * self.omega * normalized_sinc(2.0 * self.omega * x)
        out = np.zeros(x.shape, dtype=complex)
        for a, b in self.spectrum.float_intervals():
            length = b - a
            # (e^{2 pi i x b} - e^{2 pi i x a}) / (2 pi i x), stable at x = 0
            out += length * np.exp(1j * np.pi * (a + b) * x) * normalized_sinc(length * x)
        return out

    def sample(self, grid):
        return GridFunction(grid, self(grid.points()))

    def shifted(self, b):
        return lambda x: self(np.asarray(x, dtype=float) - b)

    def envelope_constant(self):
        """A with |K(y)| <= A/(1+|y|) for all real y."""
        if self.omega is not None:
            return 1.0 + 4.0 * self.omega
        count = len(self.spectrum.intervals)
        return max(2.0 * float(self.spectrum.measure()), 2.0 * count / math.pi)

    def __repr__(self):
        if self.omega is not None:
            return f"sinc_kernel({self.omega})"
        return f"indicator_kernel({self.spectrum.intervals})"


def sinc_kernel(omega):
    """K(b) = sin(2 omega pi b)/(pi b), K(0) = 2 omega."""
    if not omega > 0:
        raise PWLabError(f"omega must be positive, got {omega}", 'omega > 0')
    return AnalyticKernel(Spectrum.symmetric(omega), omega=float(omega))


def indicator_kernel(spectrum):
    """K(x) = sum_i (e^{2 pi i x b_i} - e^{2 pi i x a_i}) / (2 pi i x)."""
    if not isinstance(spectrum, Spectrum):
        spectrum = Spectrum(tuple(spectrum))
    return AnalyticKernel(spectrum)


def taper(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        left = np.exp(-1.0 / t)
        right = np.exp(-1.0 / (1.0 - t))
        inner = left / (left + right)
    return np.where(t <= 0.0, 0.0, np.where(t >= 1.0, 1.0, inner))


class SmoothWindow:
    """Schwartz window W with symbol 1 on the spectrum and 0 beyond the margin.

    The time-domain table is the discrete inverse Fourier transform of the
    sampled symbol, computed once at construction.
    """

    def __init__(self, spectrum, margin, grid):
        if not margin > 0:
            raise PWLabError(f"margin must be positive, got {margin}", 'margin > 0')
        reach = spectrum.sup_abs() + margin
        if not 1.0 / grid.spacing > 2.0 * reach:
            raise NyquistError(
                f"sampling rate 1/h = {1.0 / grid.spacing:g} does not exceed "
                f"2 * (max|xi| + margin) = {2.0 * reach:g}"
            )
        self.spectrum = spectrum
        self.margin = float(margin)
        self.grid = grid
        xi = grid.frequencies()
        coefficients = self.symbol(xi) * np.exp(-2j * np.pi * xi * grid.half_width)
        self.time_eval = GridFunction(grid, np.fft.ifft(coefficients) / grid.spacing)

    def symbol(self, xi):
        return taper(1.0 - self.spectrum.distance(xi) / self.margin)

    def __repr__(self):
        return f"SmoothWindow(margin={self.margin}, intervals={self.spectrum.intervals})"


def smooth_window(spectrum, margin, grid):
    return SmoothWindow(spectrum, margin, grid)


class GaussianWindow:
    """Candidate window with Gaussian symbol exp(-xi^2 / (2 sigma^2))."""

    def __init__(self, sigma):
        if not sigma > 0:
            raise PWLabError(f"sigma must be positive, got {sigma}", 'sigma > 0')
        self.sigma = float(sigma)

    def symbol(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-xi ** 2 / (2.0 * self.sigma ** 2))

    def sample(self, grid):
        x = grid.points()
        s = self.sigma
        return GridFunction(
            grid, s * math.sqrt(2 * math.pi) * np.exp(-2 * (math.pi * s * x) ** 2)
        )


def gaussian_window(sigma):
    return GaussianWindow(sigma)


def _offset_steps(grid, q_half):
    steps = int(math.floor(q_half / grid.spacing + 1e-9))
    if steps < 1:
        raise ResolutionError(
            f"cell half-width {q_half} is below the grid step {grid.spacing}", 'q_half >= h'
        )
    return steps


def _shift_max(values, steps, reduce):
    n = values.size
    out = np.zeros(n)
    for s in range(-steps, steps + 1):
        if s == 0:
            continue
        lo, hi = max(0, -s), min(n, n - s)
        out[lo:hi] = np.maximum(out[lo:hi], reduce(values[lo + s:hi + s], values[lo:hi]))
    return out


def oscillation(f, q_half):
    """osc_Q f(x) = max over grid offsets u in [-q_half, q_half] of |f(x+u) - f(x)|.

    Offsets that leave the grid are skipped.
    """
    steps = _offset_steps(f.grid, q_half)
    return GridFunction(f.grid, _shift_max(f.values, steps, lambda a, b: np.abs(a - b)))


def local_max(f, q_half, side='left_translate'):
    """x -> max over |u| <= q_half of |f(x+u)|; both sides agree on the real line."""
    if side not in ('left_translate', 'right_translate'):
        raise PWLabError(f"unknown side {side!r}", 'side in {left_translate, right_translate}')
    steps = _offset_steps(f.grid, q_half)
    out = _shift_max(f.values, steps, lambda a, b: np.abs(a))
    return GridFunction(f.grid, np.maximum(out, np.abs(f.values)))


def kernel_oscillation(kernel, q_half, grid, refine=4):
    """osc_Q K on the grid with the sup taken over offsets of step h/refine.

    The kernel is evaluated in closed form, so offsets are not limited to
    the grid and nothing is lost at the edges.
    """
    delta = grid.spacing / refine
    steps = int(math.floor(q_half / delta + 1e-9))
    if steps < 1:
        raise ResolutionError(
            f"cell half-width {q_half} is below the refined step {delta}", 'q_half >= h/refine'
        )
    x = grid.points()
    base = kernel(x)
    out = np.zeros(x.size)
    for k in range(-steps, steps + 1):
        if k:
            out = np.maximum(out, np.abs(kernel(x + k * delta) - base))
    return GridFunction(grid, out)


def kernel_local_max(kernel, q_half, grid, refine=4):
    """Closed-form counterpart of local_max for an analytic kernel."""
    delta = grid.spacing / refine
    steps = int(math.floor(q_half / delta + 1e-9))
    x = grid.points()
    out = np.abs(kernel(x))
    for k in range(-steps, steps + 1):
        if k:
            out = np.maximum(out, np.abs(kernel(x + k * delta)))
    return GridFunction(grid, out)


def bandlimited_signal(grid, spectrum, rng, terms=4, fill=0.8, power=8):
    """Random band-limited test signal with spectrum strictly inside `spectrum`.

    Sum of `terms` randomly shifted, modulated and weighted copies of
    sinc(a x)^power. The spectrum of each copy is an interval of width
    fill * (b - a) centred in a randomly chosen interval of the spectrum, and
    the signal decays like |x|^-power. Shifts lie in [-T/16, T/16].
    """
    intervals = spectrum.float_intervals()
    x = grid.points()
    values = np.zeros(grid.count, dtype=complex)
    for _ in range(terms):
        a, b = intervals[rng.integers(len(intervals))]
        dilation = fill * (b - a) / power
        centre = 0.5 * (a + b)
        shift = rng.uniform(-grid.half_width / 16, grid.half_width / 16)
        coefficient = complex(rng.normal(), rng.normal())
        values += (
            coefficient
            * normalized_sinc(dilation * (x - shift)) ** power
            * np.exp(2j * np.pi * centre * x)
        )
    return GridFunction(grid, values)
