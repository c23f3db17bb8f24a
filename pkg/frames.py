"""
Sampling, Banach frames and atomic decompositions on the real line.

A SamplingFamily X = (x_i) carries the nearest-point partition of unity: the
cell of x_i is the half-open interval between the midpoints to its
neighbours. Every operator here works on a Grid and evaluates the kernel K
in closed form at all lags, so atom sums carry no kernel truncation.
"""

import math
import sys
from dataclasses import dataclass, field

import numpy as np

from discretization import CoefSeq, synthesize
from errors import CertificateRefused, ConvergenceError, PWLabError, ResolutionError
from grid_core import (
    ALIGN_TOL, GridFunction, kernel_convolve, lag_convolve, lp_norm, lp_norm_on,
    tail_bound
)
from kernels import bandlimited_signal, oscillation, smooth_window

# Largest accepted deviation |W * K - K| relative to K(0).
WINDOW_REPRODUCTION_TOL = 1e-8

# Allowed excess of a measured contraction ratio over the certified c.
RATIO_SLACK = 0.05

DEFAULT_TRIALS = 100


class SamplingFamily:
    """Sorted, pairwise distinct sampling points with nearest-point cells.

    Args:
        points: Real sampling points
        indices: Optional integer labels (defaults to 0..len-1)
    """

    def __init__(self, points, indices=None):
        points = np.asarray(points, dtype=float)
        order = np.argsort(points)
        points = points[order]
        if points.size < 2:
            raise PWLabError("a sampling family needs at least two points", 'at least two points')
        if not np.all(np.isfinite(points)):
            raise PWLabError("sampling points must be finite", 'finite points')
        if np.min(np.diff(points)) <= 0:
            raise PWLabError("sampling points must be pairwise distinct", 'relatively separated')
        if indices is None:
            indices = np.arange(points.size)
        else:
            indices = np.asarray(indices, dtype=int)[order]
        self.points = points
        self.indices = indices

    @classmethod
    def lattice(cls, step, half_width):
        """The points k*step with |k*step| <= half_width."""
        if not step > 0:
            raise PWLabError(f"step must be positive, got {step}", 'step > 0')
        count = int(math.floor(half_width / step + ALIGN_TOL))
        k = np.arange(-count, count + 1)
        return cls(k * step, k)

    @classmethod
    def from_points(cls, points):
        return cls(points)

    @property
    def separation(self):
        return float(np.min(np.diff(self.points)))

    @property
    def density(self):
        return float(np.max(np.diff(self.points)))

    def __len__(self):
        return self.points.size

    def covering_count(self, q_half=0.5):
        """max over x of the number of closed cubes x_i + [-q_half, q_half] holding x."""
        ends = np.searchsorted(self.points, self.points + 2 * q_half, side='right')
        return int(np.max(ends - np.arange(self.points.size)))

    def covering_bound(self, q_half=0.5):
        """The covering bound implied by the separation alone."""
        return int(math.floor(2 * q_half / self.separation + ALIGN_TOL)) + 1

    def cells(self):
        """Half-open nearest-point cells [lo_i, hi_i)."""
        mids = 0.5 * (self.points[1:] + self.points[:-1])
        gaps = np.diff(self.points)
        lo = np.concatenate(([self.points[0] - 0.5 * gaps[0]], mids))
        hi = np.concatenate((mids, [self.points[-1] + 0.5 * gaps[-1]]))
        return lo, hi

    def check_dense(self, bupu_half):
        """Every cell must lie in x_i + [-bupu_half, bupu_half]."""
        if self.density / 2 > bupu_half * (1 + ALIGN_TOL):
            raise PWLabError(
                f"cells reach {self.density / 2:g} from their point, beyond the "
                f"unit-cell half-width {bupu_half:g}",
                'U-dense'
            )

    def owner(self, grid):
        """Cell index per grid point, -1 outside every cell."""
        x = grid.points()
        lo, hi = self.cells()
        owner = np.searchsorted(lo, x, side='right') - 1
        outside = (x < lo[0]) | (x >= hi[-1])
        owner[outside] = -1
        return owner

    def grid_indices(self, grid):
        """Grid index of every point; the points must be grid-aligned."""
        ratio = (self.points + grid.half_width) / grid.spacing
        j = np.rint(ratio)
        if np.any(np.abs(ratio - j) > ALIGN_TOL * np.maximum(1.0, np.abs(ratio))):
            raise ResolutionError(f"sampling points are not multiples of h={grid.spacing}")
        if j.min() < 0 or j.max() >= grid.count:
            raise ResolutionError("sampling points leave the grid", 'points inside grid')
        return j.astype(int)

    def __repr__(self):
        return (
            f"SamplingFamily({len(self)} points, separation={self.separation:g}, "
            f"density={self.density:g})"
        )


# -- Shannon-type sampling on the lattice k/(2R) --------------------------------


def _check_rate(spectrum, R):
    if not R > 0:
        raise PWLabError(f"R must be positive, got {R}", 'R > 0')
    lo = min(float(a) for a, _ in spectrum.intervals)
    hi = max(float(b) for _, b in spectrum.intervals)
    if hi - lo > 2 * R * (1 + ALIGN_TOL):
        raise PWLabError(
            f"spectrum of width {hi - lo:g} does not fit an interval of length 2R = {2 * R:g}",
            'Omega inside xi0 + [-R, R]'
        )


def sample_op(f, R, count=None):
    """c_k = f(k/(2R)) for |k| <= count.

    The sample points must be grid points. Without `count` every sample
    point inside the grid is used. The dropped indices are recorded in
    `meta` ('count', 'max_count', 'truncated_at').
    """
    if not R > 0:
        raise PWLabError(f"R must be positive, got {R}", 'R > 0')
    grid = f.grid
    step = 1.0 / (2 * R)
    per = grid.steps(step)
    max_count = (grid.count // 2 - 1) // per
    if count is None:
        count = max_count
    if int(count) != count or count < 1:
        raise PWLabError(f"count must be a positive integer, got {count}", 'count >= 1')
    count = int(count)
    if count > max_count:
        raise ResolutionError(
            f"count {count} exceeds the {max_count} samples inside the grid", 'count within grid'
        )
    k = np.arange(-count, count + 1)
    index = grid.count // 2 + k * per
    meta = {'R': R, 'count': count, 'max_count': max_count, 'truncated_at': count * step}
    return CoefSeq(k, f.values[index], k * step, meta)


def synth_op(c, R, K, grid):
    """sum_k c_k K(. - k/(2R)) on the grid."""
    step = 1.0 / (2 * R)
    centred = CoefSeq(c.indices, c.values, c.indices * step, dict(c.meta))
    return synthesize(centred, K, grid)


def shannon_error(f, R, K, window=None, envelope=None):
    """Relative L_2 error of f = (2R)^-1 Synth(Samp f) on |x| <= window.

    Args:
        f: Band-limited GridFunction with spectrum inside that of K
        R: Sampling rate parameter (spacing 1/(2R))
        K: AnalyticKernel
        window: Half-width of the interior window (defaults to T/2)
        envelope: A with |f(y)| <= A/(1+|y|); defaults to the largest
            |f(x)|(1+|x|) over the grid

    Returns:
        dict with 'rel_error', 'truncation_bound' (the dropped-sample
        contribution relative to |f|), 'count' and 'reconstruction'
    """
    _check_rate(K.spectrum, R)
    grid = f.grid
    if window is None:
        window = grid.half_width / 2
    samples = sample_op(f, R)
    reconstruction = synth_op(samples, R, K, grid) * (1.0 / (2 * R))
    reference = lp_norm_on(f, 2, None, -window, window)
    if reference == 0:
        raise PWLabError("f vanishes on the error window", 'non-zero f')
    error = lp_norm_on(reconstruction - f, 2, None, -window, window)
    if envelope is None:
        x = grid.points()
        envelope = float(np.max(np.abs(f.values) * (1 + np.abs(x))))
    bound = tail_bound(envelope, samples.meta['truncated_at'], 2) / reference
    return {
        'rel_error': error / reference,
        'truncation_bound': bound,
        'count': samples.meta['count'],
        'reconstruction': reconstruction,
    }


# -- RC_K, the contraction certificate ------------------------------------------


def _trial_function(grid, rng):
    """Random complex step function with unit cells on the central half of the grid."""
    per_cell = grid.steps(min(1.0, grid.half_width / 4))
    cells = grid.count // per_cell
    values = np.repeat(rng.normal(size=cells) + 1j * rng.normal(size=cells), per_cell)
    out = np.zeros(grid.count, dtype=complex)
    out[:values.size] = values
    x = grid.points()
    out[np.abs(x) > grid.half_width / 2] = 0
    return GridFunction(grid, out)


def rc_k_norm(r, K=None, grid=None, trials=DEFAULT_TRIALS, rng=None):
    """Operator norm of f -> f * K on L_r.

    At r = 2 the value is exactly 1 (chi_Omega is a unimodular multiplier).
    Otherwise the norm is estimated from below as the largest ratio
    |g * K|_r / |g|_r over random step functions g and one band-limited g.

    Returns:
        tuple: (value, certified); certified is False for estimates
    """
    r = float(r)
    if r == 2:
        return 1.0, True
    if K is None or grid is None:
        raise PWLabError("estimating |RC_K| for r != 2 needs K and a grid", 'kernel and grid')
    if rng is None:
        rng = np.random.default_rng(0)
    lag_values = K(grid.lags())
    h = grid.spacing

    def ratio(g):
        image = lag_convolve(g.values, lag_values) * h
        return lp_norm(GridFunction(grid, image), r) / lp_norm(g, r)

    best = ratio(bandlimited_signal(grid, K.spectrum, rng))
    for _ in range(trials):
        best = max(best, ratio(_trial_function(grid, rng)))
    return best, False


@dataclass
class ContractionCert:
    """c = C_U * |RC_K|; granted when c < 1."""

    c: float
    c_u: float
    rc_k_norm: float
    bupu_half: float
    certified: bool = True

    @property
    def granted(self):
        return self.c < 1.0

    def to_dict(self):
        return {
            'c': float(self.c),
            'C_U': float(self.c_u),
            'rc_k_norm': float(self.rc_k_norm),
            'bupu_half': float(self.bupu_half),
            'granted': bool(self.granted),
            'certified': bool(self.certified),
        }


def oscillation_constant(W, bupu_half):
    """C_U = |osc_U W|_{L_1} for U = [-bupu_half, bupu_half]."""
    return lp_norm(oscillation(W.time_eval, bupu_half), 1)


def contraction_cert(K, W, bupu_half, r, rc=None):
    """Measure C_U and combine it with |RC_K|; refusal is returned, not raised.

    Args:
        K: AnalyticKernel
        W: SmoothWindow on the working grid
        bupu_half: Unit-cell half-width (at least one grid step)
        r: Exponent of the norm
        rc: Optional precomputed (value, certified) from rc_k_norm
    """
    c_u = oscillation_constant(W, bupu_half)
    if rc is None:
        rc = rc_k_norm(r, K, W.grid)
    value, certified = rc
    return ContractionCert(c_u * value, c_u, value, float(bupu_half), certified)


def _require(cert):
    if not cert.granted:
        raise CertificateRefused(cert)
    if not cert.certified:
        print(
            f"Warning: |RC_K| = {cert.rc_k_norm:.6g} is an estimate; c = {cert.c:.6g} "
            f"is not certified",
            file=sys.stderr
        )


# -- Sampling and analysis operators for a family X -----------------------------


def samp_x(f, X):
    """(f(x_i))_i as a CoefSeq."""
    index = X.grid_indices(f.grid)
    return CoefSeq(X.indices, f.values[index], X.points)


def step_synthesis(c, X, grid):
    """Synth_{X,Psi} c = sum_i c_i chi_{cell_i} on the grid."""
    owner = X.owner(grid)
    values = np.zeros(grid.count, dtype=complex)
    inside = owner >= 0
    values[inside] = c.values[owner[inside]]
    return GridFunction(grid, values)


def analysis_op(f, X):
    """Ana_{X,Psi} f = (integral of f over cell_i)_i."""
    owner = X.owner(f.grid)
    inside = owner >= 0
    h = f.grid.spacing
    size = len(X)
    real = np.bincount(owner[inside], weights=f.values.real[inside], minlength=size)
    imag = np.bincount(owner[inside], weights=f.values.imag[inside], minlength=size)
    return CoefSeq(X.indices, (real + 1j * imag) * h, X.points)


def synthesis_op(c, X, K, grid):
    """Synth_{X,K} c = sum_i c_i K(. - x_i)."""
    train = np.zeros(grid.count, dtype=complex)
    np.add.at(train, X.grid_indices(grid), c.values)
    return GridFunction(grid, lag_convolve(train, K(grid.lags())))


# -- Iterations ------------------------------------------------------------------


@dataclass
class FrameResult:
    """Outcome of a Neumann-series reconstruction.

    Unpacks as (recon, iterations, error_curve).
    """

    recon: GridFunction
    iterations: int
    error_curve: list
    converged: bool
    certificate: ContractionCert = None

    def __iter__(self):
        return iter((self.recon, self.iterations, self.error_curve))


@dataclass
class AtomicResult:
    """Coefficients with Synth_{X,K} coeffs ~ f.

    Unpacks as (coeffs, recon_error).
    """

    coeffs: CoefSeq
    recon_error: float
    iterations: int
    error_curve: list = field(default_factory=list)
    converged: bool = True
    certificate: ContractionCert = None
    window_defect: float = 0.0

    def __iter__(self):
        return iter((self.coeffs, self.recon_error))


def _cap_reached(name, final_error, iterations, strict):
    message = f"{name} hit the iteration cap {iterations} with error {final_error:.3e}"
    if strict:
        raise ConvergenceError(message, final_error, iterations)
    print(f"Warning: {message}", file=sys.stderr)


def _certificate(K, W, bupu_half, r, cert, grid, margin):
    if cert is not None:
        return cert, W
    if W is None:
        W = smooth_window(K.spectrum, margin, grid)
    return contraction_cert(K, W, bupu_half, r), W


def banach_frame_reconstruct(f, X, bupu_half, K, r=2, tol=1e-10, max_iter=50,
                             W=None, margin=0.25, cert=None, strict=False):
    """Recover f from its samples on X by u_{m+1} = A f + (I - A) u_m.

    A = RC_K o Synth_{X,Psi} o Samp_X, so the iteration only ever touches
    the samples f(x_i). It stops once |u_{m+1} - u_m|_r <= tol |u_{m+1}|_r.

    Args:
        f: GridFunction in the reproducing kernel space
        X: SamplingFamily, grid-aligned and U-dense for bupu_half
        bupu_half: Half-width of the unit cell U
        K: AnalyticKernel
        r: Exponent of the stopping and error norms
        tol: Relative stopping tolerance
        max_iter: Iteration cap
        W: SmoothWindow for the certificate (built with `margin` if omitted)
        cert: Precomputed ContractionCert
        strict: Raise ConvergenceError at the cap instead of warning

    Returns:
        FrameResult; error_curve[m] = |u_m - f|_r / |f|_r
    """
    X.check_dense(bupu_half)
    grid = f.grid
    cert, W = _certificate(K, W, bupu_half, r, cert, grid, margin)
    _require(cert)
    lag_values = K(grid.lags())
    h = grid.spacing

    def apply_a(u):
        step = step_synthesis(samp_x(u, X), X, grid)
        return GridFunction(grid, lag_convolve(step.values, lag_values) * h)

    scale = lp_norm(f, r) or 1.0
    base = apply_a(f)
    u = base
    curve = [lp_norm(u - f, r) / scale]
    for m in range(1, max_iter + 1):
        nxt = base + u - apply_a(u)
        change = lp_norm(nxt - u, r)
        u = nxt
        curve.append(lp_norm(u - f, r) / scale)
        if change <= tol * lp_norm(u, r):
            return FrameResult(u, m, curve, True, cert)
    _cap_reached('frame reconstruction', curve[-1], max_iter, strict)
    return FrameResult(u, max_iter, curve, False, cert)


def window_defect(W, K):
    """max |W * K - K| on |x| <= T/2, relative to K(0)."""
    grid = W.grid
    reproduced = kernel_convolve(W.time_eval, K)
    x = grid.points()
    interior = np.abs(x) <= grid.half_width / 2
    scale = abs(complex(K(np.array(0.0))))
    return float(np.max(np.abs(reproduced.values - K(x))[interior]) / scale)


def atomic_decomp(f, X, bupu_half, K, W=None, r=2, tol=1e-10, max_iter=50,
                  margin=0.25, cert=None, strict=False):
    """Coefficients c = Ana_{X,Psi} u with u = sum_m (I - B)^m f.

    B = Synth_{X,K} o Ana_{X,Psi}. The iteration u_{m+1} = f + (I - B) u_m
    stops once |B u_m - f|_r <= tol |f|_r; since B u_m - f = u_m - u_{m+1}
    this costs one application of B per step.

    Returns:
        AtomicResult; error_curve[m] = |B u_m - f|_r / |f|_r
    """
    X.check_dense(bupu_half)
    grid = f.grid
    cert, W = _certificate(K, W, bupu_half, r, cert, grid, margin)
    defect = window_defect(W, K)
    if defect > WINDOW_REPRODUCTION_TOL:
        raise PWLabError(
            f"W * K deviates from K by {defect:.3e} relative to K(0)", 'W * K = K'
        )
    _require(cert)
    lag_values = K(grid.lags())
    index = X.grid_indices(grid)

    def apply_b(u):
        train = np.zeros(grid.count, dtype=complex)
        np.add.at(train, index, analysis_op(u, X).values)
        return GridFunction(grid, lag_convolve(train, lag_values))

    scale = lp_norm(f, r)
    if scale == 0:
        return AtomicResult(analysis_op(f, X), 0.0, 0, [0.0], True, cert, defect)
    u = f
    curve = []
    for m in range(max_iter):
        residual = apply_b(u) - f
        curve.append(lp_norm(residual, r) / scale)
        if curve[-1] <= tol:
            return AtomicResult(analysis_op(u, X), curve[-1], m, curve, True, cert, defect)
        u = u - residual
    _cap_reached('atomic decomposition', curve[-1], max_iter, strict)
    return AtomicResult(analysis_op(u, X), curve[-1], max_iter, curve, False, cert, defect)


def error_curve_rows(curve):
    """Rows (iter, error_r, ratio) with ratio e_m / e_(m-1), None where undefined."""
    rows = []
    for m, error in enumerate(curve):
        ratio = None
        if m > 0 and curve[m - 1] > 0:
            ratio = error / curve[m - 1]
        rows.append((m, error, ratio))
    return rows


def max_tail_ratio(curve, burn_in=3, floor=1e-8):
    """Largest e_(m+1)/e_m for m >= burn_in while e_m > floor; 0 if none."""
    ratios = [
        curve[m + 1] / curve[m]
        for m in range(burn_in, len(curve) - 1)
        if curve[m] > floor
    ]
    return max(ratios, default=0.0)
