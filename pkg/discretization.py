"""
Dyadic discretization of the reproducing kernel space.

Level n uses the lattice Y_n = 2^-n Z, the cube Q_n = [-2^-n-1, 2^-n-1],
the finite window X_n = {2^-n k : |k| <= n 2^n} and the partition of unity
formed by the half-open cells [x_k - 2^-n-1, x_k + 2^-n-1).
"""

import math
import sys
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh, lstsq

from errors import IllConditionedGramError, PWLabError, ResolutionError
from grid_core import (
    ExponentTriple, GridFunction, box, conjugate_exponent, lag_convolve,
    lp_norm, seq_norm
)
from kernels import kernel_oscillation, sinc_kernel

# Overlap constant: adjacent closed cells touch, so the centers split into
# two families (even k, odd k) of pairwise disjoint cells.
OVERLAP = 2

# Gram matrices with lambda_min / lambda_max below this are ill-conditioned.
GRAM_RCOND = 1e-14

IRLS_MAX_ITER = 50
IRLS_STAGNATION = 1e-8


@dataclass(frozen=True)
class DyadicScheme:
    """Level-n lattice, cube, window and partition of unity."""

    level: int

    def __post_init__(self):
        if isinstance(self.level, bool) or int(self.level) != self.level or self.level < 0:
            raise PWLabError(f"level must be a nonnegative integer, got {self.level}", 'n >= 0')
        object.__setattr__(self, 'level', int(self.level))

    @property
    def spacing(self):
        return 2.0 ** -self.level

    @property
    def q_half(self):
        return 2.0 ** (-self.level - 1)

    @property
    def cube_measure(self):
        return 2 * self.q_half

    @property
    def window(self):
        return self.level * 2 ** self.level

    @property
    def overlap(self):
        return OVERLAP

    def indices(self):
        return np.arange(-self.window, self.window + 1)

    def centers(self):
        return self.indices() * self.spacing

    def cells(self):
        centers = self.centers()
        return centers - self.q_half, centers + self.q_half

    def check_resolution(self, grid):
        """Cells must be unions of grid steps and the window must fit the grid."""
        grid.steps(self.q_half)
        lo, hi = self.cells()
        if lo[0] < -grid.half_width or hi[-1] > grid.half_width:
            raise ResolutionError(
                f"level {self.level} cells reach {hi[-1]}, beyond the grid half-width "
                f"{grid.half_width}",
                'window inside grid'
            )

    def cell_index(self, grid):
        """Index k of the cell [x_k - q, x_k + q) holding each grid point."""
        per_cell = grid.steps(self.spacing)
        half = grid.steps(self.q_half)
        offset = grid.steps(grid.half_width)
        j = np.arange(grid.count)
        return np.floor_divide(j - offset + half, per_cell)

    def psi(self, k, grid):
        """The partition function psi_{n,k} as a grid function."""
        centre = k * self.spacing
        return box(grid, centre - self.q_half, centre + self.q_half)

    def partition_of_unity(self, grid):
        """Pointwise sum over all cells meeting the grid of psi_{n,k}."""
        index = self.cell_index(grid)
        total = np.zeros(grid.count)
        for k in range(int(index.min()), int(index.max()) + 1):
            total += self.psi(k, grid).values.real
        return total


def scheme(n):
    return DyadicScheme(n)


@dataclass
class CoefSeq:
    """Finitely supported coefficients indexed by integers k at centers x_k."""

    indices: np.ndarray
    values: np.ndarray
    centers: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=int)
        self.values = np.asarray(self.values, dtype=complex)
        self.centers = np.asarray(self.centers, dtype=float)
        if not (self.indices.shape == self.values.shape == self.centers.shape):
            raise PWLabError("indices, values and centers differ in length", 'matching lengths')

    def norm(self, p, m=None):
        weights = None if m is None else m(self.centers)
        return seq_norm(self.values, p, weights)

    def support(self):
        return self.indices[self.values != 0]

    def as_dict(self):
        return {int(k): complex(v) for k, v in zip(self.indices, self.values)}

    def __len__(self):
        return self.values.size


def _coefficients_for(s, values):
    return CoefSeq(s.indices(), values, s.centers())


def bupu_coeffs(f, s):
    """c_k = integral of f over the k-th half-open cell, for |k| <= N(n)."""
    s.check_resolution(f.grid)
    index = s.cell_index(f.grid) + s.window
    inside = (index >= 0) & (index <= 2 * s.window)
    size = 2 * s.window + 1
    h = f.grid.spacing
    real = np.bincount(index[inside], weights=f.values.real[inside], minlength=size)
    imag = np.bincount(index[inside], weights=f.values.imag[inside], minlength=size)
    return _coefficients_for(s, (real + 1j * imag) * h)


def coefficient_bound(f, s, r, m, w):
    """(lhs, rhs) of |c|_{l_r,m} <= |Q_n|^{1/r'} sup_{Q_n} w |f|_{L_r,m}."""
    coefficients = bupu_coeffs(f, s)
    r_conj = conjugate_exponent(float(r))
    lhs = coefficients.norm(r, m)
    rhs = s.cube_measure ** (1.0 / r_conj) * w.sup_on(s.q_half) * lp_norm(f, r, m)
    return lhs, rhs


def impulse_train(coefficients, grid):
    """Grid array carrying each coefficient at its (grid-aligned) center."""
    train = np.zeros(grid.count, dtype=complex)
    for centre, value in zip(coefficients.centers, coefficients.values):
        train[grid.index_of(centre)] += value
    return train


def synthesize(coefficients, kernel, grid):
    """sum_k c_k K(. - x_k) on the grid with closed-form kernel values."""
    values = lag_convolve(impulse_train(coefficients, grid), kernel(grid.lags()))
    return GridFunction(grid, values)


def tn_apply(f, s, K):
    """T_n f = sum_{|k| <= N(n)} <f, psi_{n,k}> K(. - x_k)."""
    return synthesize(bupu_coeffs(f, s), K, f.grid)


def seq_synth_bound(d, s, p, m, w, grid):
    """(lhs, rhs) of the synthesis bound for step functions.

    lhs = |sum_k |d_k| chi_{x_k + Q_n}|_{L_p,m}
    rhs = I^{1-1/p} sup_{Q_n} w |Q_n|^{1/p} |d|_{l_p,m}
    """
    if len(d) == 0:
        raise PWLabError("empty coefficient sequence", 'non-empty d')
    s.check_resolution(grid)
    steps = np.zeros(grid.count)
    for centre, value in zip(d.centers, d.values):
        steps += abs(value) * box(grid, centre - s.q_half, centre + s.q_half).values.real
    p = float(p)
    lhs = lp_norm(GridFunction(grid, steps), p, m)
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    rhs = (
        s.overlap ** (1.0 - inv_p)
        * w.sup_on(s.q_half)
        * s.cube_measure ** inv_p
        * d.norm(p, m)
    )
    return lhs, rhs


def pointwise_atom_bound(d, s, K, grid, refine=4):
    """max over the grid of |sum d_k K(y - x_k)| - RHS(y), where

    RHS = (sum_k |d_k| chi_{x_k + Q_n} / |Q_n|) * (osc_{Q_n} K + |K|).

    Cell averages are taken over offsets of step h/refine and the
    oscillation uses the same offsets.
    """
    if len(d) == 0 or not np.any(d.values):
        return 0.0
    delta = grid.spacing / refine
    q_steps = int(round(s.q_half / delta))
    if q_steps < 1:
        raise ResolutionError(
            f"cell half-width {s.q_half} is below the refined step {delta}", 'q_half >= h/refine'
        )
    n = grid.count
    # G = osc + |K| on the fine lattice of lags, padded by one cell each side
    fine_half = (n - 1) * refine + q_steps
    t = np.arange(-fine_half, fine_half + 1) * delta
    base = K(t)
    osc = np.zeros(t.size)
    for k in range(-q_steps, q_steps + 1):
        if k:
            osc = np.maximum(osc, np.abs(K(t + k * delta) - base))
    G = osc + np.abs(base)
    # average of G(t - u) over u = -q, -q + delta, ..., q - delta
    window = 2 * q_steps
    csum = np.concatenate(([0.0], np.cumsum(G)))
    # average at fine index i uses G[i - q_steps + 1 .. i + q_steps]
    centre = np.arange(q_steps, t.size - q_steps)
    averaged = (csum[centre + q_steps + 1] - csum[centre - q_steps + 1]) / window
    lag_index = (n - 1) * refine + np.arange(-(n - 1), n) * refine
    averaged_lags = averaged[lag_index]
    magnitudes = np.zeros(n)
    for centre_x, value in zip(d.centers, d.values):
        magnitudes[grid.index_of(centre_x)] += abs(value)
    rhs = lag_convolve(magnitudes, averaged_lags).real
    lhs = np.abs(synthesize(d, K, grid).values)
    return float(np.max(lhs - rhs))


@dataclass
class BoundReport:
    """Constants C_n, D_n, theta_n and tau_n with the factors behind them."""

    n: int
    r: float
    q: float
    p: float
    omega: float
    weight: str
    sn_norm: float
    c_n: float
    d_n: float
    theta_n: float
    tau_n: float
    factors: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'n': self.n,
            'r': self.r,
            'q': self.q,
            'p': self.p,
            'omega': self.omega,
            'weight': self.weight,
            'sn_norm': float(self.sn_norm),
            'C_n': float(self.c_n),
            'D_n': float(self.d_n),
            'theta_n': float(self.theta_n),
            'tau_n': float(self.tau_n),
            'factors': {k: float(v) for k, v in self.factors.items()},
        }


def theta(s, K, p, w, grid, refine=4):
    """theta_n = max of the L_{p,w} and L_{p,w Delta^-1/p} norms of osc_{Q_n} K + |K|.

    The modular function is identically one on the real line, so both
    weights coincide; both norms are computed and must agree.
    """
    G = kernel_oscillation(K, s.q_half, grid, refine) + K.sample(grid).magnitude()
    plain = lp_norm(G, p, w)

    def modular_weight(x):
        delta = np.ones_like(np.asarray(x, dtype=float))
        return w(x) * delta ** (-1.0 / p if not math.isinf(p) else 0.0)

    modular = lp_norm(G, p, modular_weight)
    if not math.isclose(plain, modular, rel_tol=1e-12):
        raise PWLabError("the two theta norms disagree", 'unimodular group')
    return max(plain, modular)


def bound_report(n, r, exponents, omega, weights, sn_norm, grid, kernel=None, refine=4):
    """Assemble C_n, D_n, theta_n and tau_n for level n.

    Args:
        n: Level
        r: Exponent of the space M_{r,m}
        exponents: ExponentTriple (p, q, r_kernel) for the Young step with
            output exponent p = r, coefficients in l_q and the kernel in L_{r_kernel}
        omega: Band limit of the sinc kernel
        weights: (m, w) pair of Weights
        sn_norm: Norm of the right inverse S_n (from toeplitz_lab)
        grid: Grid for the theta_n quadrature
        kernel: Optional kernel; defaults to sinc_kernel(omega)

    Returns:
        BoundReport
    """
    if not isinstance(exponents, ExponentTriple):
        exponents = ExponentTriple(*exponents)
    p_out, q, p_kernel = exponents.as_floats()
    if not math.isclose(p_out, float(r)):
        raise PWLabError(
            f"output exponent {p_out} differs from r = {r}", 'output exponent equals r'
        )
    _, w = weights
    s = DyadicScheme(n)
    K = kernel or sinc_kernel(omega)
    r = float(r)
    cube = s.cube_measure
    sup_w = w.sup_on(s.q_half)
    c_n = cube ** (1.0 / conjugate_exponent(r)) * sup_w * sn_norm
    theta_n = theta(s, K, p_kernel, w, grid, refine)
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    inv_r = 0.0 if math.isinf(r) else 1.0 / r
    cube_factor = cube ** (inv_q - 1.0)
    overlap_factor = OVERLAP ** (1.0 - inv_q)
    d_n = cube_factor * overlap_factor * sup_w * theta_n
    x_count = 2 * s.window + 1
    tau_n = c_n * x_count ** (inv_q - inv_r)
    return BoundReport(
        n=n, r=r, q=q, p=p_kernel, omega=float(omega), weight=w.describe(),
        sn_norm=sn_norm, c_n=c_n, d_n=d_n, theta_n=theta_n, tau_n=tau_n,
        factors={
            'cube_power_q': cube_factor,
            'overlap_power_q': overlap_factor,
            'sup_w': sup_w,
            'cube_power_r_conj': cube ** (1.0 / conjugate_exponent(r)),
            'window_count': x_count,
        },
    )


@dataclass
class ProjectionResult:
    """Best approximation from V_n. Unpacks as (approx, coeffs, residual)."""

    approx: GridFunction
    coeffs: CoefSeq
    residual: float
    exact: bool = True
    iterations: int = 0
    gram_lambda_min: float = float('nan')

    def __iter__(self):
        return iter((self.approx, self.coeffs, self.residual))


def _design_matrix(s, K, grid):
    x = grid.points()
    centers = s.centers()
    return K(x[:, None] - centers[None, :]).astype(complex)


def projection_approx(f, s, K, r=2, regularize=True):
    """Best L_r approximation of f by sum_k c_k K(. - x_k), |k| <= N(n).

    r = 2 is a least-squares solve on the sqrt(h)-scaled design matrix.
    Other r use iteratively reweighted least squares and are flagged
    approximate.
    """
    grid = f.grid
    s.check_resolution(grid)
    r = float(r)
    if not r >= 1:
        raise PWLabError(f"r must be >= 1, got {r}", 'r >= 1')
    h = grid.spacing
    A = _design_matrix(s, K, grid)
    b = f.values
    gram = h * (A.conj().T @ A)
    spectrum = eigvalsh(gram)
    lam_min, lam_max = float(spectrum[0]), float(spectrum[-1])
    if lam_min <= GRAM_RCOND * lam_max:
        if not regularize:
            raise IllConditionedGramError(
                f"Gram matrix at level {s.level} has lambda_min = {lam_min:.3e}",
                lambda_min=lam_min,
            )
        print(
            f"Warning: Gram matrix at level {s.level} is ill-conditioned "
            f"(lambda_min = {lam_min:.3e}); using a rank-revealing solve",
            file=sys.stderr,
        )
    scale = math.sqrt(h)
    c, _, _, _ = lstsq(scale * A, scale * b)
    iterations = 0
    exact = True
    if r != 2:
        exact = False
        previous = math.inf
        for iterations in range(1, IRLS_MAX_ITER + 1):
            residual = np.abs(b - A @ c)
            floor = 1e-12 * max(residual.max(), 1e-300)
            weights = np.maximum(residual, floor) ** ((r - 2.0) / 2.0)
            c, _, _, _ = lstsq(scale * weights[:, None] * A, scale * weights * b)
            current = lp_norm(GridFunction(grid, b - A @ c), r)
            if abs(previous - current) <= IRLS_STAGNATION * max(current, 1e-300):
                break
            previous = current
        print(
            f"Warning: L_{r:g} projection at level {s.level} is approximate "
            f"({iterations} reweighting steps)",
            file=sys.stderr,
        )
    approx = GridFunction(grid, A @ c)
    coefficients = CoefSeq(s.indices(), c, s.centers(), meta={'exact': exact})
    residual = lp_norm(f - approx, r)
    return ProjectionResult(approx, coefficients, residual, exact, iterations, lam_min)


def residual_sweep(f, levels, K, r=2):
    """Projection residual for each level, as (n, residual) pairs."""
    return [(n, projection_approx(f, DyadicScheme(n), K, r).residual) for n in levels]
