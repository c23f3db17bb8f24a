"""
The prolate-type Toeplitz matrix M_n and the norm of the synthesis right inverse.

(M_n)_{j,k} = 2^-n K(2^-n (j - k)) for the sinc kernel K of band omega. With
W = omega 2^-n this is the classical prolate matrix sin(2 pi W d)/(pi d), and
|S_n| = lambda_min(M_n)^(-1/2).

lambda_min drops below double precision from about n = 2 on, so three eigen
paths exist: 'dense' (full symmetric eigensolver), 'bisection' (Hessenberg
reduction plus tridiagonal bisection with compensated residuals) and
'extended' (mpmath refinement of the eigenvector shared with the commuting
tridiagonal matrix of the discrete prolate problem).
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal, hessenberg, toeplitz

from discretization import DyadicScheme
from errors import ConvergenceError, NumericallySingularError, PWLabError, SizeCapError
from kernels import sinc_kernel

SIZE_CAP = 10_000
SINGULAR_THRESHOLD = 1e-14
RESIDUAL_TOL = 1e-10
CROSS_RTOL = 1e-9
RQI_MAX_ITER = 50
MAX_DIGITS = 200_000
# Largest M_n handed to the mpmath reference solver.
REFERENCE_MAX_SIZE = 49
METHODS = ('dense', 'bisection', 'extended')


@dataclass(eq=False)
class SymToeplitz:
    """Symmetric Toeplitz matrix stored by its first column."""

    first_column: np.ndarray
    level: int
    omega: float

    @property
    def size(self):
        return self.first_column.size

    @property
    def bandwidth(self):
        return self.omega * 2.0 ** -self.level

    def entry(self, j, k):
        return self.first_column[abs(j - k)]

    def dense(self):
        return toeplitz(self.first_column)

    def compensated_matvec(self, v):
        """M v with every row summed by math.fsum."""
        col = self.first_column
        n = self.size
        out = np.empty(n)
        for i in range(n):
            row = col[np.abs(i - np.arange(n))]
            out[i] = math.fsum(row * v)
        return out


def prolate_matrix(s, omega):
    """M_n with first_column[d] = 2^-n K(2^-n d), d = 0..2N(n)."""
    K = sinc_kernel(omega)
    d = np.arange(2 * s.window + 1)
    column = s.spacing * K(s.spacing * d)
    return SymToeplitz(np.asarray(column, dtype=float), s.level, float(omega))


def format_value(value):
    """17 significant digits for floats and mpmath numbers alike."""
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, 17)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return '%.17g' % value


@dataclass
class EigenReport:
    """Extreme eigenvalues with residual certificates."""

    lambda_min: object
    lambda_max: float
    method: str
    residual_min: float
    residual_max: float
    size: int
    precision: int = 16

    @property
    def condition(self):
        return self.lambda_max / self.lambda_min if self.lambda_min > 0 else math.inf

    @property
    def positive(self):
        """False when rounding pushed a double-precision lambda_min to or below 0."""
        return bool(self.lambda_min > 0)

    @property
    def numerically_singular(self):
        return self.method != 'extended' and not self.lambda_min > SINGULAR_THRESHOLD

    def to_dict(self):
        return {
            'method': self.method,
            'size': self.size,
            'lambda_min': format_value(self.lambda_min),
            'lambda_max': format_value(self.lambda_max),
            'residual_min': float(self.residual_min),
            'residual_max': float(self.residual_max),
            'condition': format_value(self.condition),
            'positive': self.positive,
            'numerically_singular': self.numerically_singular,
            'precision_digits': self.precision,
        }


def _residual(M, lam, v, compensated):
    v = np.asarray(v, dtype=float)
    Mv = M.compensated_matvec(v) if compensated else M.dense() @ v
    if compensated:
        diff = [math.fsum((a, -float(lam) * b)) for a, b in zip(Mv, v)]
        return math.sqrt(math.fsum(x * x for x in diff)) / np.linalg.norm(v)
    return float(np.linalg.norm(Mv - float(lam) * v) / np.linalg.norm(v))


def _dense(M):
    if M.size > SIZE_CAP:
        raise SizeCapError(f"matrix size {M.size} exceeds {SIZE_CAP}", 'size <= 1e4')
    values, vectors = eigh(M.dense())
    return (
        float(values[0]), float(values[-1]),
        _residual(M, values[0], vectors[:, 0], False),
        _residual(M, values[-1], vectors[:, -1], False),
    )


def _bisection(M):
    H, Q = hessenberg(M.dense(), calc_q=True)
    d = np.diag(H).copy()
    e = np.diag(H, -1).copy()
    results = []
    for index in (0, M.size - 1):
        values, vectors = eigh_tridiagonal(
            d, e, select='i', select_range=(index, index), lapack_driver='stebz'
        )
        v = Q @ vectors[:, 0]
        results.append((float(values[0]), _residual(M, values[0], v, True)))
    (lam_min, res_min), (lam_max, res_max) = results
    return lam_min, lam_max, res_min, res_max


def _commuting_tridiagonal(size, W):
    t = np.arange(size)
    diag = ((size - 1 - 2 * t) / 2.0) ** 2 * math.cos(2 * math.pi * W)
    off = t[1:] * (size - t[1:]) / 2.0
    return diag, off


def _thomas(diag, off, rhs):
    """Solve the symmetric tridiagonal system (diag, off) x = rhs in mpmath."""
    n = len(diag)
    c = [mpmath.mpf(0)] * n
    y = [mpmath.mpf(0)] * n
    pivot = diag[0]
    c[0] = off[0] / pivot if n > 1 else 0
    y[0] = rhs[0] / pivot
    for i in range(1, n):
        pivot = diag[i] - off[i - 1] * c[i - 1]
        if i < n - 1:
            c[i] = off[i] / pivot
        y[i] = (rhs[i] - off[i - 1] * y[i - 1]) / pivot
    x = y[:]
    for i in range(n - 2, -1, -1):
        x[i] = y[i] - c[i] * x[i + 1]
    return x


def _tridiagonal_apply(diag, off, v):
    n = len(v)
    out = [diag[i] * v[i] for i in range(n)]
    for i in range(n - 1):
        out[i] += off[i] * v[i + 1]
        out[i + 1] += off[i] * v[i]
    return out


def _exact_column(W, size):
    """First column 2W, sin(2 pi W d)/(pi d) at the working precision."""
    return [2 * W] + [
        mpmath.sin(2 * mpmath.pi * W * d) / (mpmath.pi * d) for d in range(1, size)
    ]


def _start_digits(M):
    estimate = (2 * M.size - 2) * math.log10(math.pi * M.bandwidth)
    return max(60, int(-estimate) + 60)


def _extended_attempt(M, start, digits):
    """One refinement pass at `digits` decimal digits.

    Returns (lambda_min, verified, vector); verified means two independent
    components of M v / v agree to 20 digits and lambda_min > 0.
    """
    size = M.size
    with mpmath.workdps(digits):
        W = mpmath.mpf(M.omega) * mpmath.mpf(2) ** (-M.level)
        cos_term = mpmath.cos(2 * mpmath.pi * W)
        diag = [mpmath.mpf(size - 1 - 2 * t) ** 2 / 4 * cos_term for t in range(size)]
        off = [mpmath.mpf(t * (size - t)) / 2 for t in range(1, size)]
        scale = max(abs(x) for x in diag) + 2 * max(abs(x) for x in off)
        v = [mpmath.mpf(float(x)) for x in start]
        tol = mpmath.mpf(10) ** (-(digits - 10)) * scale
        for _ in range(RQI_MAX_ITER):
            norm = mpmath.sqrt(mpmath.fsum(x * x for x in v))
            v = [x / norm for x in v]
            Bv = _tridiagonal_apply(diag, off, v)
            sigma = mpmath.fdot(v, Bv)
            residual = mpmath.sqrt(mpmath.fsum((a - sigma * b) ** 2 for a, b in zip(Bv, v)))
            if residual <= tol:
                break
            v = _thomas([d - sigma for d in diag], off, v)
        else:
            raise ConvergenceError(
                f"Rayleigh quotient iteration did not converge at {digits} digits",
                iterations=RQI_MAX_ITER,
            )
        column = _exact_column(W, size)
        order = sorted(range(size), key=lambda i: -abs(v[i]))
        estimates = []
        for i in order[:2]:
            row = [column[abs(i - k)] for k in range(size)]
            estimates.append(mpmath.fdot(row, v) / v[i])
        lam, check = estimates
        verified = lam > 0 and abs(lam - check) <= mpmath.mpf(10) ** -20 * abs(lam)
        vector = np.array([float(x) for x in v])
        return +lam, verified, vector


def _extended(M):
    if M.size == 1:
        lam = mpmath.mpf(M.first_column[0])
        return lam, 0.0, 16
    if not 0 < M.bandwidth < 0.5:
        raise PWLabError(
            f"extended path needs 0 < W < 1/2, got W = {M.bandwidth}", 'bandwidth W < 1/2'
        )
    diag, off = _commuting_tridiagonal(M.size, M.bandwidth)
    _, vectors = eigh_tridiagonal(
        diag, off, select='i', select_range=(0, 0), lapack_driver='stebz'
    )
    start = vectors[:, 0]
    digits = _start_digits(M)
    while digits <= MAX_DIGITS:
        lam, verified, vector = _extended_attempt(M, start, digits)
        if verified:
            residual = _residual(M, float(lam), vector, True)
            return lam, residual, digits
        digits *= 2
    raise ConvergenceError(f"lambda_min unresolved at {MAX_DIGITS} digits")


def eig_extremes(M, method='dense'):
    """Smallest and largest eigenvalue of M with residual certificates.

    Args:
        M: SymToeplitz
        method: 'dense', 'bisection' or 'extended'

    Returns:
        EigenReport
    """
    if method not in METHODS:
        raise PWLabError(f"unknown eigen method {method!r}", 'method in {dense, bisection, extended}')
    if M.size == 1:
        value = float(M.first_column[0])
        lam_min = mpmath.mpf(value) if method == 'extended' else value
        return EigenReport(lam_min, value, method, 0.0, 0.0, 1)
    if method == 'dense':
        lam_min, lam_max, res_min, res_max = _dense(M)
        return EigenReport(lam_min, lam_max, method, res_min, res_max, M.size)
    if method == 'bisection':
        lam_min, lam_max, res_min, res_max = _bisection(M)
        return EigenReport(lam_min, lam_max, method, res_min, res_max, M.size)
    _, lam_max, _, res_max = _dense(M)
    lam_min, res_min, digits = _extended(M)
    return EigenReport(lam_min, lam_max, method, res_min, res_max, M.size, digits)


def agrees(a, b, rtol=CROSS_RTOL):
    """|a - b| <= rtol max(|a|, |b|), evaluated in mpmath so tiny values keep their digits."""
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    return bool(abs(a - b) <= rtol * max(abs(a), abs(b)))


def reference_lambda_min(M, digits=None):
    """lambda_min of M from mpmath.eigsy on the exact entries.

    Independent of the Rayleigh refinement: the whole matrix is built at
    `digits` decimal digits and diagonalized. Sizes above REFERENCE_MAX_SIZE
    are refused.
    """
    if M.size > REFERENCE_MAX_SIZE:
        raise SizeCapError(
            f"reference solver takes sizes up to {REFERENCE_MAX_SIZE}, got {M.size}",
            f'size <= {REFERENCE_MAX_SIZE}'
        )
    if M.size > 1 and not 0 < M.bandwidth < 0.5:
        raise PWLabError(f"reference needs 0 < W < 1/2, got W = {M.bandwidth}", 'bandwidth W < 1/2')
    if digits is None:
        digits = _start_digits(M) if M.size > 1 else 30
    with mpmath.workdps(digits):
        W = mpmath.mpf(M.omega) * mpmath.mpf(2) ** (-M.level)
        column = _exact_column(W, M.size)
        if M.size == 1:
            return +column[0]
        A = mpmath.matrix(M.size, M.size)
        for i in range(M.size):
            for k in range(M.size):
                A[i, k] = column[abs(i - k)]
        E = mpmath.eigsy(A, eigvals_only=True)
        return +min(E[i] for i in range(M.size))


def cross_check(M):
    """Compare the eigen paths where each comparison means something.

    dense and bisection are compared on lambda_max always and on lambda_min
    only while both exceed SINGULAR_THRESHOLD; below it their lambda_min is
    rounding noise. The extended lambda_min is compared with
    reference_lambda_min up to REFERENCE_MAX_SIZE and with dense above.

    Returns:
        dict with the three reports, 'reference', 'checks' (name -> bool)
        and 'agree'
    """
    dense = eig_extremes(M, 'dense')
    bisection = eig_extremes(M, 'bisection')
    checks = {'lambda_max': agrees(dense.lambda_max, bisection.lambda_max)}
    resolved = dense.lambda_min > SINGULAR_THRESHOLD and bisection.lambda_min > SINGULAR_THRESHOLD
    if resolved:
        checks['lambda_min'] = agrees(dense.lambda_min, bisection.lambda_min)
    result = {'dense': dense, 'bisection': bisection, 'extended': None, 'reference': None}
    if 0 < M.bandwidth < 0.5 or M.size == 1:
        extended = eig_extremes(M, 'extended')
        result['extended'] = extended
        if M.size <= REFERENCE_MAX_SIZE:
            reference = reference_lambda_min(M, extended.precision + 20)
            result['reference'] = reference
            checks['extended'] = agrees(extended.lambda_min, reference)
        elif resolved:
            checks['extended'] = agrees(extended.lambda_min, dense.lambda_min)
    result['checks'] = checks
    result['agree'] = all(checks.values())
    return result


def _solve(s, omega, method):
    M = prolate_matrix(s, omega)
    if method == 'auto':
        report = eig_extremes(M, 'dense')
        if report.numerically_singular:
            report = eig_extremes(M, 'extended')
        return report
    return eig_extremes(M, method)


def sn_report(s, omega, method='dense'):
    """(|S_n|, EigenReport). Double-precision methods refuse singular M_n."""
    report = _solve(s, omega, method)
    if report.numerically_singular:
        raise NumericallySingularError(
            f"M_{s.level} is numerically singular (lambda_min = {report.lambda_min:.3e}); "
            f"use method 'extended'",
            lambda_min=report.lambda_min,
        )
    lam = report.lambda_min
    if isinstance(lam, mpmath.mpf):
        return 1 / mpmath.sqrt(lam), report
    return lam ** -0.5, report


def sn_norm(s, omega, method='dense'):
    """|S_n| = lambda_min(M_n)^(-1/2)."""
    return sn_report(s, omega, method)[0]


def _sweep_row(args):
    n, omega, method = args
    s = DyadicScheme(n)
    norm, report = sn_report(s, omega, method)
    if isinstance(norm, mpmath.mpf):
        c_n = mpmath.mpf(2) ** (mpmath.mpf(-n) / 2) * norm
    else:
        c_n = s.cube_measure ** 0.5 * norm
    return {
        'n': n,
        'size': report.size,
        'lambda_min': report.lambda_min,
        'lambda_max': report.lambda_max,
        'sn_norm': norm,
        'c_n': c_n,
        'method': report.method,
        'residual': max(report.residual_min, report.residual_max),
        'precision': report.precision,
    }


def eigensweep(n_min, n_max, omega, method='auto', workers=1):
    """One row (n, size, lambda_min, lambda_max, |S_n|, C_n) per level.

    C_n is reported for r = 2 and w = 1, i.e. |Q_n|^(1/2) |S_n|. Rows are
    returned in level order whatever the worker count.
    """
    if not 0 <= n_min <= n_max:
        raise PWLabError(f"invalid level range {n_min}..{n_max}", '0 <= n_min <= n_max')
    largest = 2 * n_max * 2 ** n_max + 1
    if largest > SIZE_CAP:
        raise SizeCapError(f"level {n_max} has size {largest} > {SIZE_CAP}", 'size <= 1e4')
    jobs = [(n, float(omega), method) for n in range(n_min, n_max + 1)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(job) for job in jobs]
