"""
Spectra whose reproducing kernel space cannot be discretized nicely.

fat_cantor builds the level-by-level approximation of a Cantor set of
positive measure inside [0, 1] with exact rational endpoints. The lacunary
spectrum is a union of ever shorter intervals drifting to infinity. Both
come with the norm certificates for the kernel of the removed gaps or of
the intervals, computed on a grid and bounded analytically.
"""

import bisect
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import quad
from scipy.special import bernoulli, sici, zeta

from errors import NyquistError, PWLabError, SizeCapError
from grid_core import lp_norm, parse_exponent
from kernels import Spectrum, indicator_kernel

MAX_DEPTH = 24
MAX_LACUNARY = 30

# Terms summed before the series bound gives up.
SERIES_CAP = 1 << 26

EVIDENCE_THRESHOLD = 0.5


def mu(n):
    """mu_n = min(4^-n, n^-n) as an exact rational."""
    return min(Fraction(1, 4 ** n), Fraction(1, n ** n))


@dataclass
class CantorApprox:
    """Level-`depth` approximation C_depth of the fat Cantor set.

    kept holds the 2^depth closed intervals (a, b) in increasing order;
    removed holds every open gap (a, b, level) cut out at levels < depth;
    mu holds mu_1..mu_depth.
    """

    depth: int
    kept: list
    removed: list = field(default_factory=list)
    mu: list = field(default_factory=list)

    def kept_measure(self):
        return sum((b - a for a, b in self.kept), Fraction(0))

    def removed_measure(self):
        return sum((b - a for a, b, _ in self.removed), Fraction(0))

    def gaps(self):
        """The removed gaps as a sorted Spectrum, or None at depth 0."""
        if not self.removed:
            return None
        return Spectrum(tuple(sorted((a, b) for a, b, _ in self.removed)))


def _check_level(kept, n):
    low, high = Fraction(1, 4 ** n), Fraction(1, 2 ** n)
    for a, b in kept:
        if not low <= b - a <= high:
            raise PWLabError(
                f"level {n} interval [{a}, {b}] has length outside [4^-{n}, 2^-{n}]",
                'interval length window'
            )
    for (_, b), (a, _) in zip(kept, kept[1:]):
        if not b < a:
            raise PWLabError(f"level {n} intervals are not separated", 'b_l < a_(l+1)')


def fat_cantor(depth):
    """Run the midpoint-removal recursion from C_0 = [0, 1] down to `depth`.

    At level n every kept [a, b] loses the open middle gap of width
    mu_(n+1) centred at (a + b)/2. All invariants are checked exactly.
    """
    if isinstance(depth, bool) or int(depth) != depth or depth < 0:
        raise PWLabError(f"depth must be a nonnegative integer, got {depth}", 'depth >= 0')
    depth = int(depth)
    if depth > MAX_DEPTH:
        raise SizeCapError(f"depth {depth} exceeds {MAX_DEPTH}", f'depth <= {MAX_DEPTH}')
    kept = [(Fraction(0), Fraction(1))]
    removed = []
    widths = []
    for n in range(depth):
        width = mu(n + 1)
        widths.append(width)
        half = width / 2
        nxt = []
        for a, b in kept:
            centre = (a + b) / 2
            nxt.append((a, centre - half))
            nxt.append((centre + half, b))
            removed.append((centre - half, centre + half, n))
        kept = nxt
        _check_level(kept, n + 1)
    ca = CantorApprox(depth, kept, removed, widths)
    if ca.kept_measure() + ca.removed_measure() != 1:
        raise PWLabError("kept and removed measures do not add up to 1", '|kept| + |removed| = 1')
    return ca


def cantor_measure(ca):
    return ca.kept_measure()


def removed_total(depth):
    """sum_{n < depth} 2^n mu_(n+1), exactly."""
    return sum((2 ** n * mu(n + 1) for n in range(depth)), Fraction(0))


def _fraction_dict(value):
    return {'num': str(value.numerator), 'den': str(value.denominator)}


def cantor_to_dict(ca):
    return {
        'depth': ca.depth,
        'mu': [_fraction_dict(m) for m in ca.mu],
        'measure': _fraction_dict(cantor_measure(ca)),
        'kept': [{'a': _fraction_dict(a), 'b': _fraction_dict(b)} for a, b in ca.kept],
        'removed': [
            {'a': _fraction_dict(a), 'b': _fraction_dict(b), 'level': level}
            for a, b, level in ca.removed
        ],
    }


# -- L_p norms ------------------------------------------------------------------


def _exponent(p):
    p = parse_exponent(p)
    if not p > 1:
        raise PWLabError(f"p must exceed 1, got {p}", 'p > 1')
    return p


def sinc_lp_norm(p):
    """|F|_{L_p} for F = F^-1 chi_[0,1], |F(x)| = |sin(pi x)/(pi x)|.

    The integral over [1, inf) is folded onto [0, 1] with the Hurwitz zeta
    function: sum_{k>=1} (k + t)^-p = zeta(p, 1 + t).
    """
    p = _exponent(p)
    if p == math.inf:
        return 1.0
    p = float(p)
    head, _ = quad(lambda t: (math.sin(math.pi * t) / (math.pi * t)) ** p if t else 1.0, 0, 1)
    tail, _ = quad(lambda t: math.sin(math.pi * t) ** p * zeta(p, 1 + t), 0, 1)
    return (2 * (head + math.pi ** -p * tail)) ** (1 / p)


def _series_bound(p):
    """sum_{l>=1} 2^(l-1) l^(-l s) with s = 1 - 1/p, plus a geometric remainder."""
    s = 1.0 if p == math.inf else 1.0 - 1.0 / float(p)
    start = int(math.ceil(4.0 ** (1.0 / s)))
    length = max(start, 8)
    while True:
        if length > SERIES_CAP:
            raise SizeCapError(
                f"series for p = {p} needs more than {SERIES_CAP} terms", 'series length within cap'
            )
        ell = np.arange(1, length + 1, dtype=float)
        terms = np.exp((ell - 1) * math.log(2) - ell * s * np.log(ell))
        total = math.fsum(terms)
        # successive ratio is at most 2 (l + 1)^-s <= 1/2 past start
        rho = 2 * (length + 1) ** -s
        remainder = terms[-1] * rho / (1 - rho)
        if remainder <= 1e-17 * total:
            return total + remainder
        length *= 2


def cantor_series_bound(p):
    """|F|_p sum_{l>=1} 2^(l-1) l^(-l(1-1/p)), valid at every depth."""
    p = _exponent(p)
    return sinc_lp_norm(p) * _series_bound(p)


def gap_sum_bound(depth, p):
    """|F|_p sum_{n<depth} 2^n mu_(n+1)^(1-1/p), the triangle inequality over gaps."""
    p = _exponent(p)
    s = 1.0 if p == math.inf else 1.0 - 1.0 / float(p)
    total = math.fsum(2 ** n * float(mu(n + 1)) ** s for n in range(depth))
    return sinc_lp_norm(p) * total


def cantor_kernel_norm(ca, p, grid):
    """(numeric, analytic_bound) for the kernel of the removed gaps.

    numeric is the grid L_p norm of F^-1 chi_E with E the union of the gaps;
    analytic_bound is the series bound.
    """
    p = _exponent(p)
    bound = cantor_series_bound(p)
    gaps = ca.gaps()
    if gaps is None:
        return 0.0, bound
    _check_nyquist(gaps, grid)
    return lp_norm(indicator_kernel(gaps).sample(grid), p), bound


def _check_nyquist(spectrum, grid):
    reach = spectrum.sup_abs()
    if not 1.0 / grid.spacing > 2 * reach:
        raise NyquistError(
            f"sampling rate 1/h = {1.0 / grid.spacing:g} does not exceed 2 * {reach:g}"
        )


# -- Plancherel tail --------------------------------------------------------------

# Row block for the endpoint-pair sums.
PAIR_CHUNK = 512
EULER_MACLAURIN_TERMS = 16


def _signed_endpoints(spectrum):
    """Endpoints centred on the spectrum midpoint, with sign +1 at b_i and -1 at a_i."""
    intervals = spectrum.float_intervals()
    ends = np.array([e for pair in intervals for e in pair])
    signs = np.tile([-1.0, 1.0], len(intervals))
    centre = 0.5 * (ends.min() + ends.max())
    return ends - centre, signs


def _integral_tail(ends, signs, T):
    """int_T^inf |K(x)|^2 dx over the endpoint pairs.

    |K(x)|^2 = sum_{m,l} s_m s_l cos(2 pi (c_m - c_l) x) / (4 pi^2 x^2) and
    int_T^inf cos(a x)/x^2 dx = cos(a T)/T - a (pi/2 - Si(a T)).
    """
    partials = []
    for start in range(0, ends.size, PAIR_CHUNK):
        alpha = 2 * math.pi * np.abs(ends[start:start + PAIR_CHUNK, None] - ends[None, :])
        si, _ = sici(alpha * T)
        g = np.cos(alpha * T) / T - alpha * (0.5 * math.pi - si)
        partials.append(float(signs[start:start + PAIR_CHUNK] @ g @ signs))
    return math.fsum(partials) / (4 * math.pi ** 2)


def _kernel_sq_derivatives(ends, signs, T, order):
    """d^r/dx^r |K(x)|^2 at x = T for r = 0..order.

    |K|^2 = P(x) x^-2 / (4 pi^2) with P = |D|^2 and
    D(x) = sum_m s_m exp(2 pi i c_m x).
    """
    phase = signs * np.exp(2j * math.pi * ends * T)
    D = [complex(np.sum(phase * (2j * math.pi * ends) ** i)) for i in range(order + 1)]
    P = [
        math.fsum(math.comb(j, i) * (D[i] * D[j - i].conjugate()).real for i in range(j + 1))
        for j in range(order + 1)
    ]
    q = [(-1) ** k * math.factorial(k + 1) * T ** (-2 - k) for k in range(order + 1)]
    return [
        math.fsum(math.comb(r, j) * P[j] * q[r - j] for j in range(r + 1)) / (4 * math.pi ** 2)
        for r in range(order + 1)
    ]


def plancherel_tail(spectrum, grid):
    """h sum |K(x)|^2 over the lattice points -T + hZ that fall outside the grid.

    |K|^2 has spectrum inside E - E, so with 1/h above the diameter of E the
    full lattice sum equals |E| and the grid L_2 norm satisfies
    |K|_2^2 + plancherel_tail = |E| exactly. The outside points form twice a
    trapezoid rule on [T, inf): the integral is summed in closed form over
    endpoint pairs and the trapezoid error by Euler-Maclaurin.
    """
    ends, signs = _signed_endpoints(spectrum)
    h, T = grid.spacing, grid.half_width
    diameter = float(ends.max() - ends.min())
    if not 1.0 / h > diameter:
        raise NyquistError(
            f"sampling rate 1/h = {1.0 / h:g} does not exceed the spectrum diameter {diameter:g}"
        )
    integral = _integral_tail(ends, signs, T)
    order = 2 * EULER_MACLAURIN_TERMS - 1
    derivatives = _kernel_sq_derivatives(ends, signs, T, order)
    B = bernoulli(2 * EULER_MACLAURIN_TERMS)
    correction = -math.fsum(
        float(B[2 * k]) * h ** (2 * k) / math.factorial(2 * k) * derivatives[2 * k - 1]
        for k in range(1, EULER_MACLAURIN_TERMS + 1)
    )
    return 2 * (integral + correction)


def plancherel_gap(spectrum, grid):
    """(|E| - |K|_2^2 on the grid, plancherel_tail); the two agree to rounding."""
    _check_nyquist(spectrum, grid)
    numeric = lp_norm(indicator_kernel(spectrum).sample(grid), 2)
    return float(spectrum.measure()) - numeric ** 2, plancherel_tail(spectrum, grid)


# -- interval check ---------------------------------------------------------------


def interval_density(ca, lo, hi):
    """|C_depth intersect (lo, hi)| / (hi - lo), exactly."""
    lo, hi = Fraction(lo), Fraction(hi)
    if not lo < hi:
        raise PWLabError(f"empty interval ({lo}, {hi})", 'lo < hi')
    starts = [a for a, _ in ca.kept]
    first = max(bisect.bisect_right(starts, lo) - 1, 0)
    covered = Fraction(0)
    for a, b in ca.kept[first:]:
        if a >= hi:
            break
        left, right = max(a, lo), min(b, hi)
        if right > left:
            covered += right - left
    return covered / (hi - lo)


def no_interval_check(ca, trials=100, rng=None):
    """Density of C_depth in random subintervals B of [0, 1].

    Widths are log-uniform in [2 * 4^-depth, 1]. A B wider than
    2^(-depth+1) cannot sit inside a single kept interval, so it must meet a
    gap; such a B with density 1 counts as a violation. max_density is taken
    over these qualifying B only (0.0 when none qualify); narrower B can sit
    inside one kept interval and then read 1. The check says nothing about
    the limit set itself.

    Returns:
        dict with 'max_density', 'tested', 'qualifying' and 'violations'
    """
    if int(trials) != trials or trials < 1:
        raise PWLabError(f"trials must be a positive integer, got {trials}", 'trials >= 1')
    if rng is None:
        rng = np.random.default_rng(0)
    smallest = 2.0 * 4.0 ** -ca.depth
    threshold = Fraction(2) ** (1 - ca.depth)
    best = Fraction(0)
    qualifying = violations = 0
    for _ in range(int(trials)):
        width = Fraction(float(np.exp(rng.uniform(math.log(smallest), 0.0))))
        width = min(width, Fraction(1))
        lo = Fraction(float(rng.uniform(0.0, 1.0))) * (1 - width)
        density = interval_density(ca, lo, lo + width)
        if width > threshold:
            best = max(best, density)
            qualifying += 1
            if density >= 1:
                violations += 1
    return {
        'max_density': float(best),
        'tested': int(trials),
        'qualifying': qualifying,
        'violations': violations,
    }


# -- lacunary spectrum ------------------------------------------------------------


def lacunary_spectrum(J):
    """I_j = (3 * 2^(j-2), 3 * 2^(j-2) + 4^-j) for j = 1..J."""
    if isinstance(J, bool) or int(J) != J or J < 1:
        raise PWLabError(f"J must be a positive integer, got {J}", 'J >= 1')
    J = int(J)
    if J > MAX_LACUNARY:
        raise SizeCapError(f"J = {J} exceeds {MAX_LACUNARY}", f'J <= {MAX_LACUNARY}')
    intervals = []
    for j in range(1, J + 1):
        a = Fraction(3 * 2 ** j, 4)
        b = a + Fraction(1, 4 ** j)
        if not (Fraction(2) ** (j - 1) < a and b < Fraction(2) ** j):
            raise PWLabError(f"I_{j} leaves (2^{j - 1}, 2^{j})", 'I_j inside dyadic shell')
        intervals.append((a, b))
    return Spectrum(tuple(intervals))


def lacunary_series_bound(p):
    """|F|_p sum_{j>=1} 4^(-j(1-1/p))."""
    p = _exponent(p)
    s = 1.0 if p == math.inf else 1.0 - 1.0 / float(p)
    q = 4.0 ** -s
    return sinc_lp_norm(p) * q / (1 - q)


def lacunary_kernel_norm(J, p, grid):
    """(numeric, analytic_bound) for the kernel of lacunary_spectrum(J)."""
    p = _exponent(p)
    spectrum = lacunary_spectrum(J)
    _check_nyquist(spectrum, grid)
    numeric = lp_norm(indicator_kernel(spectrum).sample(grid), p)
    return numeric, lacunary_series_bound(p)


def no_window_evidence(J, candidate, samples=65):
    """How far a candidate window symbol stays from 1 on the high intervals.

    A window W with W * K = K for the full lacunary spectrum would need
    symbol 1 on every I_j; an integrable W has a decaying symbol, so some
    high interval shows |W^ - 1| >= 1/2.

    Args:
        J: Number of lacunary intervals
        candidate: Object with a vectorized symbol(xi)
        samples: Symbol samples per interval, endpoints included

    Returns:
        dict with 'per_interval', 'max_deviation', 'threshold' and 'evidence'
    """
    spectrum = lacunary_spectrum(J)
    per_interval = []
    for j, (a, b) in enumerate(spectrum.float_intervals(), start=1):
        if j <= J // 2:
            continue
        xi = np.linspace(a, b, samples)
        deviation = float(np.max(np.abs(np.asarray(candidate.symbol(xi)) - 1.0)))
        per_interval.append({'j': j, 'deviation': deviation})
    worst = max(row['deviation'] for row in per_interval)
    return {
        'per_interval': per_interval,
        'max_deviation': worst,
        'threshold': EVIDENCE_THRESHOLD,
        'evidence': worst >= EVIDENCE_THRESHOLD,
    }


# -- norm tables ------------------------------------------------------------------


def _norm_row(args):
    kind, size, p, grid = args
    if kind == 'cantor':
        numeric, bound = cantor_kernel_norm(fat_cantor(size), p, grid)
    else:
        numeric, bound = lacunary_kernel_norm(size, p, grid)
    return {'depth_or_J': size, 'p': p, 'numeric': numeric, 'analytic_bound': bound}


def norm_table(kind, sizes, exponents, grid, workers=1):
    """Rows depth_or_J, p, numeric, analytic_bound over sizes x exponents.

    Args:
        kind: 'cantor' (sizes are depths) or 'lacunary' (sizes are J)
        sizes: Depths or interval counts
        exponents: Exponents p > 1
        grid: Grid for the numeric norms
        workers: Process count; rows come back in input order
    """
    if kind not in ('cantor', 'lacunary'):
        raise PWLabError(f"unknown table kind {kind!r}", 'kind in {cantor, lacunary}')
    jobs = [(kind, size, _exponent(p), grid) for size in sizes for p in exponents]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_norm_row, jobs))
    return [_norm_row(job) for job in jobs]
