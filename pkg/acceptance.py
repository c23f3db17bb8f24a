"""
Acceptance suites: one check per criterion, each returning (passed, detail).

run_acceptance runs a selection in the fixed order below, times every suite
and writes a JSON verdict.
"""

import math
import sys
import time
import traceback
from fractions import Fraction
from pathlib import Path

import numpy as np

from artifacts import JSON_SCHEMA_VERSION, write_csv, write_json
from discretization import CoefSeq, DyadicScheme, coefficient_bound, seq_synth_bound
from errors import PWLabError
from frames import (
    RATIO_SLACK, SamplingFamily, atomic_decomp, banach_frame_reconstruct,
    contraction_cert, max_tail_ratio, shannon_error
)
from grid_core import (
    ExponentTriple, Grid, GridFunction, Weight, convolve, lp_norm, lp_norm_on, young_margin
)
from kernels import (
    bandlimited_signal, kernel_local_max, kernel_oscillation, sinc_kernel, smooth_window
)
from pathology import (
    cantor_kernel_norm, fat_cantor, lacunary_kernel_norm, lacunary_spectrum,
    plancherel_gap, removed_total, sinc_lp_norm
)
from toeplitz_lab import (
    REFERENCE_MAX_SIZE, SINGULAR_THRESHOLD, agrees, eig_extremes, eigensweep, format_value,
    prolate_matrix, reference_lambda_min
)

SUITE_IDS = (
    'shannon', 'reproducing', 'eigensweep', 'coefficients', 'sequence',
    'young', 'cantor', 'lacunary', 'frames', 'oscillation',
)

OMEGA = 0.5

YOUNG_TRIPLES = (('2', '1', '2'), ('4', '4/3', '2'), ('4', '2', '4/3'), ('inf', '2', '2'))

WEIGHT_PAIRS = (
    (Weight.constant_one(), Weight.constant_one()),
    (Weight.polynomial(1), Weight.polynomial(1)),
)


def _random_step(grid, rng, support):
    """Random complex step function with unit-1/8 cells on |x| < support."""
    x = grid.points()
    cells = np.floor(x * 8).astype(int)
    table = rng.normal(size=cells.max() - cells.min() + 1)
    table = table + 1j * rng.normal(size=table.size)
    values = table[cells - cells.min()]
    values[np.abs(x) >= support] = 0
    return GridFunction(grid, values)


def suite_shannon(context):
    grid = Grid(64, 1 / 64)
    K = sinc_kernel(OMEGA)
    spectrum = K.spectrum
    rng = np.random.default_rng(context['seed'])
    shift = 5 / 16
    A_shift = K.envelope_constant() * (1 + shift)
    cases = [
        ('kernel', K.sample(grid), 0.5, None),
        ('shifted kernel', GridFunction.from_callable(grid, K.shifted(shift)), 0.5, A_shift),
        ('band-limited', bandlimited_signal(grid, spectrum, rng), 0.5, None),
        ('band-limited, R = 1', bandlimited_signal(grid, spectrum, rng), 1.0, None),
    ]
    details = []
    passed = True
    for name, f, R, envelope in cases:
        result = shannon_error(f, R, K, envelope=envelope)
        limit = 1e-3
        if envelope is not None:
            # 1/x sample tails: the dropped-sample bound is the honest target
            limit = max(limit, result['truncation_bound'])
        ok = result['rel_error'] <= limit
        passed &= ok
        details.append(f"{name}: {result['rel_error']:.2e} (limit {limit:.2e})")
    return passed, '; '.join(details)


def suite_reproducing(context):
    rng = np.random.default_rng(context['seed'])
    grid = Grid(128, 1 / 16)
    K = sinc_kernel(OMEGA)
    Kg = K.sample(grid)
    window = grid.half_width / 2
    worst = 0.0
    for _ in range(20):
        f = bandlimited_signal(grid, K.spectrum, rng)
        error = lp_norm_on(convolve(f, Kg) - f, 2, None, -window, window)
        worst = max(worst, error / lp_norm_on(f, 2, None, -window, window))
    small = Grid(64, 1 / 32)
    f = bandlimited_signal(small, K.spectrum, rng)
    g = K.sample(small)
    fast, direct = convolve(f, g, 'fft'), convolve(f, g, 'direct')
    agreement = lp_norm(fast - direct, 2) / lp_norm(direct, 2)
    passed = worst <= 1e-6 and agreement <= 1e-10
    return passed, f"max rel error {worst:.2e}; fft vs direct {agreement:.2e} at N = {small.count}"


def suite_eigensweep(context):
    M0 = prolate_matrix(DyadicScheme(0), OMEGA).dense()
    anchor = M0.shape == (1, 1) and M0[0, 0] == 1.0
    rows = eigensweep(0, 6, OMEGA, 'auto')
    positive = all(row['lambda_min'] > 0 for row in rows)
    bounded = all(row['lambda_max'] <= 1 + 1e-9 for row in rows)
    agree = True
    compared, verified = [], []
    reports = []
    for row in rows:
        n = row['n']
        M = prolate_matrix(DyadicScheme(n), OMEGA)
        dense, bisection = eig_extremes(M, 'dense'), eig_extremes(M, 'bisection')
        # below the threshold both double paths return rounding noise
        if dense.lambda_min > SINGULAR_THRESHOLD and bisection.lambda_min > SINGULAR_THRESHOLD:
            agree &= agrees(dense.lambda_min, bisection.lambda_min)
            compared.append(n)
        entry = {'n': n, 'dense': dense.to_dict(), 'bisection': bisection.to_dict()}
        if row['method'] == 'extended' and M.size <= REFERENCE_MAX_SIZE:
            reference = reference_lambda_min(M, row['precision'] + 20)
            agree &= agrees(row['lambda_min'], reference)
            verified.append(n)
            entry['reference_lambda_min'] = format_value(reference)
        reports.append(entry)
    out_dir = context.get('out_dir')
    if out_dir is not None:
        path = Path(out_dir) / 'eigensweep_lambda_min.csv'
        columns = ['n', 'size', 'lambda_min', 'lambda_max', 'sn_norm', 'c_n', 'method']
        write_csv(path, columns, rows, {'experiment': 'eigensweep', 'omega': OMEGA, 'n': '0..6'})
        context.setdefault('artifacts', []).append(str(path))
        path = write_json(
            Path(out_dir) / 'eigensweep_reports.json',
            {'schema_version': JSON_SCHEMA_VERSION, 'omega': OMEGA, 'levels': reports},
        )
        context['artifacts'].append(str(path))
    passed = anchor and positive and bounded and agree and bool(compared) and bool(verified)
    detail = (
        f"M_0 = [1]: {anchor}; lambda_min > 0: {positive}; lambda_max <= 1: {bounded}; "
        f"dense vs bisection at n = {compared}, extended vs eigsy at n = {verified}: {agree}"
    )
    return passed, detail


def suite_coefficients(context):
    rng = np.random.default_rng(context['seed'])
    grid = Grid(32, 1 / 64)
    worst = 0.0
    for _ in range(50):
        f = _random_step(grid, rng, 30)
        for r in (Fraction(4, 3), 2, 3):
            for m, w in WEIGHT_PAIRS:
                for n in (1, 2, 3):
                    lhs, rhs = coefficient_bound(f, DyadicScheme(n), r, m, w)
                    worst = max(worst, lhs / rhs)
    return worst <= 1 + 1e-6, f"max lhs/rhs {worst:.6f} over 50 functions"


def suite_sequence(context):
    rng = np.random.default_rng(context['seed'])
    grid = Grid(16, 1 / 64)
    worst = 0.0
    for _ in range(100):
        s = DyadicScheme(int(rng.integers(1, 4)))
        indices = s.indices()
        size = int(rng.integers(1, min(12, indices.size) + 1))
        chosen = np.sort(rng.choice(indices, size=size, replace=False))
        values = rng.normal(size=chosen.size) + 1j * rng.normal(size=chosen.size)
        d = CoefSeq(chosen, values, chosen * s.spacing)
        for p in (1, 2, math.inf):
            for m, w in WEIGHT_PAIRS:
                lhs, rhs = seq_synth_bound(d, s, p, m, w, grid)
                worst = max(worst, lhs / rhs)
    return worst <= 1 + 1e-9, f"max lhs/rhs {worst:.6f} over 100 sequences"


def suite_young(context):
    rng = np.random.default_rng(context['seed'])
    grid = Grid(16, 1 / 16)
    triples = [ExponentTriple(*t) for t in YOUNG_TRIPLES]
    worst = 0.0
    for trial in range(200):
        triple = triples[trial % len(triples)]
        m, w = WEIGHT_PAIRS[(trial // len(triples)) % len(WEIGHT_PAIRS)]
        f = _random_step(grid, rng, 8)
        g = _random_step(grid, rng, 8)
        margin, _ = young_margin(f, g, triple, m, w)
        worst = max(worst, margin)
    return worst <= 1 + 1e-6, f"max margin {worst:.6f} over 200 trials"


def suite_cantor(context):
    ca = fat_cantor(12)
    removed = ca.removed_measure()
    exact = removed == removed_total(12) and removed <= Fraction(1, 2)
    grid = Grid(256, 1 / 4)
    rows = []
    within = True
    for p in (Fraction(4, 3), 2, 4):
        numeric, bound = cantor_kernel_norm(ca, p, grid)
        within &= numeric <= bound * (1 + 1e-6)
        rows.append(f"p={p}: {numeric:.4g} <= {bound:.4g}")
    # Plancherel: the grid sum of |K_E|^2 plus the lattice tail outside it is |E|
    plancherel = True
    checks = []
    for depth in (10, 12):
        gap, tail = plancherel_gap(fat_cantor(depth).gaps(), Grid(1024, 1 / 4))
        plancherel &= abs(gap - tail) <= 1e-6
        checks.append(f"depth {depth}: gap {gap:.4e} - tail {tail:.4e} = {gap - tail:.1e}")
    passed = exact and within and plancherel
    detail = (
        f"|removed| = {float(removed):.12f} exact: {exact}; {'; '.join(rows)}; "
        f"Plancherel {'; '.join(checks)}"
    )
    return passed, detail


def suite_lacunary(context):
    spectrum = lacunary_spectrum(20)
    contained = all(
        Fraction(2) ** (j - 1) < a and b < Fraction(2) ** j
        for j, (a, b) in enumerate(spectrum.intervals, start=1)
    )
    grid = Grid(64, 1 / 128)
    numeric, bound = lacunary_kernel_norm(6, 2, grid)
    within = numeric <= bound * (1 + 1e-6)
    gap, tail = plancherel_gap(lacunary_spectrum(6), grid)
    plancherel = abs(gap - tail) <= 1e-8
    # I_1 has length 1/4: |K_1|_4 = 2^(-3/2) |F|_4
    single, _ = lacunary_kernel_norm(1, 4, Grid(256, 1 / 8))
    scaling = abs(single - 2 ** -1.5 * sinc_lp_norm(4)) <= 1e-6 * single
    passed = contained and within and plancherel and scaling
    return passed, (
        f"I_j inside (2^(j-1), 2^j) for j <= 20: {contained}; |K_6|_2 = {numeric:.6f} <= {bound:.6f}; "
        f"Plancherel gap - tail = {gap - tail:.1e}; J = 1 scaling: {scaling}"
    )


def suite_frames(context):
    rng = np.random.default_rng(context['seed'])
    grid = Grid(256, 1 / 32)
    K = sinc_kernel(OMEGA)
    W = smooth_window(K.spectrum, 0.25, grid)
    bupu_half = 1 / 16
    X = SamplingFamily.lattice(1 / 8, grid.half_width - 1 / 8)
    cert = contraction_cert(K, W, bupu_half, 2)
    if not cert.granted:
        return False, f"certificate refused: c = {cert.c:.4f}"
    f = bandlimited_signal(grid, K.spectrum, rng)
    frame = banach_frame_reconstruct(f, X, bupu_half, K, 2, tol=1e-10, max_iter=50, W=W, cert=cert)
    ratio = max_tail_ratio(frame.error_curve)
    frame_ok = frame.error_curve[-1] <= 1e-6 and ratio <= cert.c + RATIO_SLACK
    worst = 0.0
    for _ in range(10):
        g = bandlimited_signal(grid, K.spectrum, rng)
        result = atomic_decomp(g, X, bupu_half, K, W, 2, tol=1e-7, max_iter=50, cert=cert)
        worst = max(worst, result.recon_error)
    passed = frame_ok and worst <= 1e-6
    detail = (
        f"c = {cert.c:.4f}; frame error {frame.error_curve[-1]:.2e} after "
        f"{frame.iterations} iterations, max ratio {ratio:.3f}; atomic max error {worst:.2e}"
    )
    return passed, detail


def suite_oscillation(context):
    grid = Grid(64, 1 / 64)
    K = sinc_kernel(OMEGA)
    norm_k = lp_norm(K.sample(grid), 2)
    norms = []
    bounded = True
    for n in range(7):
        q_half = 2.0 ** (-n - 1)
        osc = lp_norm(kernel_oscillation(K, q_half, grid), 2)
        bounded &= osc <= lp_norm(kernel_local_max(K, q_half, grid), 2) + norm_k
        norms.append(osc)
    decreasing = all(b < a for a, b in zip(norms, norms[1:]))
    passed = decreasing and bounded
    return passed, "osc norms " + ', '.join(f"{v:.3e}" for v in norms)


SUITES = {
    'shannon': suite_shannon,
    'reproducing': suite_reproducing,
    'eigensweep': suite_eigensweep,
    'coefficients': suite_coefficients,
    'sequence': suite_sequence,
    'young': suite_young,
    'cantor': suite_cantor,
    'lacunary': suite_lacunary,
    'frames': suite_frames,
    'oscillation': suite_oscillation,
}


def run_acceptance(selection='all', out=None, seed=0, quiet=False):
    """Run the selected suites and write the JSON verdict.

    Args:
        selection: 'all' or one suite id
        out: Verdict path (default acceptance.json); side artifacts go next to it
        seed: Seed for the randomized suites
        quiet: Suppress per-suite lines

    Returns:
        The verdict mapping
    """
    if selection == 'all':
        ids = SUITE_IDS
    elif selection in SUITES:
        ids = (selection,)
    else:
        raise PWLabError(f"unknown acceptance suite {selection!r}", 'known suite id')
    out = Path(out or 'acceptance.json')
    context = {'seed': seed, 'out_dir': out.parent}
    verdicts = []
    for suite_id in ids:
        start = time.perf_counter()
        try:
            passed, detail = SUITES[suite_id](context)
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
            if not quiet:
                traceback.print_exc()
        seconds = time.perf_counter() - start
        verdicts.append({
            'id': suite_id,
            'passed': bool(passed),
            'detail': detail,
            'seconds': round(seconds, 3),
        })
        if not quiet:
            mark = '✓' if passed else '✗'
            print(f"{mark} {suite_id} ({seconds:.1f}s): {detail}")
    verdict = {
        'schema_version': JSON_SCHEMA_VERSION,
        'verdicts': verdicts,
        'passed': all(v['passed'] for v in verdicts),
    }
    write_json(out, verdict)
    for path in context.get('artifacts', []):
        print(f"Wrote {path}")
    print(f"Wrote {out}")
    failed = [v['id'] for v in verdicts if not v['passed']]
    if failed:
        print(f"Failed: {', '.join(failed)}", file=sys.stderr)
    return verdict
