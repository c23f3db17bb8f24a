#!/usr/bin/env python3
"""
pwlab: experiment runner for the Paley-Wiener discretization laboratory.

Each experiment resolves its parameters from built-in defaults, an optional
YAML/JSON config file and command-line flags (in increasing precedence),
validates them, runs and writes a CSV artifact whose header echoes the
resolved configuration.
"""

import argparse
import math
import sys
import traceback
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from acceptance import SUITE_IDS, YOUNG_TRIPLES, run_acceptance
from artifacts import sidecar, write_csv, write_json
from discretization import residual_sweep
from errors import CertificateRefused, PWLabError
from frames import (
    SamplingFamily, atomic_decomp, banach_frame_reconstruct, contraction_cert,
    error_curve_rows, shannon_error
)
from grid_core import (
    ExponentTriple, Grid, GridFunction, Weight, lp_norm, parse_exponent, young_margin
)
from kernels import (
    bandlimited_signal, kernel_local_max, kernel_oscillation, sinc_kernel, smooth_window
)
from pathology import cantor_to_dict, fat_cantor, gap_sum_bound, norm_table
from toeplitz_lab import METHODS, eigensweep, format_value

CONFIG_SCHEMA_VERSION = 1

EXPERIMENTS = ('eigensweep', 'shannon', 'frames', 'atomic', 'cantor', 'lacunary', 'young', 'osc')

# Per-experiment defaults; a config file or flag may only set these keys.
DEFAULTS = {
    'eigensweep': {'omega': 0.5, 'n': '0..6', 'method': 'auto'},
    'shannon': {
        'omega': 0.5, 'R': 0.5, 'T': 64, 'h': 1 / 64, 'window': None,
        'shift': 5 / 16, 'signals': 'kernel,shifted,bandlimited',
    },
    'frames': {
        'omega': 0.5, 'step': 1 / 8, 'bupu_half': 1 / 16, 'margin': 0.25,
        'T': 256, 'h': 1 / 32, 'r': '2', 'tol': 1e-10, 'max_iter': 50,
    },
    'atomic': {
        'omega': 0.5, 'step': 1 / 8, 'bupu_half': 1 / 16, 'margin': 0.25,
        'T': 256, 'h': 1 / 32, 'r': '2', 'tol': 1e-7, 'max_iter': 50,
    },
    'cantor': {'depth': '12', 'p': '4/3,2,4', 'T': 256, 'h': 1 / 4},
    'lacunary': {'J': '6', 'p': '2', 'T': 64, 'h': 1 / 128},
    'young': {'trials': 200, 'T': 16, 'h': 1 / 16, 'weight_exponent': 1.0},
    'osc': {'omega': 0.5, 'n': '0..6', 'T': 64, 'h': 1 / 64, 'refine': 4, 'residual_levels': '0..3'},
}

SIGNALS = ('kernel', 'shifted', 'bandlimited')


def parse_number(value):
    """Float from a number or a string such as '0.25', '1/4' or 'inf'."""
    if isinstance(value, bool):
        raise PWLabError(f"expected a number, got {value!r}", 'numeric parameter')
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower()
    if text in ('inf', 'infinity'):
        return math.inf
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise PWLabError(f"expected a number, got {value!r}", 'numeric parameter')


def parse_int_list(value):
    """'a..b' (inclusive range), 'x,y,z' or a single integer."""
    if isinstance(value, int) and not isinstance(value, bool):
        return [value]
    if isinstance(value, list):
        return [int(v) for v in value]
    text = str(value).strip()
    try:
        if '..' in text:
            lo, hi = text.split('..')
            lo, hi = int(lo), int(hi)
            if lo > hi:
                raise PWLabError(f"empty range {text!r}", 'a <= b in a..b')
            return list(range(lo, hi + 1))
        return [int(part) for part in text.split(',')]
    except ValueError:
        raise PWLabError(f"expected integers, got {value!r}", 'integer list')


def parse_exponent_list(value):
    if isinstance(value, list):
        items = value
    else:
        items = str(value).split(',')
    return [parse_exponent(item) for item in items]


def _positive(name, value):
    if not value > 0:
        raise PWLabError(f"{name} must be positive, got {value}", f'{name} > 0')
    return value


def load_config(path):
    """Read a YAML or JSON config file (JSON is parsed as YAML)."""
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise PWLabError(f"cannot read config {path}: {e}", 'readable config')
    except yaml.YAMLError as e:
        raise PWLabError(f"config {path} is not valid YAML/JSON: {e}", 'valid config')
    if not isinstance(data, dict):
        raise PWLabError(f"config {path} must be a mapping", 'valid config')
    return data


def resolve_config(experiment, flags, config_path=None, seed=None):
    """Merge defaults, the config file and flags, then validate the keys.

    Returns:
        dict with schema_version, experiment, seed and params
    """
    params = dict(DEFAULTS[experiment])
    file_seed = None
    if config_path:
        data = load_config(config_path)
        unknown = set(data) - {'schema_version', 'experiment', 'seed', 'params'}
        if unknown:
            raise PWLabError(f"unknown config keys {sorted(unknown)}", 'known parameter')
        version = data.get('schema_version', CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise PWLabError(
                f"config schema_version {version} is not {CONFIG_SCHEMA_VERSION}",
                'schema_version 1'
            )
        if data.get('experiment', experiment) != experiment:
            raise PWLabError(
                f"config is for {data['experiment']!r}, not {experiment!r}", 'matching experiment'
            )
        file_params = data.get('params') or {}
        unknown = set(file_params) - set(params)
        if unknown:
            raise PWLabError(
                f"unknown parameters for {experiment}: {sorted(unknown)}", 'known parameter'
            )
        params.update(file_params)
        file_seed = data.get('seed')
    for key, value in flags.items():
        if value is not None:
            params[key] = value
    if seed is None:
        seed = file_seed if file_seed is not None else 0
    return {
        'schema_version': CONFIG_SCHEMA_VERSION,
        'experiment': experiment,
        'seed': int(seed),
        'params': params,
    }


def make_grid(params):
    return Grid(_positive('T', parse_number(params['T'])), _positive('h', parse_number(params['h'])))


def say(quiet, message):
    if not quiet:
        print(message)


# -- experiments ------------------------------------------------------------------


def run_eigensweep(config, workers, quiet):
    params = config['params']
    levels = parse_int_list(params['n'])
    if params['method'] not in ('auto',) + METHODS:
        raise PWLabError(
            f"unknown eigen method {params['method']!r}",
            'method in {auto, dense, bisection, extended}'
        )
    omega = _positive('omega', parse_number(params['omega']))
    rows = eigensweep(min(levels), max(levels), omega, params['method'], workers)
    rows = [row for row in rows if row['n'] in levels]
    for row in rows:
        say(quiet, f"  n={row['n']}: size {row['size']}, lambda_min {format_value(row['lambda_min'])} "
                   f"({row['method']})")
    columns = ['n', 'size', 'lambda_min', 'lambda_max', 'sn_norm', 'c_n', 'method', 'residual']
    smallest = min(r['lambda_min'] for r in rows)
    summary = f"{len(rows)} levels, smallest lambda_min {format_value(smallest)}"
    return columns, rows, summary


def run_shannon(config, workers, quiet):
    params = config['params']
    grid = make_grid(params)
    omega = _positive('omega', parse_number(params['omega']))
    R = _positive('R', parse_number(params['R']))
    window = None if params['window'] is None else parse_number(params['window'])
    shift = parse_number(params['shift'])
    signals = [s.strip() for s in str(params['signals']).split(',')]
    for name in signals:
        if name not in SIGNALS:
            raise PWLabError(f"unknown signal {name!r}", 'signal in {kernel, shifted, bandlimited}')
    K = sinc_kernel(omega)
    rng = np.random.default_rng(config['seed'])
    rows = []
    for name in signals:
        envelope = None
        if name == 'kernel':
            f = K.sample(grid)
        elif name == 'shifted':
            grid.steps(shift)
            f = GridFunction.from_callable(grid, K.shifted(shift))
            envelope = K.envelope_constant() * (1 + abs(shift))
        else:
            f = bandlimited_signal(grid, K.spectrum, rng)
        result = shannon_error(f, R, K, window, envelope)
        rows.append({
            'signal': name, 'R': R, 'count': result['count'],
            'rel_error': result['rel_error'], 'truncation_bound': result['truncation_bound'],
        })
        say(quiet, f"  {name}: rel error {result['rel_error']:.3e} "
                   f"(truncation bound {result['truncation_bound']:.3e})")
    columns = ['signal', 'R', 'count', 'rel_error', 'truncation_bound']
    summary = f"max rel error {max(r['rel_error'] for r in rows):.3e}"
    return columns, rows, summary


def _frame_setup(config):
    params = config['params']
    grid = make_grid(params)
    omega = _positive('omega', parse_number(params['omega']))
    step = _positive('step', parse_number(params['step']))
    bupu_half = _positive('bupu_half', parse_number(params['bupu_half']))
    margin = _positive('margin', parse_number(params['margin']))
    r = float(parse_exponent(params['r']))
    tol = parse_number(params['tol'])
    max_iter = int(params['max_iter'])
    K = sinc_kernel(omega)
    W = smooth_window(K.spectrum, margin, grid)
    X = SamplingFamily.lattice(step, grid.half_width - step)
    X.check_dense(bupu_half)
    cert = contraction_cert(K, W, bupu_half, r)
    f = bandlimited_signal(grid, K.spectrum, np.random.default_rng(config['seed']))
    return grid, K, W, X, bupu_half, r, tol, max_iter, cert, f


def _curve_output(curve, cert, out, quiet):
    rows = [
        {'iter': m, 'error_r': error, 'ratio': ratio}
        for m, error, ratio in error_curve_rows(curve)
    ]
    for row in rows:
        say(quiet, f"  iter {row['iter']}: error {row['error_r']:.3e}")
    path = write_json(sidecar(out, '.cert.json'), cert.to_dict())
    print(f"Wrote {path}")
    return ['iter', 'error_r', 'ratio'], rows


def run_frames(config, workers, quiet, out):
    grid, K, W, X, bupu_half, r, tol, max_iter, cert, f = _frame_setup(config)
    say(quiet, f"  certificate: c = {cert.c:.6f} (C_U = {cert.c_u:.6f})")
    result = banach_frame_reconstruct(
        f, X, bupu_half, K, r, tol, max_iter, W=W, cert=cert
    )
    columns, rows = _curve_output(result.error_curve, cert, out, quiet)
    summary = f"rel error {result.error_curve[-1]:.3e} after {result.iterations} iterations"
    return columns, rows, summary


def run_atomic(config, workers, quiet, out):
    grid, K, W, X, bupu_half, r, tol, max_iter, cert, f = _frame_setup(config)
    say(quiet, f"  certificate: c = {cert.c:.6f} (C_U = {cert.c_u:.6f})")
    result = atomic_decomp(f, X, bupu_half, K, W, r, tol, max_iter, cert=cert)
    columns, rows = _curve_output(result.error_curve, cert, out, quiet)
    summary = (
        f"recon error {result.recon_error:.3e} after {result.iterations} iterations, "
        f"|coeffs|_r = {result.coeffs.norm(r):.6g}"
    )
    return columns, rows, summary


def _table(kind, sizes, config, workers, quiet):
    params = config['params']
    grid = make_grid(params)
    exponents = parse_exponent_list(params['p'])
    rows = norm_table(kind, sizes, exponents, grid, workers)
    for row in rows:
        row['p'] = str(row['p'])
        say(quiet, f"  {row['depth_or_J']}, p={row['p']}: {row['numeric']:.6g} "
                   f"<= {row['analytic_bound']:.6g}")
    columns = ['depth_or_J', 'p', 'numeric', 'analytic_bound']
    worst = max(row['numeric'] / row['analytic_bound'] for row in rows)
    return columns, rows, f"{len(rows)} rows, max numeric/bound {worst:.6f}"


def run_cantor(config, workers, quiet, out):
    depths = parse_int_list(config['params']['depth'])
    columns, rows, summary = _table('cantor', depths, config, workers, quiet)
    for row in rows:
        row['gap_sum_bound'] = gap_sum_bound(row['depth_or_J'], parse_exponent(row['p']))
    ca = fat_cantor(max(depths))
    path = write_json(sidecar(out, '.json'), cantor_to_dict(ca))
    print(f"Wrote {path}")
    return columns + ['gap_sum_bound'], rows, summary


def run_lacunary(config, workers, quiet, out):
    sizes = parse_int_list(config['params']['J'])
    return _table('lacunary', sizes, config, workers, quiet)


def run_young(config, workers, quiet):
    params = config['params']
    grid = make_grid(params)
    trials = int(params['trials'])
    if trials < 1:
        raise PWLabError(f"trials must be positive, got {trials}", 'trials >= 1')
    weights = [
        ('constant_one', Weight.constant_one()),
        ('polynomial', Weight.polynomial(parse_number(params['weight_exponent']))),
    ]
    triples = [ExponentTriple(*t) for t in YOUNG_TRIPLES]
    rng = np.random.default_rng(config['seed'])
    x = grid.points()
    support = np.abs(x) < grid.half_width / 2
    rows = []
    for trial in range(trials):
        triple = triples[trial % len(triples)]
        name, weight = weights[(trial // len(triples)) % len(weights)]
        f, g = (
            GridFunction(grid, (rng.normal(size=x.size) + 1j * rng.normal(size=x.size)) * support)
            for _ in range(2)
        )
        margin, _ = young_margin(f, g, triple, weight, weight)
        rows.append({
            'trial': trial, 'p': str(triple.p), 'q': str(triple.q), 'r': str(triple.r),
            'weight': name, 'margin': margin,
        })
    columns = ['trial', 'p', 'q', 'r', 'weight', 'margin']
    return columns, rows, f"max margin {max(r['margin'] for r in rows):.6f} over {trials} trials"


def run_osc(config, workers, quiet):
    params = config['params']
    grid = make_grid(params)
    omega = _positive('omega', parse_number(params['omega']))
    refine = int(params['refine'])
    levels = parse_int_list(params['n'])
    K = sinc_kernel(omega)
    norm_k = lp_norm(K.sample(grid), 2)
    residual_levels = parse_int_list(params['residual_levels'])
    f = bandlimited_signal(grid, K.spectrum, np.random.default_rng(config['seed']))
    residuals = dict(residual_sweep(f, [n for n in residual_levels if n in levels], K))
    rows = []
    for n in levels:
        q_half = 2.0 ** (-n - 1)
        rows.append({
            'n': n,
            'osc_l2': lp_norm(kernel_oscillation(K, q_half, grid, refine), 2),
            'local_max_l2': lp_norm(kernel_local_max(K, q_half, grid, refine), 2),
            'kernel_l2': norm_k,
            'residual': residuals.get(n),
        })
        say(quiet, f"  n={n}: |osc K|_2 = {rows[-1]['osc_l2']:.6e}")
    columns = ['n', 'osc_l2', 'local_max_l2', 'kernel_l2', 'residual']
    return columns, rows, f"{len(rows)} levels"


RUNNERS = {
    'eigensweep': (run_eigensweep, False),
    'shannon': (run_shannon, False),
    'frames': (run_frames, True),
    'atomic': (run_atomic, True),
    'cantor': (run_cantor, True),
    'lacunary': (run_lacunary, True),
    'young': (run_young, False),
    'osc': (run_osc, False),
}


def run(config, out=None, workers=1, quiet=False):
    """Run one resolved experiment and write its CSV artifact.

    Returns:
        Path of the CSV file
    """
    experiment = config['experiment']
    out = Path(out or f"{experiment}.csv")
    runner, wants_out = RUNNERS[experiment]
    say(quiet, f"Running {experiment}...")
    if wants_out:
        columns, rows, summary = runner(config, workers, quiet, out)
    else:
        columns, rows, summary = runner(config, workers, quiet)
    path = write_csv(out, columns, rows, config)
    print(f"{experiment}: {summary}")
    print(f"Wrote {path}")
    return path


# -- argument parsing --------------------------------------------------------------

FLAG_SPECS = {
    'omega': ('--omega', 'Band limit omega of the sinc kernel'),
    'n': ('--n', 'Levels as a..b or a list'),
    'method': ('--method', 'Eigen path: auto, dense, bisection or extended'),
    'R': ('--R', 'Sampling parameter; samples at k/(2R)'),
    'T': ('--T', 'Grid half-width'),
    'h': ('--h', 'Grid spacing'),
    'window': ('--window', 'Half-width of the interior error window'),
    'shift': ('--shift', 'Shift of the translated kernel'),
    'signals': ('--signals', 'Comma list of kernel, shifted, bandlimited'),
    'step': ('--step', 'Lattice step of the sampling family'),
    'bupu_half': ('--bupu-half', 'Half-width of the unit cell U'),
    'margin': ('--margin', 'Frequency margin of the smooth window W'),
    'r': ('--r', 'Exponent r of the norm'),
    'tol': ('--tol', 'Stopping tolerance'),
    'max_iter': ('--max-iter', 'Iteration cap'),
    'depth': ('--depth', 'Cantor depths as a..b or a list'),
    'p': ('--p', 'Exponents, comma separated (fractions allowed)'),
    'J': ('--J', 'Numbers of lacunary intervals as a..b or a list'),
    'trials': ('--trials', 'Number of random trials'),
    'weight_exponent': ('--weight-exponent', 'Exponent a of the polynomial weight'),
    'refine': ('--refine', 'Refinement of the oscillation offsets'),
    'residual_levels': ('--residual-levels', 'Levels for projection residuals'),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog='pwlab',
        description='Numerical laboratory for Paley-Wiener discretization',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s eigensweep --omega 0.5 --n 0..6
  %(prog)s shannon --omega 0.5 --R 0.5 --T 64 --h 0.015625
  %(prog)s cantor --depth 12 --p 4/3,2,4
  %(prog)s frames --config example.yml --out frames.csv
  %(prog)s acceptance all
        """
    )
    subparsers = parser.add_subparsers(dest='experiment', required=True)
    for experiment in EXPERIMENTS:
        sub = subparsers.add_parser(experiment, help=f'Run the {experiment} experiment')
        for key in DEFAULTS[experiment]:
            flag, help_text = FLAG_SPECS[key]
            sub.add_argument(flag, dest=key, default=None, help=help_text)
        _add_common(sub)
    sub = subparsers.add_parser('acceptance', help='Run the acceptance suites')
    sub.add_argument('suite', nargs='?', default='all', choices=('all',) + SUITE_IDS)
    _add_common(sub, config=False)
    return parser


def _add_common(sub, config=True):
    if config:
        sub.add_argument('--config', default=None, help='YAML or JSON config file')
        sub.add_argument('--workers', type=int, default=1, help='Worker processes for sweeps')
    sub.add_argument('--seed', type=int, default=None, help='Random seed (default 0)')
    sub.add_argument('--out', default=None, help='Artifact path')
    sub.add_argument('--quiet', action='store_true', help='Only print the summary')


def main(argv=None):
    """Main entry point for the script."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.experiment == 'acceptance':
            seed = 0 if args.seed is None else args.seed
            verdict = run_acceptance(args.suite, args.out, seed, args.quiet)
            return 0 if verdict['passed'] else 1
        flags = {key: getattr(args, key) for key in DEFAULTS[args.experiment]}
        config = resolve_config(args.experiment, flags, args.config, args.seed)
        run(config, args.out, args.workers, args.quiet)
        return 0
    except CertificateRefused as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except PWLabError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        traceback.print_exc()
        return 1


if __name__ == '__main__':
    sys.exit(main())
