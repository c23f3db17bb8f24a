#!/usr/bin/env python3
"""
Tests for the dyadic schemes, BUPU coefficients, synthesis and projections.
"""

import math
import sys
import traceback

import numpy as np

from errors import IllConditionedGramError, PWLabError, ResolutionError
from grid_core import Grid, GridFunction, Weight, box, kernel_convolve, lp_norm, lp_norm_on
from kernels import Spectrum, bandlimited_signal, sinc_kernel
from discretization import (
    CoefSeq, bound_report, bupu_coeffs, coefficient_bound, pointwise_atom_bound,
    projection_approx, residual_sweep, scheme, seq_synth_bound, synthesize, tn_apply
)
from toeplitz_lab import sn_norm


def _random_coefficients(s, rng):
    values = rng.normal(size=s.indices().size) + 1j * rng.normal(size=s.indices().size)
    return CoefSeq(s.indices(), values, s.centers())


def test_scheme_geometry():
    """Test spacing, cube, window and index set of a level."""
    print("Testing DyadicScheme geometry...")

    s = scheme(2)
    assert s.spacing == 0.25
    assert s.q_half == 0.125
    assert s.cube_measure == 0.25
    assert s.window == 8
    assert list(s.indices()) == list(range(-8, 9))
    assert s.centers()[0] == -2.0 and s.centers()[-1] == 2.0
    lo, hi = s.cells()
    assert np.allclose(hi - lo, 0.25)
    assert s.overlap == 2

    assert scheme(0).window == 0
    assert list(scheme(0).centers()) == [0.0]

    for bad in (-1, 1.5, True):
        try:
            scheme(bad)
            assert False, f"level {bad!r} should be rejected"
        except PWLabError:
            pass

    print("✓ DyadicScheme geometry test passed")


def test_partition_of_unity():
    """The half-open cells tile the grid exactly once."""
    print("Testing partition_of_unity...")

    grid = Grid(4, 1 / 16)
    for n in range(0, 4):
        total = scheme(n).partition_of_unity(grid)
        assert np.array_equal(total, np.ones(grid.count)), f"level {n}"

    print("✓ partition_of_unity test passed")


def test_check_resolution():
    """Cells must be grid-aligned and fit inside the grid."""
    print("Testing check_resolution...")

    scheme(2).check_resolution(Grid(4, 1 / 8))
    try:
        scheme(3).check_resolution(Grid(4, 1 / 8))
        assert False, "q_half = 1/16 on h = 1/8 should raise"
    except ResolutionError:
        pass

    try:
        scheme(3).check_resolution(Grid(2, 1 / 64))
        assert False, "window beyond the grid should raise"
    except ResolutionError as e:
        assert e.precondition == 'window inside grid'

    print("✓ check_resolution test passed")


def test_bupu_coeffs():
    """Test cell integrals of constants and boxes."""
    print("Testing bupu_coeffs...")

    grid = Grid(8, 1 / 32)
    one = GridFunction(grid, np.ones(grid.count))
    for n in range(0, 4):
        s = scheme(n)
        c = bupu_coeffs(one, s)
        assert len(c) == 2 * s.window + 1
        assert np.allclose(c.values, s.cube_measure, rtol=0, atol=1e-15)

    # only the right half of the level-0 cell meets [0, 1)
    c = bupu_coeffs(box(grid, 0, 1), scheme(0))
    assert c.as_dict() == {0: 0.5 + 0j}

    c = bupu_coeffs(box(grid, 0, 1), scheme(1))
    assert list(c.support()) == [0, 1, 2]
    assert np.allclose(c.values[c.indices >= 0], [0.25, 0.5, 0.25])

    print("✓ bupu_coeffs test passed")


def test_coefficient_bound_holds():
    """|c|_{l_r,m} never exceeds the Hoelder bound."""
    print("Testing coefficient_bound...")

    rng = np.random.default_rng(7)
    grid = Grid(16, 1 / 32)
    spectrum = Spectrum.symmetric(0.5)
    for m in (Weight.constant_one(), Weight.polynomial(1)):
        for r in (1, 2, 4, math.inf):
            for n in (0, 2, 3):
                f = bandlimited_signal(grid, spectrum, rng)
                lhs, rhs = coefficient_bound(f, scheme(n), r, m, m)
                assert lhs <= rhs * (1 + 1e-12), f"r={r}, n={n}: {lhs} > {rhs}"

    print("✓ coefficient_bound test passed")


def test_sequence_synthesis_bound_holds():
    """Step-function synthesis is bounded by the weighted sequence norm."""
    print("Testing seq_synth_bound...")

    rng = np.random.default_rng(8)
    grid = Grid(16, 1 / 32)
    for m in (Weight.constant_one(), Weight.polynomial(1)):
        for p in (1, 2, 3, math.inf):
            for n in (1, 2, 3):
                s = scheme(n)
                d = _random_coefficients(s, rng)
                lhs, rhs = seq_synth_bound(d, s, p, m, m, grid)
                assert lhs <= rhs * (1 + 1e-12), f"p={p}, n={n}"

    empty = CoefSeq([], [], [])
    try:
        seq_synth_bound(empty, scheme(1), 2, Weight.constant_one(), Weight.constant_one(), grid)
        assert False, "empty sequence should raise"
    except PWLabError:
        pass

    print("✓ seq_synth_bound test passed")


def test_pointwise_atom_bound():
    """|sum d_k K(y - x_k)| stays under the averaged oscillation envelope."""
    print("Testing pointwise_atom_bound...")

    rng = np.random.default_rng(9)
    grid = Grid(8, 1 / 16)
    K = sinc_kernel(0.5)
    for n in (0, 1, 2):
        s = scheme(n)
        d = _random_coefficients(s, rng)
        assert pointwise_atom_bound(d, s, K, grid) <= 1e-12, f"level {n}"

    zero = CoefSeq(scheme(1).indices(), np.zeros(5), scheme(1).centers())
    assert pointwise_atom_bound(zero, scheme(1), K, grid) == 0.0

    print("✓ pointwise_atom_bound test passed")


def test_synthesize_single_atom():
    """One unit coefficient synthesizes the translated kernel."""
    print("Testing synthesize...")

    grid = Grid(8, 1 / 16)
    K = sinc_kernel(0.5)
    single = CoefSeq([2], [1.0], [0.5])
    f = synthesize(single, K, grid)
    assert np.allclose(f.values, K(grid.points() - 0.5), rtol=0, atol=1e-12)

    zero = GridFunction.zeros(grid)
    assert lp_norm(tn_apply(zero, scheme(2), K), math.inf) == 0.0

    try:
        CoefSeq([0, 1], [1.0], [0.0])
        assert False, "length mismatch should raise"
    except PWLabError:
        pass

    print("✓ synthesize test passed")


def test_coefficient_sequence_norm():
    """Test weighted l_p norms and the support of a CoefSeq."""
    print("Testing CoefSeq...")

    c = CoefSeq([-1, 0, 1], [3, 0, 4], [-1.0, 0.0, 1.0])
    assert math.isclose(c.norm(2), 5.0)
    assert math.isclose(c.norm(1, Weight.polynomial(1)), 14.0)
    assert list(c.support()) == [-1, 1]
    assert len(c) == 3

    print("✓ CoefSeq test passed")


def test_bound_report():
    """Test C_n, D_n and tau_n against their closed forms."""
    print("Testing bound_report...")

    grid = Grid(32, 1 / 16)
    one = Weight.constant_one()
    report = bound_report(1, 2, (2, 1, 2), 0.5, (one, one), 1.0, grid)
    assert math.isclose(report.c_n, math.sqrt(0.5))
    assert math.isclose(report.d_n, report.theta_n)
    assert math.isclose(report.tau_n, report.c_n * math.sqrt(5))
    assert report.theta_n > 0.99

    data = report.to_dict()
    for key in ('n', 'r', 'q', 'p', 'omega', 'weight', 'sn_norm', 'C_n', 'D_n', 'theta_n',
                'tau_n', 'factors'):
        assert key in data, f"missing {key}"
    assert data['factors']['window_count'] == 5.0

    try:
        bound_report(1, 2, ('4', '4/3', '2'), 0.5, (one, one), 1.0, grid)
        assert False, "output exponent 4 with r = 2 should raise"
    except PWLabError as e:
        assert e.precondition == 'output exponent equals r'

    print("✓ bound_report test passed")


def test_projection_recovers_atoms():
    """Functions in V_n are reproduced with their own coefficients."""
    print("Testing projection_approx on V_n...")

    grid = Grid(16, 1 / 16)
    K = sinc_kernel(0.5)
    f = GridFunction(grid, K(grid.points() - 0.5))
    approx, coeffs, residual = projection_approx(f, scheme(1), K)
    assert residual <= 1e-10, f"residual {residual}"
    expected = np.zeros(5)
    expected[3] = 1.0
    assert np.allclose(coeffs.values, expected, atol=1e-8)
    assert lp_norm(approx - f, 2) <= 1e-10

    approximate = projection_approx(f, scheme(1), K, r=4)
    assert not approximate.exact
    assert approximate.residual <= 1e-8

    try:
        projection_approx(f, scheme(1), K, r=0.5)
        assert False, "r < 1 should raise"
    except PWLabError:
        pass

    print("✓ projection_approx test passed")


def test_residual_sweep_is_monotone():
    """V_n is nested, so the least-squares residual cannot grow with n."""
    print("Testing residual_sweep...")

    grid = Grid(16, 1 / 16)
    K = sinc_kernel(0.5)
    f = bandlimited_signal(grid, Spectrum.symmetric(0.5), np.random.default_rng(4))
    norm = lp_norm(f, 2)
    rows = residual_sweep(f, range(0, 4), K)
    assert [n for n, _ in rows] == [0, 1, 2, 3]
    residuals = [value for _, value in rows]
    assert residuals[0] <= norm * (1 + 1e-12)
    for previous, current in zip(residuals, residuals[1:]):
        assert current <= previous + 1e-8 * norm

    try:
        projection_approx(f, scheme(3), K, regularize=False)
        assert False, "oversampled Gram matrix should be flagged"
    except IllConditionedGramError as e:
        assert e.lambda_min is not None

    print("✓ residual_sweep test passed")


def test_tn_range_is_reproduced():
    """T_n f is a finite sum of atoms, so (T_n f) * K = T_n f.

    Only the atom mass beyond the grid edge is lost, about 1/(pi^2 T) per
    point, so the interior check is 1e-2 at T = 64 and improves with T.
    """
    print("Testing the range of T_n...")

    K = sinc_kernel(0.5)
    errors = []
    for T in (64, 256):
        grid = Grid(T, 1 / 16)
        f = GridFunction(grid, K(grid.points() - 0.3))
        g = tn_apply(f, scheme(1), K)
        error = lp_norm_on(kernel_convolve(g, K) - g, 2, None, -8, 8)
        errors.append(error / lp_norm_on(g, 2, None, -8, 8))
    assert errors[0] <= 1e-2, errors
    assert errors[1] <= errors[0] / 2, errors

    print("✓ T_n range test passed")


def test_projection_coefficient_bound():
    """|coeffs|_2 <= C_n (1 + eps) |f|_2 with C_n = |Q_n|^(1/2) |S_n|."""
    print("Testing the projection coefficient bound...")

    grid = Grid(64, 1 / 16)
    K = sinc_kernel(0.5)
    rng = np.random.default_rng(12)
    for n in (1, 2):
        s = scheme(n)
        c_n = s.cube_measure ** 0.5 * float(sn_norm(s, 0.5, 'auto'))
        for _ in range(4):
            f = bandlimited_signal(grid, Spectrum.symmetric(0.5), rng)
            result = projection_approx(f, s, K)
            assert result.coeffs.norm(2) <= c_n * 1.05 * lp_norm(f, 2), (n, result.coeffs.norm(2))

    print("✓ projection coefficient bound test passed")


def test_off_grid_residual_sweep():
    """The residual for K(. - 0.3) is recorded and non-increasing for n = 2..6."""
    print("Testing residual_sweep on an off-grid atom...")

    grid = Grid(8, 1 / 64)
    K = sinc_kernel(0.5)
    f = GridFunction(grid, K(grid.points() - 0.3))
    norm = lp_norm(f, 2)
    rows = residual_sweep(f, range(2, 7), K)
    assert [n for n, _ in rows] == [2, 3, 4, 5, 6]
    residuals = [value for _, value in rows]
    assert all(math.isfinite(value) for value in residuals)
    for previous, current in zip(residuals, residuals[1:]):
        assert current <= previous + 1e-10 * norm, residuals
    assert residuals[-1] < residuals[0]

    print("✓ off-grid residual_sweep test passed")


TESTS = [
    test_scheme_geometry,
    test_partition_of_unity,
    test_check_resolution,
    test_bupu_coeffs,
    test_coefficient_bound_holds,
    test_sequence_synthesis_bound_holds,
    test_pointwise_atom_bound,
    test_synthesize_single_atom,
    test_coefficient_sequence_norm,
    test_bound_report,
    test_projection_recovers_atoms,
    test_residual_sweep_is_monotone,
    test_tn_range_is_reproduced,
    test_projection_coefficient_bound,
    test_off_grid_residual_sweep,
]


def main():
    """Run all tests."""
    print("=" * 60)
    print("Testing discretization")
    print("=" * 60)

    all_passed = True
    for test in TESTS:
        try:
            test()
        except Exception as e:
            print(f"✗ {test.__name__} failed: {e}")
            traceback.print_exc()
            all_passed = False

    print("\n" + "=" * 60)
    if all_passed:
        print("✓ All discretization tests passed!")
        print("=" * 60)
        return 0
    else:
        print("✗ Some discretization tests failed")
        print("=" * 60)
        return 1


if __name__ == '__main__':
    sys.exit(main())
