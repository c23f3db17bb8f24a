#!/usr/bin/env python3
"""
Tests for sampling families, Shannon sampling, the contraction certificate,
Banach frame reconstruction and atomic decompositions.
"""

import math
import sys
import traceback

import numpy as np

from discretization import CoefSeq
from errors import CertificateRefused, ConvergenceError, PWLabError, ResolutionError
from frames import (
    RATIO_SLACK, SamplingFamily, analysis_op, atomic_decomp, banach_frame_reconstruct,
    contraction_cert, error_curve_rows, max_tail_ratio, rc_k_norm, sample_op, samp_x,
    shannon_error, step_synthesis, synth_op, synthesis_op, window_defect
)
from grid_core import Grid, GridFunction, lp_norm
from kernels import Spectrum, bandlimited_signal, sinc_kernel, smooth_window

OMEGA = 0.5
BUPU_HALF = 1 / 16


def _frame_setup():
    """Working grid, kernel, window, lattice and granted certificate."""
    grid = Grid(256, 1 / 32)
    K = sinc_kernel(OMEGA)
    W = smooth_window(K.spectrum, 0.25, grid)
    X = SamplingFamily.lattice(1 / 8, grid.half_width - 1 / 8)
    cert = contraction_cert(K, W, BUPU_HALF, 2)
    return grid, K, W, X, cert


def test_sampling_family():
    """Test ordering, labels, separation and validation."""
    print("Testing SamplingFamily...")

    X = SamplingFamily.lattice(0.25, 1)
    assert list(X.indices) == list(range(-4, 5))
    assert X.points[0] == -1.0 and X.points[-1] == 1.0
    assert X.separation == 0.25 and X.density == 0.25
    assert X.covering_count() == 5
    assert X.covering_bound() == 5

    Y = SamplingFamily([1.0, 0.0, 0.375, 0.25], indices=[10, 20, 30, 40])
    assert list(Y.points) == [0.0, 0.25, 0.375, 1.0]
    assert list(Y.indices) == [20, 40, 30, 10]
    assert Y.separation == 0.125 and Y.density == 0.625
    assert len(SamplingFamily.from_points([0.0, 1.0])) == 2

    for bad in ([0.0], [0.0, 0.0, 1.0], [0.0, math.inf]):
        try:
            SamplingFamily(bad)
            assert False, f"{bad} should be rejected"
        except PWLabError:
            pass

    print("✓ SamplingFamily test passed")


def test_cells_and_density():
    """Nearest-point cells tile their hull; density decides U-denseness."""
    print("Testing cells and check_dense...")

    X = SamplingFamily.lattice(0.25, 1)
    lo, hi = X.cells()
    assert lo[0] == -1.125 and hi[-1] == 1.125
    assert np.array_equal(lo[1:], hi[:-1])

    X.check_dense(1 / 8)
    try:
        X.check_dense(1 / 16)
        assert False, "cells wider than U should raise"
    except PWLabError as e:
        assert e.precondition == 'U-dense'

    grid = Grid(2, 1 / 8)
    owner = X.owner(grid)
    x = grid.points()
    assert np.all(owner[(x < -1.125) | (x >= 1.125)] == -1)
    assert owner[grid.index_of(0.0)] == 4

    try:
        SamplingFamily([0.0, 0.1]).grid_indices(grid)
        assert False, "unaligned points should raise"
    except ResolutionError:
        pass

    try:
        SamplingFamily([0.0, 5.0]).grid_indices(grid)
        assert False, "points off the grid should raise"
    except ResolutionError:
        pass

    print("✓ cells and check_dense test passed")


def test_cell_operators():
    """Test samp_x, step_synthesis, analysis_op and synthesis_op on a small grid."""
    print("Testing cell operators...")

    grid = Grid(2, 1 / 8)
    X = SamplingFamily.lattice(0.25, 1)
    one = GridFunction(grid, np.ones(grid.count))
    ana = analysis_op(one, X)
    assert np.allclose(ana.values, 0.25)

    f = GridFunction.from_callable(grid, lambda x: x)
    samples = samp_x(f, X)
    assert np.allclose(samples.values, X.points)
    step = step_synthesis(samples, X, grid)
    assert step.at(0.0) == 0.0
    assert step.at(0.125) == 0.25
    assert step.at(0.25) == 0.25
    assert step.at(-2.0) == 0.0

    K = sinc_kernel(OMEGA)
    unit = np.zeros(len(X))
    unit[4] = 1.0
    single = CoefSeq(X.indices, unit, X.points)
    atom = synthesis_op(single, X, K, grid)
    assert np.allclose(atom.values, K(grid.points()), atol=1e-12)

    print("✓ cell operator test passed")


def test_sample_op():
    """Samples sit at k/(2R) and stay inside the grid."""
    print("Testing sample_op and synth_op...")

    grid = Grid(8, 1 / 16)
    K = sinc_kernel(OMEGA)
    f = K.sample(grid)
    c = sample_op(f, 0.5)
    assert c.meta['max_count'] == 7 and c.meta['count'] == 7
    assert c.meta['truncated_at'] == 7.0
    assert list(c.indices) == list(range(-7, 8))
    expected = np.zeros(15)
    expected[7] = 1.0
    assert np.array_equal(c.values, expected)

    # R = 1/2: reconstruction is the atom itself
    back = synth_op(c, 0.5, K, grid)
    assert np.allclose(back.values, f.values, atol=1e-12)

    assert len(sample_op(f, 0.5, count=3)) == 7
    for count in (8, 0):
        try:
            sample_op(f, 0.5, count=count)
            assert False, f"count {count} should raise"
        except PWLabError:
            pass

    try:
        sample_op(f, 0.3)
        assert False, "samples off the grid should raise"
    except ResolutionError:
        pass

    print("✓ sample_op test passed")


def test_shannon_error():
    """Band-limited signals are recovered at and above the critical rate."""
    print("Testing shannon_error...")

    grid = Grid(64, 1 / 16)
    K = sinc_kernel(OMEGA)
    rng = np.random.default_rng(2)

    exact = shannon_error(K.sample(grid), 0.5, K)
    assert exact['rel_error'] <= 1e-12

    for R in (0.5, 1.0):
        f = bandlimited_signal(grid, K.spectrum, rng)
        result = shannon_error(f, R, K)
        assert result['rel_error'] <= 1e-6, f"R = {R}: {result['rel_error']:.3e}"
        assert result['truncation_bound'] > 0
        assert result['count'] == (grid.count // 2 - 1) // grid.steps(1 / (2 * R))

    try:
        shannon_error(K.sample(grid), 0.25, K)
        assert False, "R below the band should raise"
    except PWLabError as e:
        assert e.precondition == 'Omega inside xi0 + [-R, R]'

    try:
        shannon_error(GridFunction.zeros(grid), 0.5, K)
        assert False, "a vanishing f should raise"
    except PWLabError as e:
        assert e.precondition == 'non-zero f'

    print("✓ shannon_error test passed")


def test_shifted_kernel_within_truncation_bound():
    """Samples of K(. - 5/16) decay like 1/x; the error stays under the dropped-sample bound."""
    print("Testing the shifted-kernel truncation bound...")

    grid = Grid(64, 1 / 64)
    K = sinc_kernel(OMEGA)
    shift = 5 / 16
    A = K.envelope_constant() * (1 + shift)
    f = GridFunction.from_callable(grid, K.shifted(shift))

    result = shannon_error(f, 0.5, K, envelope=A)
    assert result['truncation_bound'] > 1e-3
    assert result['rel_error'] <= max(1e-3, result['truncation_bound'])

    # the bound is linear in the envelope
    doubled = shannon_error(f, 0.5, K, envelope=2 * A)
    assert math.isclose(doubled['truncation_bound'], 2 * result['truncation_bound'], rel_tol=1e-12)

    print("✓ shifted-kernel truncation bound test passed")


def test_rc_k_norm():
    """Exact at r = 2, a flagged estimate elsewhere."""
    print("Testing rc_k_norm...")

    assert rc_k_norm(2) == (1.0, True)
    try:
        rc_k_norm(4)
        assert False, "r != 2 without a kernel should raise"
    except PWLabError:
        pass

    grid = Grid(32, 1 / 8)
    value, certified = rc_k_norm(4, sinc_kernel(OMEGA), grid, trials=5)
    assert not certified
    assert value >= 0.9

    print("✓ rc_k_norm test passed")


def test_contraction_certificate():
    """Small unit cells are granted, wide ones refused."""
    print("Testing contraction_cert...")

    grid = Grid(64, 1 / 32)
    K = sinc_kernel(OMEGA)
    W = smooth_window(K.spectrum, 0.25, grid)

    granted = contraction_cert(K, W, BUPU_HALF, 2)
    assert granted.granted and granted.certified
    assert granted.c == granted.c_u and granted.rc_k_norm == 1.0
    assert 0 < granted.c < 1

    refused = contraction_cert(K, W, 1 / 4, 2)
    assert not refused.granted
    assert refused.c > granted.c

    data = granted.to_dict()
    assert set(data) == {'c', 'C_U', 'rc_k_norm', 'bupu_half', 'granted', 'certified'}
    assert data['granted'] is True

    print("✓ contraction_cert test passed")


def test_contraction_threshold():
    """C_U shrinks with the cell; 1/8 is still granted and 1/4 is refused."""
    print("Testing the contraction threshold...")

    grid = Grid(64, 1 / 32)
    K = sinc_kernel(OMEGA)
    W = smooth_window(K.spectrum, 0.25, grid)
    rc = rc_k_norm(2, K, grid)

    certs = [contraction_cert(K, W, half, 2, rc=rc) for half in (1 / 2, 1 / 4, 1 / 8, 1 / 16)]
    c_u = [cert.c_u for cert in certs]
    assert all(a > b for a, b in zip(c_u, c_u[1:])), c_u

    wide, quarter, eighth, sixteenth = certs
    assert not wide.granted and not quarter.granted
    assert eighth.granted and sixteenth.granted
    assert 0.6 < eighth.c < 0.9
    assert 1.3 < quarter.c < 1.9
    assert 0.25 < sixteenth.c < 0.45

    print("✓ contraction threshold test passed")


def test_frame_reconstruction_converges():
    """The Neumann series recovers f from its samples at rate at most c."""
    print("Testing banach_frame_reconstruct...")

    grid, K, W, X, cert = _frame_setup()
    f = bandlimited_signal(grid, K.spectrum, np.random.default_rng(3))
    recon, iterations, curve = banach_frame_reconstruct(
        f, X, BUPU_HALF, K, 2, tol=1e-10, max_iter=50, W=W, cert=cert
    )
    assert curve[-1] <= 1e-6, f"final error {curve[-1]:.3e}"
    assert len(curve) == iterations + 1
    assert max_tail_ratio(curve) <= cert.c + RATIO_SLACK
    assert lp_norm(recon - f, 2) <= 1e-6 * lp_norm(f, 2)

    zero = banach_frame_reconstruct(GridFunction.zeros(grid), X, BUPU_HALF, K, W=W, cert=cert)
    assert zero.converged and zero.iterations == 1
    assert max(zero.error_curve) == 0.0

    print("✓ banach_frame_reconstruct test passed")


def test_reconstruction_reproduces_samples():
    """Sampling the reconstruction on X gives back the input samples."""
    print("Testing the frame round trip...")

    grid, K, W, X, cert = _frame_setup()
    f = bandlimited_signal(grid, K.spectrum, np.random.default_rng(9))
    result = banach_frame_reconstruct(f, X, BUPU_HALF, K, tol=1e-10, W=W, cert=cert)
    assert result.converged
    given_samples = samp_x(f, X).values
    recovered = samp_x(result.recon, X).values
    assert np.linalg.norm(recovered - given_samples) <= 1e-5 * np.linalg.norm(given_samples)

    print("✓ frame round trip test passed")


def test_iterates_do_not_depend_on_r():
    """r only enters the stopping rule and the reported errors."""
    print("Testing r-independence of the iterates...")

    grid, K, W, X, cert = _frame_setup()
    f = bandlimited_signal(grid, K.spectrum, np.random.default_rng(10))
    runs = [
        banach_frame_reconstruct(f, X, BUPU_HALF, K, r=r, tol=0.0, max_iter=6, W=W, cert=cert)
        for r in (2, 4)
    ]
    assert [run.iterations for run in runs] == [6, 6]
    assert np.array_equal(runs[0].recon.values, runs[1].recon.values)
    assert runs[0].error_curve != runs[1].error_curve

    print("✓ r-independence test passed")


def test_frame_refusals():
    """Non-dense families, refused certificates and strict caps all raise."""
    print("Testing frame refusals...")

    grid, K, W, X, cert = _frame_setup()
    f = bandlimited_signal(grid, K.spectrum, np.random.default_rng(4))

    sparse = SamplingFamily.lattice(1 / 2, grid.half_width - 1)
    try:
        banach_frame_reconstruct(f, sparse, BUPU_HALF, K, W=W, cert=cert)
        assert False, "a sparse family should raise"
    except PWLabError as e:
        assert e.precondition == 'U-dense'

    try:
        banach_frame_reconstruct(f, X, 1 / 4, K, W=W)
        assert False, "a refused certificate should raise"
    except CertificateRefused as e:
        assert e.certificate.c >= 1

    try:
        banach_frame_reconstruct(f, X, BUPU_HALF, K, W=W, cert=cert, max_iter=2, strict=True)
        assert False, "strict cap should raise"
    except ConvergenceError as e:
        assert e.iterations == 2

    print("✓ frame refusal test passed")


def test_atomic_decomposition():
    """Synth_{X,K} of the coefficients reproduces f."""
    print("Testing atomic_decomp...")

    grid, K, W, X, cert = _frame_setup()
    assert window_defect(W, K) <= 1e-8

    f = bandlimited_signal(grid, K.spectrum, np.random.default_rng(5))
    coeffs, recon_error = atomic_decomp(f, X, BUPU_HALF, K, W, 2, tol=1e-7, cert=cert)
    assert recon_error <= 1e-6
    assert len(coeffs) == len(X)
    recon = synthesis_op(coeffs, X, K, grid)
    assert lp_norm(recon - f, 2) <= 2e-6 * lp_norm(f, 2)

    zero = atomic_decomp(GridFunction.zeros(grid), X, BUPU_HALF, K, W, cert=cert)
    assert zero.recon_error == 0.0 and zero.iterations == 0

    narrow = smooth_window(Spectrum.symmetric(0.25), 0.1, grid)
    try:
        atomic_decomp(f, X, BUPU_HALF, K, narrow, cert=cert)
        assert False, "a window that does not reproduce K should raise"
    except PWLabError as e:
        assert e.precondition == 'W * K = K'

    print("✓ atomic_decomp test passed")


def test_error_curve_helpers():
    """Test ratio rows and the tail ratio."""
    print("Testing error curve helpers...")

    rows = error_curve_rows([1.0, 0.5, 0.0, 0.0])
    assert rows == [(0, 1.0, None), (1, 0.5, 0.5), (2, 0.0, 0.0), (3, 0.0, None)]

    curve = [1.0, 0.5, 0.25, 0.125, 0.0625, 1e-9, 1e-10]
    assert max_tail_ratio(curve, burn_in=1) == 0.5
    assert max_tail_ratio([1.0], burn_in=0) == 0.0

    print("✓ error curve helper test passed")


TESTS = [
    test_sampling_family,
    test_cells_and_density,
    test_cell_operators,
    test_sample_op,
    test_shannon_error,
    test_shifted_kernel_within_truncation_bound,
    test_rc_k_norm,
    test_contraction_certificate,
    test_contraction_threshold,
    test_frame_reconstruction_converges,
    test_reconstruction_reproduces_samples,
    test_iterates_do_not_depend_on_r,
    test_frame_refusals,
    test_atomic_decomposition,
    test_error_curve_helpers,
]


def main():
    """Run all tests."""
    print("=" * 60)
    print("Testing frames")
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
        print("✓ All frame tests passed!")
        print("=" * 60)
        return 0
    else:
        print("✗ Some frame tests failed")
        print("=" * 60)
        return 1


if __name__ == '__main__':
    sys.exit(main())
