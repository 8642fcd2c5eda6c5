import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import trapezoid

from fna.kernels import (
    FractionalOrder,
    KernelSpec,
    c_d_alpha,
    gaussian_heat_kernel,
    kappa_convention,
    phi,
    phi_derivative,
    phi_local,
    phi_nonlocal,
)


@pytest.mark.parametrize("alpha", [0.99, 2.01, float("nan"), -1])
def test_fractional_order_rejects_out_of_range(alpha):
    with pytest.raises(ValueError):
        FractionalOrder(alpha)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(1.5, d_m=0)
    with pytest.raises(ValueError):
        KernelSpec(1.5, kappa=0.0)
    assert KernelSpec(1.2, 3).exponent == pytest.approx(4.2)


def test_phi_local_examples():
    assert phi_local(0.0, 2.0) == 1.0
    assert phi_local(1.0, 2.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert phi_local(2.0, 1.5) == pytest.approx(math.exp(-8), rel=1e-14)


def test_phi_local_rejects_bad_input():
    with pytest.raises(ValueError):
        phi_local(1.0, 1.0)
    with pytest.raises(ValueError):
        phi_local(-0.1, 2.0)


def test_phi_nonlocal_examples():
    assert phi_nonlocal(0.0, KernelSpec(1.5, 4)) == 1.0
    assert phi_nonlocal(1.0, KernelSpec(1.0, 1)) == pytest.approx(0.25, rel=1e-15)
    assert phi_nonlocal(3.0, KernelSpec(1.2, 2)) == pytest.approx(4 ** -3.2, rel=1e-14)
    assert 4 ** -3.2 == pytest.approx(0.0118415, abs=5e-7)


def test_phi_nonlocal_rejects_local_order_and_negative_z():
    with pytest.raises(ValueError):
        phi_nonlocal(1.0, KernelSpec(2.0))
    with pytest.raises(ValueError):
        phi_nonlocal(-1.0, KernelSpec(1.5))


@pytest.mark.parametrize("alpha", [1.0, 1.2, 1.7, 2.0])
def test_phi_strictly_decreasing(alpha):
    z = np.linspace(0, 5, 400)
    v = phi(z, KernelSpec(alpha, 3))
    assert np.all(np.diff(v) < 0)


def test_tail_dichotomy():
    spec = KernelSpec(1.2, 2)
    z = 1e7
    assert phi_nonlocal(z, spec) * z**spec.exponent == pytest.approx(1.0, rel=1e-5)
    for z in (0.5, 1.0, 3.0):
        assert phi_local(z, 2.0) * math.exp(z * z) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("alpha", [1.2, 2.0])
def test_phi_derivative_matches_finite_difference(alpha):
    spec = KernelSpec(alpha, 3)
    z = np.array([0.1, 0.7, 2.5])
    h = 1e-6
    fd = (phi(z + h, spec) - phi(z - h, spec)) / (2 * h)
    np.testing.assert_allclose(phi_derivative(z, spec), fd, rtol=1e-7)


def test_heat_kernel_examples():
    assert gaussian_heat_kernel(0.3, 0.3, 1 / (4 * math.pi), 1) == pytest.approx(1.0, rel=1e-15)
    assert gaussian_heat_kernel([0, 0], [0, 0], 1.0, 2) == pytest.approx(1 / (4 * math.pi))


def test_heat_kernel_errors():
    with pytest.raises(ValueError):
        gaussian_heat_kernel(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        gaussian_heat_kernel([0.0, 1.0], [0.0], 1.0)
    with pytest.raises(ValueError):
        gaussian_heat_kernel([0.0, 1.0], [0.0, 0.0], 1.0, d=3)


@pytest.mark.parametrize("t", [0.05, 1.0, 7.0])
def test_heat_kernel_unit_mass(t):
    y = np.linspace(-20 * math.sqrt(t), 20 * math.sqrt(t), 200001)[:, None]
    mass = trapezoid(gaussian_heat_kernel([0.0], y, t), y[:, 0])
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_heat_kernel_symmetry_and_semigroup():
    s, t, x, y = 0.3, 0.5, -0.4, 0.9
    assert gaussian_heat_kernel(x, y, t) == gaussian_heat_kernel(y, x, t)
    z = np.linspace(-15, 15, 60001)[:, None]
    lhs = trapezoid(gaussian_heat_kernel([x], z, s) * gaussian_heat_kernel(z, [y], t), z[:, 0])
    assert lhs == pytest.approx(gaussian_heat_kernel(x, y, s + t), rel=1e-4)


def test_c_d_alpha_closed_forms():
    assert c_d_alpha(1, 1.0) == pytest.approx(1 / math.pi, rel=1e-14)
    assert c_d_alpha(2, 1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-14)


@pytest.mark.parametrize("d,alpha", [(1, 1.5), (2, 1.2), (3, 0.4), (8, 1.9)])
def test_c_d_alpha_against_mpmath(d, alpha):
    mpmath.mp.dps = 40
    a = mpmath.mpf(alpha)
    ref = a * 2 ** (a - 1) * mpmath.gamma((d + a) / 2) / (mpmath.pi ** (mpmath.mpf(d) / 2)
                                                         * mpmath.gamma(1 - a / 2))
    assert c_d_alpha(d, alpha) == pytest.approx(float(ref), rel=1e-13)


def test_c_d_alpha_rejects_alpha_two():
    with pytest.raises(ValueError):
        c_d_alpha(1, 2.0)


def test_kappa_conventions():
    assert kappa_convention("text", 2.0, d_h=8) == pytest.approx(math.sqrt(8))
    assert kappa_convention("text", 1.2, d_h=8) == pytest.approx(31.2507, abs=1e-4)
    assert kappa_convention("spectral", 1.2, epsilon=1e-4) == pytest.approx(0.01)
    assert kappa_convention("vision_translation", 1.5, d_h=16) == 16.0
    assert kappa_convention("spherical", 1.5, d_m=3) == pytest.approx(
        math.pi / (math.pi ** (1 / 3) - 1))
    expected = math.sqrt(8) / (2 ** (1 / 8) - 1) * math.sqrt(0.01)
    assert kappa_convention("diffmap", 1.2, d_h=8, epsilon=0.01) == pytest.approx(expected)
    assert kappa_convention("text", 1.2, d_h=8, override=3.5) == 3.5


def test_kappa_convention_errors():
    with pytest.raises(ValueError):
        kappa_convention("audio", 1.2, d_h=8)
    with pytest.raises(ValueError):
        kappa_convention("spectral", 1.2)
    with pytest.raises(ValueError):
        kappa_convention("text", 1.2, d_h=8, override=-1.0)
