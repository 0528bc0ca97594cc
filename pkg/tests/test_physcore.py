import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochliouville.exceptions import DimensionError, InvalidStateError
from stochliouville.physcore import (
    CONSTANTS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    PolarizationVector,
    SystemParams,
    bloch_to_density,
    density_to_bloch,
    entropy_of_norms,
    entropy_of_polarization,
    validate_density_matrix,
    vonneumann_entropy,
)

# -(0.8 ln 0.8 + 0.2 ln 0.2), evaluated independently
S_06 = 0.5004024235381879


def random_unitary(n, rng):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_pauli_algebra():
    for s in (SIGMA_X, SIGMA_Y, SIGMA_Z):
        np.testing.assert_allclose(s @ s, np.eye(2), atol=0)
        np.testing.assert_allclose(s, s.conj().T)
    # cyclic commutation [s_x, s_y] = 2i s_z
    np.testing.assert_allclose(SIGMA_X @ SIGMA_Y - SIGMA_Y @ SIGMA_X, 2j * SIGMA_Z)


def test_default_params_and_derived_rates():
    p = SystemParams()
    assert (p.omega, p.alpha, p.temperature, p.dt) == (3.0e7, 1.0e-4, 1.0e-3, 0.658e-9)
    assert p.A_fi == pytest.approx(6000.0, rel=1e-15)
    assert p.lam == pytest.approx(26.2e3, rel=5e-3)
    assert p.lambda_ == p.lam
    # level splitting 19.74 neV
    assert p.Delta == pytest.approx(19.74e-9, rel=1e-3)


@pytest.mark.parametrize("field,value", [("omega", 0.0), ("alpha", -1.0),
                                         ("temperature", -1e-3), ("dt", 0.0)])
def test_params_range_errors(field, value):
    with pytest.raises(ValueError, match=field):
        SystemParams().replace(**{field: value})


def test_kt_over_hbar_one_millikelvin():
    # k_B T = 86.17 neV at 1 mK
    assert CONSTANTS.kB * 1e-3 == pytest.approx(86.17e-9, rel=1e-3)


def test_bloch_to_density_eigenvalues():
    w = np.linalg.eigvalsh(bloch_to_density((0, 0, 0.6)))
    np.testing.assert_allclose(w, [0.2, 0.8], atol=1e-15)


def test_density_to_bloch_examples():
    assert density_to_bloch(np.eye(2) / 2) == pytest.approx((0, 0, 0), abs=1e-15)
    assert density_to_bloch(bloch_to_density((0.3, -0.4, 0.5))) == pytest.approx(
        (0.3, -0.4, 0.5), abs=1e-15)
    psi = np.array([1j, 1.0]) / math.sqrt(2)  # (|1> + i|0>)/sqrt 2
    rho = np.outer(psi, psi.conj())
    assert density_to_bloch(rho) == pytest.approx((0, 0, 1), abs=1e-15)


def test_density_to_bloch_dimension_error():
    with pytest.raises(DimensionError):
        density_to_bloch(np.eye(3) / 3)


def test_round_trip_random_vectors():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(1000, 3))
    v *= (rng.uniform(size=1000) ** (1 / 3) / np.linalg.norm(v, axis=1))[:, None]
    for p in v:
        back = density_to_bloch(bloch_to_density(p))
        assert np.max(np.abs(np.array(back) - p)) < 1e-12


def test_validate_density_matrix_rejects():
    with pytest.raises(InvalidStateError):
        validate_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(InvalidStateError):
        validate_density_matrix(np.eye(2))
    with pytest.raises(InvalidStateError):
        validate_density_matrix(np.diag([1.2, -0.2]))


def test_polarization_vector():
    p = PolarizationVector.from_angle(math.pi / 2)
    assert p == pytest.approx((0, 0, 1), abs=1e-16)
    assert p.is_pure
    assert not PolarizationVector(0.5, 0, 0).is_pure


def test_entropy_examples():
    assert entropy_of_polarization((0, 0, 0)) == pytest.approx(math.log(2), abs=1e-15)
    assert entropy_of_polarization((1, 0, 0)) == 0.0
    assert entropy_of_polarization((0, 0.6, 0)) == pytest.approx(S_06, abs=1e-15)
    # six-figure reference value carries ~6e-7 rounding
    assert entropy_of_polarization(0.6) == pytest.approx(0.500403, abs=1e-6)


def test_entropy_invalid_state():
    with pytest.raises(InvalidStateError):
        entropy_of_polarization((1.1, 0, 0))


def test_entropy_of_norms_matches_scalar():
    r = np.linspace(0, 1, 51)
    np.testing.assert_allclose(entropy_of_norms(r), [entropy_of_polarization(x) for x in r],
                               atol=1e-15)


def test_entropy_concave_and_extremes():
    r = np.linspace(0, 1, 2001)
    s = entropy_of_norms(r)
    assert np.argmax(s) == 0
    assert np.all(np.diff(s, 2) <= 1e-12)
    assert np.all(s[:-1] > 0) and s[-1] == 0


def test_vonneumann_examples():
    assert vonneumann_entropy(np.eye(2) / 2) == pytest.approx(math.log(2), abs=1e-14)
    assert vonneumann_entropy(np.diag([0.8, 0.2])) == pytest.approx(S_06, abs=1e-14)
    psi = np.array([0.6, 0.8j])
    assert vonneumann_entropy(np.outer(psi, psi.conj())) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(InvalidStateError):
        vonneumann_entropy(np.eye(2))


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_vonneumann_agrees_with_polarization(x, y, z):
    n = math.sqrt(x * x + y * y + z * z)
    if n > 1:
        x, y, z = x / n, y / n, z / n
    rho = bloch_to_density((x, y, z))
    assert vonneumann_entropy(rho) == pytest.approx(entropy_of_polarization((x, y, z)), abs=1e-10)


@pytest.mark.parametrize("n", [2, 3])
def test_vonneumann_unitary_invariance(n):
    rng = np.random.default_rng(n)
    for _ in range(20):
        w = rng.dirichlet(np.ones(n))
        U = random_unitary(n, rng)
        rho = np.diag(w).astype(complex)
        rho2 = U @ rho @ U.conj().T
        assert vonneumann_entropy(rho2) == pytest.approx(vonneumann_entropy(rho), abs=1e-10)
