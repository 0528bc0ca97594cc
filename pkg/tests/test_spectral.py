import math

import numpy as np
import pytest
from mpmath import mp, mpf
from scipy import constants as sc
from scipy.integrate import trapezoid

from stochliouville.exceptions import DivergenceError
from stochliouville.spectral import (
    Blackbody,
    DeltaKernel,
    Ohmic,
    SampledKernel,
    Tabulated,
    evaluate_J,
    gaussian_kernel,
    load_tabulated_csv,
    memory_kernel,
    planck_occupation,
)


def kt_over_hbar(T):
    return sc.k * T / sc.hbar


def n_exact(x):
    mp.dps = 40
    return float(1 / (mp.e ** mpf(x) - 1))


def test_ohmic_J_linear_and_zero():
    sd = Ohmic(1e-4)
    assert evaluate_J(sd, 0.0) == 0.0
    assert evaluate_J(sd, 6e7) == pytest.approx(2 * evaluate_J(sd, 3e7), rel=1e-15)
    cut = Ohmic(1.0, cutoff=10.0)
    np.testing.assert_array_equal(evaluate_J(cut, np.array([5.0, 10.0, 11.0])), [5.0, 10.0, 0.0])


def test_negative_omega_rejected():
    with pytest.raises(ValueError):
        evaluate_J(Ohmic(1.0), -1.0)


def test_blackbody_J_closed_form():
    T = 1e-3
    w = 0.228979 * kt_over_hbar(T)
    e = sc.e * sc.c * 10.0  # statC
    c = sc.c * 100.0
    kT = sc.k * T * 1e7  # erg
    expected = 2 * e ** 2 * w ** 4 / (3 * kT * c ** 3) * n_exact(0.228979)
    assert evaluate_J(Blackbody(T), w) == pytest.approx(expected, rel=1e-10)
    assert n_exact(0.228979) == pytest.approx(3.8862, abs=1e-4)


def test_planck_occupation():
    T = 1e-3
    x = 0.228979
    assert planck_occupation(x * kt_over_hbar(T), T) == pytest.approx(n_exact(x), rel=1e-12)
    assert planck_occupation(3e7, 0.0) == 0.0
    w = 0.01 * kt_over_hbar(T)
    # series 1/x - 1/2 + x/12
    assert planck_occupation(w, T) == pytest.approx(100 - 0.5 + 0.01 / 12, rel=1e-9)
    with pytest.raises(DivergenceError):
        planck_occupation(0.0, T)


def test_ohmic_without_grid_is_delta():
    assert memory_kernel(Ohmic(1e-4)) == DeltaKernel(2e-4)


def test_ohmic_cutoff_kernel_closed_form():
    gamma, wc = 1e-4, 1.5e9
    t = np.linspace(0.0, 2e-8, 101)
    k = memory_kernel(Ohmic(gamma), t, cutoff=wc)
    assert k.values[0] == pytest.approx(2 * gamma * wc / math.pi, rel=1e-10)
    exact = 2 * gamma * np.sin(wc * t[1:]) / (math.pi * t[1:])
    rel = np.abs(k.values[1:] - exact) / np.max(np.abs(exact))
    assert rel.max() < 1e-6


def test_sampled_kernel_even_and_zero_outside():
    k = SampledKernel(0.1, np.array([3.0, 2.0, 1.0]))
    t = np.array([0.05, 0.15, 0.2, 0.25])
    np.testing.assert_allclose(k(-t), k(t))
    assert k(0.3) == 0.0
    assert k.support == pytest.approx(0.2)


def test_blackbody_zero_temperature_kernel_vanishes():
    k = memory_kernel(Blackbody(0.0), np.linspace(0, 1e-9, 11), cutoff=1e12)
    assert np.all(k.values == 0)


def test_tabulated_kernel_matches_ohmic():
    w = np.linspace(0.0, 1e9, 2001)
    sd = Tabulated(w, 1e-4 * w)
    t = np.linspace(0.0, 1e-8, 21)
    ref = memory_kernel(Ohmic(1e-4), t, cutoff=1e9).values
    got = memory_kernel(sd, t).values
    assert np.max(np.abs(got - ref)) < 1e-6 * np.max(np.abs(ref))


def test_tabulated_divergence():
    sd = Tabulated(np.array([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 1.0]))
    with pytest.raises(DivergenceError):
        memory_kernel(sd, np.linspace(0, 1, 5))


def test_tabulated_validation():
    with pytest.raises(ValueError):
        Tabulated(np.array([0.0, 2.0, 1.0]), np.array([0.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        Tabulated(np.array([0.0, 1.0]), np.array([0.0, -1.0]))


def test_gaussian_kernel_area():
    k = gaussian_kernel(2.0, width=5e-9, spacing=0.1e-9)
    assert trapezoid(k.values, k.t) == pytest.approx(1.0, rel=1e-3)


def test_load_tabulated_csv(tmp_path):
    p = tmp_path / "j.csv"
    p.write_text("omega_rad_per_s,J_value\n0,0\n1e7,1e3\n2e7,2e3\n")
    sd = load_tabulated_csv(p)
    assert evaluate_J(sd, 1.5e7) == pytest.approx(1.5e3)
    bad = tmp_path / "bad.csv"
    bad.write_text("omega_rad_per_s,J_value\n0,0\n1e7,oops\n")
    with pytest.raises(ValueError, match=":3"):
        load_tabulated_csv(bad)
