import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as C
from scipy.integrate import simpson

from cqed_phonons.constants import HBAR, KB
from cqed_phonons.phonons import (
    HBAR_PS,
    PhononBath,
    QDParams,
    QuadratureError,
    SpectrumResolutionError,
    bose_occupation,
    bulk_spectrum,
    emission_grid,
    lorentzian,
    phase_function,
    phonon_sideband,
    pure_dephasing_rate,
    spectral_density,
    zpl_fraction,
)

BATH = PhononBath()

# exp(-phi_inf) from 30-digit mpmath quadrature of K e/ec^2 exp(-e^2/2ec^2) coth(e/2kT),
# with K and ec from scipy.constants and kB = 86.17333 ueV/K
ETA_ORACLE = {
    0: 0.934762550646673,
    4: 0.895473897975123,
    9: 0.81321249492746,
    10: 0.796671208042432,
    18: 0.673019079489255,
    20: 0.644867327173054,
}


def test_constants_match_codata():
    assert HBAR == pytest.approx(C.hbar / (C.e * 1e-6) * 1e9, rel=1e-9)
    assert KB == pytest.approx(C.k / (C.e * 1e-6), rel=1e-6)


def test_coupling_constant_closed_form():
    d = BATH.D * C.e
    s = BATH.sigma * 1e-9
    k = d**2 / (4 * math.pi**2 * BATH.rho_m * C.hbar * BATH.c_s**3 * s**2)
    assert BATH.huang_rhys == pytest.approx(k, rel=1e-6)
    assert BATH.huang_rhys == pytest.approx(0.0674627384734919, rel=1e-6)


def test_cutoff_energy():
    assert BATH.cutoff_energy == pytest.approx(672.6926200038266, rel=1e-6)


def test_spectral_density_limits():
    assert spectral_density(0.0, BATH) == 0.0
    e = np.array([1e-3, 2e-3])
    ratio = spectral_density(e[1], BATH) / spectral_density(e[0], BATH)
    assert ratio == pytest.approx(8.0, rel=1e-6)
    with pytest.raises(ValueError):
        spectral_density(-1.0, BATH)


def test_coupling_density_peaks_at_cutoff():
    e = np.linspace(1.0, 5000.0, 200001)
    j_over_e2 = spectral_density(e, BATH) / e**2
    assert e[np.argmax(j_over_e2)] == pytest.approx(BATH.cutoff_energy, abs=0.05)


@pytest.mark.parametrize("T, expected", [(10.0, 0.456334500463323), (20.0, 1.27154961120185)])
def test_bose_occupation_values(T, expected):
    assert bose_occupation(1000.0, T) == pytest.approx(expected, rel=1e-12)


def test_bose_occupation_zero_temperature_and_domain():
    assert bose_occupation(1000.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        bose_occupation(0.0, 4.0)


@given(st.floats(1.0, 5000.0), st.floats(0.5, 50.0))
def test_bose_occupation_detailed_balance(e, T):
    n = bose_occupation(e, T)
    assert (n + 1) / n == pytest.approx(math.exp(e / (KB * T)), rel=1e-9)


@pytest.mark.parametrize("T, expected", [(0.0, 0.0), (10.0, 0.0664575676776434),
                                         (20.0, 0.288838802494944)])
def test_pure_dephasing_rate(T, expected):
    assert pure_dephasing_rate(QDParams(), T) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_pure_dephasing_increases_with_temperature():
    rates = [pure_dephasing_rate(QDParams(), T) for T in np.linspace(1, 30, 30)]
    assert np.all(np.diff(rates) > 0)


@pytest.mark.parametrize("T", sorted(ETA_ORACLE))
def test_zpl_fraction_matches_high_precision_quadrature(T):
    assert zpl_fraction(BATH.at(T)) == pytest.approx(ETA_ORACLE[T], rel=1e-12)


def test_zpl_fraction_zero_temperature_closed_form():
    assert -math.log(zpl_fraction(BATH)) == pytest.approx(BATH.huang_rhys, rel=1e-4)


def test_zpl_fraction_decoupled():
    assert zpl_fraction(PhononBath(D=0.0, T=10.0)) == 1.0


def test_zpl_fraction_monotone_in_temperature_and_coupling():
    eta = [zpl_fraction(BATH.at(T)) for T in np.linspace(0, 30, 12)]
    assert np.all(np.diff(eta) < 0)
    eta_d = [zpl_fraction(PhononBath(D=D, T=9.0)) for D in (5.0, 10.0, 14.0, 20.0)]
    assert np.all(np.diff(eta_d) < 0)


def test_zpl_fraction_cutoff_convergence():
    b = BATH.at(20.0)
    assert abs(zpl_fraction(b, omega_max_factor=24.0) - zpl_fraction(b)) < 1e-4


def _phi_oracle(bath, tau_ps):
    # composite Simpson on a fine energy grid; the integrand is smooth and Gaussian-limited
    e = np.linspace(1e-9, 12 * bath.cutoff_energy, 400001)
    ec = bath.cutoff_energy
    base = bath.huang_rhys / ec**2 * e * np.exp(-(e**2) / (2 * ec**2))
    coth = 1.0 if bath.T == 0 else 1.0 / np.tanh(e / (2 * KB * bath.T))
    x = e * tau_ps / HBAR_PS
    re = simpson(base * coth * (1 - np.cos(x)), x=e)
    im = simpson(base * np.sin(x), x=e)
    return re + 1j * im


@pytest.mark.parametrize("T", [0.0, 10.0])
def test_phase_function_against_direct_quadrature(T):
    b = BATH.at(T)
    tau = np.array([0.3, 1.0, 2.5, 6.0])
    pf = phase_function(b, tau)
    for t, phi in zip(tau, pf.phi):
        assert abs(phi - _phi_oracle(b, t)) < 1e-8


def test_phase_function_symmetries():
    b = BATH.at(9.0)
    tau = np.array([-4.0, -1.0, 0.0, 1.0, 4.0])
    pf = phase_function(b, tau)
    assert pf.phi[2] == 0
    np.testing.assert_allclose(pf.phi[0], np.conj(pf.phi[4]), rtol=0, atol=1e-14)
    np.testing.assert_allclose(pf.phi[1], np.conj(pf.phi[3]), rtol=0, atol=1e-14)


def test_phase_function_approaches_asymptote():
    b = BATH.at(0.0)
    pf = phase_function(b, np.array([1.0, 5.0, 20.0, 80.0]))
    re = pf.phi.real
    assert np.all(re >= 0)
    gap = np.abs(pf.phi_infinity - re)
    assert np.all(np.diff(gap) < 0)
    assert gap[-1] < 1e-3 * pf.phi_infinity
    assert pf.phi_infinity == pytest.approx(BATH.huang_rhys, rel=1e-6)


def test_phase_function_reports_quadrature_failure():
    with pytest.raises(QuadratureError) as info:
        phase_function(BATH.at(10.0), np.array([1.0]), max_error=1e-30)
    assert info.value.residual > 0


@pytest.mark.parametrize("T, tol", [(0.0, 1e-6), (9.0, 1e-10), (20.0, 1e-10)])
def test_sideband_normalization(T, tol):
    # at T = 0 the one-phonon density has a kink at zero energy that the grid sum resolves to O(dw^2)
    sb = phonon_sideband(BATH.at(T))
    assert sb.weight() == pytest.approx(1 - zpl_fraction(BATH.at(T)), abs=tol)
    assert np.all(sb.density >= 0)


def test_sideband_zero_temperature_has_no_blue_side():
    sb = phonon_sideband(BATH)
    blue = sb.omega > 0
    assert sb.density[blue].max() <= 1e-12 * sb.density.max()


@pytest.mark.parametrize("T", [10.0, 20.0])
def test_sideband_against_direct_fourier_transform(T):
    # independent path: QUADPACK phase function, then a direct time-domain transform
    b = BATH.at(T)
    tau = np.arange(0.0, 20.0, 0.02)
    pf = phase_function(b, tau)
    eta = math.exp(-pf.phi_infinity)
    corr = eta * np.expm1(pf.phi_infinity - pf.phi)
    sb = phonon_sideband(b)
    for w in (-1500.0, -800.0, -300.0, -100.0, 100.0, 300.0, 800.0, 1500.0):
        direct = 2 * np.trapezoid(corr * np.exp(-1j * w * tau / HBAR_PS), tau).real / (2 * np.pi * HBAR_PS)
        assert sb(w) == pytest.approx(direct, rel=1e-4)


@pytest.mark.parametrize("T", [10.0, 20.0])
def test_sideband_detailed_balance(T):
    sb = phonon_sideband(BATH.at(T))
    w = np.linspace(200.0, 1500.0, 14)
    ratio = sb(w) / sb(-w)
    np.testing.assert_allclose(ratio, np.exp(-w / (KB * T)), rtol=0.02)


def test_sideband_grid_convergence():
    b = BATH.at(18.0)
    coarse = phonon_sideband(b)
    fine = phonon_sideband(b, points_per_cutoff=400, span_factor=24.0)
    w = np.linspace(-2000, 2000, 81)
    assert np.max(np.abs(coarse(w) - fine(w))) < 1e-6 * fine.density.max() * 100


def test_emission_grid_is_increasing_and_covers_window():
    g = emission_grid(0.7, 4000.0)
    assert np.all(np.diff(g) > 0)
    assert g[0] == pytest.approx(-4000.0) and g[-1] == pytest.approx(4000.0)


@pytest.mark.parametrize("T", [0.0, 9.0, 20.0])
def test_bulk_spectrum_normalization(T):
    b = BATH.at(T)
    qd = QDParams()
    fwhm = qd.linewidth + pure_dephasing_rate(qd, T)
    omega = emission_grid(fwhm, 20000.0, n_wing=3000)
    spec = bulk_spectrum(b, qd, omega)
    assert np.all(spec.intensity >= 0)
    assert spec.integral() == pytest.approx(1.0, abs=1e-3)
    assert np.trapezoid(spec.sideband, omega) == pytest.approx(1 - zpl_fraction(b), abs=1e-3)


def test_bulk_spectrum_zero_temperature_blue_sideband_vanishes():
    qd = QDParams()
    omega = emission_grid(qd.linewidth, 4000.0)
    spec = bulk_spectrum(BATH, qd, omega)
    blue = omega > 5 * qd.linewidth
    red = omega < -5 * qd.linewidth
    assert spec.sideband[blue].max() <= 1e-12 * spec.sideband[red].max()


def test_bulk_spectrum_without_phonons_is_lorentzian():
    qd = QDParams()
    omega = emission_grid(qd.linewidth, 4000.0)
    spec = bulk_spectrum(PhononBath(D=0.0, T=9.0), qd, omega, gamma_star=0.0)
    np.testing.assert_allclose(spec.intensity, lorentzian(omega, qd.linewidth), rtol=1e-12)


def test_bulk_spectrum_rejects_unresolved_zpl():
    with pytest.raises(SpectrumResolutionError):
        bulk_spectrum(BATH, QDParams(), np.linspace(-4000, 4000, 801))


def test_bath_validation():
    with pytest.raises(ValueError):
        PhononBath(sigma=0.0)
    with pytest.raises(ValueError):
        PhononBath(T=-1.0)
    with pytest.raises(ValueError):
        QDParams(gamma0=0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(1.0, 30.0))
def test_sideband_weight_property(T):
    sb = phonon_sideband(BATH.at(T))
    assert sb.weight() == pytest.approx(1 - sb.eta_zpl, abs=1e-10)
