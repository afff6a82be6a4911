"""Independent boson model of an exciton coupled to longitudinal acoustic phonons.

Energies are in ueV throughout; the phonon "frequency" arguments are phonon
energies hbar*omega.  The coupling density ``J(e)/e**2`` is written as

    K * e / e_c**2 * exp(-e**2 / (2 e_c**2)),

with ``e_c = hbar c_s / sigma`` the cutoff energy and
``K = D**2 / (4 pi**2 rho_m hbar c_s**3 sigma**2)`` the zero-temperature
Huang-Rhys factor of a Gaussian exciton envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from cqed_phonons.constants import EV_SI, HBAR, HBAR_SI, KB, UEV_SI

HBAR_PS = HBAR * 1e3  # ueV * ps


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (worst residual {residual:.3e})")
        self.residual = residual


class SpectrumResolutionError(ValueError):
    """The energy grid does not resolve the zero-phonon line."""


class SidebandWindowError(RuntimeError):
    """The sideband correlator has not decayed inside the transform window."""


@dataclass(frozen=True)
class PhononBath:
    """Deformation-potential coupled LA phonon bath.

    Parameters
    ----------
    D : float
        Exciton deformation potential D_e + D_h in eV.
    sigma : float
        Gaussian confinement length of electron and hole in nm.
    c_s : float
        Longitudinal sound velocity in m/s.
    rho_m : float
        Mass density in kg/m^3.
    T : float
        Lattice temperature in K.
    """

    D: float = 14.0
    sigma: float = 5.0
    c_s: float = 5110.0
    rho_m: float = 5370.0
    T: float = 0.0

    def __post_init__(self):
        if self.D < 0:
            raise ValueError(f"deformation potential must be >= 0, got {self.D}")
        for name in ("sigma", "c_s", "rho_m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not self.T >= 0:
            raise ValueError(f"temperature must be >= 0, got {self.T}")

    @property
    def cutoff_energy(self) -> float:
        """hbar c_s / sigma in ueV."""
        return HBAR_SI * self.c_s / (self.sigma * 1e-9) / UEV_SI

    @property
    def huang_rhys(self) -> float:
        """Zero-temperature integral of J/e^2, dimensionless."""
        d = self.D * EV_SI
        s = self.sigma * 1e-9
        return d**2 / (4 * math.pi**2 * self.rho_m * HBAR_SI * self.c_s**3 * s**2)

    def at(self, T: float) -> PhononBath:
        return replace(self, T=T)


@dataclass(frozen=True)
class QDParams:
    """Emitter parameters.

    Parameters
    ----------
    gamma0 : float
        Bulk radiative decay rate in 1/ns.
    alpha : float
        Pure-dephasing prefactor in ueV.
    eps_p : float
        Energy of the maximally coupled phonons in meV.
    """

    gamma0: float = 1.0
    alpha: float = 0.1
    eps_p: float = 1.0

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError(f"gamma0 must be > 0, got {self.gamma0}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.eps_p > 0:
            raise ValueError(f"eps_p must be > 0, got {self.eps_p}")

    @property
    def linewidth(self) -> float:
        """Radiative linewidth hbar*gamma0 in ueV."""
        return HBAR * self.gamma0


@dataclass(frozen=True)
class PhaseFunction:
    tau_grid: np.ndarray  # ps
    phi: np.ndarray
    phi_infinity: float
    error: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class SpectrumGrid:
    """Emission spectrum sampled on detunings from the zero-phonon line.

    ``intensity`` is ``zpl + sideband`` in 1/ueV.
    """

    omega_grid: np.ndarray
    intensity: np.ndarray
    zpl: np.ndarray
    sideband: np.ndarray

    def integral(self) -> float:
        return float(np.trapezoid(self.intensity, self.omega_grid))


def spectral_density(omega, bath: PhononBath):
    """Phonon spectral density J at phonon energy ``omega`` (ueV), in ueV."""
    e = np.asarray(omega, dtype=float)
    if np.any(e < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    ec = bath.cutoff_energy
    out = bath.huang_rhys * e**3 / ec**2 * np.exp(-(e**2) / (2 * ec**2))
    return out if out.ndim else float(out)


def _coupling_density(e, bath: PhononBath):
    # J(e)/e^2, regular at e = 0
    ec = bath.cutoff_energy
    return bath.huang_rhys * e / ec**2 * np.exp(-(e**2) / (2 * ec**2))


def bose_occupation(omega, T: float):
    """Bose-Einstein occupation of a mode of energy ``omega`` (ueV) at ``T`` (K).

    Exactly zero at T = 0.  A zero-energy mode at finite temperature has a
    divergent occupation and is rejected.
    """
    e = np.asarray(omega, dtype=float)
    if T < 0:
        raise ValueError(f"temperature must be >= 0, got {T}")
    if T == 0:
        out = np.zeros_like(e)
    else:
        if np.any(e <= 0):
            raise ValueError("Bose occupation diverges for omega <= 0 at T > 0")
        out = 1.0 / np.expm1(e / (KB * T))
    return out if out.ndim else float(out)


def pure_dephasing_rate(qd: QDParams, T: float) -> float:
    """Thermally activated ZPL broadening alpha * n (n + 1), in ueV."""
    n = bose_occupation(qd.eps_p * 1e3, T)
    return qd.alpha * n * (n + 1.0)


def _thermal_factor(e, T):
    # 2N(e) + 1 = coth(e / 2kT); multiplied by e so that e -> 0 stays finite
    e = np.asarray(e, dtype=float)
    if T == 0:
        return e
    x = e / (2 * KB * T)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(x > 1e-8, e / np.tanh(np.maximum(x, 1e-300)), 2 * KB * T)
    return out


def _omega_max(bath: PhononBath, factor: float) -> float:
    if factor < 10:
        raise ValueError("integration cutoff must be at least 10 cutoff energies")
    return factor * bath.cutoff_energy


@lru_cache(maxsize=256)
def _phi_infinity(bath: PhononBath, omega_max_factor: float, epsabs: float):
    ec = bath.cutoff_energy
    K = bath.huang_rhys
    if K == 0:
        return 0.0, 0.0

    def integrand(e):
        return K / ec**2 * math.exp(-(e**2) / (2 * ec**2)) * float(_thermal_factor(e, bath.T))

    val, err = quad(integrand, 0.0, _omega_max(bath, omega_max_factor),
                    epsabs=epsabs, epsrel=1e-12, limit=400)
    return val, err


def phase_function(bath: PhononBath, tau_grid, *, omega_max_factor: float = 12.0,
                   epsabs: float = 1e-10, max_error: float = 1e-6) -> PhaseFunction:
    """Phonon phase phi(tau) of the independent boson model.

    ``phi(tau) = int de J(e)/e^2 [(2N+1)(1 - cos(e tau/hbar)) + i sin(e tau/hbar)]``
    evaluated by adaptive (QUADPACK) quadrature for each offset in ``tau_grid``
    (ps).  The polarization decays as ``exp(-phi(tau))``.

    Raises
    ------
    QuadratureError
        If the estimated absolute error at any grid point exceeds ``max_error``.
    """
    tau = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if not np.all(np.isfinite(tau)):
        raise ValueError("tau grid must be finite")
    wmax = _omega_max(bath, omega_max_factor)
    phi_inf, err_inf = _phi_infinity(bath, omega_max_factor, epsabs)
    phi = np.zeros(tau.shape, dtype=complex)
    errors = np.zeros(tau.shape)
    if bath.huang_rhys == 0:
        return PhaseFunction(tau, phi, 0.0, errors)

    ec = bath.cutoff_energy
    K = bath.huang_rhys

    def thermal(e):
        return K / ec**2 * math.exp(-(e**2) / (2 * ec**2)) * float(_thermal_factor(e, bath.T))

    def bare(e):
        return K / ec**2 * e * math.exp(-(e**2) / (2 * ec**2))

    for k, t in enumerate(tau):
        if t == 0.0:
            continue
        w = abs(t) / HBAR_PS
        re_c, e1 = quad(thermal, 0.0, wmax, weight="cos", wvar=w, epsabs=epsabs, limit=400)
        im_s, e2 = quad(bare, 0.0, wmax, weight="sin", wvar=w, epsabs=epsabs, limit=400)
        phi[k] = (phi_inf - re_c) + 1j * math.copysign(im_s, t)
        errors[k] = err_inf + e1 + e2
    worst = float(errors.max(initial=err_inf))
    if worst > max_error:
        raise QuadratureError("phase-function quadrature did not converge", worst)
    return PhaseFunction(tau, phi, phi_inf, errors)


def zpl_fraction(bath: PhononBath, *, omega_max_factor: float = 12.0,
                 epsabs: float = 1e-12) -> float:
    """Debye-Waller weight of the zero-phonon line, exp(-phi_infinity)."""
    phi_inf, err = _phi_infinity(bath, omega_max_factor, epsabs)
    if err > 1e-6:
        raise QuadratureError("ZPL weight quadrature did not converge", err)
    return math.exp(-phi_inf)


@dataclass(frozen=True)
class SidebandDensity:
    """Phonon-sideband emission density on a uniform detuning grid.

    Detunings are photon energy minus ZPL energy (ueV): phonon emission
    appears at negative detuning.  ``density`` integrates to 1 - eta_zpl.
    """

    omega: np.ndarray
    density: np.ndarray
    eta_zpl: float

    @property
    def step(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def __call__(self, omega):
        return np.interp(omega, self.omega, self.density, left=0.0, right=0.0)

    def weight(self) -> float:
        return float(self.density.sum() * self.step)


def one_phonon_density(omega, bath: PhononBath):
    """Single-phonon emission density at photon detuning ``omega`` (ueV)."""
    w = np.asarray(omega, dtype=float)
    a = np.abs(w)
    j = _coupling_density(a, bath)
    if bath.T == 0:
        return np.where(w < 0, j, 0.0)
    kt = KB * bath.T
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        n = 1.0 / np.expm1(a / kt)
        dens = np.where(w < 0, j * (n + 1.0), j * n)
    # J/e^2 ~ e and N ~ kT/e near zero
    return np.where(a == 0, bath.huang_rhys / bath.cutoff_energy**2 * kt, dens)


@lru_cache(maxsize=128)
def phonon_sideband(bath: PhononBath, *, span_factor: float = 16.0,
                    points_per_cutoff: int = 200) -> SidebandDensity:
    """Multi-phonon sideband from the exact IBM correlator.

    With ``psi(tau) = phi_inf - phi(tau)`` the sideband is the Fourier
    transform of ``exp(-phi_inf) * (exp(psi(tau)) - 1)``.  ``psi`` itself is
    the transform of the one-phonon density, so the whole construction runs on
    one uniform energy grid with a pair of FFTs.  The ZPL Markovian broadening
    is not applied to the sideband.
    """
    ec = bath.cutoff_energy
    eta = zpl_fraction(bath)
    dw = ec / points_per_cutoff
    n = 1 << int(math.ceil(math.log2(2 * span_factor * points_per_cutoff)))
    omega = (np.arange(n) - n // 2) * dw
    if bath.huang_rhys == 0:
        return SidebandDensity(omega, np.zeros(n), 1.0)

    rho1 = one_phonon_density(omega, bath)
    psi = np.fft.fft(np.fft.ifftshift(rho1)) * dw
    correlator = eta * np.expm1(psi)
    edge = abs(correlator[n // 2]) / abs(correlator[0])
    if edge > 1e-4:
        raise SidebandWindowError(
            f"sideband correlator at window edge is {edge:.2e} of its peak")
    dens = np.fft.fftshift(np.fft.ifft(correlator)).real / dw
    dens = np.maximum(dens, 0.0)
    if max(dens[0], dens[-1]) > 1e-10 * dens.max():
        raise SidebandWindowError("sideband not contained in the energy window")
    return SidebandDensity(omega, dens, eta)


def lorentzian(x, fwhm: float):
    """Unit-area Lorentzian of full width ``fwhm``."""
    x = np.asarray(x, dtype=float)
    h = 0.5 * fwhm
    return h / np.pi / (x**2 + h**2)


def emission_grid(fwhm: float, span: float = 4000.0, *, points_per_fwhm: int = 10,
                  core_widths: float = 20.0, n_wing: int = 400) -> np.ndarray:
    """Detuning grid dense across the ZPL and geometric over the wings."""
    step = fwhm / points_per_fwhm
    core = core_widths * fwhm
    if core >= span:
        return np.arange(-span, span + step / 2, step)
    inner = np.arange(-core, core + step / 2, step)
    wing = np.geomspace(core, span, n_wing + 1)[1:]
    return np.concatenate([-wing[::-1], inner, wing])


def _check_zpl_resolved(omega: np.ndarray, fwhm: float) -> None:
    if omega[0] > -fwhm or omega[-1] < fwhm:
        return
    lo = np.searchsorted(omega, -fwhm, side="right") - 1
    hi = np.searchsorted(omega, fwhm, side="left")
    spacing = np.diff(omega[lo:hi + 1]).max()
    if spacing > fwhm / 4:
        raise SpectrumResolutionError(
            f"grid spacing {spacing:.3g} ueV does not resolve ZPL FWHM {fwhm:.3g} ueV")


def bulk_spectrum(bath: PhononBath, qd: QDParams, omega_grid, gamma_total: float | None = None,
                  gamma_star: float | None = None) -> SpectrumGrid:
    """Normalized emission spectrum of the dot without cavity.

    Parameters
    ----------
    bath, qd : PhononBath, QDParams
    omega_grid : array_like
        Strictly increasing detunings from the ZPL in ueV.
    gamma_total : float, optional
        Population decay rate in 1/ns (defaults to ``qd.gamma0``).
    gamma_star : float, optional
        Pure-dephasing broadening in ueV (defaults to the thermal value at
        ``bath.T``).
    """
    omega = np.asarray(omega_grid, dtype=float)
    if omega.ndim != 1 or omega.size < 2 or np.any(np.diff(omega) <= 0):
        raise ValueError("omega grid must be strictly increasing")
    if gamma_total is None:
        gamma_total = qd.gamma0
    if gamma_total <= 0:
        raise ValueError("gamma_total must be > 0")
    if gamma_star is None:
        gamma_star = pure_dephasing_rate(qd, bath.T)
    fwhm = HBAR * gamma_total + gamma_star
    _check_zpl_resolved(omega, fwhm)
    sb = phonon_sideband(bath)
    zpl = sb.eta_zpl * lorentzian(omega, fwhm)
    side = sb(omega)
    return SpectrumGrid(omega, zpl + side, zpl, side)
