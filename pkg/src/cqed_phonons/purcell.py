"""Purcell budgets of a dot coupled to one or two cavity modes.

Detunings follow ``delta = omega_QD - omega_cav``; a cavity mode therefore
sits at photon detuning ``-delta`` on the sideband axis of
:mod:`cqed_phonons.phonons`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from cqed_phonons.constants import HBAR
from cqed_phonons.phonons import (
    PhononBath,
    QDParams,
    SidebandDensity,
    lorentzian,
    phonon_sideband,
    pure_dephasing_rate,
)


class StrongCouplingWarning(UserWarning):
    """kappa < 4g: the bad-cavity Purcell formula is outside its validity range."""


@dataclass(frozen=True)
class CavityParams:
    """Cavity mode(s) coupled to the dot.

    Parameters
    ----------
    g : float
        Dot-cavity coupling in ueV.  With ``split_modes`` each of the two
        polarization modes couples with ``g / sqrt(2)``.
    kappa : float
        Cavity FWHM linewidth in ueV.
    delta : float
        Dot-cavity detuning omega_QD - omega_cav in ueV (excited mode when split).
    delta_EM : float
        Monitored-minus-excited mode splitting in ueV.
    split_modes : bool
        Use the crossed-polarization two-mode configuration.
    """

    g: float
    kappa: float
    delta: float = 0.0
    delta_EM: float = 0.0
    split_modes: bool = False

    def __post_init__(self):
        if not self.g >= 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")

    def nominal_purcell(self, qd: QDParams) -> float:
        """4 g^2 / (kappa hbar gamma0)."""
        return 4 * self.g**2 / (self.kappa * qd.linewidth)

    @property
    def strong_coupling(self) -> bool:
        g = self.g / math.sqrt(2) if self.split_modes else self.g
        return self.kappa < 4 * g


@dataclass(frozen=True)
class EmissionBudget:
    """Where the emission goes, in units of the bulk rate gamma0.

    ``F_zpl_collected`` and ``F_psb_collected`` refer to the monitored mode
    (the only mode in the single-mode configuration).  ``gamma_loss`` is the
    decay rate (1/ns) into every channel other than the monitored mode.
    """

    F_eff: float
    beta: float
    eta_zpl_cav: float
    gamma_loss: float
    F_zpl_collected: float
    F_psb_collected: float
    eta_zpl: float
    gamma0: float
    strong_coupling: bool = False

    @property
    def incoherent_collected_rate(self) -> float:
        """Sideband emission into the monitored mode, 1/ns."""
        return self.gamma0 * self.F_psb_collected

    @property
    def total_rate(self) -> float:
        return self.gamma0 * (1.0 + self.F_eff)


def _bad_cavity_rate(g, kappa, delta, qd, gamma_star):
    # emission rate into the mode over gamma0, no phonons
    width = kappa + qd.linewidth + gamma_star
    return 4 * g**2 / (qd.linewidth * width) / (1.0 + (2 * delta / width) ** 2)


def effective_purcell_no_phonon(cav: CavityParams, qd: QDParams, gamma_star: float = 0.0) -> float:
    """Bad-cavity Purcell factor of a phonon-free emitter.

    ``4 g^2 / (hbar gamma0 W) / (1 + (2 delta / W)^2)`` with
    ``W = kappa + hbar gamma0 + gamma_star``.  Uses the full ``g`` and
    ``delta`` of ``cav`` regardless of ``split_modes``.  Emits a
    :class:`StrongCouplingWarning` when kappa < 4g.
    """
    if cav.kappa < 4 * cav.g:
        warnings.warn(
            f"kappa={cav.kappa} ueV < 4g={4 * cav.g} ueV: outside the bad-cavity regime",
            StrongCouplingWarning,
            stacklevel=2,
        )
    return _bad_cavity_rate(cav.g, cav.kappa, cav.delta, qd, gamma_star)


def lorentzian_overlap(sideband: SidebandDensity, center: float, fwhm: float) -> float:
    """Integral of the piecewise-linear sideband density against a unit Lorentzian.

    Exact for the linear interpolant on each grid segment, so arbitrarily
    narrow cavities need no refinement of the sideband grid.
    """
    x = sideband.omega - center
    y = sideband.density
    h = 0.5 * fwhm
    a, b = x[:-1], x[1:]
    ya, yb = y[:-1], y[1:]
    slope = (yb - ya) / (b - a)
    icept = ya - slope * a
    atan = np.arctan(b / h) - np.arctan(a / h)
    logs = np.log((b**2 + h**2) / (a**2 + h**2))
    return float(np.sum(icept * atan / np.pi + slope * h * logs / (2 * np.pi)))


def _mode(g, kappa, delta, eta, sideband, qd, gamma_star):
    zpl = eta * _bad_cavity_rate(g, kappa, delta, qd, gamma_star)
    psb = 2 * math.pi * g**2 * lorentzian_overlap(sideband, -delta, kappa) / qd.linewidth
    return zpl, psb


def _resolve_gamma_star(qd, bath, gamma_star):
    return pure_dephasing_rate(qd, bath.T) if gamma_star is None else gamma_star


def loss_rate_with_mode_splitting(cav: CavityParams, qd: QDParams, bath: PhononBath,
                                  gamma_star: float | None = None) -> float:
    """Decay rate (1/ns) into channels other than the monitored mode.

    Bulk emission plus ZPL and sideband emission into the excited mode, which
    couples with ``g / sqrt(2)`` at detuning ``cav.delta`` from the dot.
    """
    if not cav.split_modes:
        raise ValueError("loss_rate_with_mode_splitting requires split_modes=True")
    gamma_star = _resolve_gamma_star(qd, bath, gamma_star)
    sb = phonon_sideband(bath)
    zpl_e, psb_e = _mode(cav.g / math.sqrt(2), cav.kappa, cav.delta, sb.eta_zpl, sb, qd, gamma_star)
    return qd.gamma0 * (1.0 + zpl_e + psb_e)


def effective_purcell_with_psb(cav: CavityParams, qd: QDParams, bath: PhononBath,
                               gamma_star: float | None = None) -> EmissionBudget:
    """Effective Purcell factor including cavity-filtered phonon sidebands.

    ``F_eff = eta_zpl F_no-phonon + 2 pi g^2 / (hbar gamma0) int rho_PSB S_cav``
    summed over the modes.  In the two-mode configuration the excited mode is
    resonant with the dot (up to ``cav.delta``) and the monitored mode sits
    ``delta_EM`` above it.

    Parameters
    ----------
    gamma_star : float, optional
        ZPL pure-dephasing width in ueV; the thermal value at ``bath.T`` when
        omitted.
    """
    gamma_star = _resolve_gamma_star(qd, bath, gamma_star)
    sb = phonon_sideband(bath)
    eta = sb.eta_zpl
    if cav.split_modes:
        gm = cav.g / math.sqrt(2)
        zpl_e, psb_e = _mode(gm, cav.kappa, cav.delta, eta, sb, qd, gamma_star)
        zpl_m, psb_m = _mode(gm, cav.kappa, cav.delta - cav.delta_EM, eta, sb, qd, gamma_star)
        f_eff = zpl_e + psb_e + zpl_m + psb_m
        gamma_loss = qd.gamma0 * (1.0 + zpl_e + psb_e)
    else:
        zpl_m, psb_m = _mode(cav.g, cav.kappa, cav.delta, eta, sb, qd, gamma_star)
        f_eff = zpl_m + psb_m
        gamma_loss = qd.gamma0
    collected = zpl_m + psb_m
    # with g = 0 nothing reaches the cavity; the emitted light is the bulk mix
    eta_cav = zpl_m / collected if collected > 0 else eta
    return EmissionBudget(
        F_eff=f_eff,
        beta=collected / (1.0 + f_eff),
        eta_zpl_cav=eta_cav,
        gamma_loss=gamma_loss,
        F_zpl_collected=zpl_m,
        F_psb_collected=psb_m,
        eta_zpl=eta,
        gamma0=qd.gamma0,
        strong_coupling=cav.strong_coupling,
    )


def cavity_spectrum(cav: CavityParams, qd: QDParams, bath: PhononBath, omega_grid,
                    gamma_star: float | None = None):
    """Spectrum of the light leaking from the monitored mode, normalized to 1.

    Returns ``(zpl, sideband)`` densities (1/ueV) on ``omega_grid``.  Both
    parts are the emitter spectrum times the cavity Lorentzian: the ZPL with
    its Purcell-broadened width, the sideband as in the bulk.
    """
    gamma_star = _resolve_gamma_star(qd, bath, gamma_star)
    budget = effective_purcell_with_psb(cav, qd, bath, gamma_star)
    omega = np.asarray(omega_grid, dtype=float)
    sb = phonon_sideband(bath)
    if budget.F_zpl_collected + budget.F_psb_collected == 0:
        raise ValueError("no emission reaches the monitored mode (g = 0)")
    g = cav.g / math.sqrt(2) if cav.split_modes else cav.g
    delta = cav.delta - cav.delta_EM if cav.split_modes else cav.delta
    width = HBAR * budget.total_rate + gamma_star
    norm = budget.F_zpl_collected + budget.F_psb_collected
    # ZPL line seen through the cavity filter; the product of two Lorentzians
    # integrates to a Lorentzian of the summed widths
    cav_line = lorentzian(omega + delta, cav.kappa)
    shape = lorentzian(omega, width) * cav_line / lorentzian(delta, width + cav.kappa)
    zpl = budget.F_zpl_collected * shape / norm
    filt = 2 * math.pi * g**2 * cav_line / qd.linewidth
    side = sb(omega) * filt / norm
    return zpl, side
