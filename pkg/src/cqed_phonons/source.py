"""Photon indistinguishability of the full (unfiltered) emission.

The collected light is split into a coherent zero-phonon part and an
incoherent sideband part.  The zero-phonon part is computed non-perturbatively
in the coupling with the master-equation solver: the explicit mode couples to
the dot with the polaron-dressed strength ``g sqrt(eta_zpl)``, and every other
escape route (bulk emission, the excited mode in the two-mode geometry,
sideband emission into the monitored mode) enters as emitter loss.  Sideband
photons do not interfere, so

    I_full = eta_zpl_cav**2 * I_zpl.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from cqed_phonons.dynamics import (
    DissipationRates,
    GridSpanError,
    default_time_grid,
    evolve_density_matrix,
    indistinguishability_from_correlator,
    two_time_correlator,
)
from cqed_phonons.phonons import PhononBath, QDParams, pure_dephasing_rate, zpl_fraction
from cqed_phonons.purcell import CavityParams, EmissionBudget, effective_purcell_with_psb


@dataclass(frozen=True)
class SourceFigures:
    I_full: float
    I_zpl: float
    eta_zpl: float
    eta_zpl_cav: float
    F_eff: float
    beta: float
    gamma_star: float

    def as_dict(self) -> dict:
        return asdict(self)


def explicit_mode(cav: CavityParams, budget: EmissionBudget) -> tuple[CavityParams, DissipationRates]:
    """Monitored mode seen by the zero-phonon dynamics, and its loss channels."""
    dressing = math.sqrt(budget.eta_zpl)
    if cav.split_modes:
        g = cav.g / math.sqrt(2) * dressing
        delta = cav.delta - cav.delta_EM
    else:
        g = cav.g * dressing
        delta = cav.delta
    mode = CavityParams(g=g, kappa=cav.kappa, delta=delta)
    loss = budget.gamma_loss + budget.incoherent_collected_rate
    return mode, loss


def zpl_indistinguishability(mode: CavityParams, rates: DissipationRates, *, operator="cavity",
                             n_points: int = 600, lifetimes: float = 12.0,
                             max_extensions: int = 3) -> float:
    """Indistinguishability of the light leaving through ``operator``.

    Near the exceptional point (kappa close to 4g) the decay carries a
    polynomial prefactor, so the grid is lengthened by half (same step) until
    the emission has died out.
    """
    for attempt in range(max_extensions + 1):
        scale = 1.5**attempt
        t = default_time_grid(mode, rates, int(round(n_points * scale)), lifetimes * scale)
        traj = evolve_density_matrix(mode, rates, t)
        try:
            corr = two_time_correlator(traj, operator=operator)
        except GridSpanError:
            if attempt == max_extensions:
                raise
            continue
        return indistinguishability_from_correlator(corr)


def full_spectrum_indistinguishability(cav: CavityParams, qd: QDParams, bath: PhononBath,
                                       T: float | None = None, *, dephasing: bool = True,
                                       n_points: int = 600, lifetimes: float = 12.0) -> SourceFigures:
    """Indistinguishability, Purcell factor and ZPL fractions at temperature ``T``.

    Parameters
    ----------
    cav, qd, bath
        Device description; ``bath.T`` is replaced by ``T`` when given.
    dephasing : bool
        Include the thermal pure dephasing (False gives the phonon-sideband-only
        counterfactual).
    n_points, lifetimes
        Size and span (in slowest-mode lifetimes) of the t and tau grids.

    With ``g = 0`` the emitter is observed directly (bulk limit) and all of
    its emission is collected.
    """
    if T is not None:
        bath = bath.at(T)
    gamma_star = pure_dephasing_rate(qd, bath.T) if dephasing else 0.0
    if cav.g == 0:
        eta = zpl_fraction(bath)
        rates = DissipationRates(gamma_loss=qd.gamma0, kappa=cav.kappa, gamma_star=gamma_star)
        i_zpl = zpl_indistinguishability(CavityParams(g=0.0, kappa=cav.kappa), rates,
                                         operator="emitter", n_points=n_points, lifetimes=lifetimes)
        return SourceFigures(eta**2 * i_zpl, i_zpl, eta, eta, 0.0, 0.0, gamma_star)

    budget = effective_purcell_with_psb(cav, qd, bath, gamma_star)
    mode, loss = explicit_mode(cav, budget)
    rates = DissipationRates(gamma_loss=loss, kappa=cav.kappa, gamma_star=gamma_star)
    i_zpl = zpl_indistinguishability(mode, rates, n_points=n_points, lifetimes=lifetimes)
    return SourceFigures(
        I_full=budget.eta_zpl_cav**2 * i_zpl,
        I_zpl=i_zpl,
        eta_zpl=budget.eta_zpl,
        eta_zpl_cav=budget.eta_zpl_cav,
        F_eff=budget.F_eff,
        beta=budget.beta,
        gamma_star=gamma_star,
    )
