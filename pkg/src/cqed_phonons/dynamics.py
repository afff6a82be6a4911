"""Lindblad dynamics of the dot-cavity system after instantaneous excitation.

The state lives in the single-excitation space {|e,0>, |g,1>, |g,0>}, which
is exact when one excitation is injected at t = 0.  Times are in ns, rates in
1/ns, couplings and linewidths in ueV.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from cqed_phonons.constants import HBAR
from cqed_phonons.purcell import CavityParams

EXC, CAV, GND = 0, 1, 2


class IntegrationError(RuntimeError):
    """The adaptive integrator failed (typically step-size underflow)."""


class GridSpanError(ValueError):
    """The time grid is too short for the emission to have finished."""


@dataclass(frozen=True)
class DissipationRates:
    """Incoherent processes of the explicit mode model.

    Parameters
    ----------
    gamma_loss : float
        Emitter population decay into non-monitored channels, 1/ns.
    kappa : float
        Cavity FWHM linewidth, ueV.
    gamma_star : float
        ZPL pure-dephasing width, ueV; the emitter coherence decays at
        ``gamma_star / (2 hbar)`` on top of the population contribution.
    """

    gamma_loss: float
    kappa: float
    gamma_star: float = 0.0

    def __post_init__(self):
        for name in ("gamma_loss", "kappa", "gamma_star"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


def _ket(i):
    v = np.zeros(3, dtype=complex)
    v[i] = 1.0
    return v


def _op(i, j):
    return np.outer(_ket(i), _ket(j))


def hamiltonian(cav: CavityParams) -> np.ndarray:
    """Jaynes-Cummings Hamiltonian (ueV) in the rotating frame of the cavity."""
    h = np.zeros((3, 3), dtype=complex)
    h[EXC, EXC] = cav.delta
    h[EXC, CAV] = h[CAV, EXC] = cav.g
    return h


def jump_operators(rates: DissipationRates) -> list[np.ndarray]:
    return [
        np.sqrt(rates.kappa / HBAR) * _op(GND, CAV),
        np.sqrt(rates.gamma_loss) * _op(GND, EXC),
        np.sqrt(rates.gamma_star / HBAR) * _op(EXC, EXC),
    ]


def liouvillian(cav: CavityParams, rates: DissipationRates) -> np.ndarray:
    """Generator acting on row-major ``rho.ravel()``, in 1/ns."""
    eye = np.eye(3)
    h = hamiltonian(cav) / HBAR
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in jump_operators(rates):
        cdc = c.conj().T @ c
        lv += np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    return lv


@dataclass(frozen=True)
class Trajectory:
    """Density matrices on a time grid plus the integrated output fluxes.

    ``cavity_flux[k]`` is the probability that the excitation left through
    the cavity before ``t[k]``; ``loss_flux`` likewise for the emitter loss
    channel.
    """

    t: np.ndarray
    rho: np.ndarray
    cavity_flux: np.ndarray
    loss_flux: np.ndarray
    cav: CavityParams
    rates: DissipationRates

    @property
    def emitter_population(self) -> np.ndarray:
        return self.rho[:, EXC, EXC].real

    @property
    def cavity_population(self) -> np.ndarray:
        return self.rho[:, CAV, CAV].real

    def trace_error(self) -> float:
        return float(np.max(np.abs(np.trace(self.rho, axis1=1, axis2=2) - 1.0)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.rho + np.conj(np.swapaxes(self.rho, 1, 2)))
        return float(np.linalg.eigvalsh(herm).min())


def slowest_decay_rate(cav: CavityParams, rates: DissipationRates) -> float:
    """Smallest population decay rate (1/ns) of the one-excitation eigenmodes."""
    heff = np.array([[cav.delta - 0.5j * HBAR * rates.gamma_loss, cav.g],
                     [cav.g, -0.5j * rates.kappa]])
    decay = -2 * np.linalg.eigvals(heff).imag / HBAR
    slow = float(decay.min())
    if slow <= 0:
        raise ValueError("the excitation never decays with these rates")
    return slow


def default_time_grid(cav: CavityParams, rates: DissipationRates, n_points: int = 600,
                      lifetimes: float = 12.0) -> np.ndarray:
    return np.linspace(0.0, lifetimes / slowest_decay_rate(cav, rates), n_points)


def _solve(fun, t_span, y0, t_eval, rtol, atol, method):
    sol = solve_ivp(fun, t_span, y0, t_eval=t_eval, method=method, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol.y


def evolve_density_matrix(cav: CavityParams, rates: DissipationRates, t_grid, *,
                          rho0: np.ndarray | None = None, rtol: float = 1e-12,
                          atol: float = 1e-14, method: str = "DOP853") -> Trajectory:
    """Integrate the master equation from ``|e,0>`` (or ``rho0``) on ``t_grid``.

    An embedded Runge-Kutta scheme (Dormand-Prince 8(5,3) by default) with
    dense output supplies the state at every grid time.  The default
    tolerances are tight because the dense-output interpolant over the long
    late-time steps is less accurate than the step itself.  The two escape
    channels are integrated alongside the state so that flux balance can be
    checked to integrator accuracy.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if rho0 is None:
        rho0 = _op(EXC, EXC)
    lv = liouvillian(cav, rates)
    k_cav = rates.kappa / HBAR
    k_loss = rates.gamma_loss

    def rhs(_, y):
        out = np.empty_like(y)
        out[:9] = lv @ y[:9]
        out[9] = k_cav * y[4].real
        out[10] = k_loss * y[0].real
        return out

    y0 = np.concatenate([np.asarray(rho0, dtype=complex).ravel(), [0.0, 0.0]])
    y = _solve(rhs, (t[0], t[-1]), y0, t, rtol, atol, method)
    rho = y[:9].T.reshape(-1, 3, 3)
    return Trajectory(t, rho, y[9].real, y[10].real, cav, rates)


@dataclass(frozen=True)
class TwoTimeCorrelator:
    """``G(t, tau) = <A^dag(t + tau) A(t)>`` on a uniform product grid.

    ``population`` holds ``<A^dag A>`` at ``t[0] + k dt`` for
    ``k < len(t) + len(tau) - 1`` so that ``G(t + tau, 0)`` is available for
    every grid pair.
    """

    t_grid: np.ndarray
    tau_grid: np.ndarray
    values: np.ndarray
    population: np.ndarray

    def shifted_population(self) -> np.ndarray:
        """``P[k, j] = G(t_k + tau_j, 0)``."""
        n_t, n_tau = self.values.shape
        idx = np.arange(n_t)[:, None] + np.arange(n_tau)[None, :]
        return self.population[idx]


_OPERATORS = {"cavity": CAV, "emitter": EXC}


def two_time_correlator(trajectory: Trajectory, cav: CavityParams | None = None,
                        rates: DissipationRates | None = None, *, operator: str = "cavity",
                        rtol: float = 1e-12, atol: float = 1e-15,
                        method: str = "DOP853") -> TwoTimeCorrelator:
    """Quantum-regression two-time correlator of the cavity field (or the dipole).

    For every anchor time the operator-conditioned state ``A rho(t)`` is
    propagated in ``tau`` with the same generator that produced the
    trajectory; only its ``|g,0>`` row is non-zero, so the three-component
    block of the generator acting on that row is integrated for all anchors
    at once.

    Raises
    ------
    GridSpanError
        If the emitting population at the last grid time exceeds 1e-4 of its
        maximum, or the grid is not uniform from ``t = 0``.
    """
    cav = trajectory.cav if cav is None else cav
    rates = trajectory.rates if rates is None else rates
    src = _OPERATORS[operator]
    t = trajectory.t
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise GridSpanError("two-time correlator needs a uniform time grid")
    pop = trajectory.rho[:, src, src].real
    if pop.max() <= 0:
        return TwoTimeCorrelator(t, t - t[0], np.zeros((t.size, t.size), complex),
                                 np.zeros(2 * t.size - 1))
    if pop[-1] > 1e-4 * pop.max():
        raise GridSpanError(
            f"population at t={t[-1]:.4g} ns is {pop[-1] / pop.max():.2e} of its maximum")

    lv = liouvillian(cav, rates)
    row = slice(3 * GND, 3 * GND + 3)
    block = lv[row, row]
    tau = t - t[0]
    # A rho(t): copy row `src` of rho into row GND
    x0 = trajectory.rho[:, src, :].T.copy()
    n = t.size

    def rhs(_, y):
        return (block @ y.reshape(3, n)).ravel()

    y = _solve(rhs, (0.0, tau[-1]), x0.ravel(), tau, rtol, atol, method)
    values = y.reshape(3, n, n)[src].copy()  # [anchor, tau]
    values[:, 0] = pop

    tail = evolve_density_matrix(cav, rates, t[-1] + tau, rho0=trajectory.rho[-1],
                                 rtol=rtol, atol=atol, method=method)
    population = np.concatenate([pop, tail.rho[1:, src, src].real])
    return TwoTimeCorrelator(t, tau, values, population)


def indistinguishability_from_correlator(corr: TwoTimeCorrelator) -> float:
    """Two-photon interference probability from the field correlator.

    Ratio of the trapezoidal double integrals of ``|G(t, tau)|^2`` and
    ``G(t, 0) G(t + tau, 0)`` over the product grid.
    """
    num = np.trapezoid(np.trapezoid(np.abs(corr.values) ** 2, corr.tau_grid, axis=1), corr.t_grid)
    pairs = corr.values[:, :1].real * corr.shifted_population()
    den = np.trapezoid(np.trapezoid(pairs, corr.tau_grid, axis=1), corr.t_grid)
    if den <= 0:
        raise ValueError("no emission in the monitored channel")
    return float(num / den)
