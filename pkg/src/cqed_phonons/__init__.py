"""Phonon-induced decoherence of quantum-dot single-photon sources in cavities."""

from cqed_phonons.constants import HBAR, KB
from cqed_phonons.phonons import (
    PhaseFunction,
    PhononBath,
    QDParams,
    SpectrumGrid,
    bose_occupation,
    bulk_spectrum,
    phase_function,
    pure_dephasing_rate,
    spectral_density,
    zpl_fraction,
)
from cqed_phonons.purcell import (
    CavityParams,
    EmissionBudget,
    effective_purcell_no_phonon,
    effective_purcell_with_psb,
    loss_rate_with_mode_splitting,
)
from cqed_phonons.dynamics import (
    DissipationRates,
    Trajectory,
    TwoTimeCorrelator,
    evolve_density_matrix,
    indistinguishability_from_correlator,
    two_time_correlator,
)
from cqed_phonons.source import SourceFigures, full_spectrum_indistinguishability

__version__ = "0.1.0"

__all__ = [
    "HBAR",
    "KB",
    "CavityParams",
    "DissipationRates",
    "EmissionBudget",
    "PhaseFunction",
    "PhononBath",
    "QDParams",
    "SourceFigures",
    "SpectrumGrid",
    "Trajectory",
    "TwoTimeCorrelator",
    "bose_occupation",
    "bulk_spectrum",
    "effective_purcell_no_phonon",
    "effective_purcell_with_psb",
    "evolve_density_matrix",
    "full_spectrum_indistinguishability",
    "indistinguishability_from_correlator",
    "loss_rate_with_mode_splitting",
    "phase_function",
    "pure_dephasing_rate",
    "spectral_density",
    "two_time_correlator",
    "zpl_fraction",
]
