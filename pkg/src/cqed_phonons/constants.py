"""Physical constants in the library's internal unit system.

Energies are in micro-electronvolts (ueV), times in nanoseconds (ns) and
rates in 1/ns.  Lengths and material constants stay in SI and are converted
where they enter the phonon coupling.
"""

from scipy import constants as _si

HBAR = 0.6582119569  # ueV * ns
KB = 86.17333  # ueV / K

HBAR_SI = _si.hbar  # J * s
EV_SI = _si.e  # J per eV
UEV_SI = _si.e * 1e-6  # J per ueV
