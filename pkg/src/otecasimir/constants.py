"""Physical constants (SI) shared across the package."""

from scipy.constants import c as C_LIGHT  # m/s
from scipy.constants import hbar as HBAR  # J s
from scipy.constants import k as K_B  # J/K
from scipy.constants import e as _E_CHARGE

#: Multiply an energy in eV by this to get an angular frequency in rad/s.
EV_TO_RADS = _E_CHARGE / HBAR

__all__ = ["C_LIGHT", "HBAR", "K_B", "EV_TO_RADS"]
