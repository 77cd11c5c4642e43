"""Dielectric response models for the bodies and the interstitial vacuum.

Two model families are supported: analytic Lorentz-oscillator permittivities
(closed form on both the real and the imaginary frequency axis) and tabulated
data (omega, Re eps, Im eps) with log-frequency interpolation on the real axis
and a Kramers-Kronig transform onto the imaginary axis.  All frequencies are
angular (rad/s), all permittivities relative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import EV_TO_RADS

__all__ = [
    "MaterialError",
    "OscillatorModel",
    "TabulatedIndex",
    "VACUUM",
    "SILICA_MODEL",
    "SILICON_MODEL",
    "BUILTIN_MATERIALS",
    "get_material",
    "load_table",
    "permittivity",
    "permittivity_imag_axis",
    "eps_at",
    "is_vacuum",
]


class MaterialError(ValueError):
    """Invalid material definition or query outside its domain of validity."""


@dataclass(frozen=True)
class OscillatorModel:
    """Sum of Lorentz oscillators.

    eps(omega) = eps_inf + sum_j s_j w_j^2 / (w_j^2 - omega^2 - i g_j omega)

    On the imaginary axis the same parameters give the manifestly real,
    monotonically decreasing

    eps(i xi) = eps_inf + sum_j s_j w_j^2 / (w_j^2 + xi^2 + g_j xi)

    Parameters
    ----------
    name : str
        Identifier used in config echoes and cache keys.
    eps_inf : float
        High-frequency limit, >= 1.
    oscillators : tuple of (strength, omega0, gamma)
        strength >= 0, omega0 > 0, gamma >= 0 (rad/s).
    """

    name: str
    eps_inf: float = 1.0
    oscillators: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if self.eps_inf < 1.0:
            raise MaterialError(f"{self.name}: eps_inf must be >= 1, got {self.eps_inf}")
        for s, w0, g in self.oscillators:
            if s < 0 or w0 <= 0 or g < 0:
                raise MaterialError(
                    f"{self.name}: oscillator (s={s}, w0={w0}, g={g}) violates "
                    "s >= 0, w0 > 0, g >= 0"
                )

    def eps(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.full(omega.shape, self.eps_inf, dtype=complex)
        for s, w0, g in self.oscillators:
            out += s * w0**2 / (w0**2 - omega**2 - 1j * g * omega)
        return out[()]

    def eps_imag_axis(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.full(xi.shape, self.eps_inf, dtype=float)
        for s, w0, g in self.oscillators:
            out += s * w0**2 / (w0**2 + xi**2 + g * xi)
        return out[()]

    def cache_token(self):
        return ("osc", self.name, self.eps_inf, self.oscillators)


@dataclass(frozen=True)
class TabulatedIndex:
    """Tabulated permittivity on a real-frequency grid.

    Real-axis queries interpolate Re eps and Im eps linearly in log omega.
    Imaginary-axis queries use the Kramers-Kronig integral

        eps(i xi) = 1 + (2/pi) Integral_0^inf w' Im eps(w') / (w'^2 + xi^2) dw'

    evaluated by the trapezoid rule in log omega over the tabulated support
    (Im eps is taken to vanish outside it, so the tails contribute nothing).

    Parameters
    ----------
    name : str
    omega : ndarray
        Strictly increasing angular frequencies, > 0.
    eps_re, eps_im : ndarray
        Re eps and Im eps on that grid; Im eps >= 0 (passivity).
    extend : bool
        If True, real-axis queries outside the grid return the edge value;
        if False (default) they raise.
    """

    name: str
    omega: np.ndarray
    eps_re: np.ndarray
    eps_im: np.ndarray
    extend: bool = False
    _log_omega: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        eps_re = np.asarray(self.eps_re, dtype=float)
        eps_im = np.asarray(self.eps_im, dtype=float)
        if omega.ndim != 1 or omega.size < 2:
            raise MaterialError(f"{self.name}: need at least two grid points")
        if not (np.all(np.diff(omega) > 0) and omega[0] > 0):
            raise MaterialError(f"{self.name}: omega grid must be positive and strictly increasing")
        if eps_re.shape != omega.shape or eps_im.shape != omega.shape:
            raise MaterialError(f"{self.name}: column length mismatch")
        if np.any(eps_im < 0):
            raise MaterialError(f"{self.name}: Im eps must be >= 0 (passive medium)")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "eps_re", eps_re)
        object.__setattr__(self, "eps_im", eps_im)
        object.__setattr__(self, "_log_omega", np.log(omega))

    def eps(self, omega):
        omega = np.asarray(omega, dtype=float)
        lo, hi = self.omega[0], self.omega[-1]
        if not self.extend and np.any((omega < lo) | (omega > hi)):
            raise MaterialError(
                f"{self.name}: query outside tabulated range "
                f"[{lo:.3e}, {hi:.3e}] rad/s (set extend=True to clamp)"
            )
        x = np.log(np.clip(omega, lo, hi))
        re = np.interp(x, self._log_omega, self.eps_re)
        im = np.interp(x, self._log_omega, self.eps_im)
        return (re + 1j * im)[()]

    def eps_imag_axis(self, xi):
        xi = np.asarray(xi, dtype=float)
        w = self.omega
        # trapezoid in u = ln w:  dw = w du, integrand w * Im eps / (w^2 + xi^2)
        f = w[None, :] ** 2 * self.eps_im[None, :] / (w[None, :] ** 2 + np.atleast_1d(xi)[:, None] ** 2)
        integral = np.trapezoid(f, x=self._log_omega, axis=-1)
        out = 1.0 + (2.0 / np.pi) * integral
        return out.reshape(xi.shape)[()]

    def cache_token(self):
        return (
            "table",
            self.name,
            self.omega.tobytes(),
            self.eps_re.tobytes(),
            self.eps_im.tobytes(),
            self.extend,
        )


#: The interstitial medium and default zone filler.
VACUUM = OscillatorModel(name="vacuum")

#: Documented stand-in for amorphous silica: one infrared and one ultraviolet
#: Lorentz band, eps(0) = 3.75.  Coarse scale model, not a fit to data.
SILICA_MODEL = OscillatorModel(
    name="silica-model",
    eps_inf=1.0,
    oscillators=((0.95, 1.0e14, 6.0e12), (1.80, 1.6e16, 8.0e15)),
)

#: Documented stand-in for intrinsic silicon: single ultraviolet band,
#: eps(0) = 11.7.
SILICON_MODEL = OscillatorModel(
    name="silicon-model",
    eps_inf=1.035,
    oscillators=((10.665, 6.6e15, 3.0e14),),
)

BUILTIN_MATERIALS = {
    "vacuum": VACUUM,
    "silica-model": SILICA_MODEL,
    "silicon-model": SILICON_MODEL,
}


def get_material(name):
    """Look up a built-in material by name."""
    try:
        return BUILTIN_MATERIALS[name]
    except KeyError:
        raise MaterialError(
            f"unknown material {name!r}; built-ins: {sorted(BUILTIN_MATERIALS)}"
        ) from None


def load_table(path, name=None, unit="rad/s", extend=False):
    """Read a whitespace-separated table (omega, Re eps, Im eps).

    Lines starting with '#' are comments.  ``unit`` is 'rad/s' or 'eV' for the
    first column.
    """
    data = np.loadtxt(path, comments="#", dtype=float)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape[1] != 3:
        raise MaterialError(f"{path}: expected 3 columns (omega, Re eps, Im eps), got {data.shape[1]}")
    omega = data[:, 0]
    if unit == "eV":
        omega = omega * EV_TO_RADS
    elif unit != "rad/s":
        raise MaterialError(f"{path}: unit must be 'rad/s' or 'eV', got {unit!r}")
    if omega.size >= 2 and not np.all(np.diff(omega) > 0):
        raise MaterialError(f"{path}: frequency column must be strictly increasing")
    return TabulatedIndex(
        name=name or str(path),
        omega=omega,
        eps_re=data[:, 1],
        eps_im=data[:, 2],
        extend=extend,
    )


def permittivity(material, omega):
    """eps(omega) on the real axis (complex)."""
    return material.eps(omega)


def permittivity_imag_axis(material, xi):
    """eps(i xi) on the positive imaginary axis (real, >= 1 for passive media)."""
    return material.eps_imag_axis(xi)


def is_vacuum(material):
    """True if the material is vacuum-equivalent (eps identically 1)."""
    return eps_at(material, 1e15) == 1.0 and eps_at(material, 1j * 1e15) == 1.0


def eps_at(material, omega):
    """Dispatch on a real or purely imaginary angular frequency.

    ``omega`` real -> eps(omega); ``omega = i xi`` (complex with zero real
    part) -> eps(i xi).  Used by the scattering code, which runs the same
    algebra on both axes.
    """
    if np.iscomplexobj(omega) and complex(omega).real == 0.0 and complex(omega).imag != 0.0:
        return complex(material.eps_imag_axis(complex(omega).imag))
    if np.iscomplexobj(omega) and complex(omega).imag != 0.0:
        raise MaterialError(f"frequency must be real or purely imaginary, got {omega}")
    return complex(material.eps(float(np.real(omega))))
