"""Line-of-sight channel between the UEs and a pinching antenna on a waveguide.

The PA sits at ``(x, 0, d)`` on a waveguide fed from the BS at the origin;
UE ``k`` sits at ``(x_k, y_k, 0)``. The end-to-end coefficient is the product
of the free-space spherical-wave term and the in-waveguide propagation term.

Phases are carried as unreduced *turns* (cycles) in extended precision and
only folded into ``(-pi, pi]`` by the accessors, because at mmWave the raw
phase is thousands of cycles and folding ``2*pi*d/lambda`` in radians loses
about 1e-12 rad.
"""

from dataclasses import dataclass
import math

import numpy as np

from ._validation import (
    check_finite,
    check_positions,
    check_positive,
    check_ue_index,
)

SPEED_OF_LIGHT = 299_792_458.0

_LD = np.longdouble


def _fold_turns(turns):
    """Map turns to an angle in (-pi, pi] without losing the fractional part."""
    t = np.asarray(turns, dtype=_LD)
    frac = t - np.round(t)
    angle = (2 * np.pi * frac.astype(np.float64))
    angle = np.where(angle <= -np.pi, angle + 2 * np.pi, angle)
    return angle if angle.ndim else float(angle)


@dataclass(frozen=True)
class ComplexAmp:
    """Complex baseband coefficient stored as magnitude and unreduced turns.

    ``turns`` is the phase divided by ``2*pi``; it may be any real number.
    Both fields may be numpy arrays, in which case every accessor is
    elementwise.
    """

    magnitude: object
    turns: object = 0.0

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z, dtype=complex)
        mag = np.abs(z)
        turns = np.angle(z) / (2 * np.pi)
        if z.ndim == 0:
            return cls(float(mag), float(turns))
        return cls(mag, turns)

    @property
    def angle(self):
        return _fold_turns(self.turns)

    @property
    def value(self):
        mag = np.asarray(self.magnitude, dtype=float)
        z = mag * np.exp(1j * np.asarray(self.angle))
        return complex(z) if z.ndim == 0 else z

    @property
    def re(self):
        return np.real(self.value)

    @property
    def im(self):
        return np.imag(self.value)

    def __abs__(self):
        return self.magnitude

    def __complex__(self):
        return complex(self.value)

    def __mul__(self, other):
        if not isinstance(other, ComplexAmp):
            return NotImplemented
        return ComplexAmp(
            np.multiply(self.magnitude, other.magnitude),
            np.add(np.asarray(self.turns, dtype=_LD), np.asarray(other.turns, dtype=_LD)),
        )


@dataclass(frozen=True)
class SystemGeometry:
    """Waveguide, PA height and UE layout.

    Defaults reproduce the two-user deployment used throughout the package:
    a 20 m waveguide 3 m above the floor at 28 GHz, UE 1 at (3, -1) and
    UE 2 at (18, 3).

    Parameters
    ----------
    L : float
        Waveguide length in metres.
    d : float
        Height of the waveguide above the UE plane in metres.
    ue : tuple of (x, y) pairs
        Positions of UE 1 and UE 2 in metres.
    f_c : float
        Carrier frequency in Hz.
    kappa : float
        Waveguide attenuation in dB/m.
    n_eff : float
        Effective refractive index of the dielectric.
    """

    L: float = 20.0
    d: float = 3.0
    ue: tuple = ((3.0, -1.0), (18.0, 3.0))
    f_c: float = 28e9
    kappa: float = 0.1
    n_eff: float = 1.4

    def __post_init__(self):
        check_positive(self.L, "L")
        check_positive(self.d, "d", strict=False)
        check_positive(self.f_c, "f_c")
        check_positive(self.kappa, "kappa", strict=False)
        if check_finite(self.n_eff, "n_eff") < 1:
            raise ValueError(f"n_eff must be >= 1, got {self.n_eff!r}")
        ue = tuple(tuple(float(c) for c in p) for p in self.ue)
        if len(ue) != 2 or any(len(p) != 2 for p in ue):
            raise ValueError("ue must hold exactly two (x, y) positions")
        for k, (xk, yk) in enumerate(ue, start=1):
            check_finite(xk, f"x_{k}")
            check_finite(yk, f"y_{k}")
            if yk == 0 and self.d == 0:
                raise ValueError(f"UE {k} can coincide with the PA when y_{k} = d = 0")
        object.__setattr__(self, "ue", ue)

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.f_c

    @property
    def guided_wavelength(self):
        return self.wavelength / self.n_eff

    @property
    def eta(self):
        return SPEED_OF_LIGHT / (4 * math.pi * self.f_c)

    @property
    def midpoint(self):
        return 0.5 * (self.ue[0][0] + self.ue[1][0])


def _distance_ld(geom, k, x):
    xk, yk = geom.ue[k - 1]
    dx = _LD(xk) - np.asarray(x, dtype=_LD)
    return np.sqrt(dx * dx + _LD(yk) ** 2 + _LD(geom.d) ** 2)


def _checked_x(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("PA position must be finite")
    return arr


def ue_pa_distance(geom, k, x):
    """Euclidean distance in metres between UE ``k`` and a PA at ``x``."""
    k = check_ue_index(k)
    x = _checked_x(x)
    dist = _distance_ld(geom, k, x).astype(np.float64)
    return float(dist) if dist.ndim == 0 else dist


def spherical_channel(geom, k, x):
    """Free-space spherical-wave coefficient ``eta * exp(-j 2 pi D / lambda) / D``."""
    k = check_ue_index(k)
    x = _checked_x(x)
    dist = _distance_ld(geom, k, x)
    turns = -dist * _LD(geom.f_c) / _LD(SPEED_OF_LIGHT)
    mag = (geom.eta / dist.astype(np.float64))
    if mag.ndim == 0:
        return ComplexAmp(float(mag), turns[()])
    return ComplexAmp(mag, turns)


def waveguide_loss(geom, x):
    """In-waveguide attenuation and phase from the feed at 0 to the PA at ``x``."""
    x = check_positions(x, geom.L)
    mag = 10.0 ** (-geom.kappa * x / 20.0)
    turns = -np.asarray(x, dtype=_LD) * _LD(geom.f_c) * _LD(geom.n_eff) / _LD(SPEED_OF_LIGHT)
    if mag.ndim == 0:
        return ComplexAmp(float(mag), turns[()])
    return ComplexAmp(mag, turns)


def effective_channel(geom, k, x):
    """End-to-end coefficient between UE ``k`` and the BS through a PA at ``x``."""
    return waveguide_loss(geom, x) * spherical_channel(geom, k, x)


def channel_pair(geom, x):
    """Complex ``(h1, h2)`` arrays for PA positions ``x``; convenience for sweeps."""
    return effective_channel(geom, 1, x).value, effective_channel(geom, 2, x).value
