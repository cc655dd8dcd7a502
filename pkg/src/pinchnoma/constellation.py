"""Gray-labelled square QAM (QPSK included) mapping and hard detection.

Each quadrature axis is an independent Gray-labelled PAM with odd integer
levels. The first half of a symbol's bits label the in-phase level and the
second half the quadrature level. The in-phase labels run over the levels
from the top down and the quadrature labels from the bottom up, which makes
M = 4 come out as::

    1+j -> (0, 1)    1-j -> (0, 0)    -1-j -> (1, 0)    -1+j -> (1, 1)

Ties in hard detection (a sample exactly on a threshold) resolve to the
higher level, so ``sgn(0) = +1``.
"""

from dataclasses import dataclass
from functools import lru_cache
import itertools

import numpy as np

from ._validation import check_positive, check_qam_order

AXIS_I = 0
AXIS_Q = 1


def norm_factor(M):
    """Average energy of the unnormalised square M-QAM alphabet, ``2(M-1)/3``."""
    check_qam_order(M)
    return 2.0 * (M - 1) / 3.0


def pam_levels(side):
    """Odd PAM levels ``-(side-1), ..., side-1`` in ascending order."""
    return np.arange(-(side - 1), side, 2, dtype=float)


@lru_cache(maxsize=None)
def _axis_table(side, axis):
    nbits = side.bit_length() - 1
    table = np.zeros((side, nbits), dtype=np.int8)
    for asc in range(side):
        rank = side - 1 - asc if axis == AXIS_I else asc
        gray = rank ^ (rank >> 1)
        for b in range(nbits):
            table[asc, b] = (gray >> (nbits - 1 - b)) & 1
    table.setflags(write=False)
    return table


def axis_labels(side, axis):
    """Bit labels of each ascending level index on one axis, shape ``(side, log2 side)``."""
    return _axis_table(int(side), axis)


@dataclass(frozen=True)
class GraySymbol:
    """A square-QAM point with its Gray label."""

    i_level: int
    q_level: int
    bits: tuple
    M: int

    @property
    def value(self):
        return complex(self.i_level, self.q_level)

    def __complex__(self):
        return self.value


def _level_index(level, side):
    return (int(level) + side - 1) // 2


def _symbol_from_indices(i_idx, q_idx, M):
    side = check_qam_order(M)
    levels = pam_levels(side)
    bits = tuple(int(b) for b in axis_labels(side, AXIS_I)[i_idx]) + tuple(
        int(b) for b in axis_labels(side, AXIS_Q)[q_idx]
    )
    return GraySymbol(int(levels[i_idx]), int(levels[q_idx]), bits, M)


def modulate(bits, M):
    """Map ``log2(M)`` bits to their Gray-labelled square-QAM point.

    Examples
    --------
    >>> modulate((0, 1), 4).value
    (1+1j)
    >>> modulate((1, 0), 4).value
    (-1-1j)
    """
    side = check_qam_order(M)
    bits = tuple(int(b) for b in bits)
    half = side.bit_length() - 1
    if len(bits) != 2 * half or any(b not in (0, 1) for b in bits):
        raise ValueError(f"expected {2 * half} binary digits for M={M}, got {bits!r}")
    lookup_i = {tuple(row): idx for idx, row in enumerate(axis_labels(side, AXIS_I).tolist())}
    lookup_q = {tuple(row): idx for idx, row in enumerate(axis_labels(side, AXIS_Q).tolist())}
    return _symbol_from_indices(lookup_i[bits[:half]], lookup_q[bits[half:]], M)


def bits_of(symbol):
    return symbol.bits


def alphabet(M):
    """All ``M`` symbols, in lexicographic order of their labels."""
    half = check_qam_order(M).bit_length() - 1
    return [modulate(b, M) for b in itertools.product((0, 1), repeat=2 * half)]


def slice_axis(y, scale, side):
    """Minimum-distance slicing of one real axis onto ``scale * pam_levels(side)``.

    Returns ascending level indices. Thresholds sit at even multiples of
    ``scale``; samples on a threshold go to the upper level and samples
    beyond the outer thresholds are clipped to the outermost level. A zero
    ``scale`` collapses every threshold onto 0.
    """
    y = np.asarray(y, dtype=float)
    if scale > 0:
        idx = np.floor(y / (2.0 * scale) + side / 2.0)
    elif scale == 0:
        idx = np.where(y >= 0, side - 1, 0)
    else:
        raise ValueError(f"scale must be >= 0, got {scale!r}")
    idx = np.clip(idx, 0, side - 1).astype(np.int64)
    return idx if idx.ndim else int(idx)


def demodulate_hard(y, M, scale):
    """Nearest point of ``scale * alphabet(M)`` to the complex sample ``y``."""
    side = check_qam_order(M)
    scale = check_positive(scale, "scale")
    y = complex(y)
    return _symbol_from_indices(slice_axis(y.real, scale, side), slice_axis(y.imag, scale, side), M)


def qpsk_sign_detect(y):
    """``sgn(Re y) + j sgn(Im y)`` as a QPSK symbol, with ``sgn(0) = +1``."""
    y = complex(y)
    return _symbol_from_indices(int(y.real >= 0), int(y.imag >= 0), 4)
