"""Exact downlink BER of two superposed square-QAM users with imperfect SIC.

After derotation each UE sees, per quadrature axis, the real sample::

    y = A * (g1 * l1 + g2 * l2) + n,    A = sqrt(P_T) |h_k|,
    g1 = sqrt(alpha / nu1),  g2 = sqrt((1 - alpha) / nu2)

with odd PAM levels ``l1``, ``l2`` and ``n ~ N(0, sigma**2)``.

Reference receiver: the UE with the larger power share (UE 1 when
``alpha >= 0.5``) slices its own levels directly, treating the other
signal as noise. The other UE slices the strong levels, subtracts their
reconstruction and slices its own levels from the remainder.

That receiver is a piecewise-constant function of ``y`` whose breakpoints
all have the form ``g1 * p1 + g2 * p2`` with integer ``p1, p2``. Each bit
error probability is therefore a signed sum of ``Q(A (a1 g1 + a2 g2) / sigma)``
terms with integer ``a1, a2``. The enumeration below produces those terms
with exact rational weights.
"""

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np
from scipy.special import ndtr

from ._validation import check_interval, check_positions, check_positive, check_qam_order
from .channel import effective_channel
from .constellation import AXIS_I, AXIS_Q, axis_labels, norm_factor, slice_axis
from .ul_ber import log_q


@dataclass(frozen=True)
class DlLinkConfig:
    """Downlink transmit power (W), modulation orders and noise std.

    ``alpha`` is the share of ``P_T`` given to UE 1's symbol; functions that
    take an explicit ``alpha`` argument override it.
    """

    P_T: float
    sigma: float
    M1: int = 4
    M2: int = 16
    alpha: float = 0.9

    def __post_init__(self):
        check_positive(self.P_T, "P_T", strict=False)
        check_positive(self.sigma, "sigma")
        check_qam_order(self.M1)
        check_qam_order(self.M2)
        check_interval(self.alpha, "alpha", 0.0, 1.0)

    @property
    def nu1(self):
        return norm_factor(self.M1)

    @property
    def nu2(self):
        return norm_factor(self.M2)

    def with_alpha(self, alpha):
        return self if alpha is None else replace(self, alpha=float(alpha))


@dataclass(frozen=True)
class QCoefficients:
    """Signed Q-function expansion ``BER = sum c * Q(A (a1 g1 + a2 g2) / sigma)``."""

    ue: int
    a1: np.ndarray
    a2: np.ndarray
    c: np.ndarray
    exact_weights: tuple

    def __len__(self):
        return len(self.c)

    def __iter__(self):
        return iter(zip(self.a1.tolist(), self.a2.tolist(), self.exact_weights))


def amplitudes(alpha, cfg):
    """Per-level amplitudes ``(g1, g2)`` of the two users' symbols."""
    alpha = check_interval(alpha, "alpha", 0.0, 1.0)
    return math.sqrt(alpha / cfg.nu1), math.sqrt((1.0 - alpha) / cfg.nu2)


def strong_user(alpha):
    """UE detected without SIC: the one with the larger power share, UE 1 on ties."""
    return 1 if alpha >= 0.5 else 2


def _sides(cfg):
    return check_qam_order(cfg.M1), check_qam_order(cfg.M2)


def _threshold_ns(side):
    half = side // 2
    return list(range(-(half - 1), half))


def _inside_count(g_strong, g_weak, side_weak):
    """Largest n >= 0 with a weak threshold ``2 n g_weak`` strictly inside ``g_strong``."""
    cap = side_weak // 2 - 1
    n = 0
    while n < cap and 2 * (n + 1) * g_weak < g_strong:
        n += 1
    return n


def _pair(strong, p_strong, p_weak):
    return (p_strong, p_weak) if strong == 1 else (p_weak, p_strong)


@lru_cache(maxsize=None)
def _layout(side1, side2, ue, strong, n_inside):
    """Breakpoints (integer pairs, ascending) and UE ``ue``'s decided level per cell."""
    sides = {1: side1, 2: side2}
    side_s = sides[strong]
    ts = _threshold_ns(side_s)
    if ue == strong:
        pts = [_pair(strong, 2 * m, 0) for m in ts]
        return tuple(pts), tuple(range(side_s))

    weak = ue
    side_w = sides[weak]
    tw = _threshold_ns(side_w)
    pts, dec = [], []
    for i in range(side_s):
        level = 2 * i - (side_s - 1)
        if i > 0:
            pts.append(_pair(strong, 2 * ts[i - 1], 0))
        # outer cells are unbounded on one side, so only one inclusion bound applies
        lower = -math.inf if i == 0 else -n_inside
        upper = math.inf if i == side_s - 1 else n_inside
        inside = [n for n in tw if lower <= n <= upper]
        dec.append(sum(1 for n in tw if n < inside[0]))
        for n in inside:
            pts.append(_pair(strong, level, 2 * n))
            dec.append(sum(1 for m in tw if m <= n))
    return tuple(pts), tuple(dec)


def _interval_terms(pts, errors, y0):
    """Signed Q-argument pairs for Pr(y falls in a cell flagged in ``errors``)."""
    # merge runs so consecutive cells alternate between error and correct
    cuts, flags = [], [errors[0]]
    for p, e in zip(pts, errors[1:]):
        if e != flags[-1]:
            cuts.append(p)
            flags.append(e)
    terms = []
    for idx, flag in enumerate(flags):
        if not flag:
            continue
        lo = cuts[idx - 1] if idx > 0 else None
        hi = cuts[idx] if idx < len(cuts) else None
        if lo is None and hi is None:
            # every sample errs: 1 = Q(-inf); represent as Q(u) + Q(-u) with u = 0
            terms += [((0, 0), 1), ((0, 0), 1)]
        elif lo is None:
            terms.append(((y0[0] - hi[0], y0[1] - hi[1]), 1))
        else:
            terms.append(((lo[0] - y0[0], lo[1] - y0[1]), 1))
            if hi is not None:
                terms.append(((hi[0] - y0[0], hi[1] - y0[1]), -1))
    return terms


@lru_cache(maxsize=None)
def _conditional_terms(side1, side2, ue, strong, n_inside, dead1=False, dead2=False):
    pts, dec = _layout(side1, side2, ue, strong, n_inside)
    side_k = side1 if ue == 1 else side2
    out = {}
    for axis in (AXIS_I, AXIS_Q):
        labels = axis_labels(side_k, axis)
        for i1 in range(side1):
            for i2 in range(side2):
                y0 = (2 * i1 - (side1 - 1), 2 * i2 - (side2 - 1))
                true_idx = i1 if ue == 1 else i2
                for b in range(labels.shape[1]):
                    errs = [labels[d, b] != labels[true_idx, b] for d in dec]
                    terms = _interval_terms(pts, errs, y0)
                    # a user with zero amplitude contributes nothing to any Q argument
                    out[(axis, i1, i2, b)] = tuple(
                        ((0 if dead1 else a1, 0 if dead2 else a2), sign)
                        for (a1, a2), sign in terms
                    )
    return out


def _layout_key(cfg, ue, alpha):
    side1, side2 = _sides(cfg)
    g1, g2 = amplitudes(alpha, cfg)
    strong = strong_user(alpha)
    if ue == strong:
        n_inside = 0
    elif strong == 1:
        n_inside = _inside_count(g1, g2, side2)
    else:
        n_inside = _inside_count(g2, g1, side1)
    return side1, side2, ue, strong, n_inside, g1 == 0, g2 == 0


def conditional_error_terms(cfg, ue, alpha=None):
    """Per-(axis, i1, i2, bit) signed Q-argument pairs for UE ``ue``.

    Keys index ascending level positions of UE 1 and UE 2 on that axis.
    Each value is a tuple of ``((a1, a2), sign)``; the conditional bit
    error probability is ``sum sign * Q(A (a1 g1 + a2 g2) / sigma)``.
    """
    alpha = cfg.alpha if alpha is None else alpha
    return _conditional_terms(*_layout_key(cfg, ue, alpha))


@lru_cache(maxsize=None)
def _merged(key):
    side1, side2, ue = key[:3]
    side_k = side1 if ue == 1 else side2
    nbits = side_k.bit_length() - 1
    total = 2 * nbits * side1 * side2
    acc = {}
    for terms in _conditional_terms(*key).values():
        for pair, sign in terms:
            acc[pair] = acc.get(pair, 0) + sign
    items = sorted((pair, Fraction(w, total)) for pair, w in acc.items() if w)
    a1 = np.array([p[0] for p, _ in items], dtype=float)
    a2 = np.array([p[1] for p, _ in items], dtype=float)
    weights = tuple(w for _, w in items)
    return QCoefficients(ue, a1, a2, np.array([float(w) for w in weights]), weights)


def generate_q_coefficients(cfg, ue, alpha=None):
    """Q-function expansion of UE ``ue``'s average BER under the reference receiver.

    The coefficients depend on ``alpha`` only through which user performs
    SIC and how many weak-user thresholds fall inside each strong-user
    decision cell, so results are cached on that layout.
    """
    if ue not in (1, 2):
        raise ValueError(f"UE index must be 1 or 2, got {ue!r}")
    alpha = cfg.alpha if alpha is None else alpha
    return _merged(_layout_key(cfg, ue, alpha))


def dl_receiver_decision(y_bar, amplitude, cfg, ue, alpha=None):
    """Level indices UE ``ue`` decides for its own symbol on one real axis.

    Parameters
    ----------
    y_bar : array_like
        Derotated received samples on one axis.
    amplitude : float
        ``sqrt(P_T) * |h_k|`` at the receiving UE.

    Returns
    -------
    ndarray of int
        Ascending level index of UE ``ue``'s PAM alphabet.
    """
    alpha = cfg.alpha if alpha is None else alpha
    side1, side2 = _sides(cfg)
    g1, g2 = amplitudes(alpha, cfg)
    strong = strong_user(alpha)
    scale = {1: amplitude * g1, 2: amplitude * g2}
    side = {1: side1, 2: side2}
    y_bar = np.asarray(y_bar, dtype=float)
    strong_idx = slice_axis(y_bar, scale[strong], side[strong])
    if ue == strong:
        return strong_idx
    side_s = side[strong]
    recon = scale[strong] * (2 * np.asarray(strong_idx) - (side_s - 1))
    return slice_axis(y_bar - recon, scale[ue], side[ue])


def _folded(coeffs, alpha, cfg):
    """Rewrite ``c Q(-u)`` as ``c - c Q(u)`` so every Q argument is non-negative.

    Returns the exact constant, the signed weights and the non-negative
    per-unit-amplitude arguments. At high SNR the constant is exactly zero,
    which avoids the catastrophic cancellation of O(1) terms.
    """
    g1, g2 = amplitudes(alpha, cfg)
    base = (coeffs.a1 * g1 + coeffs.a2 * g2) / cfg.sigma
    neg = base < 0
    const = sum((w for w, n in zip(coeffs.exact_weights, neg) if n), Fraction(0))
    return float(const), np.where(neg, -coeffs.c, coeffs.c), np.abs(base)


def _signed_logsumexp(a, b):
    """``log|sum b exp(a)|`` and its sign along the last axis (zero weights allowed)."""
    b = np.broadcast_to(b, a.shape)
    a = np.where(b != 0, a, -np.inf)
    top = np.max(a, axis=-1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    total = np.sum(b * np.exp(a - top), axis=-1)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(total)) + top[..., 0], np.sign(total)


def ber_from_magnitude(k, magnitude, cfg, alpha=None):
    """Average BER of UE ``k`` for channel magnitude(s) ``|h_k|``."""
    alpha = cfg.alpha if alpha is None else alpha
    const, c, base = _folded(generate_q_coefficients(cfg, k, alpha), alpha, cfg)
    amp = math.sqrt(cfg.P_T) * np.asarray(magnitude, dtype=float)
    out = const + np.sum(c * ndtr(-amp[..., None] * base), axis=-1)
    out = np.clip(out, 0.0, None)
    return float(out) if np.ndim(out) == 0 else out


def log_ber_from_magnitude(k, magnitude, cfg, alpha=None):
    alpha = cfg.alpha if alpha is None else alpha
    const, c, base = _folded(generate_q_coefficients(cfg, k, alpha), alpha, cfg)
    amp = math.sqrt(cfg.P_T) * np.asarray(magnitude, dtype=float)
    lq = log_q(amp[..., None] * base)
    lq = np.concatenate([lq, np.zeros(lq.shape[:-1] + (1,))], axis=-1)
    val, sign = _signed_logsumexp(lq, np.append(c, const))
    # a non-positive total is pure rounding noise around zero
    return np.where(sign > 0, val, -np.inf)


def dl_ber(k, x, geom, cfg, alpha=None):
    """Average BER of UE ``k`` with the PA at ``x`` (scalar or array)."""
    check_positions(x, geom.L)
    return ber_from_magnitude(k, effective_channel(geom, k, x).magnitude, cfg, alpha)


def dl_cost(x, alpha, geom, cfg):
    """``10 log10(BER1 + BER2)`` in dB; ``x`` and ``alpha`` broadcast together."""
    x, alpha = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(alpha, dtype=float))
    check_positions(x, geom.L)
    m1 = effective_channel(geom, 1, x).magnitude
    m2 = effective_channel(geom, 2, x).magnitude
    out = np.empty(x.shape)
    for a in np.unique(alpha):
        sel = alpha == a
        l1 = log_ber_from_magnitude(1, np.asarray(m1)[sel], cfg, float(a))
        l2 = log_ber_from_magnitude(2, np.asarray(m2)[sel], cfg, float(a))
        out[sel] = 10.0 * np.logaddexp(l1, l2) / math.log(10.0)
    return float(out) if out.ndim == 0 else out
