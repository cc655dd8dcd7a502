"""Exact uplink BER of two QPSK NOMA users with imperfect SIC.

The BS derotates by the phase of UE 1's channel and sign-detects ``s1``
while treating UE 2 as noise, subtracts ``sqrt(P1) h1 s1_hat``, derotates by
UE 2's phase and sign-detects ``s2``. UE 1 is always decoded first; callers
who want the other order swap the channels and powers themselves.

``ber2`` follows the usual total-probability decomposition over the SIC
residual, which scores the second detection stage with fresh noise. The
receiver actually reuses the same noise sample in both stages, and
``ber2_shared_noise`` evaluates that case exactly. The two agree once UE 1
detection is reliable and drift apart when it is not.

All averages are also available in log form (``log_ber1``/``log_ber2``).
They are evaluated with ``log_ndtr`` and ``logsumexp`` so the dB cost stays
accurate where the BERs fall below double-precision range.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr, logsumexp, ndtr

from ._validation import check_positions, check_positive
from .channel import ComplexAmp, channel_pair

# QPSK alphabet in the fixed order 1+j, 1-j, -1-j, -1+j
QPSK = np.array([1 + 1j, 1 - 1j, -1 - 1j, -1 + 1j])
RESIDUALS = (0j, 2 + 0j, -2 + 0j, 2j, -2j, 2 + 2j, 2 - 2j, -2 + 2j, -2 - 2j)


@dataclass(frozen=True)
class UlLinkConfig:
    """Uplink transmit powers (W) and per-dimension noise std ``sigma``.

    The complex noise is ``CN(0, 2 sigma**2)``.
    """

    P1: float
    P2: float
    sigma: float

    def __post_init__(self):
        check_positive(self.P1, "P1", strict=False)
        check_positive(self.P2, "P2", strict=False)
        check_positive(self.sigma, "sigma")


def q_function(t):
    """Gaussian tail probability ``Q(t) = erfc(t / sqrt 2) / 2``."""
    out = ndtr(-np.asarray(t, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def log_q(t):
    return log_ndtr(-np.asarray(t, dtype=float))


def _as_complex(h):
    if isinstance(h, ComplexAmp):
        return np.asarray(h.value, dtype=complex)
    return np.asarray(h, dtype=complex)


def _as_symbol(s):
    return complex(s)


def _relative(h1, h2):
    """Magnitudes and the cross terms h2 e^{-j<h1}, h1 e^{-j<h2}."""
    h1 = _as_complex(h1)
    h2 = _as_complex(h2)
    m1 = np.abs(h1)
    m2 = np.abs(h2)
    if np.any(m1 == 0) or np.any(m2 == 0):
        raise ValueError("channel magnitude must be nonzero (phase undefined)")
    h21 = h2 * np.conj(h1) / m1
    h12 = h1 * np.conj(h2) / m2
    return m1, m2, h21, h12


def _check_qpsk(s, name):
    s = _as_symbol(s)
    if s not in QPSK:
        raise ValueError(f"{name} must be a QPSK point (+-1 +-1j), got {s!r}")
    return s


def ber1_conditional(s1, s2, h1, h2, cfg):
    """BER of UE 1 given the transmitted pair ``(s1, s2)``."""
    s1 = _check_qpsk(s1, "s1")
    s2 = _check_qpsk(s2, "s2")
    m1, _, h21, _ = _relative(h1, h2)
    a1 = math.sqrt(cfg.P1) * m1
    interf = math.sqrt(cfg.P2) * h21 * s2
    mu_i = a1 + s1.real * interf.real
    mu_q = a1 + s1.imag * interf.imag
    out = 0.5 * (ndtr(-mu_i / cfg.sigma) + ndtr(-mu_q / cfg.sigma))
    return float(out) if np.ndim(out) == 0 else out


def _log_ber1_terms(m1, h21, cfg):
    # shape (..., s1, s2, axis)
    a1 = math.sqrt(cfg.P1) * m1[..., None, None]
    interf = math.sqrt(cfg.P2) * h21[..., None, None] * QPSK[None, :]
    mu_i = a1 + QPSK.real[:, None] * interf.real
    mu_q = a1 + QPSK.imag[:, None] * interf.imag
    return log_q(np.stack([mu_i, mu_q], axis=-1) / cfg.sigma)


def log_ber1(h1, h2, cfg):
    m1, _, h21, _ = _relative(h1, h2)
    terms = _log_ber1_terms(m1, h21, cfg)
    return logsumexp(terms, axis=(-3, -2, -1)) - math.log(32.0)


def ber1(h1, h2, cfg):
    """Average BER of UE 1 over the 16 equiprobable QPSK pairs."""
    out = np.exp(log_ber1(h1, h2, cfg))
    return float(out) if np.ndim(out) == 0 else out


def _log_detect_terms(m1, h21, cfg):
    """log Pr(s1_hat = c | s1, s2), shape (..., s1, s2, c)."""
    a1 = math.sqrt(cfg.P1) * m1[..., None, None]
    interf = math.sqrt(cfg.P2) * h21[..., None, None] * QPSK[None, :]
    mu_i = (a1 * QPSK.real[:, None] + interf.real)[..., None]
    mu_q = (a1 * QPSK.imag[:, None] + interf.imag)[..., None]
    return log_q(-QPSK.real * mu_i / cfg.sigma) + log_q(-QPSK.imag * mu_q / cfg.sigma)


def s1hat_detection_prob(c, s1, s2, h1, h2, cfg):
    """Probability that UE 1's sign detector outputs ``c`` given ``(s1, s2)``.

    The two axes are independent, so this is a product of one-dimensional
    detection probabilities on UE 1's derotated observation.
    """
    c = _check_qpsk(c, "c")
    s1 = _check_qpsk(s1, "s1")
    s2 = _check_qpsk(s2, "s2")
    m1, _, h21, _ = _relative(h1, h2)
    a1 = math.sqrt(cfg.P1) * m1
    interf = math.sqrt(cfg.P2) * h21 * s2
    mu_i = a1 * s1.real + interf.real
    mu_q = a1 * s1.imag + interf.imag
    out = ndtr(c.real * mu_i / cfg.sigma) * ndtr(c.imag * mu_q / cfg.sigma)
    return float(out) if np.ndim(out) == 0 else out


def residual_prob(r, s2, h1, h2, cfg):
    """Probability of the SIC residual ``s1 - s1_hat = r`` given ``s2``."""
    r = complex(r)
    if r not in RESIDUALS:
        raise ValueError(f"residual must be one of {RESIDUALS}, got {r!r}")
    s2 = _check_qpsk(s2, "s2")
    terms = [
        s1hat_detection_prob(c, s1, s2, h1, h2, cfg)
        for s1 in QPSK
        for c in QPSK
        if s1 - c == r
    ]
    out = 0.25 * np.sum(terms, axis=0)
    return float(out) if np.ndim(out) == 0 else out


def ber2_conditional(s2, r, h1, h2, cfg):
    """BER of UE 2 given ``s2`` and the SIC residual ``r``."""
    s2 = _check_qpsk(s2, "s2")
    r = complex(r)
    if r not in RESIDUALS:
        raise ValueError(f"residual must be one of {RESIDUALS}, got {r!r}")
    _, m2, _, h12 = _relative(h1, h2)
    a2 = math.sqrt(cfg.P2) * m2
    leak = math.sqrt(cfg.P1) * h12 * r
    mu_i = a2 + s2.real * leak.real
    mu_q = a2 + s2.imag * leak.imag
    out = 0.5 * (ndtr(-mu_i / cfg.sigma) + ndtr(-mu_q / cfg.sigma))
    return float(out) if np.ndim(out) == 0 else out


def log_ber2(h1, h2, cfg):
    m1, m2, h21, h12 = _relative(h1, h2)
    log_det = _log_detect_terms(m1, h21, cfg)  # (..., s1, s2, c)
    resid = QPSK[:, None] - QPSK[None, :]  # (s1, c)
    a2 = math.sqrt(cfg.P2) * m2[..., None, None, None]
    leak = math.sqrt(cfg.P1) * h12[..., None, None, None] * resid[:, None, :]
    s2 = QPSK[None, :, None]
    mu_i = a2 + s2.real * leak.real
    mu_q = a2 + s2.imag * leak.imag
    log_err = np.stack([log_q(mu_i / cfg.sigma), log_q(mu_q / cfg.sigma)], axis=-1)
    terms = log_det[..., None] + log_err
    return logsumexp(terms, axis=(-4, -3, -2, -1)) - math.log(32.0)


def ber2(h1, h2, cfg):
    """Average BER of UE 2 after imperfect SIC, by total probability over residuals."""
    out = np.exp(log_ber2(h1, h2, cfg))
    return float(out) if np.ndim(out) == 0 else out


def _joint_prob(lo_u, hi_u, v_lo, v_hi, coef_u, coef_v, bound, sigma):
    """Pr(lo_u < U < hi_u, v_lo < V < v_hi, coef_u U + coef_v V < bound), U, V iid N(0, sigma^2)."""
    # beyond 40 sigma the Gaussian mass is below double precision
    a = max(lo_u, -40 * sigma)
    b = min(hi_u, 40 * sigma)
    if a >= b:
        return 0.0
    if abs(coef_v) < 1e-15:
        frac = ndtr(v_hi / sigma) - ndtr(v_lo / sigma)
        if coef_u == 0:
            return frac * (ndtr(b / sigma) - ndtr(a / sigma)) * (bound > 0)
        cut = bound / coef_u
        lo, hi = (a, min(b, cut)) if coef_u > 0 else (max(a, cut), b)
        return frac * max(0.0, ndtr(hi / sigma) - ndtr(lo / sigma))

    def inner(u):
        lim = (bound - coef_u * u) / coef_v
        lo, hi = (v_lo, min(v_hi, lim)) if coef_v > 0 else (max(v_lo, lim), v_hi)
        return max(0.0, ndtr(hi / sigma) - ndtr(lo / sigma))

    def integrand(u):
        return math.exp(-0.5 * (u / sigma) ** 2) * inner(u)

    # the integrand has kinks where the half-plane meets the V limits
    kinks = []
    if coef_u != 0:
        for edge in (v_lo, v_hi):
            if math.isfinite(edge):
                u_k = (bound - coef_v * edge) / coef_u
                if a < u_k < b:
                    kinks.append(u_k)
    val, _ = integrate.quad(
        integrand, a, b, points=sorted(kinks) or None, epsabs=1e-14, epsrel=1e-11, limit=200
    )
    return val / (sigma * math.sqrt(2 * math.pi))


def ber2_shared_noise(h1, h2, cfg):
    """UE 2 BER when both SIC stages see the same noise sample (scalar channels only).

    Conditions on ``(s1, s2, s1_hat)``: UE 1's decision confines the noise
    to a quadrant in UE 1's derotated frame, and UE 2's bit error is a
    half-plane in UE 2's frame. Each joint probability is a one-dimensional
    Gaussian integral.
    """
    m1, m2, h21, h12 = (np.asarray(v).item() for v in _relative(h1, h2))
    sigma = cfg.sigma
    phi = np.angle(np.asarray(_as_complex(h2)).item()) - np.angle(np.asarray(_as_complex(h1)).item())
    cos_p, sin_p = math.cos(phi), math.sin(phi)
    a1 = math.sqrt(cfg.P1) * m1
    total = []
    for s1 in QPSK:
        for s2 in QPSK:
            interf = math.sqrt(cfg.P2) * h21 * s2
            mu_i = a1 * s1.real + interf.real
            mu_q = a1 * s1.imag + interf.imag
            for c in QPSK:
                u_lo, u_hi = (-mu_i, math.inf) if c.real > 0 else (-math.inf, -mu_i)
                v_lo, v_hi = (-mu_q, math.inf) if c.imag > 0 else (-math.inf, -mu_q)
                clean = math.sqrt(cfg.P2) * m2 * s2 + math.sqrt(cfg.P1) * h12 * (s1 - c)
                # UE 2 noise components: Re = U cos + V sin, Im = -U sin + V cos
                for m, s, cu, cv in (
                    (clean.real, s2.real, cos_p, sin_p),
                    (clean.imag, s2.imag, -sin_p, cos_p),
                ):
                    # error iff s * (m + cu U + cv V) < 0
                    total.append(_joint_prob(u_lo, u_hi, v_lo, v_hi, s * cu, s * cv, -s * m, sigma))
    return float(np.sum(total) / 32.0)


def ul_bers(x, geom, cfg):
    """``(ber1, ber2)`` for PA position(s) ``x``."""
    check_positions(x, geom.L)
    h1, h2 = channel_pair(geom, x)
    return ber1(h1, h2, cfg), ber2(h1, h2, cfg)


def ul_cost(x, geom, cfg):
    """``10 log10(BER1 + BER2)`` in dB at PA position(s) ``x``."""
    check_positions(x, geom.L)
    h1, h2 = channel_pair(geom, x)
    log_sum = np.logaddexp(log_ber1(h1, h2, cfg), log_ber2(h1, h2, cfg))
    out = 10.0 * log_sum / math.log(10.0)
    return float(out) if np.ndim(out) == 0 else out
