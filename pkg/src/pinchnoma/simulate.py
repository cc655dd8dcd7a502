"""Seeded Monte Carlo link simulation of the uplink and downlink receivers.

Every chunk of symbols draws from its own Philox stream keyed by
``(seed, chunk index)``, so the integer error counts (and hence every
reported estimate) are the same whatever the number of worker threads.
Gaussian samples come from numpy's ziggurat sampler.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from .constellation import AXIS_I, AXIS_Q, axis_labels, pam_levels, slice_axis
from .dl_ber import amplitudes, dl_receiver_decision
from .ul_ber import QPSK, RESIDUALS

RNG_NAME = "philox4x64 (numpy), keyed by SeedSequence(seed, spawn_key=(chunk,))"
GAUSSIAN_METHOD = "ziggurat (numpy Generator.standard_normal)"


@dataclass(frozen=True)
class SimSpec:
    """Monte Carlo run size and seeding."""

    n_symbols: int
    seed: int = 0
    chunk: int = 1 << 16
    threads: int = 1

    def __post_init__(self):
        if int(self.n_symbols) < 1:
            raise ValueError(f"n_symbols must be >= 1, got {self.n_symbols!r}")
        if int(self.chunk) < 1:
            raise ValueError(f"chunk must be >= 1, got {self.chunk!r}")
        if int(self.threads) < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def chunks(self):
        n, c = int(self.n_symbols), int(self.chunk)
        return [(i, min(c, n - i * c)) for i in range((n + c - 1) // c)]


@dataclass(frozen=True)
class SimResult:
    """Per-user bit error counts of one Monte Carlo run."""

    users: tuple
    errors: tuple
    bits: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def ber(self):
        return tuple(e / b if b else math.nan for e, b in zip(self.errors, self.bits))

    @property
    def se(self):
        """Binomial standard error of each estimate."""
        return tuple(
            math.sqrt(p * (1 - p) / b) if b else math.nan for p, b in zip(self.ber, self.bits)
        )

    def for_user(self, k):
        i = self.users.index(k)
        return self.ber[i], self.se[i]


def chunk_rng(seed, chunk_index):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chunk_index),))
    return np.random.Generator(np.random.Philox(ss))


def _run(spec, work, n_users):
    chunks = spec.chunks()
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=int(spec.threads)) as pool:
            parts = list(pool.map(lambda c: work(chunk_rng(spec.seed, c[0]), c[1]), chunks))
    else:
        parts = [work(chunk_rng(spec.seed, i), n) for i, n in chunks]
    errors = [0] * n_users
    bits = [0] * n_users
    for errs, nbits in parts:
        for u in range(n_users):
            errors[u] += int(errs[u])
            bits[u] += int(nbits[u])
    return errors, bits


def _metadata(spec, **extra):
    meta = {
        "rng": RNG_NAME,
        "gaussian": GAUSSIAN_METHOD,
        "seed": int(spec.seed),
        "chunk": int(spec.chunk),
        "n_symbols": int(spec.n_symbols),
    }
    meta.update(extra)
    return meta


def _draw_levels(rng, side, n):
    return rng.integers(0, side, size=n), rng.integers(0, side, size=n)


def _bit_errors(side, tx, rx):
    """Bit errors between transmitted and detected (I, Q) ascending level indices."""
    lab_i, lab_q = axis_labels(side, AXIS_I), axis_labels(side, AXIS_Q)
    return int(np.count_nonzero(lab_i[tx[0]] != lab_i[rx[0]])) + int(
        np.count_nonzero(lab_q[tx[1]] != lab_q[rx[1]])
    )


def _symbols(side, idx):
    levels = pam_levels(side)
    return levels[idx[0]] + 1j * levels[idx[1]]


def _noise(rng, sigma, n):
    return sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def _sign_indices(y):
    return slice_axis(y.real, 1.0, 2), slice_axis(y.imag, 1.0, 2)


def _check_channel(h, name):
    h = complex(h)
    if h == 0:
        raise ValueError(f"{name} has zero magnitude; its phase is undefined")
    return h


def _ul_chain(h1, h2, cfg, tx1, tx2, noise, sic_noise=None):
    rot1 = np.exp(-1j * np.angle(h1))
    rot2 = np.exp(-1j * np.angle(h2))
    s1, s2 = _symbols(2, tx1), _symbols(2, tx2)
    clean = math.sqrt(cfg.P1) * h1 * s1 + math.sqrt(cfg.P2) * h2 * s2
    y = clean + noise
    rx1 = _sign_indices(y * rot1)
    s1_hat = _symbols(2, rx1)
    if sic_noise is not None:
        y = clean + sic_noise
    rx2 = _sign_indices((y - math.sqrt(cfg.P1) * h1 * s1_hat) * rot2)
    return s1, s1_hat, rx1, rx2


def simulate_ul(spec, h1, h2, cfg, shared_noise=True):
    """Simulate the uplink SIC receiver at fixed channels ``h1``, ``h2``.

    With ``shared_noise=False`` the second SIC stage sees an independent
    noise draw instead of the one UE 1 was detected with. That is the model
    under which the residual decomposition in ``ul_ber.ber2`` is exact; the
    physical receiver is the default.

    Returns
    -------
    SimResult
        Bit error counts of UE 1 and UE 2 (two bits per QPSK symbol).
    """
    h1 = _check_channel(h1, "h1")
    h2 = _check_channel(h2, "h2")

    def work(rng, n):
        tx1 = _draw_levels(rng, 2, n)
        tx2 = _draw_levels(rng, 2, n)
        noise = _noise(rng, cfg.sigma, n)
        sic_noise = None if shared_noise else _noise(rng, cfg.sigma, n)
        _, _, rx1, rx2 = _ul_chain(h1, h2, cfg, tx1, tx2, noise, sic_noise)
        return (_bit_errors(2, tx1, rx1), _bit_errors(2, tx2, rx2)), (2 * n, 2 * n)

    errors, bits = _run(spec, work, 2)
    meta = _metadata(spec, scenario="ul", shared_noise=bool(shared_noise))
    return SimResult((1, 2), tuple(errors), tuple(bits), meta)


def simulate_ul_conditional(spec, h1, h2, cfg, s2, r, shared_noise=True):
    """UE 2 bit errors over trials with ``s2`` sent and SIC residual ``s1 - s1_hat = r``.

    ``spec.n_symbols`` trials are drawn; only those realising residual ``r``
    are kept, so the returned bit count is twice the number accepted.
    ``shared_noise`` has the same meaning as in :func:`simulate_ul`.
    """
    h1 = _check_channel(h1, "h1")
    h2 = _check_channel(h2, "h2")
    s2 = complex(s2)
    r = complex(r)
    if s2 not in QPSK:
        raise ValueError(f"s2 must be a QPSK point, got {s2!r}")
    if r not in RESIDUALS:
        raise ValueError(f"r must be one of {RESIDUALS}, got {r!r}")
    s2_idx = (int(s2.real > 0), int(s2.imag > 0))

    def work(rng, n):
        tx1 = _draw_levels(rng, 2, n)
        tx2 = (np.full(n, s2_idx[0]), np.full(n, s2_idx[1]))
        noise = _noise(rng, cfg.sigma, n)
        sic_noise = None if shared_noise else _noise(rng, cfg.sigma, n)
        s1, s1_hat, _, rx2 = _ul_chain(h1, h2, cfg, tx1, tx2, noise, sic_noise)
        keep = (s1 - s1_hat) == r
        kept_tx = (tx2[0][keep], tx2[1][keep])
        kept_rx = (rx2[0][keep], rx2[1][keep])
        return (_bit_errors(2, kept_tx, kept_rx),), (2 * int(keep.sum()),)

    errors, bits = _run(spec, work, 1)
    meta = _metadata(
        spec, scenario="ul-conditional", s2=str(s2), residual=str(r), shared_noise=bool(shared_noise)
    )
    return SimResult((2,), tuple(errors), tuple(bits), meta)


def simulate_dl(spec, h1, h2, cfg, alpha=None):
    """Simulate the downlink superposition and both UEs' reference receivers."""
    alpha = cfg.alpha if alpha is None else float(alpha)
    h = {1: _check_channel(h1, "h1"), 2: _check_channel(h2, "h2")}
    side1 = int(round(math.sqrt(cfg.M1)))
    side2 = int(round(math.sqrt(cfg.M2)))
    g1, g2 = amplitudes(alpha, cfg)
    root_p = math.sqrt(cfg.P_T)

    def work(rng, n):
        tx1 = _draw_levels(rng, side1, n)
        tx2 = _draw_levels(rng, side2, n)
        s = root_p * (g1 * _symbols(side1, tx1) + g2 * _symbols(side2, tx2))
        errs, nbits = [], []
        for k, side, tx in ((1, side1, tx1), (2, side2, tx2)):
            y_bar = (h[k] * s + _noise(rng, cfg.sigma, n)) * np.exp(-1j * np.angle(h[k]))
            amp = root_p * abs(h[k])
            rx = (
                dl_receiver_decision(y_bar.real, amp, cfg, k, alpha),
                dl_receiver_decision(y_bar.imag, amp, cfg, k, alpha),
            )
            errs.append(_bit_errors(side, tx, rx))
            nbits.append(n * 2 * (side.bit_length() - 1))
        return errs, nbits

    errors, bits = _run(spec, work, 2)
    return SimResult((1, 2), tuple(errors), tuple(bits), _metadata(spec, scenario="dl", alpha=alpha))


def noise_self_test(seed=0, n=10**7, sigma=1.0, chunk=1 << 20):
    """Check the Gaussian generator's first two moments per real dimension.

    Passes when each sample mean is within 4 standard errors of zero and
    each sample variance is within 1% of ``sigma**2``.
    """
    spec = SimSpec(n_symbols=n, seed=seed, chunk=chunk)
    sums = np.zeros(2)
    sq = np.zeros(2)
    for i, m in spec.chunks():
        z = _noise(chunk_rng(seed, i), sigma, m)
        sums += (z.real.sum(), z.imag.sum())
        sq += ((z.real ** 2).sum(), (z.imag ** 2).sum())
    mean = sums / n
    var = sq / n - mean ** 2
    se = sigma / math.sqrt(n)
    ok_mean = bool(np.all(np.abs(mean) < 4 * se))
    ok_var = bool(np.all(np.abs(var / sigma ** 2 - 1) < 0.01))
    return {
        "mean_re": float(mean[0]),
        "mean_im": float(mean[1]),
        "var_re": float(var[0]),
        "var_im": float(var[1]),
        "mean_ok": ok_mean,
        "var_ok": ok_var,
        "passed": ok_mean and ok_var,
    }
