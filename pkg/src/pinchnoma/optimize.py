"""PA placement optimisers.

Uplink: the average-BER cost in dB ripples on a wavelength scale, so it is
sampled, replaced by its lower envelope (a centred moving minimum), the
envelope is minimised by multi-start projected descent, and the result is
refined by a dense grid search on the raw cost around the envelope optimum.

Downlink: the cost is smooth in ``(x, alpha)`` and is minimised directly by
projected gradient descent from a coarse-grid warm start plus seeded random
starts.

The optimisers follow the scikit-learn estimator conventions: constructor
arguments are hyper-parameters (``get_params``/``set_params``/``clone``
work), ``fit`` returns ``self`` and results live in trailing-underscore
attributes.
"""

from collections import deque
from dataclasses import dataclass, field
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_curve, check_interval, check_positive
from .dl_ber import dl_cost
from .ul_ber import ul_cost


@dataclass(frozen=True)
class SampledCurve:
    """A cost sampled on the uniform grid ``0, T, 2T, ...`` over ``[0, L]``."""

    T: float
    values: np.ndarray
    L: float

    def __post_init__(self):
        check_positive(self.T, "T")
        object.__setattr__(self, "values", check_curve(self.values, "values"))

    @property
    def grid(self):
        return self.T * np.arange(len(self.values))

    def __len__(self):
        return len(self.values)

    def interp(self, x):
        return np.interp(x, self.grid, self.values)


@dataclass(frozen=True)
class EnvelopeSpec:
    """Centred moving-minimum window of ``2 * half_width + 1`` samples."""

    half_width: int = 10

    def __post_init__(self):
        if int(self.half_width) < 0:
            raise ValueError(f"half_width must be >= 0, got {self.half_width!r}")

    def width_m(self, T):
        return 2 * int(self.half_width) * T


@dataclass(frozen=True)
class FineTuneSpec:
    """``2N + 1`` raw-cost evaluations spaced ``delta`` around the envelope optimum."""

    N: int = 200
    delta: float = None

    def resolved(self, wavelength):
        delta = wavelength / 20.0 if self.delta is None else float(self.delta)
        check_positive(delta, "delta")
        if delta > wavelength / 10.0:
            raise ValueError(f"fine-tune spacing {delta} m exceeds lambda/10 = {wavelength / 10} m")
        if int(self.N) < 1:
            raise ValueError(f"N must be >= 1, got {self.N!r}")
        return int(self.N), delta

    def span(self, wavelength):
        n, delta = self.resolved(wavelength)
        return n * delta


@dataclass
class OptimResult:
    x_star: float
    cost: float
    trace: list = field(default_factory=list)
    restarts: int = 0
    alpha_star: float = None
    details: dict = field(default_factory=dict)


# -- uplink stages ---------------------------------------------------------


def sample_cost(cost, T, L, vectorized=True):
    """Evaluate ``cost`` on ``0, T, ..., floor(L/T) T``; NaN or inf samples raise.

    With ``vectorized=False`` the cost is called once per grid point.
    """
    T = check_positive(T, "T")
    L = check_positive(L, "L")
    n = int(math.floor(L / T + 1e-9)) + 1
    grid = T * np.arange(n)
    if vectorized:
        values = np.asarray(cost(grid), dtype=float)
    else:
        values = np.array([float(cost(x)) for x in grid])
    if values.shape != grid.shape:
        raise ValueError(f"cost returned shape {values.shape} for {n} grid points")
    if not np.all(np.isfinite(values)):
        raise ValueError("cost returned NaN or infinite samples")
    return SampledCurve(T, values, L)


def _moving_min(values, half_width):
    """Centred sliding-window minimum, truncated at the edges, via a monotone deque."""
    n = len(values)
    out = np.empty(n)
    window = deque()  # indices with increasing values
    right = 0
    for i in range(n):
        hi = min(n - 1, i + half_width)
        while right <= hi:
            while window and values[window[-1]] >= values[right]:
                window.pop()
            window.append(right)
            right += 1
        while window[0] < i - half_width:
            window.popleft()
        out[i] = values[window[0]]
    return out


def moving_min(curve, env):
    """Lower envelope of ``curve``: each sample becomes its window minimum.

    Examples
    --------
    >>> c = SampledCurve(1.0, np.array([5, 1, 4, 4, 4, 0, 9.0]), 6.0)
    >>> moving_min(c, EnvelopeSpec(1)).values.tolist()
    [1.0, 1.0, 1.0, 4.0, 0.0, 0.0, 0.0]
    """
    return SampledCurve(curve.T, _moving_min(curve.values, int(env.half_width)), curve.L)


class LowerEnvelope(TransformerMixin, BaseEstimator):
    """Row-wise moving-minimum filter (morphological erosion) of sampled curves.

    Parameters
    ----------
    half_width : int, default=10
        Window extends this many samples either side of each sample.
    """

    def __init__(self, half_width=10):
        self.half_width = half_width

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=True)
        if int(self.half_width) < 0:
            raise ValueError(f"half_width must be >= 0, got {self.half_width!r}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} samples per curve, got {X.shape[1]}")
        return np.vstack([_moving_min(row, int(self.half_width)) for row in X])


def _fd_gradient(f, z, fz, h):
    """Central differences in the unit box, one-sided where a probe would leave it."""
    g = np.zeros_like(z)
    for i in range(len(z)):
        up = z.copy()
        dn = z.copy()
        up[i] = min(1.0, z[i] + h[i])
        dn[i] = max(0.0, z[i] - h[i])
        f_up = fz if up[i] == z[i] else f(up)
        f_dn = fz if dn[i] == z[i] else f(dn)
        g[i] = (f_up - f_dn) / (up[i] - dn[i])
    return g


def projected_descent(f, z0, h, max_iter=200, tol=1e-10):
    """Projected gradient descent on the unit box with Armijo backtracking.

    ``f`` maps a point of ``[0, 1]^n`` to a float; ``h`` are finite
    difference steps per coordinate. Barzilai-Borwein step lengths seed each
    line search. Returns ``(z, f(z), trace)``.
    """
    z = np.clip(np.asarray(z0, dtype=float), 0.0, 1.0)
    fz = f(z)
    trace = [(z.copy(), fz)]
    g = _fd_gradient(f, z, fz, h)
    t = 0.05 / max(np.linalg.norm(g), 1e-12)
    for _ in range(max_iter):
        d = np.clip(z - t * g, 0.0, 1.0) - z
        if np.linalg.norm(d) <= tol:
            break
        slope = float(g @ d)
        lam = 1.0
        while True:
            z_new = z + lam * d
            f_new = f(z_new)
            if f_new <= fz + 1e-4 * lam * slope:
                break
            lam *= 0.5
            if lam < 1e-12:
                return z, fz, trace
        g_new = _fd_gradient(f, z_new, f_new, h)
        s, yk = z_new - z, g_new - g
        sy = float(s @ yk)
        t = float(s @ s) / sy if sy > 0 else 0.05 / max(np.linalg.norm(g_new), 1e-12)
        t = min(max(t, 1e-12), 1e6)
        z, fz, g = z_new, f_new, g_new
        trace.append((z.copy(), fz))
    return z, fz, trace


def minimize_envelope(envelope, n_starts=5, fd_step=None):
    """Minimise the piecewise-linear interpolant of ``envelope`` over ``[0, L]``.

    Descent is started from the ``n_starts`` lowest samples; the global grid
    minimum is always a candidate, so the result never exceeds it.
    """
    L = envelope.grid[-1]
    fd_step = envelope.T / 4 if fd_step is None else fd_step
    f = lambda z: float(envelope.interp(z[0] * L))
    order = np.argsort(envelope.values, kind="stable")[: max(1, int(n_starts))]
    best_x = envelope.grid[order[0]]
    best_f = envelope.values[order[0]]
    for idx in order:
        z, fz, _ = projected_descent(f, [envelope.grid[idx] / L], [fd_step / L])
        x = float(z[0] * L)
        if fz < best_f or (fz == best_f and x < best_x):
            best_x, best_f = x, fz
    return float(best_x)


def fine_tune(cost, x_smooth, spec, L, wavelength):
    """Argmin of the raw cost over ``2N + 1`` points around ``x_smooth``, clipped to ``[0, L]``."""
    n, delta = spec.resolved(wavelength)
    pts = np.clip(x_smooth + delta * np.arange(-n, n + 1), 0.0, L)
    vals = np.asarray(cost(pts), dtype=float)
    i = int(np.lexsort((pts, vals))[0])
    return float(pts[i]), float(vals[i])


class ULPositionOptimizer(BaseEstimator):
    """Uplink PA position minimising ``10 log10(BER1 + BER2)``.

    Parameters
    ----------
    T : float, default=0.01
        Sampling period of the cost in metres; must be below the wavelength.
    half_width : int, default=10
        Moving-minimum half window in samples.
    n_fine : int, default=200
        Fine-tuning uses ``2 n_fine + 1`` points.
    fine_step : float or None, default=None
        Fine-tuning spacing in metres; ``None`` means a twentieth of the
        wavelength.
    n_starts : int, default=5
        Descent starts on the envelope.
    """

    def __init__(self, T=0.01, half_width=10, n_fine=200, fine_step=None, n_starts=5):
        self.T = T
        self.half_width = half_width
        self.n_fine = n_fine
        self.fine_step = fine_step
        self.n_starts = n_starts

    def _check(self, geom):
        lam = geom.wavelength
        if not 0 < self.T < lam:
            raise ValueError(f"sampling period T={self.T} m must lie in (0, lambda={lam:.6g} m)")
        env = EnvelopeSpec(self.half_width)
        if env.width_m(self.T) < 5 * lam:
            raise ValueError("moving-minimum window must span at least 5 wavelengths")
        return env, FineTuneSpec(self.n_fine, self.fine_step)

    def fit(self, geom, cfg):
        env, ft = self._check(geom)
        cost = lambda x: ul_cost(x, geom, cfg)
        curve = sample_cost(cost, self.T, geom.L)
        envelope = moving_min(curve, env)
        x_smooth = minimize_envelope(envelope, self.n_starts)
        x_fine, f_fine = fine_tune(cost, x_smooth, ft, geom.L, geom.wavelength)
        i_grid = int(np.argmin(curve.values))
        x_grid, f_grid = float(curve.grid[i_grid]), float(curve.values[i_grid])
        if f_grid < f_fine:
            x_star, f_star = x_grid, f_grid
        else:
            x_star, f_star = x_fine, f_fine
        self.curve_ = curve
        self.envelope_ = envelope
        self.x_smooth_ = x_smooth
        self.x_star_ = x_star
        self.cost_ = f_star
        self.result_ = OptimResult(
            x_star,
            f_star,
            trace=[("grid", x_grid, f_grid), ("envelope", x_smooth, float(cost(x_smooth))),
                   ("fine", x_fine, f_fine)],
            restarts=int(self.n_starts),
            details={"x_smooth": x_smooth, "x_grid": x_grid, "x_fine": x_fine},
        )
        return self


class DLJointOptimizer(BaseEstimator):
    """Downlink PA position and power split minimising ``10 log10(BER1 + BER2)``.

    Parameters
    ----------
    restarts : int, default=16
        Random starts in addition to the coarse-grid warm start.
    seed : int, default=0
        Seed of the start-point generator.
    alpha : float or None, default=None
        Hold the power split fixed and optimise the position only.
    grid_x, grid_alpha : int
        Coarse warm-start grid resolution.
    max_iter : int, default=200
        Descent iterations per start.
    """

    def __init__(self, restarts=16, seed=0, alpha=None, grid_x=41, grid_alpha=21, max_iter=200):
        self.restarts = restarts
        self.seed = seed
        self.alpha = alpha
        self.grid_x = grid_x
        self.grid_alpha = grid_alpha
        self.max_iter = max_iter

    def fit(self, geom, cfg):
        if int(self.restarts) < 0:
            raise ValueError(f"restarts must be >= 0, got {self.restarts!r}")
        L = geom.L
        fixed = self.alpha is not None
        if fixed:
            alphas = np.array([check_interval(self.alpha, "alpha", 0.0, 1.0)])
            point = lambda z: (z[0] * L, alphas[0])
            h = np.array([geom.wavelength / 100 / L])
        else:
            alphas = np.linspace(0.0, 1.0, int(self.grid_alpha))
            point = lambda z: (z[0] * L, z[1])
            h = np.array([geom.wavelength / 100 / L, 1e-4])
        cost = lambda z: float(dl_cost(*point(z), geom, cfg))

        xs = np.linspace(0.0, L, int(self.grid_x))
        X, A = np.meshgrid(xs, alphas, indexing="ij")
        surface = dl_cost(X, A, geom, cfg)
        i, j = np.unravel_index(np.argmin(surface), surface.shape)
        starts = [np.array([xs[i] / L, alphas[j]])[: len(h)]]
        # drawn one at a time so a larger restart count extends the same sequence
        rng = np.random.default_rng(self.seed)
        starts += [rng.uniform(0.0, 1.0, size=2)[: len(h)] for _ in range(int(self.restarts))]

        best = None
        trace = []
        for n, z0 in enumerate(starts):
            z, fz, path = projected_descent(cost, z0, h, max_iter=int(self.max_iter))
            trace.extend((n, *map(float, point(p)), float(f)) for p, f in path)
            key = (fz, *point(z))
            if best is None or key < best:
                best = key
        f_star, x_star, a_star = best
        self.x_star_ = float(x_star)
        self.alpha_star_ = float(a_star)
        self.cost_ = float(f_star)
        self.result_ = OptimResult(
            self.x_star_, self.cost_, trace=trace, restarts=int(self.restarts),
            alpha_star=self.alpha_star_,
            details={"warm_start": (float(xs[i]), float(alphas[j]), float(surface[i, j]))},
        )
        return self


def optimize_ul(geom, cfg, T=0.01, env=None, ft=None, n_starts=5):
    """Run the uplink pipeline and return its :class:`OptimResult`."""
    env = env or EnvelopeSpec()
    ft = ft or FineTuneSpec()
    est = ULPositionOptimizer(T=T, half_width=env.half_width, n_fine=ft.N,
                              fine_step=ft.delta, n_starts=n_starts)
    return est.fit(geom, cfg).result_


def optimize_dl(geom, cfg, restarts=16, seed=0, **kwargs):
    """Run the joint downlink search and return its :class:`OptimResult`."""
    return DLJointOptimizer(restarts=restarts, seed=seed, **kwargs).fit(geom, cfg).result_
