"""
Temporal metrics over one AU series.

Metrics are grouped in families that share intermediate work (one KDE pass yields both the
size and the location of the largest KL shift, for example). Every family returns a dict of
floats; non-finite values are sentinels that the imputation step resolves later.
"""

import math
import warnings

import nolds
import numpy as np
from scipy import signal, stats
from sklearn.neighbors import KDTree
from statsmodels.tools.sm_exceptions import InterpolationWarning
from statsmodels.tsa.stattools import acf as sm_acf
from statsmodels.tsa.stattools import acovf, adfuller, kpss, levinson_durbin

from facedyn.core.errors import ArgumentError

NAN = float("nan")
KL_GRID_POINTS = 100
DENSITY_FLOOR = 1e-12


def _is_constant(x: np.ndarray) -> bool:
    return len(x) == 0 or float(np.ptp(x)) == 0.0


def _standardize(x: np.ndarray) -> np.ndarray:
    return (x - x.mean()) / x.std()


def difference(series: np.ndarray, order: int = 1) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if order not in (1, 2):
        raise ArgumentError(f"difference order must be 1 or 2, got {order}")
    if len(x) <= order:
        raise ArgumentError(f"series of length {len(x)} is too short for order-{order} differencing")
    return np.diff(x, n=order)


# -----------------------
# Autocorrelation
# -----------------------
def acf(series: np.ndarray, max_lag: int = 10) -> np.ndarray:
    """r_1..r_max_lag with the full-sample denominator; all-NaN for a constant series."""
    x = np.asarray(series, dtype=float)
    if max_lag >= len(x):
        raise ArgumentError(f"max_lag {max_lag} must be below series length {len(x)}")
    if _is_constant(x):
        return np.full(max_lag, NAN)
    return sm_acf(x, nlags=max_lag, adjusted=False, fft=True)[1:]


def pacf(series: np.ndarray, max_lag: int = 5) -> np.ndarray:
    """Durbin-Levinson partial autocorrelations phi_11..phi_kk on the biased autocovariance."""
    x = np.asarray(series, dtype=float)
    if max_lag >= len(x) // 2:
        raise ArgumentError(f"max_lag {max_lag} needs a series longer than {2 * max_lag + 1}")
    if _is_constant(x):
        return np.full(max_lag, NAN)
    autocov = acovf(x, adjusted=False, demean=True, fft=True, nlag=max_lag)
    return levinson_durbin(autocov, nlags=max_lag, isacov=True)[2][1:]


def acf_features(series: np.ndarray) -> dict[str, float]:
    r = acf(series, 10)
    return {"acf1": float(r[0]), "acf10": float(np.sum(r**2))}


def pacf_features(series: np.ndarray) -> dict[str, float]:
    return {"pacf5": float(np.sum(pacf(series, 5) ** 2))}


# -----------------------
# Distribution shift
# -----------------------
def _tiles(x: np.ndarray, window: int) -> np.ndarray:
    if len(x) < 2 * window:
        raise ArgumentError(f"series of length {len(x)} needs at least {2 * window} frames for window {window}")
    n_tiles = len(x) // window
    return x[: n_tiles * window].reshape(n_tiles, window)


def lumpiness(series: np.ndarray, window: int = 24) -> float:
    x = np.asarray(series, dtype=float)
    tiles = _tiles(x, window)
    if _is_constant(x):
        return 0.0
    tiles = _tiles(_standardize(x), window)
    return float(np.var(tiles.var(axis=1, ddof=1), ddof=1))


def stability(series: np.ndarray, window: int = 24) -> float:
    x = np.asarray(series, dtype=float)
    tiles = _tiles(x, window)
    if _is_constant(x):
        return 0.0
    tiles = _tiles(_standardize(x), window)
    return float(np.var(tiles.mean(axis=1), ddof=1))


def _window_density(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    if _is_constant(values):
        density = np.zeros_like(grid)
        density[int(np.argmin(np.abs(grid - values[0])))] = 1.0
    else:
        try:
            density = stats.gaussian_kde(values, bw_method="silverman")(grid)
        except np.linalg.LinAlgError:
            density = np.zeros_like(grid)
            density[int(np.argmin(np.abs(grid - values.mean())))] = 1.0
    density = np.maximum(density, DENSITY_FLOOR)
    return density / density.sum()


def max_kl_shift(series: np.ndarray, window: int = 24) -> tuple[float, int]:
    """
    Largest KL divergence between two adjacent windows sliding one frame at a time.
    Returns (divergence, boundary index between the two windows).
    """
    x = np.asarray(series, dtype=float)
    if len(x) < 2 * window:
        raise ArgumentError(f"series of length {len(x)} needs at least {2 * window} frames for window {window}")
    if _is_constant(x):
        return 0.0, window
    grid = np.linspace(x.min(), x.max(), KL_GRID_POINTS)
    densities = np.array([_window_density(x[s : s + window], grid) for s in range(len(x) - window + 1)])
    p = densities[: len(x) - 2 * window + 1]
    q = densities[window:]
    kl = np.sum(p * np.log(p / q), axis=1)
    t = int(np.argmax(kl))
    return float(kl[t]), t + window


def _max_rolling_shift(rolled: np.ndarray, window: int) -> tuple[float, int]:
    shifts = np.abs(rolled[window:] - rolled[:-window])
    t = int(np.argmax(shifts))
    return float(shifts[t]), t + window


def level_shift(series: np.ndarray, window: int = 24) -> tuple[float, int]:
    x = np.asarray(series, dtype=float)
    _tiles(x, window)
    rolled = np.convolve(x, np.ones(window) / window, mode="valid")
    return _max_rolling_shift(rolled, window)


def var_shift(series: np.ndarray, window: int = 24) -> tuple[float, int]:
    x = np.asarray(series, dtype=float)
    _tiles(x, window)
    rolled = np.lib.stride_tricks.sliding_window_view(x, window).var(axis=1, ddof=1)
    return _max_rolling_shift(rolled, window)


def shift_features(series: np.ndarray, window: int = 24) -> dict[str, float]:
    kl, kl_t = max_kl_shift(series, window)
    level, level_t = level_shift(series, window)
    var, var_t = var_shift(series, window)
    return {
        "lumpiness": lumpiness(series, window),
        "max_kl_shift": kl,
        "time_kl_shift": float(kl_t),
        "max_level_shift": level,
        "time_level_shift": float(level_t),
        "max_var_shift": var,
        "time_var_shift": float(var_t),
    }


# -----------------------
# Entropy
# -----------------------
def shannon_entropy(series: np.ndarray) -> float:
    """Differential entropy, resubstitution estimate under a Silverman-bandwidth KDE."""
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return -math.inf
    try:
        density = stats.gaussian_kde(x, bw_method="silverman")(x)
    except np.linalg.LinAlgError:
        return -math.inf
    with np.errstate(divide="ignore"):
        return float(-np.mean(np.log(density)))


def _phi(x: np.ndarray, m: int, r: float) -> float:
    templates = np.lib.stride_tricks.sliding_window_view(x, m)
    counts = KDTree(templates, metric="chebyshev").query_radius(templates, r, count_only=True)
    return float(np.mean(np.log(counts / len(templates))))


def approx_entropy(series: np.ndarray, m: int = 2, r_factor: float = 0.2) -> float:
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return 0.0
    r = r_factor * x.std(ddof=1)
    return _phi(x, m, r) - _phi(x, m + 1, r)


def sample_entropy(series: np.ndarray, m: int = 2, r_factor: float = 0.2) -> float:
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(nolds.sampen(x, emb_dim=m, tolerance=r_factor * x.std(ddof=1)))


def spectral_entropy(series: np.ndarray) -> float:
    """Shannon entropy of the normalized one-sided periodogram over ln(#frequencies)."""
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return 0.0
    _, psd = signal.periodogram(x)
    p = psd / psd.sum()
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)) / np.log(len(p)))


def permutation_entropy(series: np.ndarray, order: int = 3, delay: int = 1) -> float:
    x = np.asarray(series, dtype=float)
    n = len(x) - (order - 1) * delay
    if n < 1:
        return NAN
    embedded = np.array([x[i * delay : i * delay + n] for i in range(order)]).T
    _, counts = np.unique(np.argsort(embedded, axis=1, kind="stable"), axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)) / math.log(math.factorial(order)))


def entropy_suite(series: np.ndarray) -> dict[str, float]:
    x = np.asarray(series, dtype=float)
    if len(x) < 10:
        raise ArgumentError(f"entropy metrics need at least 10 samples, got {len(x)}")
    return {
        "shannon_entropy": shannon_entropy(x),
        "approx_entropy": approx_entropy(x),
        "sample_entropy": sample_entropy(x),
        "spectral_entropy": spectral_entropy(x),
    }


# -----------------------
# Long-range dependence, trend, stationarity
# -----------------------
def hurst(series: np.ndarray) -> float:
    """Rescaled-range exponent over dyadic block sizes from 8 to n/2."""
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return NAN
    nvals = [2**p for p in range(3, int(math.log2(len(x) // 2)) + 1)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return float(nolds.hurst_rs(x, nvals=nvals, fit="poly", corrected=True))


def trend_strength(series: np.ndarray) -> float:
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return 0.0
    residual = signal.detrend(x, type="linear")
    return float(max(0.0, 1.0 - residual.var() / x.var()))


def kpss_stat(series: np.ndarray) -> float:
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InterpolationWarning)
        return float(kpss(x, regression="c", nlags="auto")[0])


def adf_stat(series: np.ndarray) -> float:
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return 0.0
    return float(adfuller(x, autolag="AIC")[0])


def _lz76_phrases(bits: np.ndarray) -> int:
    """Kaspar-Schuster phrase count."""
    n = len(bits)
    if n < 2:
        return n
    i, k, l, c, k_max = 0, 1, 1, 1, 1
    while True:
        if bits[i + k - 1] == bits[l + k - 1]:
            k += 1
            if l + k > n:
                c += 1
                break
        else:
            k_max = max(k, k_max)
            i += 1
            if i == l:
                c += 1
                l += k_max
                if l + 1 > n:
                    break
                i, k, k_max = 0, 1, 1
            else:
                k = 1
    return c


def lz_complexity(series: np.ndarray) -> float:
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return 0.0
    bits = (x > np.median(x)).astype(np.int8)
    n = len(bits)
    return _lz76_phrases(bits) / (n / math.log2(n))


def long_range_suite(series: np.ndarray, window: int = 24) -> dict[str, float]:
    x = np.asarray(series, dtype=float)
    if len(x) < 64:
        raise ArgumentError(f"long-range metrics need at least 64 samples, got {len(x)}")
    return {
        "hurst": hurst(x),
        "trend_strength": trend_strength(x),
        "kpss_stat": kpss_stat(x),
        "adf_stat": adf_stat(x),
        "lz_complexity": lz_complexity(x),
        "stability": stability(x, window),
    }


# -----------------------
# Shape
# -----------------------
def crossing_points(series: np.ndarray) -> float:
    x = np.asarray(series, dtype=float)
    below = x <= np.median(x)
    return float(np.count_nonzero(below[1:] != below[:-1]))


def flat_spots(series: np.ndarray, bins: int = 10) -> float:
    """Longest run of consecutive samples falling in the same of `bins` equal-width bins."""
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return float(len(x))
    edges = np.linspace(x.min(), x.max(), bins + 1)[1:-1]
    codes = np.digitize(x, edges)
    boundaries = np.flatnonzero(np.diff(codes)) + 1
    runs = np.diff(np.concatenate([[0], boundaries, [len(codes)]]))
    return float(runs.max())


def arch_stat(series: np.ndarray, lags: int = 12) -> float:
    """R² of the squared demeaned series regressed on its own lags."""
    x = np.asarray(series, dtype=float)
    if _is_constant(x):
        return 0.0
    sq = (x - x.mean()) ** 2
    lags = min(lags, len(x) // 4)
    y = sq[lags:]
    design = np.column_stack([np.ones(len(y))] + [sq[lags - j : len(sq) - j] for j in range(1, lags + 1)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        return 0.0
    return float(1.0 - np.sum((y - design @ coef) ** 2) / ss_tot)


def _orthonormal_poly(n: int) -> np.ndarray:
    t = np.arange(n, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([np.ones(n), t, t**2]))
    # sign convention: increasing linear term, quadratic positive at the ends
    if q[-1, 1] < q[0, 1]:
        q[:, 1] = -q[:, 1]
    if q[0, 2] < 0:
        q[:, 2] = -q[:, 2]
    return q[:, 1:]


def shape_features(series: np.ndarray) -> dict[str, float]:
    x = np.asarray(series, dtype=float)
    poly = _orthonormal_poly(len(x))
    linearity, curvature = (poly.T @ x).tolist()
    residual = signal.detrend(x, type="linear")
    return {
        "crossing_points": crossing_points(x),
        "flat_spots": flat_spots(x),
        "arch_stat": arch_stat(x),
        "std1st_der": float(np.std(np.diff(x), ddof=1)),
        "linearity": float(linearity),
        "curvature": float(curvature),
        "e_acf1": float(acf(residual, 1)[0]),
    }
