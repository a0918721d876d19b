"""Time-series kernels: z-normalized matching, periodicity, clustering,
downsampling.

The sliding match comes in two modes.  "brute" z-normalizes every window
directly and measures Euclidean distance.  "fft" computes the same profile
from sliding dot products (one FFT convolution) plus rolling moments, then
re-evaluates the few near-minimal windows with the direct formula so both
modes land on the identical minimum and position.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as _signal
from scipy.cluster import hierarchy as _hier
from scipy.spatial.distance import squareform


class SegmentTooShort(ValueError):
    """Input shorter than the operation's minimum length."""


@dataclass
class DeviceSeries:
    """Uniformly sampled readings and abnormality ratings of one device.

    ``times`` is only set on downsampled series, where the kept samples are
    no longer uniformly spaced; it then holds the explicit timestamp of each
    kept sample.  ``t0`` and ``dt`` always describe the source sampling.
    """

    device: str
    t0: float
    dt: float
    readings: np.ndarray
    ratings: np.ndarray
    times: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.readings = np.asarray(self.readings, dtype=np.float64)
        self.ratings = np.asarray(self.ratings, dtype=np.float64)
        if self.readings.ndim != 1 or self.ratings.ndim != 1:
            raise ValueError("readings and ratings must be one-dimensional")
        if len(self.readings) != len(self.ratings) or len(self.readings) < 1:
            raise ValueError("readings and ratings need equal length >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if len(self.ratings) and (self.ratings.min() < 0 or self.ratings.max() > 1):
            raise ValueError("ratings must lie in [0, 1]")
        if self.times is not None:
            self.times = np.asarray(self.times, dtype=np.float64)
            if self.times.shape != self.readings.shape:
                raise ValueError("times must match readings length")

    def __len__(self) -> int:
        return len(self.readings)

    def time_axis(self) -> np.ndarray:
        if self.times is not None:
            return self.times
        return self.t0 + self.dt * np.arange(len(self.readings))


@dataclass(frozen=True)
class MatchResult:
    instance: str
    device: str
    d_min: float
    position: int


@dataclass
class InstanceMatches:
    results: list[MatchResult] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class PeriodEstimate:
    period: float  # samples, > 0
    score: float  # [0, 1]
    periodic: bool


def znorm(x: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance copy; an exactly constant array maps to zeros."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("znorm expects a one-dimensional array")
    if len(x) == 0:
        return x.copy()
    # ptp == 0 is the constancy test: float rounding can leave np.std of a
    # constant array slightly above zero, which would amplify noise.
    if x.max() == x.min():
        return np.zeros_like(x)
    s = x.std()
    # the reverse rounding failure: a spread so small its variance
    # underflows to zero reads as constant too
    if s == 0.0:
        return np.zeros_like(x)
    return (x - x.mean()) / s


def znorm_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between the z-normalized copies of two equal-length arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("znorm_distance expects equal-length 1-d arrays")
    if len(a) < 2:
        raise SegmentTooShort("need at least 2 samples")
    return float(np.sqrt(np.sum((znorm(a) - znorm(b)) ** 2)))


def _brute_profile(query: np.ndarray, series: np.ndarray) -> np.ndarray:
    """Distance of the z-normalized query to every z-normalized window."""
    m = len(query)
    windows = sliding_window_view(series, m)
    mews = windows.mean(axis=1)
    stds = windows.std(axis=1)
    # constant windows, plus spreads whose variance underflows to zero
    degenerate = (windows.max(axis=1) == windows.min(axis=1)) | (stds == 0.0)
    safe = np.where(degenerate, 1.0, stds)
    zw = (windows - mews[:, None]) / safe[:, None]
    zw[degenerate] = 0.0
    zq = znorm(query)
    return np.sqrt(np.sum((zw - zq[None, :]) ** 2, axis=1))


def _fft_profile(query: np.ndarray, series: np.ndarray) -> np.ndarray:
    """Approximate distance profile via sliding dot products and rolling moments."""
    m = len(query)
    if query.max() == query.min() or query.std() == 0.0:
        # znorm(query) is all zeros; the direct kernel handles every window
        # degeneracy exactly and this case is rare enough not to matter.
        return _brute_profile(query, series)
    windows = sliding_window_view(series, m)
    w_const = windows.max(axis=1) == windows.min(axis=1)

    qt = _signal.fftconvolve(series, query[::-1], mode="valid")
    csum = np.concatenate(([0.0], np.cumsum(series)))
    csum2 = np.concatenate(([0.0], np.cumsum(series * series)))
    mew = (csum[m:] - csum[:-m]) / m
    var = (csum2[m:] - csum2[:-m]) / m - mew * mew
    np.maximum(var, 0.0, out=var)
    sig = np.sqrt(var)

    mq = query.mean()
    sq = query.std()
    scale = max(float(np.max(np.abs(series))), 1.0)
    degenerate = w_const | (sig <= 1e-10 * scale)
    safe_sig = np.where(degenerate, 1.0, sig)

    corr = (qt - m * mq * mew) / (m * sq * safe_sig)
    dist2 = 2.0 * m * (1.0 - corr)
    np.maximum(dist2, 0.0, out=dist2)
    prof = np.sqrt(dist2)

    if degenerate.any():
        # Rolling moments are unreliable on (near-)constant windows; fall
        # back to the direct formula for those few positions.
        idx = np.nonzero(degenerate)[0]
        zq = znorm(query)
        for i in idx:
            w = windows[i]
            if w.max() == w.min():
                prof[i] = np.sqrt(float(m))  # zq is non-constant here
            else:
                prof[i] = np.sqrt(np.sum((znorm(w) - zq) ** 2))
    return prof


def sliding_min_distance(
    query: np.ndarray, series: np.ndarray, mode: str = "fft"
) -> tuple[float, int]:
    """Best z-normalized Euclidean match of query inside series.

    Returns (d_min, position); ties resolve to the smallest position.  The
    fft mode re-checks candidate windows within a small slack of the
    approximate minimum using the brute kernel, so its result is identical
    to brute mode, not merely close.
    """
    query = np.asarray(query, dtype=np.float64)
    series = np.asarray(series, dtype=np.float64)
    if query.ndim != 1 or series.ndim != 1:
        raise ValueError("query and series must be one-dimensional")
    if len(query) < 2:
        raise SegmentTooShort("query needs at least 2 samples")
    if len(query) > len(series):
        raise SegmentTooShort("query longer than series")

    if mode == "brute":
        prof = _brute_profile(query, series)
        pos = int(np.argmin(prof))  # first occurrence on ties
        return float(prof[pos]), pos
    if mode != "fft":
        raise ValueError(f"unknown mode {mode!r}")

    approx = _fft_profile(query, series)
    slack = 1e-3
    cand = np.nonzero(approx <= approx.min() + slack)[0]
    m = len(query)
    windows = sliding_window_view(series, m)[cand]
    # Same kernel as brute mode on the candidate subset: bitwise-equal values.
    mews = windows.mean(axis=1)
    stds = windows.std(axis=1)
    constant = windows.max(axis=1) == windows.min(axis=1)
    safe = np.where(constant, 1.0, stds)
    zw = (windows - mews[:, None]) / safe[:, None]
    zw[constant] = 0.0
    zq = znorm(query)
    exact = np.sqrt(np.sum((zw - zq[None, :]) ** 2, axis=1))
    best = int(np.argmin(exact))
    return float(exact[best]), int(cand[best])


def match_instance(instance, data: dict[str, DeviceSeries]) -> InstanceMatches:
    """Best match of each instance segment inside the analyzed data.

    Devices missing from the data, or whose series is shorter than the
    stored segment, are skipped and reported rather than failing the whole
    instance.  At least one device must be matchable.
    """
    out = InstanceMatches()
    for device in sorted(instance.segments):
        segment = instance.segments[device]
        readings = segment.readings if isinstance(segment, DeviceSeries) else np.asarray(segment)
        series = data.get(device)
        if series is None or len(series.readings) < len(readings) or len(readings) < 2:
            out.skipped.append(device)
            continue
        d_min, pos = sliding_min_distance(readings, series.readings)
        out.results.append(MatchResult(instance.id, device, d_min, pos))
    if not out.results:
        raise ValueError(
            f"instance {instance.id!r}: no stored device matchable against the data"
        )
    return out


def _autocorr(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased normalized autocorrelation r[0..max_lag], r[0] == 1."""
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    n = len(xc)
    # FFT correlation; biased estimator keeps the first peak dominant.
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    spec = np.fft.rfft(xc, nfft)
    acf = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    return acf / denom


def estimate_period(
    segment: np.ndarray,
    min_period: int = 2,
    min_score: float = 0.6,
) -> PeriodEstimate:
    """Dominant period of a segment from its autocorrelation peak.

    The search starts after the autocorrelation first drops to zero so the
    short-lag bump every smooth signal has cannot masquerade as a period.
    The integer peak is refined by parabolic interpolation.  periodic is
    True exactly when score >= min_score.
    """
    x = np.asarray(segment, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("segment must be one-dimensional")
    if min_period < 1:
        raise ValueError("min_period must be >= 1")
    if len(x) < 4 * min_period or len(x) < 8:
        raise SegmentTooShort(
            f"period estimation needs >= {max(4 * min_period, 8)} samples, got {len(x)}"
        )
    scale = max(1.0, float(np.max(np.abs(x))))
    if x.max() == x.min() or x.std() <= 1e-9 * scale:
        return PeriodEstimate(period=1.0, score=0.0, periodic=False)

    max_lag = len(x) // 2
    r = _autocorr(x, max_lag)
    nonpos = np.nonzero(r[1:] <= 0.0)[0]
    start = max(min_period, int(nonpos[0]) + 1 if len(nonpos) else min_period)
    if start >= max_lag:
        start = min_period
    lags = np.arange(start, max_lag + 1)
    best = int(lags[np.argmax(r[start : max_lag + 1])])
    score = float(np.clip(r[best], 0.0, 1.0))

    period = float(best)
    if 1 <= best - 1 and best + 1 <= max_lag:
        y0, y1, y2 = r[best - 1], r[best], r[best + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom < 0:  # proper local maximum
            period = float(best + 0.5 * (y0 - y2) / denom)
    period = max(period, 1.0)
    return PeriodEstimate(period=period, score=score, periodic=score >= min_score)


def refine_period(x: np.ndarray, start_index: float, period: float) -> float:
    """Sharpen a period estimate by maximizing the sinusoid projection.

    Scans |sum x[i] exp(-2*pi*j*(start_index+i)/P)| over P near the given
    period; the projection peak localizes far better than an
    autocorrelation lag once roughly the right period is known.
    """
    x = np.asarray(x, dtype=np.float64)
    x = x - x.mean()
    idx = start_index + np.arange(len(x))
    best_p, best_mag = float(period), -1.0
    for p in np.linspace(0.98 * period, 1.02 * period, 161):
        mag = abs(np.dot(x, np.exp(-2j * np.pi * idx / p)))
        if mag > best_mag:
            best_mag, best_p = mag, float(p)
    return best_p


def projection_phase(x: np.ndarray, start_index: float, period: float) -> float:
    """Phase, in samples within [0, period), of the dominant sinusoid at the
    given period, measured against the absolute sample index."""
    x = np.asarray(x, dtype=np.float64)
    x = x - x.mean()
    idx = start_index + np.arange(len(x))
    z = np.dot(x, np.exp(-2j * np.pi * idx / period))
    return float((np.angle(z) / (2.0 * np.pi) * period) % period)


def _fold(x: np.ndarray, period: float, bins: int) -> np.ndarray:
    """Mean reading per phase bin; empty bins filled from neighbours."""
    phase = (np.arange(len(x)) % period) / period
    which = np.minimum((phase * bins).astype(np.int64), bins - 1)
    sums = np.bincount(which, weights=x, minlength=bins)
    counts = np.bincount(which, minlength=bins)
    prof = np.full(bins, np.nan)
    filled = counts > 0
    prof[filled] = sums[filled] / counts[filled]
    if not filled.all():
        pos = np.nonzero(filled)[0]
        prof = np.interp(np.arange(bins), pos, prof[pos], period=bins)
    return prof


def phase_offset(before: np.ndarray, after: np.ndarray, period: float) -> float:
    """Circular shift, in samples within [0, period), that best aligns the
    period-folded profile of ``after`` onto the one of ``before``.

    The returned o satisfies after-profile(phi) ~ before-profile(phi + o).
    """
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    if not period > 1.0:
        raise ValueError("period must be > 1 sample")
    if len(before) < 2 * period or len(after) < 2 * period:
        raise SegmentTooShort("phase comparison needs >= 2 periods per segment")

    bins = max(4, int(round(period)))
    pb = _fold(before, period, bins)
    pa = _fold(after, period, bins)
    pb = pb - pb.mean()
    pa = pa - pa.mean()
    # Circular cross-correlation over every integer bin shift.
    cc = np.array([np.dot(pa, np.roll(pb, -s)) for s in range(bins)])
    best = int(np.argmax(cc))
    shift = float(best)
    y0, y1, y2 = cc[(best - 1) % bins], cc[best], cc[(best + 1) % bins]
    denom = y0 - 2.0 * y1 + y2
    if denom < 0:
        shift = best + 0.5 * (y0 - y2) / denom
    return float((shift * period / bins) % period)


@dataclass(frozen=True)
class ClusteredDevice:
    device: str
    cluster: int
    degenerate: bool = False  # zero-variance series, kept out of the linkage


def cluster_devices(
    series: dict[str, np.ndarray | DeviceSeries],
    depth: int = 2,
    threshold: float = 1.15,
    max_merge_distance: float = 1.0,
) -> list[ClusteredDevice]:
    """Group devices by correlation, ordered like the dendrogram leaves.

    Pairwise distance is 1 - Pearson correlation, merged by average
    linkage.  Flat clusters cut the tree wherever the inconsistency
    coefficient (given depth) exceeds the threshold or the merge distance
    exceeds max_merge_distance; the latter keeps groups with non-positive
    average correlation apart, so perfectly anti-correlated devices never
    share a cluster.  Zero-variance devices have no defined correlation and
    are appended as flagged singleton clusters.
    """
    if not series:
        raise ValueError("need at least one device")
    names = list(series)
    arrays = []
    for name in names:
        s = series[name]
        arr = s.readings if isinstance(s, DeviceSeries) else np.asarray(s, dtype=np.float64)
        arrays.append(arr)
    length = len(arrays[0])
    if any(len(a) != length for a in arrays):
        raise ValueError("device series must have equal length; resample first")

    live = [i for i, a in enumerate(arrays) if a.max() != a.min()]
    dead = [i for i in range(len(names)) if i not in live]

    out: list[ClusteredDevice] = []
    next_cluster = 0
    if len(live) == 1:
        out.append(ClusteredDevice(names[live[0]], 0))
        next_cluster = 1
    elif len(live) > 1:
        mat = np.vstack([arrays[i] for i in live])
        dist = 1.0 - np.corrcoef(mat)
        np.fill_diagonal(dist, 0.0)
        condensed = squareform(np.maximum(dist, 0.0), checks=False)
        link = _hier.linkage(condensed, method="average")
        incons = _hier.inconsistent(link, d=depth)

        n = len(live)
        bad = (incons[:, 3] > threshold) | (link[:, 2] > max_merge_distance)
        # A merge above a broken merge cannot rejoin what was cut.
        for i in range(n - 1):
            for child in (int(link[i, 0]), int(link[i, 1])):
                if child >= n and bad[child - n]:
                    bad[i] = True
        parent = list(range(2 * n - 1))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(n - 1):
            if not bad[i]:
                a, b = find(int(link[i, 0])), find(int(link[i, 1]))
                parent[a] = n + i
                parent[b] = n + i
        order = _hier.leaves_list(link)
        labels: dict[int, int] = {}
        for leaf in order:
            root = find(int(leaf))
            if root not in labels:
                labels[root] = next_cluster
                next_cluster += 1
            out.append(ClusteredDevice(names[live[int(leaf)]], labels[root]))
    for i in dead:
        out.append(ClusteredDevice(names[i], next_cluster, degenerate=True))
        next_cluster += 1
    return out


def downsample(series: DeviceSeries, max_points: int) -> DeviceSeries:
    """Reduce a series to at most max_points + 2 samples for overview plots.

    The samples split into ceil(max_points / 2) equal buckets; each bucket
    contributes its minimum and maximum reading in time order, both stamped
    with the bucket's maximum rating.  Global reading extremes and the
    global rating maximum therefore survive exactly.
    """
    if max_points < 2:
        raise ValueError("max_points must be >= 2")
    n = len(series.readings)
    if n <= max_points:
        return series
    buckets = int(np.ceil(max_points / 2))
    edges = np.linspace(0, n, buckets + 1).astype(np.int64)
    keep: list[int] = []
    rating_of: dict[int, float] = {}
    for b in range(buckets):
        lo, hi = int(edges[b]), int(edges[b + 1])
        if hi <= lo:
            continue
        chunk = series.readings[lo:hi]
        r_max = float(series.ratings[lo:hi].max())
        i_min = lo + int(np.argmin(chunk))
        i_max = lo + int(np.argmax(chunk))
        for idx in sorted({i_min, i_max}):
            keep.append(idx)
            rating_of[idx] = r_max
    idx_arr = np.asarray(keep, dtype=np.int64)
    times = series.time_axis()[idx_arr]
    return DeviceSeries(
        device=series.device,
        t0=float(times[0]),
        dt=series.dt,
        readings=series.readings[idx_arr],
        ratings=np.asarray([rating_of[i] for i in keep], dtype=np.float64),
        times=times,
    )
