"""Post-hoc analytics over ADI records: affinities, velocities, type averages."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

ANGLE_EPS = 1e-6


@dataclass(frozen=True)
class AffinityMatrix:
    values: np.ndarray
    keys: tuple
    mask: np.ndarray  # True where the affinity was actually computed

    def __len__(self):
        return len(self.keys)


@dataclass(frozen=True)
class VelocityProfile:
    times: np.ndarray
    velocity: np.ndarray
    speed: np.ndarray


def _dense(x, times, origin, length):
    vals = np.zeros(length)
    mask = np.zeros(length)
    vals[times - origin] = x
    mask[times - origin] = 1.0
    return vals, mask


def _lag_correlations(a, b, max_lag, min_overlap, ta=None, tb=None):
    """Pearson correlation of ``a`` at time ``t`` with ``b`` at ``t + lag``.

    Series live on integer time grids (``ta``, ``tb``; default ``0..n-1``)
    and only times where both are observed count.  The per-lag sums come
    from cross-correlating zero-filled values and presence masks.
    """
    ta = np.arange(a.size) if ta is None else np.asarray(ta, dtype=np.int64)
    tb = np.arange(b.size) if tb is None else np.asarray(tb, dtype=np.int64)
    # centring first keeps the one-pass moment formulas accurate
    a = a - a.mean()
    b = b - b.mean()
    origin = min(ta[0], tb[0])
    length = int(max(ta[-1], tb[-1]) - origin + 1)
    A, MA = _dense(a, ta, origin, length)
    B, MB = _dense(b, tb, origin, length)
    lags = np.arange(-max_lag, max_lag + 1)
    idx = lags + length - 1
    keep = (idx >= 0) & (idx < 2 * length - 1)
    lags, idx = lags[keep], idx[keep]

    def xc(u, v):  # sum_t u[t] v[t + lag]
        return np.correlate(v, u, mode="full")[idx]

    n = np.rint(xc(MA, MB))
    ok = n >= min_overlap
    if not ok.any():
        return lags[:0], np.empty(0)
    lags, idx, n = lags[ok], idx[ok], n[ok]
    sab = xc(A, B)
    sa, sa2 = xc(A, MB), xc(A * A, MB)
    sb, sb2 = xc(MA, B), xc(MA, B * B)
    cov = sab - sa * sb / n
    va = sa2 - sa * sa / n
    vb = sb2 - sb * sb / n
    scale = np.sqrt(np.clip(va, 0, None) * np.clip(vb, 0, None))
    tiny = 1e-12 * max(float(np.dot(a, a)), float(np.dot(b, b)), 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(scale > tiny, cov / scale, 0.0)
    return lags, np.clip(r, -1.0, 1.0)


def xcorr_affinity(s1, s2, max_lag=50, min_overlap=20, t1=None, t2=None):
    """Maximal normalized cross-correlation over lags ``|l| <= max_lag``.

    ``t1``/``t2`` give integer sample times; by default both series start
    at time 0 with no gaps.  At each lag the common support is standardized
    and correlated; a constant overlap counts as 0.  Returns None when no
    lag overlaps by ``min_overlap`` samples.
    """
    a = np.asarray(s1, dtype=float)
    b = np.asarray(s2, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("series must be finite")
    for s, t in ((a, t1), (b, t2)):
        if t is not None and (len(t) != s.size or np.any(np.diff(t) <= 0)):
            raise DomainError("times must be strictly increasing and match the series")
    if min(a.size, b.size) < max(min_overlap, 1):
        return None
    lags, r = _lag_correlations(a, b, int(max_lag), int(min_overlap), t1, t2)
    if r.size == 0:
        return None
    return float(r.max())


def affinity_matrix(records, max_lag=50, min_overlap=20, series=None):
    """Pairwise affinities of symmetrized ADI series.

    Records from the same scene are aligned on their sample times; records
    from different scenes are each shifted to start at 0.  ``series``
    overrides the per-record series (one array per record, no gaps).
    Entries that could not be computed are 0 with ``mask`` False.
    """
    records = list(records)
    if series is None:
        series = [np.asarray(r.symmetrized, dtype=float) for r in records]
        times = [np.asarray(r.times, dtype=np.int64) for r in records]
    else:
        times = [np.arange(len(s)) for s in series]
    keys = tuple(r.key for r in records)
    m = len(series)
    if m < 2:
        raise DomainError("affinity_matrix needs at least two records")
    A = np.eye(m)
    mask = np.eye(m, dtype=bool)
    for k in range(m):
        for l in range(k + 1, m):
            tk, tl = times[k], times[l]
            if records[k].scene != records[l].scene:
                tk, tl = tk - tk[0], tl - tl[0]
            a = xcorr_affinity(series[k], series[l], max_lag, min_overlap, tk, tl)
            if a is not None:
                A[k, l] = A[l, k] = a
                mask[k, l] = mask[l, k] = True
    return AffinityMatrix(A, keys, mask)


def to_distance(A, tol=1e-9):
    """Chordal distance ``sqrt(2 (1 - a))`` of an affinity matrix."""
    a = np.asarray(A.values if isinstance(A, AffinityMatrix) else A, dtype=float)
    if np.any(a > 1 + tol) or np.any(a < -1 - tol):
        raise DomainError("affinities must lie in [-1, 1]")
    D = np.sqrt(2.0 * (1.0 - np.clip(a, -1.0, 1.0)))
    if D.ndim == 2 and D.shape[0] == D.shape[1]:
        np.fill_diagonal(D, 0.0)
    return D


def velocity(track):
    """Per-sample velocity in px/sample: central differences inside each run,
    one-sided at run ends.  Isolated samples get no velocity."""
    times, vel = [], []
    for seg in track.segments():
        p = track.positions[seg]
        if len(p) < 2:
            continue
        vel.append(np.gradient(p, axis=0, edge_order=1))
        times.append(track.times[seg])
    if not vel:
        return VelocityProfile(np.empty(0, dtype=np.int64), np.empty((0, 2)), np.empty(0))
    v = np.vstack(vel)
    return VelocityProfile(np.concatenate(times), v, np.hypot(v[:, 0], v[:, 1]))


def velocity_angle(vi, vj, eps=ANGLE_EPS):
    """Angle between two velocity vectors in radians, or None if either is ~0."""
    vi = np.asarray(vi, dtype=float)
    vj = np.asarray(vj, dtype=float)
    ni, nj = math.hypot(*vi), math.hypot(*vj)
    if ni < eps or nj < eps:
        return None
    return math.acos(min(1.0, max(-1.0, float(vi @ vj) / (ni * nj))))


def pair_velocity(track_i, track_j):
    """Rows ``(t, speed_i, speed_j, total, angle)`` over the pair's common times."""
    pi, pj = velocity(track_i), velocity(track_j)
    common, ia, ib = np.intersect1d(pi.times, pj.times, return_indices=True)
    rows = []
    for t, a, b in zip(common, ia, ib):
        si, sj = float(pi.speed[a]), float(pj.speed[b])
        rows.append((int(t), si, sj, si + sj, velocity_angle(pi.velocity[a], pj.velocity[b])))
    return rows


def _norm_label(label):
    return None if label is None else label.strip().casefold()


def type_average_matrix(records, drop_burn_in=True):
    """Mean directed ADI per (source label, target label).

    Returns ``(labels, means, counts)`` where ``means[a, b]`` is NaN for an
    empty cell.  Labels compare case-insensitively; the first spelling seen
    is used for display.
    """
    sums = defaultdict(float)
    counts = defaultdict(int)
    display = {}
    for rec in records:
        la, lb = rec.labels
        for series, (src, dst) in ((rec.forward, (la, lb)), (rec.backward, (lb, la))):
            if src is None or dst is None:
                raise DomainError(f"record {rec.key} carries no actor labels")
            keep = ~series.burn_in if drop_burn_in else np.ones(len(series.times), bool)
            vals = series.ensemble[keep]
            if vals.size == 0:
                continue
            ks, kd = _norm_label(src), _norm_label(dst)
            display.setdefault(ks, src.strip())
            display.setdefault(kd, dst.strip())
            sums[ks, kd] += float(vals.sum())
            counts[ks, kd] += int(vals.size)
    keys = sorted(display)
    labels = tuple(display[k] for k in keys)
    n = len(keys)
    means = np.full((n, n), np.nan)
    cnt = np.zeros((n, n), dtype=np.int64)
    for (ks, kd), c in counts.items():
        a, b = keys.index(ks), keys.index(kd)
        means[a, b] = sums[ks, kd] / c
        cnt[a, b] = c
    return labels, means, cnt


def _f(x):
    return repr(float(x))


def write_matrix_csv(matrix, keys, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(keys))
        for key, row in zip(keys, matrix):
            w.writerow([key] + [_f(v) for v in row])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    keys = tuple(rows[0][1:])
    return keys, np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def write_type_matrix_csv(labels, means, counts, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("label_from", "label_to", "mean_adi", "count"))
        for a, la in enumerate(labels):
            for b, lb in enumerate(labels):
                if counts[a, b]:
                    w.writerow((la, lb, _f(means[a, b]), int(counts[a, b])))


def write_velocity_csv(rows, path):
    """``rows`` are ``(pair_key, t, v_i, v_j, total, angle)``; missing angle -> empty field."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("pair", "t", "v_i", "v_j", "total_velocity", "angle"))
        for key, t, vi, vj, tot, ang in rows:
            w.writerow((key, t, _f(vi), _f(vj), _f(tot), "" if ang is None else _f(ang)))
