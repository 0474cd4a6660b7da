"""Per-pair directed information estimates and their ensemble-smoothed ADI.

For an actor pair ``(i, j)`` at sample time ``t`` the joint vector stacks
the current and lagged positions of both actors plus the previous positions
of up to ``side_cond_max`` nearby third parties.  A kernel Gaussian model of
that vector gives

* ``DI(i -> j) = I(i_{t-1..t-k} ; j_t | j_{t-1..t-k}, sides_{t-1})``
* ``DI(j -> i)`` symmetrically, from the same covariance matrix, and
* ``AMI = I(i_t ; j_t | i_{t-1..t-k}, j_{t-1..t-k})``.

Each directed stream is smoothed by its own fixed-shares ensemble.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ensemble import EnsembleHyper, run_ensemble
from .errors import DomainError, NumericalError, ParameterError
from .gaussian_mi import (
    CENTERS,
    MODES,
    gaussian_cmi,
    kernel_cov,
    kernel_means,
    relative_ridge,
)
from .ingest import drop_short_segments

ADI_COLUMNS = (
    "scene", "actor_i", "actor_j", "t", "di_inst_ij", "adi_ij",
    "di_inst_ji", "adi_ji", "adi_sym", "burn_in",
)


@dataclass(frozen=True)
class PairConfig:
    markov_order: int = 1
    gate_radius: float = 100.0
    side_cond_max: int = 3
    bandwidth: float = 5.0
    hyper: EnsembleHyper = field(default_factory=EnsembleHyper)
    mode: str = "offline"
    center: str = "per-sample"
    ridge: float = 1e-6
    ridge_floor: float = 1e-9
    min_overlap: int = 20

    def __post_init__(self):
        if int(self.markov_order) != self.markov_order or self.markov_order < 1:
            raise ParameterError("markov_order must be a positive integer")
        if not self.gate_radius > 0:
            raise ParameterError("gate_radius must be positive")
        if int(self.side_cond_max) != self.side_cond_max or self.side_cond_max < 0:
            raise ParameterError("side_cond_max must be a non-negative integer")
        if not self.bandwidth > 0:
            raise ParameterError("bandwidth must be positive")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}")
        if self.center not in CENTERS:
            raise ParameterError(f"center must be one of {CENTERS}")
        if self.ridge < 0 or self.ridge_floor < 0:
            raise ParameterError("ridge terms must be non-negative")
        if int(self.min_overlap) != self.min_overlap or self.min_overlap < 1:
            raise ParameterError("min_overlap must be a positive integer")

    @property
    def burn_in(self):
        return int(math.ceil(max(self.markov_order, self.bandwidth)))


@dataclass(frozen=True)
class AdiSeries:
    source: int
    target: int
    times: np.ndarray
    instantaneous: np.ndarray
    ensemble: np.ndarray
    burn_in: np.ndarray


@dataclass(frozen=True)
class InteractionRecord:
    scene: str
    pair: tuple
    forward: AdiSeries
    backward: AdiSeries
    labels: tuple = (None, None)

    @property
    def times(self):
        return self.forward.times

    @property
    def symmetrized(self):
        return self.forward.ensemble + self.backward.ensemble

    @property
    def key(self):
        return f"{self.scene}:{self.pair[0]}:{self.pair[1]}"


class Scene:
    """Dense (actor, time) grid of positions; NaN where an actor is absent."""

    def __init__(self, tracks):
        tracks = list(tracks)
        self.tracks = {tr.actor_id: tr for tr in tracks}
        self.ids = sorted(self.tracks)
        self.row = {a: n for n, a in enumerate(self.ids)}
        if tracks and any(len(tr) for tr in tracks):
            self.t_min = int(min(tr.times.min() for tr in tracks if len(tr)))
            t_max = int(max(tr.times.max() for tr in tracks if len(tr)))
        else:
            self.t_min, t_max = 0, -1
        self.n_times = t_max - self.t_min + 1
        self.pos = np.full((len(self.ids), max(self.n_times, 0), 2), np.nan)
        for tr in tracks:
            self.pos[self.row[tr.actor_id], tr.times - self.t_min] = tr.positions

    def label(self, actor):
        return self.tracks[actor].label

    def present(self, actor):
        return ~np.isnan(self.pos[self.row[actor], :, 0])

    def distance(self, a, b):
        d = self.pos[self.row[a]] - self.pos[self.row[b]]
        return np.hypot(d[:, 0], d[:, 1])


def _scene(tracks):
    return tracks if isinstance(tracks, Scene) else Scene(tracks)


def gate_pairs(tracks, radius=100.0):
    """Unordered pairs with the sample times at which they are within ``radius``."""
    if not radius > 0:
        raise ParameterError("radius must be positive")
    sc = _scene(tracks)
    out = []
    for n, a in enumerate(sc.ids):
        for b in sc.ids[n + 1:]:
            with np.errstate(invalid="ignore"):
                close = sc.distance(a, b) <= radius
            if close.any():
                out.append(((a, b), np.flatnonzero(close) + sc.t_min))
    return out


class _PairModel:
    """Joint-vector assembly and covariance windows for one actor pair."""

    def __init__(self, scene, i, j, cfg):
        self.sc, self.i, self.j, self.cfg = scene, i, j, cfg
        k = cfg.markov_order
        self.k = k
        self._cache = {}
        lagged_ok = np.ones(scene.n_times, dtype=bool)
        for a in (i, j):
            p = scene.present(a)
            for lag in range(k + 1):
                ok = np.zeros_like(p)
                ok[lag:] = p[: scene.n_times - lag]
                lagged_ok &= ok
        self.history_ok = lagged_ok
        d = 2 * (k + 1)
        self.i_now, self.i_lag = [0, 1], list(range(2, d))
        self.j_now, self.j_lag = [d, d + 1], list(range(d + 2, 2 * d))

    def side_actors(self, g):
        """Up to ``side_cond_max`` third parties nearest to the pair at grid index ``g``."""
        cfg, sc = self.cfg, self.sc
        if cfg.side_cond_max == 0 or g < 0:
            return ()
        here = sc.pos[:, g]
        di = np.hypot(*(here - here[sc.row[self.i]]).T)
        dj = np.hypot(*(here - here[sc.row[self.j]]).T)
        dist = np.fmin(di, dj)
        cand = [
            (dist[r], a) for r, a in enumerate(sc.ids)
            if a not in (self.i, self.j) and dist[r] <= cfg.gate_radius
        ]
        cand.sort()
        return tuple(sorted(a for _, a in cand[: cfg.side_cond_max]))

    def _matrix(self, sides):
        if sides in self._cache:
            return self._cache[sides]
        sc, k = self.sc, self.k
        ok = self.history_ok.copy()
        ok[0] = ok[0] and not sides
        for s in sides:
            p = sc.present(s)
            ok[1:] &= p[:-1]
        g = np.flatnonzero(ok)
        cols = []
        for a in (self.i, self.j):
            P = sc.pos[sc.row[a]]
            cols.extend(P[g - lag] for lag in range(k + 1))
        cols.extend(sc.pos[sc.row[s]][g - 1] for s in sides)
        X = np.hstack(cols) if g.size else np.empty((0, 4 * (k + 1) + 2 * len(sides)))
        means = None
        if g.size and self.cfg.center == "per-sample":
            means = kernel_means(X, self.cfg.bandwidth, times=g.astype(float), mode=self.cfg.mode)
        entry = (g.astype(float), X, means)
        self._cache[sides] = entry
        return entry

    def covariance(self, t):
        """Ridge-loaded kernel covariance at sample time ``t`` (None if unavailable)."""
        g = t - self.sc.t_min
        if g < 0 or g >= self.sc.n_times or not self.history_ok[g]:
            return None
        sides = self.side_actors(g - 1)
        times, X, means = self._matrix(sides)
        if X.shape[0] < 2:
            return None
        cfg = self.cfg
        S = kernel_cov(X, float(g), cfg.bandwidth, times=times, mode=cfg.mode,
                       center=cfg.center, means=means)
        S[np.diag_indices_from(S)] += relative_ridge(S, cfg.ridge, cfg.ridge_floor)
        return S, len(sides)

    def estimates(self, t):
        """``(di_ij, di_ji, ami)`` at time ``t``, or None when history is missing."""
        got = self.covariance(t)
        if got is None:
            return None
        S, n_sides = got
        side = list(range(S.shape[0] - 2 * n_sides, S.shape[0]))
        try:
            di_ij = gaussian_cmi(S, self.i_lag, self.j_now, self.j_lag + side)
            di_ji = gaussian_cmi(S, self.j_lag, self.i_now, self.i_lag + side)
            ami = gaussian_cmi(S, self.i_now, self.j_now, self.i_lag + self.j_lag)
        except NumericalError as exc:
            raise NumericalError(str(exc), t=t) from None
        return di_ij, di_ji, ami


def instantaneous_di(tracks, i, j, t, cfg=None):
    """Directed information estimate ``i -> j`` at time ``t``; None if history is short."""
    cfg = cfg or PairConfig()
    got = _PairModel(_scene(tracks), i, j, cfg).estimates(t)
    return None if got is None else got[0]


def _burn_in_mask(times, n):
    mask = np.zeros(len(times), dtype=bool)
    starts = np.concatenate([[0], np.flatnonzero(np.diff(times) != 1) + 1])
    for s in starts:
        mask[s : s + n] = True
    return mask


def _gated_estimates(sc, pair, cfg, gated_times=None):
    i, j = pair
    if gated_times is None:
        with np.errstate(invalid="ignore"):
            close = sc.distance(i, j) <= cfg.gate_radius
        gated_times = np.flatnonzero(close) + sc.t_min
    model = _PairModel(sc, i, j, cfg)
    times, rows = [], []
    for t in gated_times:
        got = model.estimates(int(t))
        if got is not None:
            times.append(int(t))
            rows.append(got)
    if len(times) < cfg.min_overlap:
        return None
    return np.array(times, dtype=np.int64), np.array(rows)


def compute_adi_series(tracks, pair, cfg=None, scene_id="", gated_times=None):
    """Both directed ADI series for ``pair``; None when the gated overlap is too short."""
    cfg = cfg or PairConfig()
    sc = _scene(tracks)
    got = _gated_estimates(sc, pair, cfg, gated_times)
    if got is None:
        return None
    times, est = got
    burn = _burn_in_mask(times, cfg.burn_in)
    i, j = pair
    fwd, _ = run_ensemble(cfg.hyper, est[:, 0], t0=0)
    bwd, _ = run_ensemble(cfg.hyper, est[:, 1], t0=0)
    return InteractionRecord(
        scene=scene_id,
        pair=(i, j),
        forward=AdiSeries(i, j, times, est[:, 0], fwd, burn),
        backward=AdiSeries(j, i, times, est[:, 1], bwd, burn),
        labels=(sc.label(i), sc.label(j)),
    )


def compute_ami_series(tracks, pair, cfg=None, gated_times=None):
    """Ensemble-smoothed instantaneous MI between the pair's current positions."""
    cfg = cfg or PairConfig()
    got = _gated_estimates(_scene(tracks), pair, cfg, gated_times)
    if got is None:
        return None
    times, est = got
    smooth, _ = run_ensemble(cfg.hyper, est[:, 2], t0=0)
    return AdiSeries(pair[0], pair[1], times, est[:, 2], smooth,
                     _burn_in_mask(times, cfg.burn_in))


def compute_scene(tracks, cfg=None, scene_id="", threads=1, pairs=None, ami=False):
    """ADI records for every gated pair of a scene, ordered by pair.

    Tracks are split at gaps and runs shorter than ``2k + 1`` samples are
    dropped first.  ``pairs`` restricts the workload; each pair's result
    depends only on the track data, never on which other pairs are run.
    With ``ami=True`` returns ``(records, ami_series)``.
    """
    cfg = cfg or PairConfig()
    tracks = [drop_short_segments(t, 2 * cfg.markov_order + 1) for t in tracks]
    sc = Scene(tracks)
    gated = gate_pairs(sc, cfg.gate_radius)
    if pairs is not None:
        wanted = {tuple(sorted(p)) for p in pairs}
        gated = [g for g in gated if g[0] in wanted]

    def work(item):
        pair, times = item
        rec = compute_adi_series(sc, pair, cfg, scene_id, gated_times=times)
        am = compute_ami_series(sc, pair, cfg, gated_times=times) if ami and rec else None
        return rec, am

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, gated))
    else:
        results = [work(g) for g in gated]
    records = [r for r, _ in results if r is not None]
    if ami:
        return records, [a for _, a in results if a is not None]
    return records


def _f(x):
    return repr(float(x))


def write_adi_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ADI_COLUMNS)
        for rec in records:
            f, b = rec.forward, rec.backward
            sym = rec.symmetrized
            for n, t in enumerate(f.times):
                w.writerow([
                    rec.scene, rec.pair[0], rec.pair[1], int(t),
                    _f(f.instantaneous[n]), _f(f.ensemble[n]),
                    _f(b.instantaneous[n]), _f(b.ensemble[n]), _f(sym[n]),
                    "true" if f.burn_in[n] else "false",
                ])


def write_ami_csv(series, path, scene_id=""):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scene", "actor_i", "actor_j", "t", "mi_inst", "ami", "burn_in"))
        for s in series:
            for n, t in enumerate(s.times):
                w.writerow([scene_id, s.source, s.target, int(t), _f(s.instantaneous[n]),
                            _f(s.ensemble[n]), "true" if s.burn_in[n] else "false"])


def read_adi_csv(path, labels=None):
    """Load ``adi_series.csv`` back into records.

    ``labels`` optionally maps ``(scene, actor)`` or ``actor`` to a label.
    """
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != ADI_COLUMNS:
            raise DomainError(f"{path}: expected header {','.join(ADI_COLUMNS)}")
        for row in reader:
            key = (row["scene"], int(row["actor_i"]), int(row["actor_j"]))
            groups.setdefault(key, []).append(row)
    labels = labels or {}

    def lab(scene, a):
        return labels.get((scene, a), labels.get(a))

    out = []
    for (scene, i, j), rows in groups.items():
        col = {c: np.array([float(r[c]) for r in rows]) for c in ADI_COLUMNS[4:9]}
        times = np.array([int(r["t"]) for r in rows], dtype=np.int64)
        burn = np.array([r["burn_in"] == "true" for r in rows])
        out.append(InteractionRecord(
            scene=scene,
            pair=(i, j),
            forward=AdiSeries(i, j, times, col["di_inst_ij"], col["adi_ij"], burn),
            backward=AdiSeries(j, i, times, col["di_inst_ji"], col["adi_ji"], burn),
            labels=(lab(scene, i), lab(scene, j)),
        ))
    return out
