"""Annotation parsing, smoothing and subsampling of actor tracks.

Input lines follow the drone-video annotation layout::

    track_id xmin ymin xmax ymax frame lost occluded generated "label"

An actor's position is the centre of its bounding box.
"""

from __future__ import annotations

import csv
import shlex
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ParameterError, ParseError

TRACK_COLUMNS = ("actor_id", "label", "sample_t", "x", "y")


@dataclass(frozen=True)
class Track:
    actor_id: int
    label: str
    frames: np.ndarray
    boxes: np.ndarray  # (n, 4): xmin, ymin, xmax, ymax
    lost: np.ndarray
    occluded: np.ndarray
    generated: np.ndarray
    positions: np.ndarray = None

    def __post_init__(self):
        if self.positions is None:
            b = np.asarray(self.boxes, dtype=float).reshape(-1, 4)
            centers = np.column_stack([(b[:, 0] + b[:, 2]) / 2.0, (b[:, 1] + b[:, 3]) / 2.0])
            object.__setattr__(self, "positions", centers)
        n = len(self.frames)
        if any(len(a) != n for a in (self.boxes, self.lost, self.occluded, self.generated)):
            raise DomainError(f"track {self.actor_id}: field lengths differ")
        if n and np.any(np.diff(self.frames) <= 0):
            raise DomainError(f"track {self.actor_id}: frames not strictly increasing")

    def __len__(self):
        return len(self.frames)


@dataclass(frozen=True)
class SampledTrack:
    actor_id: int
    label: str
    times: np.ndarray
    positions: np.ndarray
    gaps: tuple = field(default=())

    def __len__(self):
        return len(self.times)

    def segments(self):
        """Index slices of the runs of consecutive sample times."""
        if len(self.times) == 0:
            return []
        breaks = np.flatnonzero(np.diff(self.times) != 1) + 1
        bounds = np.concatenate([[0], breaks, [len(self.times)]])
        return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def _num(tok, lineno, name):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"field {name!r} is not numeric: {tok!r}", lineno) from None


def _int(tok, lineno, name):
    v = _num(tok, lineno, name)
    if v != int(v):
        raise ParseError(f"field {name!r} must be an integer: {tok!r}", lineno)
    return int(v)


def parse_annotations(text):
    """Parse annotation text into tracks sorted by actor id.

    Blank lines are skipped.  Malformed lines raise ``ParseError`` naming the
    line number.
    """
    rows = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            fields = shlex.split(line, posix=True)
        except ValueError as exc:
            raise ParseError(f"bad quoting ({exc})", lineno) from None
        if len(fields) != 10:
            raise ParseError(f"expected 10 fields, got {len(fields)}", lineno)
        tid = _int(fields[0], lineno, "track_id")
        box = [_num(f, lineno, n) for f, n in zip(fields[1:5], ("xmin", "ymin", "xmax", "ymax"))]
        frame = _int(fields[5], lineno, "frame")
        flags = []
        for tok, name in zip(fields[6:9], ("lost", "occluded", "generated")):
            v = _int(tok, lineno, name)
            if v not in (0, 1):
                raise ParseError(f"flag {name!r} must be 0 or 1", lineno)
            flags.append(bool(v))
        label = fields[9].strip()
        rows.setdefault(tid, []).append((frame, box, flags, label, lineno))

    tracks = []
    for tid in sorted(rows):
        recs = sorted(rows[tid], key=lambda r: r[0])
        frames = np.array([r[0] for r in recs], dtype=np.int64)
        dup = np.flatnonzero(np.diff(frames) == 0)
        if dup.size:
            raise ParseError(f"track {tid} repeats frame {frames[dup[0]]}", recs[dup[0] + 1][4])
        tracks.append(Track(
            actor_id=tid,
            label=recs[0][3],
            frames=frames,
            boxes=np.array([r[1] for r in recs], dtype=float).reshape(-1, 4),
            lost=np.array([r[2][0] for r in recs], dtype=bool),
            occluded=np.array([r[2][1] for r in recs], dtype=bool),
            generated=np.array([r[2][2] for r in recs], dtype=bool),
        ))
    return tracks


def read_annotations(path):
    return parse_annotations(Path(path).read_text())


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def serialize_annotations(tracks):
    """Inverse of ``parse_annotations`` (one line per track sample)."""
    lines = []
    for tr in tracks:
        for n in range(len(tr)):
            box = " ".join(_fmt(v) for v in tr.boxes[n])
            flags = " ".join(str(int(f[n])) for f in (tr.lost, tr.occluded, tr.generated))
            lines.append(f'{tr.actor_id} {box} {tr.frames[n]} {flags} "{tr.label}"')
    return "\n".join(lines) + ("\n" if lines else "")


def smooth_track(track, window=15):
    """Centred moving mean of the box positions over non-lost frames.

    The window spans ``window`` frames and is truncated at the ends of the
    track; lost frames are dropped from both the average and the output.
    """
    if isinstance(window, bool) or int(window) != window or window < 1 or window % 2 == 0:
        raise ParameterError(f"smoothing window must be an odd positive integer, got {window!r}")
    keep = ~track.lost
    frames = track.frames[keep]
    boxes = track.boxes[keep]
    half = window // 2
    pos = track.positions[keep]
    lo = np.searchsorted(frames, frames - half, side="left")
    hi = np.searchsorted(frames, frames + half, side="right")
    smooth = np.empty_like(pos)
    for n, (a, b) in enumerate(zip(lo, hi)):
        win = pos[a:b]
        # averaging offsets from the centre sample keeps constant runs exact
        m = pos[n] + (win - pos[n]).mean(axis=0)
        smooth[n] = np.clip(m, win.min(axis=0), win.max(axis=0))
    return Track(
        actor_id=track.actor_id,
        label=track.label,
        frames=frames,
        boxes=boxes + np.tile(smooth - pos, 2),
        lost=np.zeros(len(frames), dtype=bool),
        occluded=track.occluded[keep],
        generated=track.generated[keep],
        positions=smooth,
    )


def sample_track(track, stride=10):
    """Keep frames divisible by ``stride`` and re-index time as frame // stride."""
    if isinstance(stride, bool) or int(stride) != stride or stride < 1:
        raise ParameterError(f"stride must be a positive integer, got {stride!r}")
    keep = (track.frames % stride == 0) & ~track.lost
    times = track.frames[keep] // stride
    gaps = tuple(int(t) for t in times[1:][np.diff(times) > 1])
    return SampledTrack(track.actor_id, track.label, times, track.positions[keep], gaps)


def drop_short_segments(st, min_len):
    """Remove runs of consecutive samples shorter than ``min_len``."""
    keep = np.zeros(len(st), dtype=bool)
    for s in st.segments():
        if s.stop - s.start >= min_len:
            keep[s] = True
    times = st.times[keep]
    gaps = tuple(int(t) for t in times[1:][np.diff(times) > 1])
    return SampledTrack(st.actor_id, st.label, times, st.positions[keep], gaps)


def prepare_tracks(tracks, window=15, stride=10):
    return [sample_track(smooth_track(t, window), stride) for t in tracks]


def write_tracks_csv(tracks, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACK_COLUMNS)
        for st in tracks:
            for t, (x, y) in zip(st.times, st.positions):
                w.writerow([st.actor_id, st.label, int(t), repr(float(x)), repr(float(y))])


def read_tracks_csv(path):
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACK_COLUMNS:
            raise DomainError(f"{path}: expected header {','.join(TRACK_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                key = int(row["actor_id"])
                rec = (int(row["sample_t"]), float(row["x"]), float(row["y"]))
            except (TypeError, ValueError):
                raise ParseError(f"{path}: malformed track row", lineno) from None
            groups.setdefault(key, [row["label"], []])[1].append(rec)
    out = []
    for aid in sorted(groups):
        label, recs = groups[aid]
        recs.sort()
        times = np.array([r[0] for r in recs], dtype=np.int64)
        if np.any(np.diff(times) <= 0):
            raise DomainError(f"{path}: actor {aid} repeats a sample time")
        pos = np.array([r[1:] for r in recs], dtype=float).reshape(-1, 2)
        gaps = tuple(int(t) for t in times[1:][np.diff(times) > 1])
        out.append(SampledTrack(aid, label, times, pos, gaps))
    return out
