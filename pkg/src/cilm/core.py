"""Domain types shared across the package: populations, event records,
compartment timelines, model parameters and pairwise distances."""
from __future__ import annotations

import csv
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

SIR = "SIR"
SEIR = "SEIR"
FRAMES = (SIR, SEIR)

# Stand-in for "never happens" inside integer time arrays. Only used internally;
# records keep absent events as None.
NEVER = np.iinfo(np.int64).max // 4


class ValidationError(ValueError):
    """Raised when input data violates a domain invariant."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Population:
    """Roster of individuals with planar coordinates.

    ``coords[i]`` is the (x, y) location of individual ``i``; ids are the
    row indices 0..N-1.
    """

    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValidationError(f"coords must have shape (N, 2), got {coords.shape}")
        if coords.shape[0] < 1:
            raise ValidationError("population must contain at least one individual")
        if not np.all(np.isfinite(coords)):
            raise ValidationError("coordinates must be finite")
        _, first, counts = np.unique(coords, axis=0, return_index=True, return_counts=True)
        if np.any(counts > 1):
            dup = np.sort(first[counts > 1])[0]
            raise ValidationError(
                f"individual {dup} shares coordinates with another individual; "
                "coincident locations make the distance kernel singular")
        object.__setattr__(self, "coords", _frozen(coords))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    @property
    def x(self) -> np.ndarray:
        return self.coords[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.coords[:, 1]

    def subset(self, ids: Sequence[int]) -> "Population":
        return Population(self.coords[np.asarray(ids, dtype=int)])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x", "y"])
            for i, (x, y) in enumerate(self.coords):
                w.writerow([i, repr(float(x)), repr(float(y))])

    @classmethod
    def from_csv(cls, path) -> "Population":
        rows = _read_csv(path, ["id", "x", "y"])
        with parsing(path):
            ids = [int(r["id"]) for r in rows]
            if sorted(ids) != list(range(len(ids))):
                raise ValidationError(f"{path}: ids must be unique and contiguous from 0")
            coords = np.empty((len(ids), 2))
            for i, r in zip(ids, rows):
                coords[i] = float(r["x"]), float(r["y"])
        return cls(coords)


@dataclass(frozen=True)
class EpidemicRecord:
    """Observed event days per individual.

    ``infection_time[i]`` is the day ``i`` entered I (SIR) or E (SEIR);
    ``removal_time[i]`` the day it entered R. Absent events are ``None``.
    """

    infection_time: tuple
    removal_time: tuple
    t_max: int

    def __post_init__(self):
        inf = tuple(None if v is None else int(v) for v in self.infection_time)
        rem = tuple(None if v is None else int(v) for v in self.removal_time)
        if len(inf) != len(rem):
            raise ValidationError("infection_time and removal_time differ in length")
        t_max = int(self.t_max)
        if t_max < 0:
            raise ValidationError("t_max must be non-negative")
        for i, (a, b) in enumerate(zip(inf, rem)):
            if a is not None and not 0 <= a <= t_max:
                raise ValidationError(f"individual {i}: infection_time {a} outside [0, {t_max}]")
            if b is not None:
                if a is None:
                    raise ValidationError(f"individual {i}: removal_time without infection_time")
                if not b <= t_max:
                    raise ValidationError(f"individual {i}: removal_time {b} beyond t_max {t_max}")
                if not a < b:
                    raise ValidationError(
                        f"individual {i}: removal_time {b} not after infection_time {a}")
        object.__setattr__(self, "infection_time", inf)
        object.__setattr__(self, "removal_time", rem)
        object.__setattr__(self, "t_max", t_max)

    @property
    def n(self) -> int:
        return len(self.infection_time)

    @classmethod
    def from_arrays(cls, infection_time, removal_time, t_max) -> "EpidemicRecord":
        """Build from integer arrays where negative entries mean "absent"."""
        conv = lambda a: tuple(None if v < 0 else int(v) for v in np.asarray(a))
        return cls(conv(infection_time), conv(removal_time), t_max)

    def infection_array(self) -> np.ndarray:
        return np.array([NEVER if v is None else v for v in self.infection_time], dtype=np.int64)

    def removal_array(self) -> np.ndarray:
        return np.array([NEVER if v is None else v for v in self.removal_time], dtype=np.int64)

    def initial_ids(self) -> np.ndarray:
        """Individuals infected on the first observed infection day."""
        inf = self.infection_array()
        if not np.any(inf < NEVER):
            return np.array([], dtype=int)
        return np.flatnonzero(inf == inf.min())

    def first_day(self) -> int:
        inf = self.infection_array()
        return int(inf.min()) if np.any(inf < NEVER) else 0

    def truncate(self, t_end: int) -> "EpidemicRecord":
        """Record as it would have been observed up to day ``t_end``."""
        if t_end > self.t_max:
            raise ValidationError(f"cannot truncate to {t_end} > t_max {self.t_max}")
        inf = tuple(v if v is not None and v <= t_end else None for v in self.infection_time)
        rem = tuple(r if r is not None and r <= t_end and a is not None else None
                    for a, r in zip(inf, self.removal_time))
        return EpidemicRecord(inf, rem, t_end)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "infection_time", "removal_time"])
            for i, (a, b) in enumerate(zip(self.infection_time, self.removal_time)):
                w.writerow([i, "" if a is None else a, "" if b is None else b])

    @classmethod
    def from_csv(cls, path, t_max: int) -> "EpidemicRecord":
        rows = _read_csv(path, ["id", "infection_time", "removal_time"])
        n = len(rows)
        inf: list = [None] * n
        rem: list = [None] * n
        seen = set()
        with parsing(path):
            for r in rows:
                i = int(r["id"])
                if not 0 <= i < n or i in seen:
                    raise ValidationError(f"{path}: ids must be unique and contiguous from 0")
                seen.add(i)
                inf[i] = int(r["infection_time"]) if r["infection_time"].strip() else None
                rem[i] = int(r["removal_time"]) if r["removal_time"].strip() else None
        return cls(tuple(inf), tuple(rem), t_max)


@dataclass(frozen=True)
class CompartmentTimeline:
    """Per-individual state intervals over days 0..t_max.

    Individual ``i`` is susceptible before ``s_exit[i]``, exposed on
    ``[s_exit[i], i_start[i])``, infectious on ``[i_start[i], r_start[i])``
    and removed from ``r_start[i]`` on. ``NEVER`` marks transitions that do
    not happen within the record.
    """

    s_exit: np.ndarray
    i_start: np.ndarray
    r_start: np.ndarray
    t_max: int
    frame: str = SIR

    def __post_init__(self):
        for name in ("s_exit", "i_start", "r_start"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.int64)))

    @property
    def n(self) -> int:
        return self.s_exit.shape[0]

    def susceptible_mask(self, t: int) -> np.ndarray:
        return self.s_exit > t

    def exposed_mask(self, t: int) -> np.ndarray:
        return (self.s_exit <= t) & (self.i_start > t) & (self.r_start > t)

    def infectious_mask(self, t: int) -> np.ndarray:
        return (self.i_start <= t) & (self.r_start > t)

    def removed_mask(self, t: int) -> np.ndarray:
        return self.r_start <= t

    def S(self, t: int) -> frozenset:
        return frozenset(np.flatnonzero(self.susceptible_mask(t)).tolist())

    def E(self, t: int) -> frozenset:
        return frozenset(np.flatnonzero(self.exposed_mask(t)).tolist())

    def I(self, t: int) -> frozenset:  # noqa: E743
        return frozenset(np.flatnonzero(self.infectious_mask(t)).tolist())

    def R(self, t: int) -> frozenset:
        return frozenset(np.flatnonzero(self.removed_mask(t)).tolist())

    def infectious_matrix(self) -> np.ndarray:
        """Boolean (t_max + 1, N) matrix; row t is the indicator of I(t)."""
        t = np.arange(self.t_max + 1)[:, None]
        return (self.i_start[None, :] <= t) & (self.r_start[None, :] > t)


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    beta: float
    epsilon: Optional[float] = None
    beta_tilde: Optional[float] = None
    delta: Optional[float] = None

    # Not validated on construction: priors must be able to score points
    # outside the support. Likelihood code calls ``check``.

    def support_violation(self) -> Optional[str]:
        for name in ("alpha", "beta", "epsilon", "beta_tilde"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                return f"{name} must be positive, got {v}"
        if self.delta is not None and not np.isfinite(self.delta):
            return f"delta must be finite, got {self.delta}"
        return None

    def in_support(self) -> bool:
        return self.support_violation() is None

    def check(self) -> "ModelParams":
        msg = self.support_violation()
        if msg is not None:
            raise ValidationError(msg)
        return self

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("alpha", "beta", "epsilon", "beta_tilde", "delta")
                if getattr(self, k) is not None}


def build_timeline(record: EpidemicRecord, frame: str = SIR,
                   latent_period: Optional[int] = None,
                   infectious_period: Optional[int] = None) -> CompartmentTimeline:
    """Derive compartment membership intervals from an event record.

    For SIR, ``infection_time`` is the I-entry day and the recorded removal
    day is the R-entry day; when removal is missing and ``infectious_period``
    is given, R-entry is I-entry + period (it may fall beyond ``t_max``).
    For SEIR, ``infection_time`` is the exposure day, I-entry is
    exposure + ``latent_period`` and R-entry is the earlier of
    I-entry + ``infectious_period`` and the recorded removal day.
    """
    if frame not in FRAMES:
        raise ValidationError(f"unknown compartment frame {frame!r}")
    inf = record.infection_array()
    rem = record.removal_array()
    infected = inf < NEVER
    if frame == SIR:
        i_start = inf.copy()
        r_start = rem.copy()
        if infectious_period is not None:
            if infectious_period < 1:
                raise ValidationError("infectious_period must be >= 1")
            missing = infected & (rem == NEVER)
            r_start[missing] = inf[missing] + infectious_period
    else:
        if latent_period is None or latent_period < 0:
            raise ValidationError("SEIR timeline needs latent_period >= 0")
        i_start = np.where(infected, inf + latent_period, NEVER)
        r_start = rem.copy()
        if infectious_period is not None:
            if infectious_period < 1:
                raise ValidationError("infectious_period must be >= 1")
            r_start = np.where(infected, np.minimum(i_start + infectious_period, rem), NEVER)
        # Removal (e.g. culling) before the end of the latent period skips I.
        i_start = np.where(r_start <= i_start, NEVER, i_start)
    for i in np.flatnonzero(infected & (r_start <= inf)):
        raise ValidationError(f"individual {i}: removal not after infection")
    return CompartmentTimeline(inf, i_start, r_start, record.t_max, frame)


def incidence_curve(timeline: CompartmentTimeline) -> np.ndarray:
    """Daily counts of individuals newly entering I.

    Entry ``k`` is ``|I(k+1) minus I(k)|`` for k = 0..t_max-1, so the curve
    covers I-entries on days 1..t_max and excludes day-0 initial infectives.
    """
    days = timeline.i_start[(timeline.i_start >= 1) & (timeline.i_start <= timeline.t_max)]
    return np.bincount(days - 1, minlength=timeline.t_max).astype(np.int64)[: timeline.t_max]


def pairwise_distances(pop: Population) -> np.ndarray:
    """Euclidean distance matrix of a population (read-only)."""
    if pop.n == 1:
        return _frozen(np.zeros((1, 1)))
    d = squareform(pdist(pop.coords))
    if np.any(d[~np.eye(pop.n, dtype=bool)] <= 0):
        raise ValidationError("coincident coordinates give a zero distance")
    return _frozen(d)


@contextmanager
def parsing(path):
    """Re-raise malformed field values as a ValidationError naming the file."""
    try:
        yield
    except ValidationError:
        raise
    except (ValueError, TypeError) as e:
        raise ValidationError(f"{path}: malformed value ({e})") from None


def _read_csv(path, required: list) -> list:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        return list(reader)
