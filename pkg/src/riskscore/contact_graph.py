"""Room-level temporal contact graph.

People sharing a room at an epoch are all pairwise in contact. Snapshots are
stored sparsely: only rooms that hold at least one person appear.
"""
from __future__ import annotations

import gzip
import io
import math
import os
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, TextIO

import numpy as np

from .errors import (
    ConsistencyError,
    DatasetParseError,
    EpochRangeError,
    InvalidSpecError,
    UnknownPersonError,
)

DEFAULT_DELTA_T = 20


@dataclass(frozen=True)
class ContactRecord:
    epoch: int
    person: str
    room: str


@dataclass(frozen=True)
class DatasetFormat:
    """How to split a dataset line and interpret its first column.

    ``delimiter`` is ``"comma"`` or ``"whitespace"``. With ``time_unit="seconds"``
    the first column is a wall-clock time in seconds, converted to a 0-based
    epoch index by flooring ``t / delta_t`` and subtracting the earliest epoch.
    """

    delimiter: str = "comma"
    time_unit: str = "epoch"
    delta_t: int = DEFAULT_DELTA_T

    def __post_init__(self):
        if self.delimiter not in ("comma", "whitespace"):
            raise InvalidSpecError(f"unknown delimiter {self.delimiter!r}")
        if self.time_unit not in ("epoch", "seconds"):
            raise InvalidSpecError(f"unknown time unit {self.time_unit!r}")
        if self.delta_t <= 0:
            raise InvalidSpecError("delta_t must be positive")

    def split(self, line: str) -> list[str]:
        if self.delimiter == "comma":
            return [c.strip() for c in line.split(",")]
        return line.split()


class TemporalGraph:
    """Immutable epoch -> room -> persons mapping."""

    def __init__(
        self,
        snapshots: Mapping[int, Mapping[str, Iterable[str]]],
        persons: Iterable[str] = (),
        rooms: Iterable[str] = (),
        delta_t_seconds: int = DEFAULT_DELTA_T,
    ):
        if delta_t_seconds <= 0:
            raise InvalidSpecError("delta_t_seconds must be positive")
        snaps: dict[int, dict[str, frozenset[str]]] = {}
        where: dict[int, dict[str, str]] = {}
        all_persons = set(persons)
        all_rooms = set(rooms)
        for epoch in sorted(snapshots):
            if epoch < 0:
                raise ConsistencyError(f"negative epoch {epoch}")
            occupied = {}
            loc: dict[str, str] = {}
            for room, members in snapshots[epoch].items():
                members = frozenset(members)
                if not members:
                    continue
                for p in members:
                    if p in loc:
                        raise ConsistencyError(
                            f"person {p!r} in rooms {loc[p]!r} and {room!r} at epoch {epoch}"
                        )
                    loc[p] = room
                occupied[room] = members
                all_rooms.add(room)
                all_persons.update(members)
            if occupied:
                snaps[epoch] = occupied
                where[epoch] = loc
        self._snapshots = snaps
        self._where = where
        self.persons = frozenset(all_persons)
        self.rooms = frozenset(all_rooms)
        self.delta_t_seconds = int(delta_t_seconds)
        self._person_order = tuple(sorted(self.persons))
        self._person_index = {p: k for k, p in enumerate(self._person_order)}
        self._groups: dict[int, list[np.ndarray]] = {}

    @property
    def snapshots(self) -> Mapping[int, Mapping[str, frozenset[str]]]:
        return self._snapshots

    @property
    def n_epochs(self) -> int:
        """One past the largest occupied epoch (0 for an empty graph)."""
        return max(self._snapshots) + 1 if self._snapshots else 0

    @property
    def person_order(self) -> tuple[str, ...]:
        """Canonical (sorted) person order used for array layouts and RNG draws."""
        return self._person_order

    def person_index(self, person: str) -> int:
        try:
            return self._person_index[person]
        except KeyError:
            raise UnknownPersonError(person) from None

    def room_of(self, person: str, epoch: int) -> str | None:
        return self._where.get(epoch, {}).get(person)

    def occupied_rooms(self, epoch: int) -> Mapping[str, frozenset[str]]:
        return self._snapshots.get(epoch, {})

    def groups(self, epoch: int) -> list[np.ndarray]:
        """Person-index arrays, one per occupied room, rooms sorted by id and
        members ascending. This is the draw order of all per-contact sampling."""
        cached = self._groups.get(epoch)
        if cached is None:
            rooms = self._snapshots.get(epoch, {})
            cached = [
                np.array(sorted(self._person_index[p] for p in rooms[room]), dtype=np.int64)
                for room in sorted(rooms)
            ]
            self._groups[epoch] = cached
        return cached

    def records(self) -> list[ContactRecord]:
        """All records, sorted by (epoch, room, person)."""
        out = []
        for epoch in sorted(self._snapshots):
            rooms = self._snapshots[epoch]
            for room in sorted(rooms):
                out.extend(ContactRecord(epoch, p, room) for p in sorted(rooms[room]))
        return out

    def __eq__(self, other):
        if not isinstance(other, TemporalGraph):
            return NotImplemented
        return (
            self._snapshots == other._snapshots
            and self.persons == other.persons
            and self.rooms == other.rooms
            and self.delta_t_seconds == other.delta_t_seconds
        )

    def __repr__(self):
        return (
            f"TemporalGraph(persons={len(self.persons)}, rooms={len(self.rooms)}, "
            f"epochs={self.n_epochs}, delta_t={self.delta_t_seconds})"
        )


def from_records(records: Iterable[ContactRecord], delta_t_seconds: int = DEFAULT_DELTA_T) -> TemporalGraph:
    snaps: dict[int, dict[str, set[str]]] = {}
    seen: dict[tuple[int, str], str] = {}
    for rec in records:
        key = (rec.epoch, rec.person)
        prev = seen.get(key)
        if prev is not None and prev != rec.room:
            raise ConsistencyError(
                f"person {rec.person!r} in rooms {prev!r} and {rec.room!r} at epoch {rec.epoch}"
            )
        seen[key] = rec.room
        snaps.setdefault(rec.epoch, {}).setdefault(rec.room, set()).add(rec.person)
    return TemporalGraph(snaps, delta_t_seconds=delta_t_seconds)


_INT_RE = re.compile(r"^[+]?\d+$")


def ingest_dataset(source: TextIO | Iterable[str], fmt: DatasetFormat | None = None) -> TemporalGraph:
    """Parse ``epoch person room`` lines into a graph.

    Blank lines and lines starting with ``#`` are skipped. Repeating the same
    (epoch, person, room) triple is harmless; a second room for the same
    (epoch, person) raises ConsistencyError.
    """
    fmt = fmt or DatasetFormat()
    raw: list[tuple[int, str, str, int, str]] = []
    for lineno, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cols = fmt.split(stripped)
        if len(cols) != 3 or not all(cols):
            raise DatasetParseError(lineno, line.rstrip("\n"), "expected 3 columns")
        t, person, room = cols
        if fmt.time_unit == "epoch":
            if not _INT_RE.match(t):
                raise DatasetParseError(lineno, line.rstrip("\n"), "epoch is not a non-negative integer")
            tick = int(t)
        else:
            try:
                seconds = float(t)
            except ValueError:
                raise DatasetParseError(lineno, line.rstrip("\n"), "time is not a number") from None
            if not math.isfinite(seconds):
                raise DatasetParseError(lineno, line.rstrip("\n"), "time is not finite")
            tick = math.floor(seconds / fmt.delta_t)
        raw.append((tick, person, room, lineno, line.rstrip("\n")))

    offset = min((r[0] for r in raw), default=0) if fmt.time_unit == "seconds" else 0
    snaps: dict[int, dict[str, set[str]]] = {}
    seen: dict[tuple[int, str], tuple[str, int]] = {}
    for tick, person, room, lineno, _ in raw:
        epoch = tick - offset
        key = (epoch, person)
        prev = seen.get(key)
        if prev is not None and prev[0] != room:
            raise ConsistencyError(
                f"line {lineno}: person {person!r} in room {room!r} at epoch {epoch}, "
                f"already in room {prev[0]!r} (line {prev[1]})"
            )
        seen[key] = (room, lineno)
        snaps.setdefault(epoch, {}).setdefault(room, set()).add(person)
    return TemporalGraph(snaps, delta_t_seconds=fmt.delta_t)


def open_text(path: str | os.PathLike) -> TextIO:
    """Open a dataset file as text, transparently handling gzip."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def load_dataset(path: str | os.PathLike, fmt: DatasetFormat | None = None) -> TemporalGraph:
    with open_text(path) as fh:
        return ingest_dataset(fh, fmt)


def serialize(graph: TemporalGraph, delimiter: str = "comma") -> str:
    """Canonical text form, sorted by (epoch, room, person)."""
    sep = "," if delimiter == "comma" else " "
    lines = [f"# delta_t={graph.delta_t_seconds}"]
    lines.extend(f"{r.epoch}{sep}{r.person}{sep}{r.room}" for r in graph.records())
    return "\n".join(lines) + "\n"


def neighborhood(graph: TemporalGraph, person: str, epoch: int) -> frozenset[str]:
    """Everyone sharing ``person``'s room at ``epoch``, excluding ``person``."""
    if person not in graph.persons:
        raise UnknownPersonError(person)
    if epoch < 0 or epoch >= max(graph.n_epochs, 1):
        raise EpochRangeError(f"epoch {epoch} outside [0, {graph.n_epochs})")
    room = graph.room_of(person, epoch)
    if room is None:
        return frozenset()
    return graph.occupied_rooms(epoch)[room] - {person}


@dataclass
class OccupancyStats:
    rooms: tuple[str, ...]
    people_per_room_per_epoch: np.ndarray  # (epochs, rooms)
    people_per_epoch: np.ndarray
    rooms_occupied_per_epoch: np.ndarray
    mean_density_per_epoch: np.ndarray  # 0 where no room is occupied
    room_occupancy_counts: np.ndarray
    total_rooms: int = 0

    @property
    def n_persons_max(self) -> int:
        return int(self.people_per_epoch.max(initial=0))

    @property
    def max_mean_density(self) -> float:
        return float(self.mean_density_per_epoch.max(initial=0.0))

    @property
    def max_occupied_fraction(self) -> float:
        if not self.total_rooms:
            return 0.0
        return float(self.rooms_occupied_per_epoch.max(initial=0)) / self.total_rooms


def occupancy_stats(graph: TemporalGraph, total_rooms: int | None = None) -> OccupancyStats:
    """Per-epoch occupancy series.

    ``total_rooms`` lets the caller count rooms that never appear in the data
    when computing the occupied fraction.
    """
    rooms = tuple(sorted(graph.rooms))
    col = {r: k for k, r in enumerate(rooms)}
    counts = np.zeros((graph.n_epochs, len(rooms)), dtype=np.int64)
    for epoch, occupied in graph.snapshots.items():
        for room, members in occupied.items():
            counts[epoch, col[room]] = len(members)
    people = counts.sum(axis=1)
    occupied = (counts > 0).sum(axis=1)
    density = np.divide(
        people, occupied, out=np.zeros(len(people), dtype=float), where=occupied > 0
    )
    if total_rooms is None:
        total_rooms = len(rooms)
    elif total_rooms < len(rooms):
        raise InvalidSpecError(f"total_rooms={total_rooms} below the {len(rooms)} rooms seen")
    return OccupancyStats(
        rooms=rooms,
        people_per_room_per_epoch=counts,
        people_per_epoch=people,
        rooms_occupied_per_epoch=occupied,
        mean_density_per_epoch=density,
        room_occupancy_counts=(counts > 0).sum(axis=0),
        total_rooms=total_rooms,
    )


@dataclass(frozen=True)
class SyntheticSpec:
    """Random-room mobility: every ``dwell`` epochs each person independently
    moves to a uniformly chosen room."""

    persons: int
    rooms: int
    epochs: int
    dwell: int = 10
    delta_t: int = DEFAULT_DELTA_T

    def validate(self):
        if self.persons < 0 or self.rooms < 0 or self.epochs < 0:
            raise InvalidSpecError("counts must be non-negative")
        if self.persons > 0 and self.rooms == 0:
            raise InvalidSpecError("persons need at least one room")
        if self.dwell < 1:
            raise InvalidSpecError("dwell must be >= 1")
        if self.delta_t <= 0:
            raise InvalidSpecError("delta_t must be positive")


def _ids(prefix: str, n: int) -> list[str]:
    width = len(str(max(n - 1, 0)))
    return [f"{prefix}{k:0{width}d}" for k in range(n)]


def generate_synthetic(spec: SyntheticSpec, seed: int) -> TemporalGraph:
    spec.validate()
    rng = np.random.default_rng(seed)
    persons = _ids("p", spec.persons)
    rooms = _ids("room", spec.rooms)
    snaps: dict[int, dict[str, set[str]]] = {}
    choice = np.zeros(spec.persons, dtype=np.int64)
    for epoch in range(spec.epochs):
        if epoch % spec.dwell == 0 and spec.persons:
            choice = rng.integers(0, spec.rooms, size=spec.persons)
        occupied: dict[str, set[str]] = {}
        for k, p in enumerate(persons):
            occupied.setdefault(rooms[choice[k]], set()).add(p)
        snaps[epoch] = occupied
    return TemporalGraph(snaps, persons=persons, rooms=rooms, delta_t_seconds=spec.delta_t)
