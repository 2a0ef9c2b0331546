"""Per-epoch evaluation metrics and Monte-Carlo aggregation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParameterError, ShapeError, UndefinedRegionError

DEFAULT_THRESHOLD = 1.5


def _score(x) -> float:
    return float(getattr(x, "r", x))


def _is_infected(c) -> bool:
    return getattr(c, "value", c) in ("I", True)


@dataclass
class MetricsFrame:
    epoch: int
    infected_fraction: float
    median_r_infected: float | None
    median_r_susceptible: float | None
    median_ratio: float
    alerted_fraction: float
    n_infected: float = 0
    n_susceptible: float = 0
    region_scores: dict[str, float] = field(default_factory=dict)


def ratio_of_medians(infected_scores: np.ndarray, susceptible_scores: np.ndarray) -> tuple[float | None, float | None, float]:
    """(median infected, median susceptible, ratio) with the edge-case rules:
    no infected -> ratio 0; zero susceptible median -> ratio inf."""
    med_i = float(np.median(infected_scores)) if len(infected_scores) else None
    med_s = float(np.median(susceptible_scores)) if len(susceptible_scores) else None
    if med_i is None:
        return None, med_s, 0.0
    if med_s is None or med_s == 0.0:
        return med_i, med_s, math.inf if med_i > 0 else 0.0
    return med_i, med_s, med_i / med_s


def median_ratio(risk_states: Mapping, compartments: Mapping) -> float:
    """Median infected score over median susceptible score.

    Returns 0 with no infected people and ``math.inf`` when the susceptible
    median is 0 (or there are no susceptible people) but the infected one is not.
    """
    inf = [_score(risk_states[p]) for p, c in compartments.items() if _is_infected(c)]
    sus = [_score(risk_states[p]) for p, c in compartments.items() if not _is_infected(c)]
    return ratio_of_medians(np.array(inf), np.array(sus))[2]


def alerted_fraction(risk_states: Mapping, threshold: float = DEFAULT_THRESHOLD) -> float:
    if not threshold > 0:
        raise ParameterError("alert threshold must be positive")
    if not risk_states:
        return 0.0
    return sum(_score(s) > threshold for s in risk_states.values()) / len(risk_states)


def region_score(risk_states: Mapping, members: Iterable[str]) -> float:
    members = list(members)
    if not members:
        raise UndefinedRegionError("region has no members")
    return math.fsum(_score(risk_states[p]) for p in members) / len(members)


def frame_from_arrays(
    epoch: int,
    r: np.ndarray,
    infected: np.ndarray,
    threshold: float,
    regions: Sequence[tuple[str, np.ndarray]] = (),
) -> MetricsFrame:
    n = len(r)
    n_inf = int(infected.sum())
    med_i, med_s, ratio = ratio_of_medians(r[infected], r[~infected])
    return MetricsFrame(
        epoch=epoch,
        infected_fraction=n_inf / n if n else 0.0,
        median_r_infected=med_i,
        median_r_susceptible=med_s,
        median_ratio=ratio,
        alerted_fraction=float((r > threshold).sum()) / n if n else 0.0,
        n_infected=n_inf,
        n_susceptible=n - n_inf,
        region_scores={name: math.fsum(r[idx]) / len(idx) for name, idx in regions},
    )


def _mean(values: Sequence[float]) -> float:
    # shifted mean: exact when all values are equal
    ref = values[0]
    return ref + math.fsum(v - ref for v in values) / len(values)


@dataclass
class RunSummary:
    frames: list[MetricsFrame]
    runs: int
    seed: int | None = None
    ratio_excluded: list[int] = field(default_factory=list)


def aggregate_runs(series: Sequence[Sequence[MetricsFrame]], seed: int | None = None) -> RunSummary:
    """Element-wise mean over runs. Infinite ratios are left out of the mean
    and counted in ``ratio_excluded``; absent medians are averaged over the
    runs that have them."""
    if not series:
        raise ShapeError("no runs to aggregate")
    length = len(series[0])
    if any(len(s) != length for s in series):
        raise ShapeError(f"runs have different lengths: {sorted({len(s) for s in series})}")
    frames, excluded = [], []
    for k in range(length):
        col = [s[k] for s in series]
        epochs = {f.epoch for f in col}
        if len(epochs) != 1:
            raise ShapeError(f"epoch mismatch at position {k}: {sorted(epochs)}")

        def opt_mean(values):
            present = [v for v in values if v is not None]
            return _mean(present) if present else None

        finite = [f.median_ratio for f in col if not math.isinf(f.median_ratio)]
        excluded.append(len(col) - len(finite))
        keys = sorted(set().union(*(f.region_scores for f in col)))
        regions = {}
        for key in keys:
            regions[key] = _mean([f.region_scores[key] for f in col if key in f.region_scores])
        frames.append(
            MetricsFrame(
                epoch=col[0].epoch,
                infected_fraction=_mean([f.infected_fraction for f in col]),
                median_r_infected=opt_mean([f.median_r_infected for f in col]),
                median_r_susceptible=opt_mean([f.median_r_susceptible for f in col]),
                median_ratio=_mean(finite) if finite else math.inf,
                alerted_fraction=_mean([f.alerted_fraction for f in col]),
                n_infected=_mean([f.n_infected for f in col]),
                n_susceptible=_mean([f.n_susceptible for f in col]),
                region_scores=regions,
            )
        )
    return RunSummary(frames=frames, runs=len(series), seed=seed, ratio_excluded=excluded)


FRAME_COLUMNS = (
    "epoch",
    "infected_fraction",
    "n_infected",
    "n_susceptible",
    "median_r_infected",
    "median_r_susceptible",
    "median_ratio",
    "alerted_fraction",
)


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def frames_csv(frames: Sequence[MetricsFrame], ratio_excluded: Sequence[int] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(FRAME_COLUMNS)
    if ratio_excluded is not None:
        header.append("ratio_excluded")
    w.writerow(header)
    for k, f in enumerate(frames):
        row = [fmt(getattr(f, c)) for c in FRAME_COLUMNS]
        if ratio_excluded is not None:
            row.append(str(ratio_excluded[k]))
        w.writerow(row)
    return buf.getvalue()


def regions_csv(frames: Sequence[MetricsFrame]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "region", "score"])
    for f in frames:
        for region in sorted(f.region_scores):
            w.writerow([f.epoch, region, fmt(f.region_scores[region])])
    return buf.getvalue()


def read_frames_csv(text: str) -> list[MetricsFrame]:
    """Parse the output of :func:`frames_csv` (region scores are not included)."""

    def num(s):
        return None if s == "" else float(s)

    frames = []
    for row in csv.DictReader(io.StringIO(text)):
        frames.append(
            MetricsFrame(
                epoch=int(row["epoch"]),
                infected_fraction=float(row["infected_fraction"]),
                median_r_infected=num(row["median_r_infected"]),
                median_r_susceptible=num(row["median_r_susceptible"]),
                median_ratio=float(row["median_ratio"]),
                alerted_fraction=float(row["alerted_fraction"]),
                n_infected=float(row["n_infected"]),
                n_susceptible=float(row["n_susceptible"]),
            )
        )
    return frames
