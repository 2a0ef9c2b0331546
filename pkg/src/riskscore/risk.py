"""Infection risk score recursion.

A person's new score is

    r_new = (v * r_prev + sum_j w_j * (E_j + r_j_prev)) / (1 + sum_j w_j)

where the sum runs over everyone sharing the person's room this epoch and
every ``r_j_prev`` is the neighbour's score from the previous epoch. All
updates in an epoch read the same previous-epoch snapshot, so the order in
which people are processed never matters.

Random draws within an epoch follow a fixed layout so any implementation can
reproduce them from the same generator:

1. exposures, one per ordered contact pair, ordered by (room id, receiver,
   source) with persons in canonical sorted order;
2. neighbour weights (sampled modes only), one per present person, ordered by
   (room id, person).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ble import rssi_to_weight_array
from .contact_graph import TemporalGraph
from .errors import ParameterError, StateError, UnboundedDecayError

INITIAL_RISK = 1.0
INFECTED_RISK = 2.0


@dataclass(frozen=True)
class RiskState:
    r: float = INITIAL_RISK
    v: float = 1.0
    officially_infected: bool = False


@dataclass(frozen=True)
class NeighborContribution:
    w: float
    exposure: float
    r_prev: float
    neighbor: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ParameterError(f"neighbour weight {self.w} outside [0, 1]")
        if not self.exposure >= 0.0:
            raise ParameterError(f"negative exposure {self.exposure}")
        if not self.r_prev >= 0.0:
            raise ParameterError(f"negative neighbour score {self.r_prev}")


EXPOSURE_MODES = ("sampled-normal", "rssi-mapped", "constant")
WEIGHT_MODES = ("constant", "sampled-normal", "rssi-mapped")


@dataclass(frozen=True)
class ExposureModel:
    """Per-contact exposure E.

    ``constant``: E = delta_t * pathogen_rate for every contact.
    ``sampled-normal``: E = max(0, Normal(mu, sigma)) drawn per contact.
    ``rssi-mapped``: an RSSI reading is bucketed into an exposure level; in
    simulations the reading is drawn from Normal(mu, sigma) dBm.
    """

    mode: str = "sampled-normal"
    mu: float = 0.5
    sigma: float = 0.1
    delta_t: float = 20.0
    pathogen_rate: float = 0.0

    def __post_init__(self):
        if self.mode not in EXPOSURE_MODES:
            raise ParameterError(f"unknown exposure mode {self.mode!r}")
        if self.sigma < 0 or self.delta_t <= 0 or self.pathogen_rate < 0:
            raise ParameterError("sigma, delta_t and pathogen_rate must be non-negative")

    @property
    def draws(self) -> bool:
        return self.mode != "constant"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.mode == "constant":
            return np.full(size, self.delta_t * self.pathogen_rate)
        x = rng.normal(self.mu, self.sigma, size=size)
        if self.mode == "rssi-mapped":
            return rssi_to_weight_array(x)
        return np.maximum(x, 0.0)


@dataclass(frozen=True)
class WeightModel:
    """Neighbour weight w, one value per present person per epoch."""

    mode: str = "constant"
    value: float = 1.0
    mu: float = 0.5
    sigma: float = 0.1

    def __post_init__(self):
        if self.mode not in WEIGHT_MODES:
            raise ParameterError(f"unknown weight mode {self.mode!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ParameterError(f"weight {self.value} outside [0, 1]")

    @property
    def draws(self) -> bool:
        return self.mode != "constant"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.mode == "constant":
            return np.full(size, self.value)
        x = rng.normal(self.mu, self.sigma, size=size)
        if self.mode == "rssi-mapped":
            return rssi_to_weight_array(x)
        return np.clip(x, 0.0, 1.0)


def neighbor_exposure(model: ExposureModel, rng: np.random.Generator | None = None, rssi: float | None = None) -> float:
    """A single exposure value. ``rssi`` overrides sampling in rssi-mapped mode."""
    if model.mode == "constant":
        return model.delta_t * model.pathogen_rate
    if model.mode == "rssi-mapped" and rssi is not None:
        return float(rssi_to_weight_array(np.array([rssi]))[0])
    if rng is None:
        raise ParameterError(f"{model.mode} exposure needs a random generator")
    return float(model.sample(rng, 1)[0])


def _canonical(c: NeighborContribution):
    return (c.neighbor is None, c.neighbor or "", c.w, c.exposure, c.r_prev)


def update_risk(prev: RiskState, contributions: Iterable[NeighborContribution]) -> float:
    """One application of the risk recursion for a single person.

    Terms are summed in ascending neighbour order so any permutation of
    ``contributions`` gives a bit-identical result.
    """
    num = 0.0
    den = 0.0
    for c in sorted(contributions, key=_canonical):
        num += c.w * (c.exposure + c.r_prev)
        den += c.w
    return (prev.v * prev.r + num) / (1.0 + den)


def flatten_groups(groups: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated members and per-room sizes."""
    if not groups:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(groups), np.fromiter((len(g) for g in groups), dtype=np.int64, count=len(groups))


def contact_pairs(groups: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """(receiver, source) index arrays for every ordered contact pair, in draw order."""
    flat, sizes = flatten_groups(groups)
    starts = np.cumsum(sizes) - sizes
    size_of = np.repeat(sizes, sizes)
    start_of = np.repeat(starts, sizes)
    own = np.arange(len(flat)) - start_of
    counts = size_of - 1
    recv_pos = np.repeat(np.arange(len(flat)), counts)
    k = np.arange(int(counts.sum())) - np.repeat(np.cumsum(counts) - counts, counts)
    src_local = k + (k >= own[recv_pos])
    return flat[recv_pos], flat[start_of[recv_pos] + src_local]


def risk_step(
    groups: Sequence[np.ndarray],
    r_prev: np.ndarray,
    v: np.ndarray,
    infected: np.ndarray,
    exposure_model: ExposureModel,
    weight_model: WeightModel,
    rng: np.random.Generator,
    pin_infected: bool = True,
) -> np.ndarray:
    """Array form of one synchronous epoch update over the whole population.

    ``groups`` are the per-room person-index arrays from
    :meth:`TemporalGraph.groups`. People not in any group just decay (v * r).
    """
    n = len(r_prev)
    recv, src = contact_pairs(groups)
    exposure = exposure_model.sample(rng, len(recv)) if exposure_model.draws else None
    w = np.zeros(n)
    if groups:
        present = np.concatenate(groups)
        w[present] = weight_model.sample(rng, len(present))
    if exposure is None:
        exposure = np.full(len(recv), exposure_model.delta_t * exposure_model.pathogen_rate)
    ws = w[src]
    num = np.bincount(recv, weights=ws * (exposure + r_prev[src]), minlength=n)
    den = np.bincount(recv, weights=ws, minlength=n)
    new = (v * r_prev + num) / (1.0 + den)
    if pin_infected:
        new = np.where(infected, np.maximum(new, INFECTED_RISK), new)
    return new


def step_population(
    graph: TemporalGraph,
    states: Mapping[str, RiskState],
    epoch: int,
    exposure_model: ExposureModel,
    weight_model: WeightModel,
    rng: np.random.Generator,
    pin_infected: bool = True,
) -> dict[str, RiskState]:
    """Advance every person's score by one epoch.

    People in ``states`` who are absent at ``epoch`` (or unknown to the graph)
    get the no-neighbour update.
    """
    order = graph.person_order
    present = graph.occupied_rooms(epoch)
    for members in present.values():
        for p in members:
            if p not in states:
                raise StateError(p)
    n = len(order)
    r = np.ones(n)
    v = np.ones(n)
    flag = np.zeros(n, dtype=bool)
    for k, p in enumerate(order):
        s = states.get(p)
        if s is not None:
            r[k], v[k], flag[k] = s.r, s.v, s.officially_infected
    new = risk_step(graph.groups(epoch), r, v, flag, exposure_model, weight_model, rng, pin_infected)

    out = {}
    for p, s in states.items():
        if p in graph.persons:
            nr = float(new[graph.person_index(p)])
        else:
            nr = s.v * s.r
            if pin_infected and s.officially_infected:
                nr = max(nr, INFECTED_RISK)
        out[p] = replace(s, r=nr)
    return out


def states_csv(epoch: int, states: Mapping[str, RiskState], compartments: Mapping[str, str] | None = None) -> str:
    """Dump one epoch of states as ``epoch,person,r,v,compartment`` rows.

    Without ``compartments`` the infected flag stands in for the compartment.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "person", "r", "v", "compartment"])
    for p in sorted(states):
        s = states[p]
        if compartments is None:
            comp = "I" if s.officially_infected else "S"
        else:
            comp = getattr(compartments[p], "value", compartments[p])
        w.writerow([epoch, p, _num(s.r), _num(s.v), comp])
    return buf.getvalue()


def _num(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def sample_vulnerability(rng: np.random.Generator, size: int, mu: float = 0.5, sigma: float = 0.2) -> np.ndarray:
    """Per-person vulnerability from Normal(mu, sigma) clipped to [0, 1]."""
    return np.clip(rng.normal(mu, sigma, size=size), 0.0, 1.0)


def initial_states(persons: Iterable[str], vulnerability: Mapping[str, float] | float = 1.0) -> dict[str, RiskState]:
    if isinstance(vulnerability, Mapping):
        return {p: RiskState(INITIAL_RISK, float(vulnerability[p])) for p in persons}
    return {p: RiskState(INITIAL_RISK, float(vulnerability)) for p in persons}


def isolation_time_to_floor(r: float, v: float, floor: float) -> int:
    """Epochs of isolation (no contacts) until the score is at or below ``floor``.

    Isolation multiplies the score by ``v`` each epoch; the count is obtained
    by applying that multiplication step by step, exactly as a simulation does.
    """
    if floor <= 0:
        raise ParameterError("floor must be positive")
    if not 0.0 <= v <= 1.0:
        raise ParameterError(f"vulnerability {v} outside [0, 1]")
    if r <= floor:
        return 0
    if v == 0.0:
        return 1
    if v == 1.0:
        raise UnboundedDecayError("score never decays with v = 1")
    # jump close to the answer, then settle it with exact repeated products
    k = max(0, math.floor(math.log(floor / r) / math.log(v)) - 2)
    x = r
    for _ in range(k):
        x *= v
    while x > floor:
        x *= v
        k += 1
    return k
