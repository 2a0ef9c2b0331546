"""SI/SIS dynamics on the contact graph, plus the mean-field ODE.

Stochastic step, per epoch and from the epoch-start compartments:

* a susceptible person with k infected room-mates becomes infected with
  probability 1 - (1 - beta)**k;
* an infected person recovers with probability gamma (gamma = 0 is SI).

Draw layout per epoch: n uniforms for infection, then n uniforms for
recovery, both in canonical person order and drawn whether or not they are
used, so the random stream never depends on the epidemic state.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .contact_graph import TemporalGraph
from .errors import ParameterError, StateError
from .risk import INFECTED_RISK, RiskState, flatten_groups


class Compartment(str, enum.Enum):
    SUSCEPTIBLE = "S"
    INFECTED = "I"


SUSCEPTIBLE = Compartment.SUSCEPTIBLE
INFECTED = Compartment.INFECTED


@dataclass(frozen=True)
class EpidemicParams:
    beta: float
    gamma: float = 0.0
    i0: float = 0.0
    model: str | None = None

    def __post_init__(self):
        for name in ("beta", "gamma", "i0"):
            x = getattr(self, name)
            if not 0.0 <= x <= 1.0:
                raise ParameterError(f"{name}={x} outside [0, 1]")
        expected = "SI" if self.gamma == 0.0 else "SIS"
        if self.model is None:
            object.__setattr__(self, "model", expected)
        elif self.model != expected:
            raise ParameterError(f"model {self.model!r} inconsistent with gamma={self.gamma}")


def seed_count(n: int, i0: float) -> int:
    """round(i0 * n), halves rounded away from zero."""
    return int(math.floor(i0 * n + 0.5))


def seed_infected(n: int, i0: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= i0 <= 1.0:
        raise ParameterError(f"i0={i0} outside [0, 1]")
    infected = np.zeros(n, dtype=bool)
    k = seed_count(n, i0)
    if k:
        infected[rng.choice(n, size=k, replace=False)] = True
    return infected


def seed_infections(persons: Iterable[str], i0: float, rng: np.random.Generator) -> dict[str, Compartment]:
    order = sorted(persons)
    infected = seed_infected(len(order), i0, rng)
    return {p: INFECTED if infected[k] else SUSCEPTIBLE for k, p in enumerate(order)}


def epidemic_step(
    groups: Sequence[np.ndarray],
    infected: np.ndarray,
    beta: float,
    gamma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    n = len(infected)
    u_inf = rng.random(n)
    u_rec = rng.random(n)
    k = np.zeros(n, dtype=np.int64)
    flat, sizes = flatten_groups(groups)
    if len(flat):
        inf_flat = infected[flat].astype(np.int64)
        per_room = np.add.reduceat(inf_flat, np.cumsum(sizes) - sizes)
        k[flat] = np.repeat(per_room, sizes) - inf_flat
    p = 1.0 - (1.0 - beta) ** k
    newly = ~infected & (k > 0) & (u_inf < p)
    recovered = infected & (u_rec < gamma)
    return (infected & ~recovered) | newly


def step_epidemic(
    graph: TemporalGraph,
    compartments: Mapping[str, Compartment],
    params: EpidemicParams,
    epoch: int,
    rng: np.random.Generator,
) -> dict[str, Compartment]:
    order = graph.person_order
    missing = [p for p in order if p not in compartments]
    if missing:
        raise StateError(missing[0])
    infected = np.array([compartments[p] == INFECTED for p in order], dtype=bool)
    new = epidemic_step(graph.groups(epoch), infected, params.beta, params.gamma, rng)
    out = dict(compartments)
    out.update({p: INFECTED if new[k] else SUSCEPTIBLE for k, p in enumerate(order)})
    return out


def tag_infections(compartments: Mapping[str, Compartment], risk_states: Mapping[str, RiskState]) -> dict[str, RiskState]:
    """Newly infected people get the infected flag and score 2; recovered
    people lose the flag and keep their current score."""
    out = dict(risk_states)
    for p, c in compartments.items():
        s = out.get(p)
        if s is None:
            continue
        if c == INFECTED and not s.officially_infected:
            out[p] = replace(s, r=INFECTED_RISK, officially_infected=True)
        elif c == SUSCEPTIBLE and s.officially_infected:
            out[p] = replace(s, officially_infected=False)
    return out


def tag_arrays(infected: np.ndarray, flagged: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`tag_infections`; returns (flags, scores)."""
    newly = infected & ~flagged
    r = np.where(newly, INFECTED_RISK, r)
    return infected.copy(), r


def _sis_rhs(s: float, i: float, beta: float, gamma: float) -> float:
    # ds/dt with N = 1; di/dt is its negative
    return -beta * s * i + gamma * i


def ode_reference(params: EpidemicParams, i0: float | None = None, horizon: float = 10.0, dt: float = 1e-3):
    """Fixed-step RK4 integration of the mean-field SI/SIS equations.

    Returns ``(t, s, i)`` arrays sampled at every step, including t = 0.
    """
    if not dt > 0:
        raise ParameterError(f"dt={dt} must be positive")
    if horizon < 0:
        raise ParameterError(f"horizon={horizon} must be non-negative")
    i0 = params.i0 if i0 is None else i0
    if not 0.0 <= i0 <= 1.0:
        raise ParameterError(f"i0={i0} outside [0, 1]")
    beta, gamma = params.beta, params.gamma
    steps = int(round(horizon / dt))
    t = np.arange(steps + 1) * dt
    s_out = np.empty(steps + 1)
    i_out = np.empty(steps + 1)
    s, i = 1.0 - i0, i0
    s_out[0], i_out[0] = s, i
    for k in range(1, steps + 1):
        k1 = _sis_rhs(s, i, beta, gamma)
        k2 = _sis_rhs(s + 0.5 * dt * k1, i - 0.5 * dt * k1, beta, gamma)
        k3 = _sis_rhs(s + 0.5 * dt * k2, i - 0.5 * dt * k2, beta, gamma)
        k4 = _sis_rhs(s + dt * k3, i - dt * k3, beta, gamma)
        ds = dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        s, i = s + ds, i - ds
        s_out[k], i_out[k] = s, i
    return t, s_out, i_out

