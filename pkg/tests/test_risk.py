import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import naive_risk_epoch
from riskscore.contact_graph import SyntheticSpec, TemporalGraph, generate_synthetic
from riskscore.errors import ParameterError, StateError, UnboundedDecayError
from riskscore.risk import (
    contact_pairs,
    ExposureModel,
    NeighborContribution,
    RiskState,
    WeightModel,
    initial_states,
    isolation_time_to_floor,
    neighbor_exposure,
    risk_step,
    step_population,
    states_csv,
    update_risk,
)

NC = NeighborContribution


def test_exposure_analytic():
    assert neighbor_exposure(ExposureModel(mode="constant", delta_t=20, pathogen_rate=0)) == 0
    assert neighbor_exposure(ExposureModel(mode="constant", delta_t=20, pathogen_rate=0.05)) == 1.0


def test_exposure_sampled_mean():
    rng = np.random.default_rng(12)
    model = ExposureModel(mode="sampled-normal", mu=0.5, sigma=0.1)
    draws = model.sample(rng, 100_000)
    assert abs(draws.mean() - 0.5) < 0.01
    assert draws.min() >= 0


def test_exposure_truncated_at_zero():
    draws = ExposureModel(mu=0.0, sigma=1.0).sample(np.random.default_rng(0), 10_000)
    assert draws.min() == 0.0


def test_exposure_rssi_mode():
    model = ExposureModel(mode="rssi-mapped")
    assert neighbor_exposure(model, rssi=-50) == 0.8
    assert neighbor_exposure(model, rssi=-70) == 0.1


def test_update_examples():
    assert update_risk(RiskState(2.0, 0.5), []) == 1.0
    assert update_risk(RiskState(1.0, 1.0), [NC(1, 0, 1)]) == 1.0
    got = update_risk(RiskState(1.0, 0.5), [NC(0.5, 0.4, 1.0), NC(0.5, 0.4, 1.0)])
    # exact rational evaluation of the same expression
    h, t = Fraction(1, 2), Fraction(2, 5)
    oracle = (h * 1 + 2 * h * (t + 1)) / (1 + 2 * h)
    assert oracle == Fraction(19, 20)
    assert got == pytest.approx(float(oracle), rel=1e-15)


def test_contribution_validation():
    with pytest.raises(ParameterError):
        NC(1.5, 0, 1)
    with pytest.raises(ParameterError):
        NC(0.5, -0.1, 1)


unit = st.floats(0, 1)
nonneg = st.floats(0, 50)
contribs = st.lists(st.builds(NC, unit, nonneg, nonneg, st.one_of(st.none(), st.text("abc", max_size=3))), max_size=8)
states = st.builds(RiskState, nonneg, unit)


@given(states, contribs)
def test_non_negative_and_bounded(prev, cs):
    out = update_risk(prev, cs)
    assert out >= 0
    bound = max([prev.v * prev.r] + [c.exposure + c.r_prev for c in cs])
    assert out <= bound * (1 + 1e-12) + 1e-300


@given(states)
def test_no_neighbour_identity(prev):
    assert update_risk(prev, []) == prev.v * prev.r


@given(states, contribs, st.data())
def test_order_independent(prev, cs, data):
    perm = data.draw(st.permutations(cs))
    assert update_risk(prev, perm) == update_risk(prev, cs)


@given(states, contribs.filter(bool), st.data(), st.floats(0, 10))
def test_monotone_in_exposure(prev, cs, data, bump):
    k = data.draw(st.integers(0, len(cs) - 1))
    raised = list(cs)
    c = cs[k]
    raised[k] = NC(c.w, c.exposure + bump, c.r_prev, c.neighbor)
    assert update_risk(prev, raised) >= update_risk(prev, cs) - 1e-12 * update_risk(prev, cs)


def _graph(rooms_by_epoch):
    return TemporalGraph(rooms_by_epoch)


def test_isolated_with_v1_unchanged():
    g = _graph({0: {"a": {"A"}, "b": {"B"}, "c": {"C"}}})
    st0 = {p: RiskState(r, 1.0) for p, r in zip("ABC", (1.0, 0.3, 2.5))}
    out = step_population(g, st0, 0, ExposureModel(), WeightModel(), np.random.default_rng(0))
    assert {p: s.r for p, s in out.items()} == {"A": 1.0, "B": 0.3, "C": 2.5}


def test_symmetric_room_identical_scores():
    g = _graph({0: {"a": {"A", "B", "C"}}})
    st0 = initial_states("ABC", 0.5)
    model = ExposureModel(mode="constant", pathogen_rate=0.02)
    out = step_population(g, st0, 0, model, WeightModel(), np.random.default_rng(0))
    assert out["A"].r == out["B"].r == out["C"].r
    # (0.5 * 1 + 2 * (0.4 + 1)) / 3
    assert out["A"].r == pytest.approx((0.5 + 2 * 1.4) / 3)


def test_absent_person_decays_and_missing_state_errors():
    g = _graph({0: {"a": {"A", "B"}}, 1: {"a": {"A"}}})
    st0 = {"A": RiskState(1.0, 0.5), "B": RiskState(2.0, 0.25)}
    out = step_population(g, st0, 1, ExposureModel(), WeightModel(), np.random.default_rng(0))
    assert out["B"].r == 0.5
    assert out["A"].r == 0.5
    with pytest.raises(StateError):
        step_population(g, {"A": RiskState()}, 0, ExposureModel(), WeightModel(), np.random.default_rng(0))


def test_pinning():
    g = _graph({0: {"a": {"A"}}})
    pinned = step_population(g, {"A": RiskState(2.0, 0.5, True)}, 0, ExposureModel(), WeightModel(), np.random.default_rng(0))
    assert pinned["A"].r == 2.0
    loose = step_population(
        g, {"A": RiskState(2.0, 0.5, True)}, 0, ExposureModel(), WeightModel(), np.random.default_rng(0), pin_infected=False
    )
    assert loose["A"].r == 1.0


def test_five_person_two_epoch_toy_against_oracle():
    g = _graph({0: {"x": {"A", "B", "C"}, "y": {"D", "E"}}, 1: {"x": {"A", "D"}, "y": {"B", "C", "E"}}})
    v = {"A": 0.3, "B": 0.5, "C": 0.7, "D": 0.9, "E": 0.1}
    flagged = {p: p == "D" for p in v}
    states = {p: RiskState(2.0 if flagged[p] else 1.0, v[p], flagged[p]) for p in v}
    rng, rng_o = np.random.default_rng(5), np.random.default_rng(5)
    r_o = {p: s.r for p, s in states.items()}
    for epoch in (0, 1):
        states = step_population(g, states, epoch, ExposureModel(), WeightModel(), rng)
        r_o = naive_risk_epoch(g, r_o, v, flagged, epoch, rng_o)
        for p in v:
            assert states[p].r == pytest.approx(r_o[p], rel=1e-12)


def test_kernel_matches_update_risk_bitwise():
    g = _graph({0: {"x": {"A", "B", "C", "D"}}})
    v = np.array([0.2, 0.4, 0.6, 0.8])
    r = np.array([1.0, 2.0, 1.5, 0.5])
    model = ExposureModel()
    new = risk_step(g.groups(0), r, v, np.zeros(4, bool), model, WeightModel(), np.random.default_rng(9))
    draws = np.maximum(np.random.default_rng(9).normal(0.5, 0.1, size=12), 0)
    k = 0
    for i in range(4):
        cs = []
        for j in range(4):
            if j != i:
                cs.append(NC(1.0, float(draws[k]), r[j], "ABCD"[j]))
                k += 1
        assert new[i] == update_risk(RiskState(r[i], v[i]), cs)


def test_sampled_weights_are_in_unit_interval():
    w = WeightModel(mode="sampled-normal", mu=0.5, sigma=2.0).sample(np.random.default_rng(1), 1000)
    assert w.min() >= 0 and w.max() <= 1


def test_deterministic_given_seed():
    g = generate_synthetic(SyntheticSpec(20, 3, 5), 4)
    st0 = initial_states(g.persons, 0.5)

    def go():
        s, rng = st0, np.random.default_rng(77)
        for t in range(g.n_epochs):
            s = step_population(g, s, t, ExposureModel(), WeightModel(mode="sampled-normal"), rng)
        return s

    assert go() == go()


@pytest.mark.parametrize(
    "r,v,floor,expected",
    [(2.0, 0.5, 0.01, 8), (0.0, 0.3, 0.01, 0), (1.0, 0.1, 0.1, 1), (5.0, 0.0, 0.1, 1)],
)
def test_isolation_time(r, v, floor, expected):
    assert isolation_time_to_floor(r, v, floor) == expected


def test_isolation_time_unbounded():
    with pytest.raises(UnboundedDecayError):
        isolation_time_to_floor(2.0, 1.0, 0.1)


def test_isolation_time_matches_brute_force():
    rnd = random.Random(3)
    for _ in range(300):
        r = rnd.uniform(0, 1e4)
        v = rnd.uniform(0.01, 0.99)
        floor = rnd.uniform(1e-4, 10)
        k, x = 0, r
        while x > floor:
            x *= v
            k += 1
        assert isolation_time_to_floor(r, v, floor) == k


@given(st.lists(st.lists(st.integers(0, 40), max_size=7, unique=True), max_size=5))
def test_contact_pairs_layout(rooms):
    seen, groups = set(), []
    for members in rooms:
        members = sorted(set(members) - seen)
        seen.update(members)
        groups.append(np.array(members, dtype=np.int64))
    recv, src = contact_pairs(groups)
    expected = [(i, j) for g in groups for i in g for j in g if i != j]
    assert list(zip(recv.tolist(), src.tolist())) == [(int(i), int(j)) for i, j in expected]


def test_states_csv():
    text = states_csv(3, {"B": RiskState(0.5, 0.25), "A": RiskState(2.0, 0.5, True)}, {"A": "I", "B": "S"})
    assert text == "epoch,person,r,v,compartment\n3,A,2,0.5,I\n3,B,0.5,0.25,S\n"
