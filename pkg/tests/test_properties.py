"""Property-based checks of the model, solver and policy invariants."""

from __future__ import annotations

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from radialflow.analysis import (
    CASE_CLASSES,
    CaseId,
    Mode,
    TwoBusCase,
    case_losses,
    case_states,
    certify_case,
    dominance_forms,
    random_case,
    random_feeder,
)
from radialflow.control import apply_heuristic, apply_no_action
from radialflow.feeder import Bus, NodeClass, SetpointProfile, classify_node, validate_feeder
from radialflow.powerflow import Diverged, balance_loss, solve
from radialflow.report import format_record, parse_record

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
UNIT = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@st.composite
def trees(draw, max_bus=9):
    n = draw(st.integers(min_value=1, max_value=max_bus))
    parents = [draw(st.integers(min_value=0, max_value=i - 1)) for i in range(1, n)]
    perm = draw(st.permutations(range(n)))
    # relabel so the slack need not be bus 0
    buses = [Bus(perm[0], None)]
    for i, p in enumerate(parents, start=1):
        buses.append(Bus(perm[i], perm[p], branch_r=0.01, branch_x=0.01))
    return buses


@given(trees())
def test_validate_idempotent_and_topological(buses):
    feeder = validate_feeder(buses)
    assert validate_feeder(feeder) == feeder
    pos = {b: k for k, b in enumerate(feeder.order)}
    assert sorted(feeder.order) == list(range(len(buses)))
    for bus in feeder.buses:
        if not bus.is_slack:
            assert pos[bus.parent] < pos[bus.id]


@given(q_load=st.floats(-0.5, 0.5), q_max=st.floats(0.0, 0.5))
def test_classes_partition_controllable(q_load, q_max):
    cls = classify_node(Bus(1, 0, q_load=q_load, q_max=q_max))
    if q_max > 0:
        assert cls in (NodeClass.SENDER, NodeClass.RECIPIENT)
        assert (cls is NodeClass.RECIPIENT) == (q_max < q_load)
    else:
        assert cls is NodeClass.PASSIVE


@settings(max_examples=60, deadline=None)
@given(SEEDS)
def test_conservation_and_residual(seed):
    feeder = random_feeder(seed)
    for prof in (apply_no_action(feeder), apply_heuristic(feeder)):
        try:
            state = solve(feeder, prof)
        except Diverged:
            continue
        assert abs(state.total_loss - balance_loss(state, feeder)) <= 1e-8
        assert state.total_loss >= 0
        if len(state.residuals) > 1:
            assert state.residuals[-1] <= state.residuals[-2]


@settings(max_examples=60, deadline=None)
@given(SEEDS)
def test_heuristic_policy_invariants(seed):
    feeder = random_feeder(seed)
    heur, base = apply_heuristic(feeder), apply_no_action(feeder)
    for i in feeder.controllable:
        bus = feeder.buses[i]
        assert 0 <= heur[i] <= bus.q_max
        assert heur[i] >= base[i]
        net = bus.q_load - heur[i]
        assert net >= 0
        assert (net == 0) == (classify_node(bus) is NodeClass.SENDER)
    assert solve(feeder, heur).total_loss <= solve(feeder, base).total_loss


@settings(max_examples=60, deadline=None)
@given(SEEDS, UNIT, st.data())
def test_voltage_rises_with_reactive_support(seed, frac, data):
    feeder = random_feeder(seed)
    assume(feeder.controllable)
    bus_id = data.draw(st.sampled_from(feeder.controllable))
    room = feeder.buses[bus_id].q_max
    base = apply_no_action(feeder)
    delta = frac * room
    assume(delta > 0)
    raised = SetpointProfile({**base.q_gen, bus_id: delta})
    v0 = solve(feeder, base).v_mag
    v1 = solve(feeder, raised).v_mag
    assert np.all(v1 - v0 >= -1e-12)


@settings(max_examples=100, deadline=None)
@given(SEEDS, st.sampled_from(list(CASE_CLASSES)))
def test_random_case_certifies(seed, case_id):
    case = random_case(seed, CASE_CLASSES[case_id])
    assert case.node_classes() == CASE_CLASSES[case_id]
    states = case_states(case)
    for mode in Mode:
        assert certify_case(case, case_id, mode, states=states).holds


@settings(max_examples=100, deadline=None)
@given(SEEDS)
def test_chain_composition(seed):
    for classes, step, final in (
        (CASE_CLASSES[CaseId.M_RECIPIENT_12A], CaseId.M_RECIPIENT_12A, CaseId.M_RECIPIENT_13A),
        (CASE_CLASSES[CaseId.M1_RECIPIENT_15A], CaseId.M1_RECIPIENT_15A, CaseId.M1_RECIPIENT_16A),
    ):
        case = random_case(seed, classes)
        states = case_states(case)
        a = certify_case(case, step, Mode.EXACT, states=states)
        b = certify_case(case, CaseId.BOTH_RECIPIENT_6A, Mode.EXACT, states=states)
        c = certify_case(case, final, Mode.EXACT, states=states)
        if a.holds and b.holds:
            assert c.holds
            assert c.margin >= a.margin


@given(
    c=st.floats(0, 0.3),
    q_load=st.floats(0.01, 0.3),
    q_frac=st.floats(0.0, 0.999),
    q0_frac=UNIT,
    v=st.lists(st.floats(0.85, 1.15), min_size=2, max_size=2),
)
def test_dominance_forms_agree(c, q_load, q_frac, q0_frac, v):
    q_max = q_load * q_frac
    case = TwoBusCase(0.01, c, 0.0, q_load, 0.0, q_max, 0.0, q0_m=q_max * q0_frac)
    vb, vs = sorted(v)
    m8, m9, m10 = dominance_forms(case, vb, vs)
    assert np.sign(m8) == np.sign(m9) == np.sign(m10) or max(abs(m8), abs(m9), abs(m10)) < 1e-15


@settings(max_examples=50, deadline=None)
@given(SEEDS, st.sampled_from([c for c in CASE_CLASSES if c.value in ("12A", "15A")]))
def test_closed_form_tracks_exact(seed, case_id):
    case = random_case(seed, CASE_CLASSES[case_id])
    states = case_states(case)
    exact = case_losses(case, Mode.EXACT, states)
    closed = case_losses(case, Mode.CLOSED_FORM, states)
    for name in exact:
        assert abs(closed[name] - exact[name]) <= 0.1 * exact[name]


@given(
    st.dictionaries(
        st.from_regex(r"[a-z_]{1,8}", fullmatch=True).filter(lambda k: k != "kind"),
        st.one_of(st.floats(allow_nan=False), st.integers(), st.booleans()),
        max_size=6,
    )
)
def test_report_record_round_trip(fields):
    line = format_record("x", **fields)
    parsed = parse_record(line)
    assert parsed.pop("kind") == "x"
    for key, value in fields.items():
        if isinstance(value, bool):
            assert parsed[key] == ("true" if value else "false")
        elif isinstance(value, float):
            assert float(parsed[key]) == value
        else:
            assert int(parsed[key]) == value
