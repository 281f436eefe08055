"""Two-node loss comparisons between inverter setpoint policies, plus a
brute-force setpoint oracle.

The two-node case is the chain ``slack -> m-1 -> m`` with equal branch
resistance on both branches. Bus ids on the canonical feeder are fixed:
0 is the slack, 1 is node m-1 and 2 is node m. Three setpoint pairs are
compared:

* baseline: both inverters at their no-action output ``q0``;
* heuristic: each inverter at ``min(q_load, q_max)``;
* saturated: recipient inverters at ``q_max``, every other inverter left at
  ``q0``. For a recipient/recipient case this is the heuristic itself; in a
  mixed case it is the reference in which the sender node still behaves
  like a recipient, i.e. does not cover its own reactive load.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .control import apply_heuristic
from .feeder import (
    Bus,
    NodeClass,
    RadialFeeder,
    SetpointProfile,
    classify_node,
    validate_feeder,
)
from .powerflow import Diverged, SolverConfig, solve, solve_batch

STRICT_TOL = 1e-12
M1, M = 1, 2

MAX_CONTROLLABLE = 6
MAX_GRID_POINTS = 21
MAX_GRID_SIZE = 10**6


class ClassMismatch(ValueError):
    pass


class PreconditionViolated(ValueError):
    pass


class NonpositiveVoltage(ValueError):
    pass


class TooLarge(ValueError):
    def __init__(self, size: int, detail: str = ""):
        self.size = size
        super().__init__(f"grid of {size} solves is too large" + (f": {detail}" if detail else ""))


class FormDisagreement(AssertionError):
    pass


class Mode(enum.Enum):
    CLOSED_FORM = "closed"
    EXACT = "exact"


class CaseId(enum.Enum):
    BOTH_RECIPIENT_6A = "6A"
    VOLTAGE_ORDER_7A = "7A"
    FIRST_COMPONENT_10A = "10A"
    M_RECIPIENT_12A = "12A"
    M_RECIPIENT_13A = "13A"
    M1_RECIPIENT_15A = "15A"
    M1_RECIPIENT_16A = "16A"
    BOTH_SENDER = "sender"

    @classmethod
    def parse(cls, text: str) -> CaseId:
        for member in cls:
            if text.strip().lower() in (member.value.lower(), member.name.lower()):
                return member
        raise ValueError(f"unknown case id {text!r}")


R, S = NodeClass.RECIPIENT, NodeClass.SENDER

# (class of m, class of m-1) each case id is generated for
CASE_CLASSES: dict[CaseId, tuple[NodeClass, NodeClass]] = {
    CaseId.BOTH_RECIPIENT_6A: (R, R),
    CaseId.VOLTAGE_ORDER_7A: (R, R),
    CaseId.FIRST_COMPONENT_10A: (R, R),
    CaseId.M_RECIPIENT_12A: (R, S),
    CaseId.M_RECIPIENT_13A: (R, S),
    CaseId.M1_RECIPIENT_15A: (S, R),
    CaseId.M1_RECIPIENT_16A: (S, R),
    CaseId.BOTH_SENDER: (S, S),
}

# which pair is claimed strictly smaller (left) than which (right)
_CLAIMS = {
    CaseId.BOTH_RECIPIENT_6A: ("saturated", "baseline"),
    CaseId.M_RECIPIENT_12A: ("heuristic", "saturated"),
    CaseId.M_RECIPIENT_13A: ("heuristic", "baseline"),
    CaseId.M1_RECIPIENT_15A: ("heuristic", "saturated"),
    CaseId.M1_RECIPIENT_16A: ("heuristic", "baseline"),
    CaseId.BOTH_SENDER: ("heuristic", "baseline"),
}


@dataclass(frozen=True)
class TwoBusCase:
    r_br: float
    c_m: float
    c_m1: float
    q_load_m: float
    q_load_m1: float
    q_max_m: float
    q_max_m1: float
    q0_m: float = 0.0
    q0_m1: float = 0.0

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if not math.isfinite(value):
                raise ValueError(f"{name}={value!r} is not finite")
        if not self.r_br > 0:
            raise ValueError(f"r_br must be positive, got {self.r_br!r}")
        for node in ("m", "m1"):
            q_max = getattr(self, f"q_max_{node}")
            q0 = getattr(self, f"q0_{node}")
            q_load = getattr(self, f"q_load_{node}")
            if q_max < 0:
                raise ValueError(f"q_max_{node} must be >= 0")
            if not (0 <= q0 <= q_max):
                raise ValueError(f"q0_{node}={q0!r} outside [0, q_max_{node}]")
            if q0 > q_load:
                raise ValueError(f"q0_{node}={q0!r} exceeds q_load_{node}")

    def node_classes(self) -> tuple[NodeClass, NodeClass]:
        """Classes of (m, m-1)."""
        return (
            classify_node(Bus(M, M1, q_load=self.q_load_m, q_max=self.q_max_m)),
            classify_node(Bus(M1, 0, q_load=self.q_load_m1, q_max=self.q_max_m1)),
        )

    def baseline(self) -> tuple[float, float]:
        return (self.q0_m, self.q0_m1)

    def heuristic(self) -> tuple[float, float]:
        return (
            max(0.0, min(self.q_load_m, self.q_max_m)),
            max(0.0, min(self.q_load_m1, self.q_max_m1)),
        )

    def saturated(self) -> tuple[float, float]:
        cls_m, cls_m1 = self.node_classes()
        return (
            self.q_max_m if cls_m is R else self.q0_m,
            self.q_max_m1 if cls_m1 is R else self.q0_m1,
        )

    def pair(self, name: str) -> tuple[float, float]:
        return getattr(self, name)()


@dataclass(frozen=True)
class CaseVerdict:
    """Outcome of one strict inequality ``loss_left < loss_right``.

    For ``VOLTAGE_ORDER_7A`` the two sides are the voltage magnitudes at
    node m (baseline, saturated) rather than losses.
    """

    case_id: CaseId
    loss_left: float
    loss_right: float
    mode: Mode | None = None
    losses: Mapping[str, float] = field(default_factory=dict)
    iterations: int = 0

    @property
    def margin(self) -> float:
        return float(self.loss_right - self.loss_left)

    @property
    def holds(self) -> bool:
        return bool(self.margin > STRICT_TOL)

    def swapped(self) -> CaseVerdict:
        return replace(self, loss_left=self.loss_right, loss_right=self.loss_left)


def build_canonical_feeder(case: TwoBusCase, x_br: float = 0.0) -> RadialFeeder:
    """3-bus chain slack -> m-1 -> m, both branches ``r_br + j x_br``."""
    buses = [
        Bus(0, None),
        Bus(M1, 0, p_load=case.c_m1, q_load=case.q_load_m1, q_max=case.q_max_m1,
            branch_r=case.r_br, branch_x=x_br),
        Bus(M, M1, p_load=case.c_m, q_load=case.q_load_m, q_max=case.q_max_m,
            branch_r=case.r_br, branch_x=x_br),
    ]
    return validate_feeder(buses)


def closed_form_loss(
    case: TwoBusCase,
    setpoint_m: float,
    setpoint_m1: float,
    v_m: float,
    v_m1: float,
) -> float:
    """Two-branch loss with the branch currents' phase difference neglected.

    ``v_m``/``v_m1`` are the voltage magnitudes that go with the setpoints.
    """
    if not (v_m > 0 and v_m1 > 0):
        raise NonpositiveVoltage(f"voltages must be positive, got {v_m!r}, {v_m1!r}")
    a = setpoint_m - case.q_load_m
    b = setpoint_m1 - case.q_load_m1
    return case.r_br * (
        2.0 * (case.c_m**2 + a**2) / v_m**2
        + 2.0 * (case.c_m * case.c_m1 + a * b) / (v_m * v_m1)
        + (case.c_m1**2 + b**2) / v_m1**2
    )


def dominance_forms(
    case: TwoBusCase, v_baseline: float, v_saturated: float
) -> tuple[float, float, float]:
    """Margins (left - right) of the three equivalent first-component forms.

    Each form states that the node-m term of the baseline loss exceeds the
    node-m term of the saturated loss; all three margins share a sign.
    """
    c2 = case.c_m**2
    base = (case.q0_m - case.q_load_m) ** 2
    sat = (case.q_max_m - case.q_load_m) ** 2
    vb2, vs2 = v_baseline**2, v_saturated**2
    m8 = c2 * (vs2 - vb2) - (sat * vb2 - base * vs2)
    m9 = vs2 * (c2 + base) - vb2 * (c2 + sat)
    m10 = 2.0 * (c2 + base) / vb2 - 2.0 * (c2 + sat) / vs2
    return m8, m9, m10


def check_first_component_dominance(
    case: TwoBusCase,
    v_pair_baseline: Sequence[float],
    v_pair_saturated: Sequence[float],
) -> CaseVerdict:
    """Verdict on the node-m loss term: saturated < baseline.

    ``v_pair_*`` are (|V_m|, |V_m-1|); only the node-m voltages enter.

    Raises:
        PreconditionViolated: node m is not short of reactive capability, or
            the saturated voltage is below the baseline voltage.
        FormDisagreement: the three equivalent forms disagree.
    """
    v_b, v_s = float(v_pair_baseline[0]), float(v_pair_saturated[0])
    if not case.q_max_m < case.q_load_m:
        raise PreconditionViolated("node m must satisfy q_max < q_load")
    if not (0 < v_b <= v_s):
        raise PreconditionViolated(
            f"need 0 < baseline voltage <= saturated voltage, got {v_b!r}, {v_s!r}"
        )
    margins = dominance_forms(case, v_b, v_s)
    verdicts = {m > STRICT_TOL for m in margins}
    if len(verdicts) != 1:
        raise FormDisagreement(f"equivalent forms disagree: margins {margins}")
    a_sat = case.q_max_m - case.q_load_m
    a_base = case.q0_m - case.q_load_m
    return CaseVerdict(
        case_id=CaseId.FIRST_COMPONENT_10A,
        loss_left=2.0 * (case.c_m**2 + a_sat**2) / v_s**2,
        loss_right=2.0 * (case.c_m**2 + a_base**2) / v_b**2,
        mode=Mode.CLOSED_FORM,
    )


def _profile(case: TwoBusCase, pair: tuple[float, float]) -> SetpointProfile:
    q = {}
    if case.q_max_m > 0:
        q[M] = pair[0]
    if case.q_max_m1 > 0:
        q[M1] = pair[1]
    return SetpointProfile(q)


def _require_classes(case: TwoBusCase, case_id: CaseId) -> None:
    got = case.node_classes()
    if case_id is CaseId.BOTH_RECIPIENT_6A:
        # also used as the bridge step of the mixed cases
        ok = R in got and NodeClass.PASSIVE not in got
    elif case_id in (CaseId.VOLTAGE_ORDER_7A, CaseId.FIRST_COMPONENT_10A):
        ok = got[0] is R
    else:
        ok = got == CASE_CLASSES[case_id]
    if not ok:
        raise ClassMismatch(
            f"case {case_id.value} not applicable to classes "
            f"(m={got[0].value}, m-1={got[1].value})"
        )


def case_states(case: TwoBusCase, config: SolverConfig | None = None, x_br: float = 0.0):
    """Exact solves of the canonical feeder for baseline, heuristic, saturated."""
    feeder = build_canonical_feeder(case, x_br)
    return {
        name: solve(feeder, _profile(case, case.pair(name)), config)
        for name in ("baseline", "heuristic", "saturated")
    }


def case_losses(case: TwoBusCase, mode: Mode, states) -> dict[str, float]:
    if mode is Mode.EXACT:
        return {name: st.total_loss for name, st in states.items()}
    out = {}
    for name, st in states.items():
        sm, sm1 = case.pair(name)
        out[name] = closed_form_loss(case, sm, sm1, abs(st.voltages[M]), abs(st.voltages[M1]))
    return out


def certify_case(
    case: TwoBusCase,
    case_id: CaseId,
    mode: Mode = Mode.EXACT,
    config: SolverConfig | None = None,
    x_br: float = 0.0,
    states=None,
) -> CaseVerdict:
    """Evaluate one strict loss ordering on the canonical feeder.

    ClosedForm mode plugs voltages from exact solves into
    :func:`closed_form_loss`; Exact mode compares solver losses directly.
    ``states`` may carry the solves from :func:`case_states` to reuse them.

    Raises:
        ClassMismatch: node classes do not fit ``case_id``.
        Diverged: propagated from the solver.
    """
    _require_classes(case, case_id)
    if states is None:
        states = case_states(case, config, x_br)
    iterations = max(st.iterations for st in states.values())
    losses = case_losses(case, mode, states)

    if case_id is CaseId.VOLTAGE_ORDER_7A:
        return CaseVerdict(
            case_id,
            loss_left=abs(states["baseline"].voltages[M]),
            loss_right=abs(states["saturated"].voltages[M]),
            mode=mode,
            losses=losses,
            iterations=iterations,
        )
    if case_id is CaseId.FIRST_COMPONENT_10A:
        v_base = np.abs(states["baseline"].voltages[[M, M1]])
        v_sat = np.abs(states["saturated"].voltages[[M, M1]])
        verdict = check_first_component_dominance(case, v_base, v_sat)
        return replace(verdict, mode=mode, losses=losses, iterations=iterations)

    left, right = _CLAIMS[case_id]
    return CaseVerdict(
        case_id,
        loss_left=losses[left],
        loss_right=losses[right],
        mode=mode,
        losses=losses,
        iterations=iterations,
    )


def random_case(seed: int, class_spec: tuple[NodeClass, NodeClass]) -> TwoBusCase:
    """Reproducible random case with node classes ``class_spec`` = (m, m-1)."""
    rng = np.random.default_rng(seed)
    r_br = rng.uniform(0.005, 0.05)
    c_m, c_m1 = rng.uniform(0.0, 0.2, size=2)
    q_load = rng.uniform(0.01, 0.2, size=2)
    q_max = []
    for cls, ql in zip(class_spec, q_load):
        u = rng.uniform()
        if cls is R:
            q_max.append(ql * (0.05 + 0.9 * u))
        elif cls is S:
            q_max.append(ql * (1.0 + u))
        else:
            q_max.append(0.0)
    return TwoBusCase(
        r_br=float(r_br),
        c_m=float(c_m),
        c_m1=float(c_m1),
        q_load_m=float(q_load[0]),
        q_load_m1=float(q_load[1]),
        q_max_m=float(q_max[0]),
        q_max_m1=float(q_max[1]),
    )


def random_feeder(
    seed: int,
    n_bus: tuple[int, int] = (3, 8),
    max_controllable: int | None = None,
    impedance: tuple[float, float] = (0.005, 0.05),
    load: tuple[float, float] = (0.0, 0.2),
) -> RadialFeeder:
    """Random radial feeder; each bus hangs off a uniformly chosen earlier bus.

    Inverter capability is drawn in [0, 2 * q_load] so senders and
    recipients both occur. With ``max_controllable`` set, a random subset of
    at most that many buses keeps its inverter.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_bus[0], n_bus[1] + 1))
    buses = [Bus(0, None)]
    for i in range(1, n):
        q_load = float(rng.uniform(*load))
        buses.append(
            Bus(
                id=i,
                parent=int(rng.integers(0, i)),
                p_load=float(rng.uniform(*load)),
                q_load=q_load,
                q_max=float(rng.uniform(0.0, 2.0 * q_load)),
                branch_r=float(rng.uniform(*impedance)),
                branch_x=float(rng.uniform(*impedance)),
            )
        )
    if max_controllable is not None:
        k = int(rng.integers(1, min(max_controllable, n - 1) + 1))
        keep = set(rng.choice(np.arange(1, n), size=k, replace=False).tolist())
        buses = [b if b.id in keep or b.is_slack else replace(b, q_max=0.0) for b in buses]
    return validate_feeder(buses)


class BruteForceResult(NamedTuple):
    profile: SetpointProfile
    loss: float
    evaluated: int
    diverged: int


def grid_values(q_max: float, grid_points: int) -> np.ndarray:
    return np.linspace(0.0, q_max, grid_points)


def brute_force_best(
    feeder: RadialFeeder,
    grid_points_per_bus: int,
    config: SolverConfig | None = None,
    chunk: int = 50_000,
) -> BruteForceResult:
    """Exhaustive search over an evenly spaced setpoint grid per inverter.

    Ties go to the lexicographically smallest profile (ascending bus id).
    Diverging grid points are skipped and counted.

    Raises:
        TooLarge: more than 6 inverters, more than 21 points per bus, or
            more than 10**6 solves.
        Diverged: every grid point diverged.
    """
    ctrl = feeder.controllable
    g = grid_points_per_bus
    if g < 2:
        raise ValueError(f"grid needs at least 2 points per bus, got {g}")
    size = g ** len(ctrl)
    if len(ctrl) > MAX_CONTROLLABLE:
        raise TooLarge(size, f"{len(ctrl)} controllable buses (max {MAX_CONTROLLABLE})")
    if g > MAX_GRID_POINTS:
        raise TooLarge(size, f"{g} points per bus (max {MAX_GRID_POINTS})")
    if size > MAX_GRID_SIZE:
        raise TooLarge(size)

    axes = [grid_values(feeder.buses[i].q_max, g) for i in ctrl]
    if not ctrl:
        st = solve(feeder, SetpointProfile({}), config)
        return BruteForceResult(SetpointProfile({}), st.total_loss, 1, 0)

    best_loss, best_row, diverged = math.inf, None, 0
    points = itertools.product(*axes)
    offset = 0
    while True:
        block = np.array(list(itertools.islice(points, chunk)), dtype=float)
        if block.size == 0:
            break
        res = solve_batch(feeder, block, config)
        diverged += int((~res.converged).sum())
        losses = np.where(res.converged, res.losses, np.inf)
        j = int(np.argmin(losses))
        if losses[j] < best_loss:
            best_loss, best_row = float(losses[j]), block[j]
        offset += len(block)

    if best_row is None:
        raise Diverged(config.max_iterations if config else SolverConfig().max_iterations,
                       "every grid point diverged")
    profile = SetpointProfile({i: float(q) for i, q in zip(ctrl, best_row)})
    return BruteForceResult(profile, solve(feeder, profile, config).total_loss, offset, diverged)


def heuristic_grid_slack(
    feeder: RadialFeeder, grid_points_per_bus: int, config: SolverConfig | None = None
) -> float:
    """Loss penalty of snapping the heuristic profile to the nearest grid point."""
    heur = apply_heuristic(feeder)
    snapped = {}
    for i in feeder.controllable:
        axis = grid_values(feeder.buses[i].q_max, grid_points_per_bus)
        snapped[i] = float(axis[int(np.argmin(np.abs(axis - heur[i])))])
    l_heur = solve(feeder, heur, config).total_loss
    l_snap = solve(feeder, SetpointProfile(snapped), config).total_loss
    return max(0.0, l_snap - l_heur)
