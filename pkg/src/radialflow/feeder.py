"""Radial feeder data model and topology validation.

All electrical quantities are per-unit. Complex quantities (injections,
voltages, currents, impedances) are plain Python ``complex`` values.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping


class FeederError(ValueError):
    """Base class for invalid feeder input. ``bus_id`` names the offender."""

    reason = "invalid feeder"

    def __init__(self, bus_id: int, detail: str = ""):
        self.bus_id = bus_id
        msg = f"{self.reason}: bus {bus_id}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class CycleDetected(FeederError):
    reason = "cycle detected"


class DisconnectedBus(FeederError):
    reason = "disconnected bus"


class DuplicateId(FeederError):
    reason = "duplicate bus id"


class NegativeImpedance(FeederError):
    reason = "negative impedance"


class MultipleSlack(FeederError):
    reason = "multiple slack buses"


class InvalidBus(FeederError):
    reason = "invalid bus data"


class SetpointOutOfRange(ValueError):
    def __init__(self, bus_id: int, value: float, q_max: float):
        self.bus_id = bus_id
        super().__init__(
            f"setpoint {value!r} at bus {bus_id} outside [0, {q_max!r}]"
        )


class ProfileFeederMismatch(ValueError):
    pass


class NodeClass(enum.Enum):
    SENDER = "sender"
    RECIPIENT = "recipient"
    PASSIVE = "passive"


@dataclass(frozen=True)
class Bus:
    """One bus of a radial feeder.

    ``branch_r``/``branch_x`` describe the branch to ``parent``. The slack
    bus has ``parent=None`` and carries no branch, load or generation.
    """

    id: int
    parent: int | None
    p_load: float = 0.0
    q_load: float = 0.0
    p_gen: float = 0.0
    q_max: float = 0.0
    branch_r: float = 0.0
    branch_x: float = 0.0

    @property
    def is_slack(self) -> bool:
        return self.parent is None

    @property
    def branch_z(self) -> complex:
        return complex(self.branch_r, self.branch_x)

    @property
    def controllable(self) -> bool:
        return self.q_max > 0.0


@dataclass(frozen=True)
class RadialFeeder:
    """A validated radial feeder. Build it with :func:`validate_feeder`.

    ``buses[i].id == i`` always holds. ``order`` lists bus ids with every
    parent before its children; ``children`` maps a bus id to its child ids.
    """

    buses: tuple[Bus, ...]
    slack_voltage: complex = 1.0 + 0.0j
    slack: int = 0
    order: tuple[int, ...] = ()
    children: Mapping[int, tuple[int, ...]] = field(
        default_factory=lambda: MappingProxyType({})
    )
    base_mva: float = 1.0
    base_kv: float = 1.0

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def controllable(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses if b.controllable)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RadialFeeder):
            return NotImplemented
        return (
            self.buses == other.buses
            and self.slack_voltage == other.slack_voltage
            and self.order == other.order
            and dict(self.children) == dict(other.children)
            and self.base_mva == other.base_mva
            and self.base_kv == other.base_kv
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SetpointProfile:
    """Inverter reactive generation per controllable bus."""

    q_gen: Mapping[int, float]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "q_gen", MappingProxyType(dict(sorted(self.q_gen.items())))
        )

    def __getitem__(self, bus_id: int) -> float:
        return self.q_gen[bus_id]

    def get(self, bus_id: int, default: float = 0.0) -> float:
        return self.q_gen.get(bus_id, default)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SetpointProfile):
            return NotImplemented
        return dict(self.q_gen) == dict(other.q_gen)

    def __hash__(self) -> int:
        return hash(tuple(self.q_gen.items()))


def _check_finite(bus: Bus) -> None:
    for name in ("p_load", "q_load", "p_gen", "q_max", "branch_r", "branch_x"):
        value = getattr(bus, name)
        if not math.isfinite(value):
            raise InvalidBus(bus.id, f"{name}={value!r} is not finite")


def validate_feeder(
    buses: Iterable[Bus] | RadialFeeder,
    slack_voltage: complex = 1.0 + 0.0j,
    base_mva: float = 1.0,
    base_kv: float = 1.0,
) -> RadialFeeder:
    """Validate a candidate feeder and precompute its topological order.

    Passing an already validated :class:`RadialFeeder` revalidates it and
    returns an equal feeder. Slack load/generation/impedance fields are
    zeroed since they take no part in the power flow.

    Raises:
        DuplicateId, InvalidBus, MultipleSlack, NegativeImpedance,
        DisconnectedBus, CycleDetected: each carrying the offending bus id.
    """
    if isinstance(buses, RadialFeeder):
        feeder = buses
        return validate_feeder(
            feeder.buses, feeder.slack_voltage, feeder.base_mva, feeder.base_kv
        )

    buses = list(buses)
    if not buses:
        raise ValueError("feeder has no buses")
    slack_voltage = complex(slack_voltage)
    if not (math.isfinite(slack_voltage.real) and math.isfinite(slack_voltage.imag)):
        raise ValueError(f"slack voltage {slack_voltage!r} is not finite")
    if slack_voltage == 0:
        raise ValueError("slack voltage must be nonzero")

    by_id: dict[int, Bus] = {}
    for bus in buses:
        if bus.id in by_id:
            raise DuplicateId(bus.id)
        by_id[bus.id] = bus

    n = len(buses)
    for bus_id in sorted(by_id):
        if not (0 <= bus_id < n):
            raise InvalidBus(bus_id, f"ids must be dense in 0..{n - 1}")

    slacks = [b.id for b in sorted(by_id.values(), key=lambda b: b.id) if b.is_slack]
    if len(slacks) > 1:
        raise MultipleSlack(slacks[1])

    for bus_id in range(n):
        bus = by_id[bus_id]
        _check_finite(bus)
        if bus.is_slack:
            continue
        if bus.branch_r < 0 or bus.branch_x < 0:
            raise NegativeImpedance(
                bus_id, f"r={bus.branch_r!r}, x={bus.branch_x!r}"
            )
        if bus.q_max < 0:
            raise InvalidBus(bus_id, f"q_max={bus.q_max!r} is negative")
        if bus.parent not in by_id:
            raise DisconnectedBus(bus_id, f"parent {bus.parent!r} does not exist")

    # Every parent chain must end at the slack.
    reaches_slack: set[int] = set(slacks)
    for start in range(n):
        path: list[int] = []
        on_path: set[int] = set()
        node = start
        while node not in reaches_slack:
            if node in on_path:
                raise CycleDetected(node)
            path.append(node)
            on_path.add(node)
            node = by_id[node].parent  # type: ignore[assignment]
        reaches_slack.update(path)

    slack = slacks[0]
    normalized = []
    for bus_id in range(n):
        bus = by_id[bus_id]
        if bus.is_slack:
            bus = Bus(id=bus_id, parent=None)
        normalized.append(bus)

    kids: dict[int, list[int]] = {i: [] for i in range(n)}
    for bus in normalized:
        if not bus.is_slack:
            kids[bus.parent].append(bus.id)  # type: ignore[index]

    order = []
    queue = deque([slack])
    while queue:
        node = queue.popleft()
        order.append(node)
        queue.extend(sorted(kids[node]))

    return RadialFeeder(
        buses=tuple(normalized),
        slack_voltage=slack_voltage,
        slack=slack,
        order=tuple(order),
        children=MappingProxyType({k: tuple(sorted(v)) for k, v in kids.items()}),
        base_mva=float(base_mva),
        base_kv=float(base_kv),
    )


def classify_node(bus: Bus) -> NodeClass:
    """Recipient if the inverter cannot cover the reactive load, else Sender.

    Buses without inverter capability are Passive. At ``q_max == q_load`` the
    bus can fully compensate and counts as a Sender.
    """
    if bus.is_slack or bus.q_max <= 0.0:
        return NodeClass.PASSIVE
    if bus.q_max < bus.q_load:
        return NodeClass.RECIPIENT
    return NodeClass.SENDER


def validate_profile(feeder: RadialFeeder, profile: SetpointProfile) -> SetpointProfile:
    """Check ``profile`` against ``feeder``: same controllable set, in bounds."""
    expected = set(feeder.controllable)
    got = set(profile.q_gen)
    if got != expected:
        raise ProfileFeederMismatch(
            f"profile buses {sorted(got)} differ from controllable buses {sorted(expected)}"
        )
    for bus_id, value in profile.q_gen.items():
        q_max = feeder.buses[bus_id].q_max
        if not (0.0 <= value <= q_max):
            raise SetpointOutOfRange(bus_id, value, q_max)
    return profile
