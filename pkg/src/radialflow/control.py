"""Reactive-power setpoint policies: no-action baseline and the local heuristic."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

from .feeder import (
    RadialFeeder,
    SetpointOutOfRange,
    SetpointProfile,
    validate_profile,
)


class PolicyKind(enum.Enum):
    NO_ACTION = "none"
    HEURISTIC = "heuristic"
    FIXED = "fixed"


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    profile: SetpointProfile | None = None

    def __post_init__(self) -> None:
        if (self.kind is PolicyKind.FIXED) != (self.profile is not None):
            raise ValueError("a profile is given exactly for FIXED policies")

    @classmethod
    def no_action(cls) -> Policy:
        return cls(PolicyKind.NO_ACTION)

    @classmethod
    def heuristic(cls) -> Policy:
        return cls(PolicyKind.HEURISTIC)

    @classmethod
    def fixed(cls, profile: SetpointProfile) -> Policy:
        return cls(PolicyKind.FIXED, profile)


def apply_no_action(
    feeder: RadialFeeder,
    baseline: float | Mapping[int, float] = 0.0,
) -> SetpointProfile:
    """Hold every inverter at a fixed baseline output (default zero).

    ``baseline`` is either one value for all controllable buses or a
    mapping from bus id to value; missing ids default to zero.
    """
    q_gen = {}
    for bus_id in feeder.controllable:
        if isinstance(baseline, Mapping):
            value = float(baseline.get(bus_id, 0.0))
        else:
            value = float(baseline)
        q_max = feeder.buses[bus_id].q_max
        if not (0.0 <= value <= q_max):
            raise SetpointOutOfRange(bus_id, value, q_max)
        q_gen[bus_id] = value
    return SetpointProfile(q_gen)


def apply_heuristic(feeder: RadialFeeder) -> SetpointProfile:
    """Recipients saturate at q_max, senders cover exactly their own q_load."""
    # a negative (capacitive) q_load gets no support; setpoints stay >= 0
    return SetpointProfile(
        {
            i: max(0.0, min(feeder.buses[i].q_load, feeder.buses[i].q_max))
            for i in feeder.controllable
        }
    )


def apply_policy(feeder: RadialFeeder, policy: Policy) -> SetpointProfile:
    if policy.kind is PolicyKind.NO_ACTION:
        return apply_no_action(feeder)
    if policy.kind is PolicyKind.HEURISTIC:
        return apply_heuristic(feeder)
    return validate_profile(feeder, policy.profile)  # type: ignore[arg-type]
