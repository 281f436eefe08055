"""Reading and writing feeder files.

A feeder file is a YAML document::

    # per-unit on base_mva / base_kv (informational only)
    base_mva: 1.0
    base_kv: 12.47
    slack_voltage: {magnitude: 1.0, angle_rad: 0.0}   # or {re: .., im: ..}
    buses:
      - {id: 0, parent: null}
      - {id: 1, parent: 0, r: 0.01, x: 0.01, p_load: 0.1, q_load: 0.05,
         p_gen: 0.0, q_max: 0.05}

Angles follow V = |V| exp(-j * angle_rad).
"""

from __future__ import annotations

import cmath
import math
from pathlib import Path

import yaml

from .feeder import Bus, FeederError, RadialFeeder, validate_feeder

HEADER = """\
# radialflow feeder file
# All electrical quantities are per-unit on (base_mva, base_kv); the bases are
# informational and never enter the computation.
# slack_voltage: {magnitude, angle_rad} with V = magnitude * exp(-j*angle_rad),
# or {re, im}. Bus records: id, parent (null for the slack), r, x, p_load,
# q_load, p_gen, q_max.
"""

BUS_FIELDS = ("r", "x", "p_load", "q_load", "p_gen", "q_max")


class FeederParseError(ValueError):
    pass


def _number(value, where: str, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FeederParseError(f"{where}: field {name!r} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise FeederParseError(f"{where}: field {name!r} is not finite")
    return value


def _slack_voltage(raw) -> complex:
    if raw is None:
        return 1.0 + 0.0j
    if not isinstance(raw, dict):
        raise FeederParseError("slack_voltage must be a mapping")
    if "re" in raw or "im" in raw:
        return complex(
            _number(raw.get("re"), "slack_voltage", "re"),
            _number(raw.get("im", 0.0), "slack_voltage", "im"),
        )
    mag = _number(raw.get("magnitude", 1.0), "slack_voltage", "magnitude")
    ang = _number(raw.get("angle_rad", 0.0), "slack_voltage", "angle_rad")
    return mag * cmath.exp(-1j * ang) if ang else complex(mag, 0.0)


def parse_feeder(text: str) -> RadialFeeder:
    """Parse and validate feeder file contents.

    Raises:
        FeederParseError: naming the offending record on any problem.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FeederParseError(f"not a valid feeder document: {exc}") from None
    if not isinstance(doc, dict):
        raise FeederParseError("feeder document must be a mapping")
    if not isinstance(doc.get("buses"), list):
        raise FeederParseError("missing 'buses' list")

    buses = []
    for k, rec in enumerate(doc["buses"]):
        where = f"buses[{k}]"
        if not isinstance(rec, dict):
            raise FeederParseError(f"{where}: record must be a mapping")
        if "id" not in rec:
            raise FeederParseError(f"{where}: missing field 'id'")
        bus_id = rec["id"]
        if isinstance(bus_id, bool) or not isinstance(bus_id, int):
            raise FeederParseError(f"{where}: id must be an integer")
        where = f"buses[{k}] (id={bus_id})"
        if "parent" not in rec:
            raise FeederParseError(f"{where}: missing field 'parent'")
        parent = rec["parent"]
        if parent is not None and (isinstance(parent, bool) or not isinstance(parent, int)):
            raise FeederParseError(f"{where}: parent must be an integer or null")
        unknown = set(rec) - {"id", "parent", *BUS_FIELDS}
        if unknown:
            raise FeederParseError(f"{where}: unknown field(s) {sorted(unknown)}")
        values = {}
        for name in BUS_FIELDS:
            if name not in rec:
                if parent is None:
                    values[name] = 0.0
                    continue
                raise FeederParseError(f"{where}: missing field {name!r}")
            values[name] = _number(rec[name], where, name)
        buses.append(
            Bus(
                id=bus_id,
                parent=parent,
                p_load=values["p_load"],
                q_load=values["q_load"],
                p_gen=values["p_gen"],
                q_max=values["q_max"],
                branch_r=values["r"],
                branch_x=values["x"],
            )
        )

    base_mva = _number(doc.get("base_mva", 1.0), "header", "base_mva")
    base_kv = _number(doc.get("base_kv", 1.0), "header", "base_kv")
    try:
        return validate_feeder(buses, _slack_voltage(doc.get("slack_voltage")), base_mva, base_kv)
    except FeederError as exc:
        raise FeederParseError(f"invalid feeder: {exc}") from None
    except ValueError as exc:
        raise FeederParseError(str(exc)) from None


def load_feeder(path: str | Path) -> RadialFeeder:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FeederParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_feeder(text)


def dump_feeder(feeder: RadialFeeder) -> str:
    """Serialize a feeder so that :func:`parse_feeder` restores it exactly."""
    records = []
    for bus in feeder.buses:
        rec = {"id": bus.id, "parent": bus.parent}
        if not bus.is_slack:
            rec.update(
                r=bus.branch_r,
                x=bus.branch_x,
                p_load=bus.p_load,
                q_load=bus.q_load,
                p_gen=bus.p_gen,
                q_max=bus.q_max,
            )
        records.append(rec)
    doc = {
        "base_mva": feeder.base_mva,
        "base_kv": feeder.base_kv,
        "slack_voltage": {
            "re": feeder.slack_voltage.real,
            "im": feeder.slack_voltage.imag,
        },
        "buses": records,
    }
    body = yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
    return HEADER + body
