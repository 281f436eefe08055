from __future__ import annotations

import pytest

from radialflow.feeder import Bus, validate_feeder


def chain(*branches, slack_voltage=1.0 + 0.0j):
    """Chain feeder 0 -> 1 -> 2 ...; each branch is a dict of Bus keyword args."""
    buses = [Bus(0, None)]
    for k, kw in enumerate(branches, start=1):
        buses.append(Bus(k, k - 1, **kw))
    return validate_feeder(buses, slack_voltage)


@pytest.fixture
def write_feeder(tmp_path):
    def _write(text: str, name: str = "feeder.yaml"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return _write


TWO_BUS_YAML = """\
# per-unit on base_mva / base_kv
base_mva: 1.0
base_kv: 12.47
slack_voltage: {magnitude: 1.0, angle_rad: 0.0}
buses:
  - {id: 0, parent: null}
  - {id: 1, parent: 0, r: 0.01, x: 0.01, p_load: 0.1, q_load: 0.05, p_gen: 0.0, q_max: 0.0}
"""
