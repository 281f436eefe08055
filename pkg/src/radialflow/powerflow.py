"""Backward-forward sweep power flow for radial feeders.

The sweep kernels (:func:`sweep_branch_currents`, :func:`forward_voltage_update`)
operate on complex arrays whose last axis is indexed by bus id, so the same
code serves a single solve and a batch of setpoint profiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .feeder import (
    Bus,
    RadialFeeder,
    SetpointOutOfRange,
    SetpointProfile,
    validate_profile,
)


class ZeroVoltage(ArithmeticError):
    pass


class Diverged(RuntimeError):
    def __init__(self, iterations: int, detail: str = ""):
        self.iterations = iterations
        msg = f"power flow diverged after {iterations} iterations"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-10
    max_iterations: int = 100

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance!r}")
        if self.max_iterations < 1:
            raise ValueError(
                f"max_iterations must be >= 1, got {self.max_iterations!r}"
            )


@dataclass(frozen=True, eq=False)
class SolvedState:
    """Converged power-flow solution; arrays are indexed by bus id.

    ``branch_currents[k]`` is the current on the branch feeding bus ``k``
    (zero at the slack). ``residuals`` holds the max voltage update of every
    iteration, the last entry being ``residual``.
    """

    voltages: np.ndarray
    nodal_currents: np.ndarray
    branch_currents: np.ndarray
    total_loss: float
    iterations: int
    residual: float
    residuals: tuple[float, ...]
    slack_current: complex

    @property
    def v_mag(self) -> np.ndarray:
        return np.abs(self.voltages)

    @property
    def angle(self) -> np.ndarray:
        # V = |V| exp(-j*phi); + 0.0 turns -0.0 into 0.0
        return -np.angle(self.voltages) + 0.0

    @property
    def slack_power(self) -> complex:
        return complex(self.voltages[0] * np.conj(self.slack_current))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SolvedState):
            return NotImplemented
        return (
            np.array_equal(self.voltages, other.voltages)
            and np.array_equal(self.nodal_currents, other.nodal_currents)
            and np.array_equal(self.branch_currents, other.branch_currents)
            and self.total_loss == other.total_loss
            and self.iterations == other.iterations
            and self.residuals == other.residuals
        )


def nodal_injection(bus: Bus, q_gen: float = 0.0) -> complex:
    """Complex power withdrawn at ``bus``: (P_load - P_gen) + j(Q_load - Q_gen)."""
    if not (0.0 <= q_gen <= bus.q_max):
        raise SetpointOutOfRange(bus.id, q_gen, bus.q_max)
    return complex(bus.p_load - bus.p_gen, bus.q_load - q_gen)


def injections(feeder: RadialFeeder, setpoints: SetpointProfile) -> np.ndarray:
    s = np.zeros(feeder.n_bus, dtype=complex)
    for bus in feeder.buses:
        if not bus.is_slack:
            s[bus.id] = nodal_injection(bus, setpoints.get(bus.id, 0.0))
    return s


def nodal_current(injection, voltage):
    """Current drawn by a constant-power injection: conj(S / V)."""
    voltage = np.asarray(voltage)
    if np.any(voltage == 0):
        raise ZeroVoltage("nodal current undefined at zero voltage")
    out = np.conj(np.asarray(injection) / voltage)
    return complex(out) if out.ndim == 0 else out


def sweep_branch_currents(nodal_currents: np.ndarray, feeder: RadialFeeder) -> np.ndarray:
    """Backward sweep: each branch carries its bus current plus all downstream branches."""
    ibr = np.array(nodal_currents, dtype=complex, copy=True)
    for k in reversed(feeder.order):
        parent = feeder.buses[k].parent
        if parent is not None:
            ibr[..., parent] += ibr[..., k]
    ibr[..., feeder.slack] = 0.0
    return ibr


def forward_voltage_update(
    branch_currents: np.ndarray,
    feeder: RadialFeeder,
    slack_voltage: complex | None = None,
) -> np.ndarray:
    """Forward sweep: V_child = V_parent - z_branch * I_branch, root to leaves."""
    if slack_voltage is None:
        slack_voltage = feeder.slack_voltage
    ibr = np.asarray(branch_currents)
    v = np.empty_like(ibr, dtype=complex)
    v[..., feeder.slack] = slack_voltage
    for k in feeder.order:
        bus = feeder.buses[k]
        if bus.parent is not None:
            v[..., k] = v[..., bus.parent] - bus.branch_z * ibr[..., k]
    return v


def _slack_current(branch_currents: np.ndarray, feeder: RadialFeeder):
    kids = list(feeder.children[feeder.slack])
    return branch_currents[..., kids].sum(axis=-1)


def total_losses(branch_currents: np.ndarray, feeder: RadialFeeder):
    """Active loss summed over branches, r * |I_branch|^2."""
    r = np.array([b.branch_r for b in feeder.buses])
    ibr = np.asarray(branch_currents)
    return (r * (ibr.real**2 + ibr.imag**2)).sum(axis=-1)


def balance_loss(state: SolvedState, feeder: RadialFeeder) -> float:
    """Loss implied by power balance: slack active supply + generation - load."""
    p_net = sum(b.p_gen - b.p_load for b in feeder.buses if not b.is_slack)
    return state.slack_power.real + p_net


def solve(
    feeder: RadialFeeder,
    setpoints: SetpointProfile | None = None,
    config: SolverConfig | None = None,
) -> SolvedState:
    """Solve the feeder by backward-forward sweep from a flat start.

    Raises:
        Diverged: iteration limit reached or the iterate collapsed.
    """
    config = config or SolverConfig()
    if setpoints is None:
        setpoints = SetpointProfile({i: 0.0 for i in feeder.controllable})
    validate_profile(feeder, setpoints)
    s = injections(feeder, setpoints)

    v = np.full(feeder.n_bus, feeder.slack_voltage, dtype=complex)
    residuals: list[float] = []
    with np.errstate(all="ignore"):
        for it in range(1, config.max_iterations + 1):
            try:
                current = nodal_current(s, v)
            except ZeroVoltage as exc:
                raise Diverged(it - 1, str(exc)) from None
            v_new = forward_voltage_update(
                sweep_branch_currents(current, feeder), feeder
            )
            residual = float(np.max(np.abs(v_new - v)))
            v = v_new
            residuals.append(residual)
            if not np.isfinite(residual):
                raise Diverged(it, "non-finite iterate")
            if residual <= config.tolerance:
                break
        else:
            raise Diverged(config.max_iterations, f"residual {residuals[-1]:.3e}")

        try:
            current = nodal_current(s, v)
        except ZeroVoltage as exc:
            raise Diverged(it, str(exc)) from None
    ibr = sweep_branch_currents(current, feeder)
    return SolvedState(
        voltages=v,
        nodal_currents=current,
        branch_currents=ibr,
        total_loss=float(total_losses(ibr, feeder)),
        iterations=it,
        residual=residuals[-1],
        residuals=tuple(residuals),
        slack_current=complex(_slack_current(ibr, feeder)),
    )


@dataclass(frozen=True)
class BatchResult:
    losses: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    v_mag: np.ndarray


def solve_batch(
    feeder: RadialFeeder,
    q_gen: np.ndarray,
    config: SolverConfig | None = None,
) -> BatchResult:
    """Solve many setpoint profiles at once.

    ``q_gen`` has shape (k, n_controllable) with columns in the order of
    ``feeder.controllable``. Each row iterates exactly like :func:`solve`
    and stops on its own; rows that do not converge are flagged instead of
    raising, and their loss is NaN.
    """
    config = config or SolverConfig()
    q_gen = np.atleast_2d(np.asarray(q_gen, dtype=float))
    ctrl = list(feeder.controllable)
    if q_gen.shape[1] != len(ctrl):
        raise ValueError(
            f"expected {len(ctrl)} setpoint columns, got {q_gen.shape[1]}"
        )
    q_max = np.array([feeder.buses[i].q_max for i in ctrl])
    bad = ~((q_gen >= 0) & (q_gen <= q_max))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise SetpointOutOfRange(ctrl[col], float(q_gen[row, col]), float(q_max[col]))

    k = q_gen.shape[0]
    base = injections(feeder, SetpointProfile({i: 0.0 for i in ctrl}))
    s = np.tile(base, (k, 1))
    s[:, ctrl] -= 1j * q_gen

    v = np.full((k, feeder.n_bus), feeder.slack_voltage, dtype=complex)
    iterations = np.zeros(k, dtype=int)
    converged = np.zeros(k, dtype=bool)
    active = np.arange(k)
    with np.errstate(all="ignore"):
        for it in range(1, config.max_iterations + 1):
            if active.size == 0:
                break
            va = v[active]
            current = np.conj(s[active] / va)
            v_new = forward_voltage_update(sweep_branch_currents(current, feeder), feeder)
            residual = np.max(np.abs(v_new - va), axis=1)
            v[active] = v_new
            iterations[active] = it
            finite = np.isfinite(residual)
            done = finite & (residual <= config.tolerance)
            converged[active[done]] = True
            active = active[finite & ~done]

        current = np.conj(s / v)
        ibr = sweep_branch_currents(current, feeder)
        losses = total_losses(ibr, feeder)
    losses = np.where(converged, losses, np.nan)
    return BatchResult(
        losses=losses, converged=converged, iterations=iterations, v_mag=np.abs(v)
    )
