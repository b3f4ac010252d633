"""Deterministic amplitude bookkeeping for the loop-and-switch memory.

The device stores a polarization qubit by circulating it through an
out-and-back fiber delay line behind a Pockels-cell switch placed in a
polarizing Sagnac loop, fronted by a non-reciprocal circulator zone.  One
storage cycle takes ``delta_tau``.  Three deliberate bit flips act on the
photon: the circulator flips on the way in (forward only), the switch flips
whenever its cell is driven, and the delay line flips once per round trip
when ``x_dl_enabled``.

The simulation is exact amplitude propagation, not sampling.  The wavepacket
is treated as point-like, so the drive level is evaluated at each passage
instant and distinct passages never interfere.  Per switch passage the Sagnac
splits the state into a crossing branch (diagonal part of the intra-loop
operator) and a returning branch (a pure bit flip scaled by the off-diagonal
element; counter-propagation makes any reciprocal intra-loop optics act as an
exact flip on this branch).  Light returning to the circulator side is routed
to the output port, so switching errors surface as early or late exit events
rather than polarization errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .components import (
    CIRCULATOR_ARM,
    COUPLER,
    FIBER_SEGMENT,
    FORWARD,
    FPC,
    OFF,
    ON,
    POCKELS_CELL,
    RETROREFLECTOR,
    REVERSE,
    ComponentSpec,
    DriveSchedule,
    circulator_operator,
    fiber_transmission,
    pockels_level,
)
from .errors import GainError, InvalidStateError, UnschedulableError
from .polarization import DensityMatrix, PureState

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_RESIDUAL_CUTOFF = 1e-16
_EXTRA_PASSES = 512


@dataclass(frozen=True)
class TransmissionParams:
    """End-to-end intensity transmissions of the measured path segments.

    g13: input to output with the storage line never entered (pass-through).
    g12: input through the first full delay round trip.
    g22: one additional storage cycle (switch passage + round trip).
    g23: final switch passage and release to the output.
    """

    g13: float
    g12: float
    g22: float
    g23: float

    def __post_init__(self):
        for name in ("g13", "g12", "g22", "g23"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise GainError(f"{name} = {v} outside [0, 1]")


def efficiency(params: TransmissionParams, n: int) -> float:
    """Closed-form retrieval efficiency after n storage cycles.

    n = 0 is the pass-through value g13; for n >= 1 the efficiency is
    g12 * g22**(n-1) * g23.
    """
    if not isinstance(n, (int, np.integer)):
        raise TypeError(f"cycle count must be an integer, got {type(n).__name__}")
    if n < 0:
        raise ValueError(f"cycle count must be >= 0, got {n}")
    if n == 0:
        return params.g13
    return params.g12 * params.g22 ** (n - 1) * params.g23


@dataclass(frozen=True)
class PathTrace:
    """Mirror-level traversal lists for the two polarization components."""

    h_path: tuple[str, ...]
    v_path: tuple[str, ...]


_M_SWAP = {"M1": "M4", "M4": "M1", "M2": "M3", "M3": "M2", "storage": "storage"}


def f8_path_trace(n: int) -> PathTrace:
    """Common-path figure-eight traversal for n storage cycles.

    The H component enters via mirror M4 and leaves via M1; the V component
    takes the same elements in reverse order with M1/M4 and M2/M3 exchanged.
    """
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise ValueError(f"cycle count must be a non-negative integer, got {n!r}")
    h = ("M4",) + ("M2", "M3", "storage") * n + ("M2", "M3", "M1")
    v = tuple(_M_SWAP[lbl] for lbl in h)
    return PathTrace(h_path=h, v_path=v)


def _default_circulator() -> tuple[ComponentSpec, ...]:
    return (ComponentSpec(CIRCULATOR_ARM),)

def _default_switch() -> tuple[ComponentSpec, ...]:
    return (ComponentSpec(POCKELS_CELL),)

def _default_delay() -> tuple[ComponentSpec, ...]:
    return (
        ComponentSpec(FIBER_SEGMENT, length_m=0.5, atten_db_per_km=0.0),
        ComponentSpec(RETROREFLECTOR),
        ComponentSpec(FPC),
    )


@dataclass(frozen=True)
class MemoryConfig:
    """Full device description: timing, drive hardware, and optics per zone.

    Times are in nanoseconds.  The herald fires at t = 0; the photon reaches
    the input port at ``delay_line_compensation`` and the switch half a
    pass-through later.  ``zone_params`` (when set) replaces every component
    transmission with lumped per-segment scalars that reproduce the given
    measured transmissions exactly; polarization behavior (rotation errors,
    static phases, the delay-line flip) still follows the component specs.
    """

    delta_tau: float
    pass_through_time: float = 10.7
    pc_rise_time: float = 10.0
    herald_latency: float = 240.0
    delay_line_compensation: float = 495.0
    coincidence_window: float = 4.0
    x_dl_enabled: bool = True
    input_coupler: ComponentSpec = ComponentSpec(COUPLER)
    output_coupler: ComponentSpec = ComponentSpec(COUPLER)
    loop_coupler: ComponentSpec = ComponentSpec(COUPLER)
    circulator_zone: tuple[ComponentSpec, ...] = field(default_factory=_default_circulator)
    switch_zone: tuple[ComponentSpec, ...] = field(default_factory=_default_switch)
    delay_zone: tuple[ComponentSpec, ...] = field(default_factory=_default_delay)
    zone_params: TransmissionParams | None = None

    def __post_init__(self):
        if self.delta_tau <= 0:
            raise InvalidStateError(f"delta_tau must be positive, got {self.delta_tau}")
        if self.pass_through_time <= 0:
            raise InvalidStateError("pass_through_time must be positive")
        if self.coincidence_window <= 0 or self.coincidence_window >= self.delta_tau:
            raise InvalidStateError(
                "coincidence_window must lie in (0, delta_tau) so exits are separable"
            )
        if self.pc_rise_time < 0 or self.herald_latency < 0 or self.delay_line_compensation < 0:
            raise InvalidStateError("timing fields must be non-negative")
        for zone, kind, want in (
            (self.circulator_zone, CIRCULATOR_ARM, 1),
            (self.switch_zone, POCKELS_CELL, 1),
        ):
            have = sum(1 for c in zone if c.kind == kind)
            if have != want:
                raise InvalidStateError(f"expected exactly {want} {kind} in zone, found {have}")
        if sum(1 for c in self.delay_zone if c.kind == FPC) > 1:
            raise InvalidStateError("at most one FPC in the delay zone")
        if self.zone_params is not None:
            p = self.zone_params
            if p.g22 <= 0 or p.g23 <= 0 or p.g12 <= 0:
                raise InvalidStateError("zone_params transmissions must be positive")
            if p.g12 > p.g22 + 1e-12:
                raise GainError("g12 > g22 implies an amplifying entry segment")
            if p.g13 * p.g22 > p.g12 * p.g23 + 1e-12:
                raise GainError("g13*g22 > g12*g23 implies an amplifying pass-through")

    @classmethod
    def from_params(cls, params: TransmissionParams, delta_tau: float, **kwargs) -> "MemoryConfig":
        """Configuration whose simulated efficiencies equal the given params exactly."""
        return cls(delta_tau=delta_tau, zone_params=params, **kwargs)

    def pockels_spec(self) -> ComponentSpec:
        return next(c for c in self.switch_zone if c.kind == POCKELS_CELL)

    def circulator_spec(self) -> ComponentSpec:
        return next(c for c in self.circulator_zone if c.kind == CIRCULATOR_ARM)

    def fpc_spec(self) -> ComponentSpec | None:
        return next((c for c in self.delay_zone if c.kind == FPC), None)


def switch_schedule(n: int, cfg: MemoryConfig) -> DriveSchedule:
    """Drive timing for n storage cycles.

    n = 0 arms the cell before the photon arrives and leaves it on; n = 1
    never drives it; n >= 2 ramps on between the first and second passages
    and off between the last reflection and the release passage, each ramp
    centered in its inter-passage window.
    """
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise ValueError(f"cycle count must be a non-negative integer, got {n!r}")
    rise = cfg.pc_rise_time
    dt = cfg.delta_tau
    t1 = cfg.delay_line_compensation + cfg.pass_through_time / 2.0
    margin = cfg.coincidence_window / 2.0
    if n == 0:
        t_on = cfg.herald_latency
        if t_on + rise > t1 - margin:
            raise UnschedulableError(
                f"cell cannot be armed by the passage at {t1} ns "
                f"(latency {cfg.herald_latency} + rise {rise})"
            )
        return DriveSchedule(transitions=((t_on, ON),), rise_time=rise, initial_level=OFF)
    if n == 1:
        return DriveSchedule(transitions=(), rise_time=rise, initial_level=OFF)
    if rise >= dt - cfg.coincidence_window:
        raise UnschedulableError(
            f"rise_time {rise} ns does not fit between passages {dt} ns apart "
            f"with a {cfg.coincidence_window} ns gate"
        )
    on_start = t1 + dt / 2.0 - rise / 2.0
    off_start = t1 + (n - 1) * dt + dt / 2.0 - rise / 2.0
    if on_start < cfg.herald_latency:
        raise UnschedulableError(
            f"first ramp at {on_start} ns precedes the drive latency {cfg.herald_latency} ns"
        )
    return DriveSchedule(
        transitions=((on_start, ON), (off_start, OFF)), rise_time=rise, initial_level=OFF
    )


@dataclass(frozen=True)
class ExitEvent:
    """Photon leaving at the output port: arrival time and (lossy) state."""

    time: float
    state: DensityMatrix

    @property
    def weight(self) -> float:
        return self.state.weight


@dataclass(frozen=True)
class StorageOutcome:
    """Complete account of one storage attempt.

    exits are output-port events in time order; ejections are (time, weight)
    pairs lost at non-output ports; absorbed collects absorptive loss.
    retrieved is the exit inside the nominal retrieval gate.  Exit weights,
    ejections and absorbed sum to 1.
    """

    n_cycles: int
    input_state: PureState
    exits: tuple[ExitEvent, ...]
    ejections: tuple[tuple[float, float], ...]
    absorbed: float
    retrieved: ExitEvent
    schedule: DriveSchedule

    @property
    def retrieved_weight(self) -> float:
        return self.retrieved.weight

    def weight_balance(self) -> float:
        """Total accounted probability; 1 up to float rounding."""
        tot = sum(e.weight for e in self.exits) + self.absorbed
        tot += sum(w for _, w in self.ejections)
        return tot


class _Plumbing:
    """Operators and loss attribution precomputed from a MemoryConfig."""

    def __init__(self, cfg: MemoryConfig):
        self.cfg = cfg
        circ = cfg.circulator_spec()
        # geometric (unit-transmission) circulator cores keep the arm phase
        unit_circ = replace(circ, transmission=(1.0, 1.0))
        fwd_core = circulator_operator(FORWARD, unit_circ).matrix
        rev_core = circulator_operator(REVERSE, unit_circ).matrix

        fpc = cfg.fpc_spec()
        eps_f = fpc.rotation_error if fpc is not None else 0.0
        if cfg.x_dl_enabled:
            th = math.pi / 2.0 + eps_f
            flip = math.cos(th) * np.eye(2) - 1j * math.sin(th) * _X
        else:
            flip = np.eye(2, dtype=complex)

        fiber_phase = sum(c.static_phase for c in cfg.delay_zone if c.kind == FIBER_SEGMENT)
        one_way = np.diag([1.0, np.exp(1j * fiber_phase)]).astype(complex)

        if cfg.zone_params is not None:
            p = cfg.zone_params
            a_entry = math.sqrt(p.g12 / p.g22)
            a_loop = math.sqrt(p.g22)
            a_exit = math.sqrt(p.g23)
            self.passthrough_amp = math.sqrt(p.g13 * p.g22 / (p.g12 * p.g23))
            self.switch_amp = np.eye(2, dtype=complex)
            self.entry_ej_share = 0.0
            self.exit_ej_share = 0.0
            self.entry_op = a_entry * fwd_core
            self.exit_op = a_exit * rev_core
            self.delay_op = a_loop * (one_way @ flip @ one_way)
            return

        self.passthrough_amp = 1.0

        def amp(spec):
            return np.diag([math.sqrt(spec.transmission[0]), math.sqrt(spec.transmission[1])])

        c1 = amp(cfg.input_coupler)
        c3 = amp(cfg.output_coupler)
        c2 = amp(cfg.loop_coupler)
        circ_amp = amp(circ)
        circ_static = np.eye(2, dtype=complex)
        for c in cfg.circulator_zone:
            if c.kind != CIRCULATOR_ARM:
                circ_amp_other = amp(c)
                circ_static = circ_amp_other @ circ_static
        self.entry_op = circ_amp @ fwd_core @ circ_static @ c1
        self.exit_op = c3 @ circ_static @ circ_amp @ rev_core

        # fraction of each end-zone loss ejected at the circulator (vs absorbed)
        def ej_share(pre_w, arm_w):
            lost = 1.0 - pre_w * arm_w
            return (pre_w * (1.0 - arm_w)) / lost if lost > 1e-15 else 0.0

        w_static = float(np.prod([c.mean_transmission for c in cfg.circulator_zone]))
        w_arm = circ.mean_transmission
        w_static = w_static / w_arm if w_arm > 0 else w_static
        self.entry_ej_share = ej_share(cfg.input_coupler.mean_transmission * w_static, w_arm)
        self.exit_ej_share = ej_share(w_static * cfg.output_coupler.mean_transmission, w_arm)

        sw = np.eye(2, dtype=complex)
        for c in cfg.switch_zone:
            if c.kind != POCKELS_CELL:
                sw = amp(c) @ sw
        self.switch_amp = sw

        d = np.eye(2, dtype=complex)
        for c in cfg.delay_zone:
            if c.kind == FIBER_SEGMENT:
                d = math.sqrt(fiber_transmission(c.length_m, c.atten_db_per_km, round_trip=True)) * d
            elif c.kind == FPC:
                d = math.sqrt(c.mean_transmission) * d
            else:
                d = amp(c) @ d
        self.delay_op = c2 @ one_way @ (d @ flip) @ one_way @ c2


def _switch_branches(plumb: _Plumbing, schedule: DriveSchedule, t: float):
    """Crossing and returning branch operators at passage time t."""
    cfg = plumb.cfg
    pc = cfg.pockels_spec()
    level = pockels_level(schedule, t)
    theta = level * (math.pi / 2.0 + pc.rotation_error)
    j = math.cos(theta) * np.eye(2) - 1j * math.sin(theta) * _X
    if cfg.zone_params is None:
        j = np.diag([math.sqrt(pc.transmission[0]), math.sqrt(pc.transmission[1])]) @ j
    if pc.static_phase != 0.0:
        j = np.diag([1.0, np.exp(1j * pc.static_phase)]) @ j
    j = plumb.switch_amp @ j
    cross = np.diag(np.diag(j))
    return cross, j[1, 0] * _X, j[0, 1] * _X  # cross, return-from-circ, return-from-delay


def simulate_storage(cfg: MemoryConfig, input_state: PureState, n: int, *,
                     t_in: float | None = None) -> StorageOutcome:
    """Propagate one heralded photon through n storage cycles.

    Returns every output-port exit (the scheduled retrieval plus any early or
    late leakage), ejections and absorption, with total weight 1.  Raises
    UnschedulableError when the drive cannot realize the requested n.
    """
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise ValueError(f"cycle count must be a non-negative integer, got {n!r}")
    schedule = switch_schedule(n, cfg)
    plumb = _Plumbing(cfg)
    if t_in is None:
        t_in = cfg.delay_line_compensation
    t_half = cfg.pass_through_time / 2.0
    t1 = t_in + t_half

    exits: list[ExitEvent] = []
    ejections: list[tuple[float, float]] = []
    absorbed = 0.0

    v = plumb.entry_op @ input_state.vector()
    lost = 1.0 - float(np.vdot(v, v).real)
    if lost > 0:
        ej = lost * plumb.entry_ej_share
        if ej > 0:
            ejections.append((t_in, ej))
        absorbed += lost - ej

    t_nominal = t_in + cfg.pass_through_time + n * cfg.delta_tau
    gate = cfg.coincidence_window / 2.0
    retrieved = None
    side_circ = True
    k = 1
    max_k = n + 1 + _EXTRA_PASSES
    while k <= max_k:
        t_k = t1 + (k - 1) * cfg.delta_tau
        w_in = float(np.vdot(v, v).real)
        if w_in <= _RESIDUAL_CUTOFF and retrieved is not None:
            absorbed += w_in
            break
        cross, ret_circ, ret_delay = _switch_branches(plumb, schedule, t_k)
        if side_circ:
            to_delay = cross @ v
            to_out = (plumb.passthrough_amp * ret_circ) @ v
        else:
            to_out = cross @ v
            to_delay = ret_delay @ v
        w_out = float(np.vdot(to_out, to_out).real)
        w_stay = float(np.vdot(to_delay, to_delay).real)
        absorbed += max(w_in - w_out - w_stay, 0.0)

        t_exit = t_k + t_half
        released = plumb.exit_op @ to_out
        w_rel = float(np.vdot(released, released).real)
        lost = w_out - w_rel
        if lost > 0:
            ej = lost * plumb.exit_ej_share
            if ej > 0:
                ejections.append((t_exit, ej))
            absorbed += lost - ej
        in_gate = abs(t_exit - t_nominal) <= gate
        if w_rel > _RESIDUAL_CUTOFF or in_gate:
            event = ExitEvent(time=t_exit, state=DensityMatrix(np.outer(released, released.conj())))
            exits.append(event)
            if in_gate:
                retrieved = event

        v = plumb.delay_op @ to_delay
        w_next = float(np.vdot(v, v).real)
        absorbed += max(w_stay - w_next, 0.0)
        side_circ = False
        k += 1
    else:
        absorbed += float(np.vdot(v, v).real)

    if retrieved is None:
        raise InvalidStateError("no exit event fell inside the retrieval gate")
    outcome = StorageOutcome(
        n_cycles=int(n),
        input_state=input_state,
        exits=tuple(exits),
        ejections=tuple(ejections),
        absorbed=absorbed,
        retrieved=retrieved,
        schedule=schedule,
    )
    balance = outcome.weight_balance()
    if abs(balance - 1.0) > 1e-9:
        raise InvalidStateError(f"probability not conserved: accounted {balance}")
    return outcome


def derive_transmission_params(cfg: MemoryConfig) -> TransmissionParams:
    """Segment transmissions implied by the configuration.

    With lumped zone_params these are returned as stored.  Otherwise they are
    products of component mean transmissions: the entry segment covers the
    input coupler, circulator, one switch passage and one full round trip; the
    per-cycle segment covers one switch passage and one round trip; the
    release segment one switch passage, the reverse circulator and the output
    coupler.  Polarization-dependent losses enter through their H/V mean.
    """
    if cfg.zone_params is not None:
        return cfg.zone_params
    t_circ = float(np.prod([c.mean_transmission for c in cfg.circulator_zone]))
    t_switch = float(np.prod([c.mean_transmission for c in cfg.switch_zone]))
    t_loop = cfg.loop_coupler.mean_transmission ** 2
    for c in cfg.delay_zone:
        if c.kind == FIBER_SEGMENT:
            t_loop *= fiber_transmission(c.length_m, c.atten_db_per_km, round_trip=True)
        else:
            t_loop *= c.mean_transmission
    c1 = cfg.input_coupler.mean_transmission
    c3 = cfg.output_coupler.mean_transmission
    f = c1 * t_circ
    r = t_circ * c3
    return TransmissionParams(
        g13=f * t_switch * r,
        g12=f * t_switch * t_loop,
        g22=t_switch * t_loop,
        g23=t_switch * r,
    )
